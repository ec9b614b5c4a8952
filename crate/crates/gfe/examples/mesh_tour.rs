//! Mesh construction, refinement, quadrature, and the plain-text export.

use gfe::mesh::{build_uniform_mesh, quadrature_for, refine, Domain};

fn main() {
    let mesh = build_uniform_mesh(Domain::unit_square(), 2, 1).unwrap();
    println!(
        "unit square, k = 2: {} triangles, {} vertices, h = {:.6}, shape ratio {:.3}",
        mesh.num_elements(),
        mesh.vertices.len(),
        mesh.h,
        mesh.shape_regularity_ratio()
    );

    let fine = refine(&mesh);
    println!(
        "after refinement:   {} triangles, h = {:.6} (exactly halved: {})",
        fine.num_elements(),
        fine.h,
        (fine.h / mesh.h - 0.5).abs() < 1e-14
    );

    let quad = quadrature_for(2, 4).unwrap();
    println!(
        "degree-4 simplex rule: {} points, weight sum {:.12}",
        quad.len(),
        quad.weights.iter().sum::<f64>()
    );

    println!("\nplain-text export of the coarse mesh:");
    let mut text = Vec::new();
    mesh.export_text(&mut text).unwrap();
    print!("{}", String::from_utf8(text).unwrap());
}
