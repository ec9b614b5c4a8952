//! A sphere-valued finite element function on a triangulated square:
//! pointwise evaluation, spatial derivatives, and interpolation of a
//! tangent vector field along it.

use std::sync::Arc;

use gfe::interpolation::{interpolate_vector_field, GfeFunction, GfeVectorField};
use gfe::manifold::sampling::random_tangent;
use gfe::manifold::{ManifoldKind, ManifoldPoint, TangentVector};
use gfe::mesh::{build_uniform_mesh, Domain};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let s2 = ManifoldKind::Sphere2;
    let mesh = Arc::new(build_uniform_mesh(Domain::unit_square(), 4, 2).unwrap());
    println!(
        "mesh: {} triangles, {} Lagrange nodes (order 2), h = {:.4}",
        mesh.num_elements(),
        mesh.num_nodes(),
        mesh.h
    );

    // nodal interpolant of a smooth map into the sphere
    let north = ManifoldPoint::from_slice(&[0.0, 0.0, 1.0]);
    let u = GfeFunction::interpolate_map(mesh.clone(), s2, |x| {
        let v = DVector::from_row_slice(&[
            0.4 * (1.3 * x[0]).sin(),
            0.3 * (0.9 * x[1]).cos() - 0.3,
            0.0,
        ]);
        let v = s2.project_tangent(&north, &v);
        s2.exp(&north, &TangentVector::new(north.clone(), v))
    })
    .unwrap();

    let (value, du) = u.evaluate_jet(11, &[0.3, 0.25]).unwrap();
    println!("u(x)   = {:?}", value.coords.as_slice());
    for (alpha, g) in du.iter().enumerate() {
        println!(
            "d{alpha} u   = {:?} (|.| = {:.4})",
            g.vec.as_slice(),
            s2.norm(g)
        );
    }

    // a random nodal vector field, interpolated along u
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let vectors = u
        .nodal_values
        .iter()
        .map(|p| random_tangent(s2, &mut rng, p, 1.0))
        .collect();
    let field = GfeVectorField::new(u.clone(), vectors);
    let vi = interpolate_vector_field(&field, 11, &[0.3, 0.25]).unwrap();
    println!(
        "interpolated field = {:?} at the same point (tangency {:.1e})",
        vi.vec.as_slice(),
        s2.tangency_residual(&vi)
    );
}
