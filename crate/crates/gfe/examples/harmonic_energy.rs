//! Harmonic energy of a sphere-valued function, its Riemannian nodal
//! gradient, and the second variation along test fields.

use std::sync::Arc;

use gfe::bench::random_test_field;
use gfe::energy::{energy_gradient, harmonic_energy, second_variation_parts};
use gfe::interpolation::GfeFunction;
use gfe::manifold::{ManifoldKind, ManifoldPoint, TangentVector};
use gfe::mesh::{build_uniform_mesh, quadrature_for, Domain};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let s2 = ManifoldKind::Sphere2;
    let mesh = Arc::new(build_uniform_mesh(Domain::unit_square(), 6, 1).unwrap());
    let north = ManifoldPoint::from_slice(&[0.0, 0.0, 1.0]);
    let u = GfeFunction::interpolate_map(mesh.clone(), s2, |x| {
        let v = DVector::from_row_slice(&[0.5 * x[0] - 0.2, 0.4 * x[1], 0.0]);
        let v = s2.project_tangent(&north, &v);
        s2.exp(&north, &TangentVector::new(north.clone(), v))
    })
    .unwrap();

    let quad = quadrature_for(2, 4).unwrap();
    let energy = harmonic_energy(&u, &quad).unwrap();
    println!("harmonic energy   = {:.10}", energy.total);
    println!(
        "per-element range = [{:.3e}, {:.3e}]",
        energy
            .per_element
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min),
        energy.per_element.iter().cloned().fold(0.0, f64::max),
    );

    let free = mesh.free_nodes();
    let grad = energy_gradient(&u, &quad, &free).unwrap();
    println!(
        "gradient norm     = {:.6e} over {} free nodes",
        grad.norm(&u),
        free.len()
    );

    // second variation along a random boundary-vanishing field: on the
    // sphere the curvature term is nonpositive for V = W
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v = random_test_field(&u, &mut rng, 1.0);
    let (flat, curvature) = second_variation_parts(&u, &v, &v, &quad).unwrap();
    println!(
        "second variation  = {:.6} (gradient part {flat:.6}, curvature part {curvature:.6})",
        flat + curvature
    );
}
