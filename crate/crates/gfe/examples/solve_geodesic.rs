//! Minimize the harmonic energy of a curve into the sphere with fixed
//! endpoints. One-dimensional harmonic maps are geodesics, and the discrete
//! space contains them, so the solver recovers the geodesic exactly.

use std::sync::Arc;

use gfe::interpolation::GfeFunction;
use gfe::manifold::sampling::random_point_near;
use gfe::manifold::{ManifoldKind, ManifoldPoint, TangentVector};
use gfe::mesh::{build_uniform_mesh, Domain};
use gfe::solver::{solve, SolverConfig};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let s2 = ManifoldKind::Sphere2;
    let mesh = Arc::new(build_uniform_mesh(Domain::unit_interval(), 8, 1).unwrap());
    let p = ManifoldPoint::from_slice(&[1.0, 0.0, 0.0]);
    let dir = DVector::from_row_slice(&[0.0, 1.0, 0.0]);
    let geodesic = |t: f64| s2.exp(&p, &TangentVector::new(p.clone(), &dir * t));

    // start from the geodesic's nodal values, wobbled in the interior
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let nodal = mesh
        .nodes
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let exact = geodesic(x[0]);
            if mesh.is_boundary_node(i) {
                exact
            } else {
                random_point_near(s2, &mut rng, &exact, 0.08)
            }
        })
        .collect();
    let u0 = GfeFunction::new(mesh.clone(), s2, nodal).unwrap();

    let (u, report) = solve(&u0, &mesh.boundary_nodes, &SolverConfig::default()).unwrap();
    println!(
        "converged = {} after {} iterations, |grad| = {:.2e}",
        report.converged, report.iterations, report.grad_norm
    );
    println!(
        "energy: {:.10} -> {:.10} (exact geodesic: {:.10})",
        report.energy_trajectory.first().unwrap(),
        report.energy_trajectory.last().unwrap(),
        0.5
    );

    let worst = mesh
        .nodes
        .iter()
        .enumerate()
        .map(|(i, x)| s2.dist(&u.nodal_values[i], &geodesic(x[0])))
        .fold(0.0f64, f64::max);
    println!("worst nodal distance to the geodesic = {worst:.2e}");
}
