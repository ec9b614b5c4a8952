//! Solve a two-dimensional harmonic map problem into the sphere on one
//! mesh and compare against its closed-form solution.

use std::sync::Arc;

use gfe::bench::find_problem;
use gfe::error_metrics::{d12_halfmetric, lp_distance};
use gfe::interpolation::GfeFunction;
use gfe::mesh::{build_uniform_mesh, quadrature_for};
use gfe::solver::{check_stationarity, solve, SolverConfig};

fn main() {
    let problem = find_problem("p2").unwrap();
    let mesh = Arc::new(build_uniform_mesh(problem.domain, 12, 1).unwrap());
    println!(
        "{}: {} triangles, h = {:.4}",
        problem.description,
        mesh.num_elements(),
        mesh.h
    );

    // boundary data and initial iterate from the closed form
    let u0 = GfeFunction::interpolate_map(mesh.clone(), problem.manifold, |x| {
        problem.exact.value_at(x)
    })
    .unwrap();

    let (u_h, report) = solve(&u0, &mesh.boundary_nodes, &SolverConfig::default()).unwrap();
    println!(
        "converged = {} after {} iterations, |grad| = {:.2e}",
        report.converged, report.iterations, report.grad_norm
    );

    let quad = quadrature_for(2, 6).unwrap();
    let l2 = lp_distance(&problem.exact, &u_h, &mesh, &quad, 2.0).unwrap();
    let d12 = d12_halfmetric(&problem.exact, &u_h, &mesh, &quad).unwrap();
    println!("d_L2  (u, u_h) = {l2:.6e}");
    println!("D_1,2 (u, u_h) = {d12:.6e}");
    println!(
        "stationarity   = {:.2e}",
        check_stationarity(&u_h, &quad).unwrap()
    );
}
