//! Intrinsic error measures between maps: the L2 distance, the first-order
//! Sobolev half-metric, and smoothness descriptors.

use std::sync::Arc;

use gfe::bench::find_problem;
use gfe::error_metrics::{
    compute_eoc, d12_halfmetric, lp_distance, smoothness_descriptor, ErrorSample,
};
use gfe::interpolation::GfeFunction;
use gfe::mesh::{build_uniform_mesh, quadrature_for};

fn main() {
    let problem = find_problem("p2").unwrap();
    let quad = quadrature_for(2, 6).unwrap();

    let mut samples = Vec::new();
    for k in [4usize, 8, 16] {
        let mesh = Arc::new(build_uniform_mesh(problem.domain, k, 1).unwrap());
        let u_i = GfeFunction::interpolate_map(mesh.clone(), problem.manifold, |x| {
            problem.exact.value_at(x)
        })
        .unwrap();
        let d_l2 = lp_distance(&problem.exact, &u_i, &mesh, &quad, 2.0).unwrap();
        let d_12 = d12_halfmetric(&problem.exact, &u_i, &mesh, &quad).unwrap();
        let theta1 = smoothness_descriptor(&u_i, &mesh, &quad, 1, 2.0).unwrap();
        println!(
            "k = {k:>2}: d_L2 = {d_l2:.4e}  D_12 = {d_12:.4e}  first-order descriptor = {theta1:.6}"
        );
        samples.push(ErrorSample {
            h: mesh.h,
            d_l2,
            d_12,
            energy: 0.0,
        });
    }

    let report = compute_eoc(&samples).unwrap();
    println!("L2 convergence orders:   {:?}", report.eoc_l2);
    println!("D_12 convergence orders: {:?}", report.eoc_d12);
}
