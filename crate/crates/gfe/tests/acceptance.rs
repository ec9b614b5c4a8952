//! Acceptance suite: one test per gated criterion, each printing a pass
//! line with the measured quantities. Run with
//! `cargo test -p gfe --test acceptance -- --nocapture` to see them.

mod common;

use std::sync::{Arc, OnceLock};
use std::time::Instant;

use common::{grid_search_mean, ClassicalFem};
use gfe::bench::{self, random_test_field, RunConfig};
use gfe::energy::{energy_gradient, harmonic_energy, second_variation_parts};
use gfe::error_metrics::{d12_halfmetric, inverse_estimate_ratio, lp_distance, EocEntry};
use gfe::interpolation::{geodesic_interpolate, GfeFunction};
use gfe::manifold::sampling::{random_point, random_point_near, random_tangent};
use gfe::manifold::{ManifoldKind, ManifoldPoint, TangentVector};
use gfe::mesh::{build_uniform_mesh, quadrature_for, Domain};
use gfe::solver::check_stationarity;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ALL_KINDS: [ManifoldKind; 3] = [
    ManifoldKind::Euclidean(3),
    ManifoldKind::Sphere2,
    ManifoldKind::Hyperbolic2,
];

/// Shared solve results for the rate, exactness, stationarity, and
/// coercivity criteria: each study is run once.
struct SolveSuite {
    p1: bench::BenchOutcome,
    p2_m1: bench::BenchOutcome,
    p2_m2: bench::BenchOutcome,
    p3: bench::BenchOutcome,
}

fn solve_suite() -> &'static SolveSuite {
    static SUITE: OnceLock<SolveSuite> = OnceLock::new();
    SUITE.get_or_init(|| {
        let t = Instant::now();
        let mut p1 = RunConfig::new("p1");
        p1.levels = Some(4);
        let mut p2_m1 = RunConfig::new("p2");
        p2_m1.order = Some(1);
        p2_m1.levels = Some(4);
        let mut p2_m2 = RunConfig::new("p2");
        p2_m2.order = Some(2);
        p2_m2.levels = Some(4);
        let p3 = RunConfig::new("p3");
        let suite = SolveSuite {
            p1: bench::run(&p1).expect("p1 run"),
            p2_m1: bench::run(&p2_m1).expect("p2 order 1 run"),
            p2_m2: bench::run(&p2_m2).expect("p2 order 2 run"),
            p3: bench::run(&RunConfig {
                levels: Some(3),
                ..p3
            })
            .expect("p3 run"),
        };
        println!("[suite] all solve studies finished in {:.1?}", t.elapsed());
        suite
    })
}

fn final_rate(entries: &[EocEntry]) -> f64 {
    entries
        .last()
        .expect("at least one ratio")
        .rate()
        .expect("non-degenerate rate")
}

/// Criterion 1: geometry kernel roundtrips, transport isometry, and the
/// quadratic closeness of the log differentials to their flat limits.
#[test]
fn acceptance_1_geometry_kernel() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for kind in ALL_KINDS {
        for _ in 0..1000 {
            let p = random_point(kind, &mut rng);
            let v = random_tangent(kind, &mut rng, &p, std::f64::consts::FRAC_PI_2);
            let q = kind.exp(&p, &v);
            let w = kind.log(&p, &q).unwrap();
            for i in 0..kind.ambient_dim() {
                assert!(
                    (w.vec[i] - v.vec[i]).abs() <= 1e-9,
                    "{kind:?} roundtrip component error"
                );
            }

            let r = random_point_near(kind, &mut rng, &p, 1.0);
            let tv = kind.parallel_transport(&p, &r, &v).unwrap();
            assert!((kind.norm(&tv) - kind.norm(&v)).abs() <= 1e-12);
        }
    }

    let kind = ManifoldKind::Sphere2;
    for _ in 0..1000 {
        let p = random_point(kind, &mut rng);
        let q = random_point_near(kind, &mut rng, &p, 0.5);
        let d = kind.dist(&p, &q);
        let frame_p = kind.tangent_frame(&p);
        let frame_q = kind.tangent_frame(&q);
        let db = kind.dlog_base(&p, &q).unwrap();
        let dt = kind.dlog_target(&p, &q).unwrap();
        let mut mb = DMatrix::zeros(2, 2);
        let mut mt = DMatrix::zeros(2, 2);
        for (b, (ep, eq)) in frame_p.iter().zip(frame_q.iter()).enumerate() {
            let col_b = &db * ep + ep;
            let transported = kind
                .parallel_transport(&q, &p, &TangentVector::new(q.clone(), eq.clone()))
                .unwrap();
            let col_t = &dt * eq - transported.vec;
            for (a, e) in frame_p.iter().enumerate() {
                mb[(a, b)] = kind.ambient_inner(&col_b, e);
                mt[(a, b)] = kind.ambient_inner(&col_t, e);
            }
        }
        let nb = mb.svd(false, false).singular_values[0];
        let nt = mt.svd(false, false).singular_values[0];
        assert!(nb <= d * d + 1e-8, "|dlog_base + I| = {nb} > {}", d * d);
        assert!(
            nt <= d * d + 1e-8,
            "|dlog_target - transport| = {nt} > {}",
            d * d
        );
    }
    println!(
        "[criterion 1] PASS geometry kernel: 1000-sample roundtrips, isometry, log-derivative bounds ({:.2?})",
        t.elapsed()
    );
}

/// Criterion 2: with a Euclidean target, interpolation, energy, gradient,
/// solve, and the error metrics match an independently assembled classical
/// Lagrange FEM to 1e-10.
#[test]
fn acceptance_2_euclidean_reduction() {
    let t = Instant::now();
    let kind = ManifoldKind::Euclidean(1);
    let exact = |x: &[f64]| x[0] * x[0] - x[1] * x[1];
    let exact_grad = |x: &[f64]| vec![2.0 * x[0], -2.0 * x[1]];

    for order in 1..=2usize {
        let mesh = Arc::new(build_uniform_mesh(Domain::unit_square(), 4, order).unwrap());
        let fem = ClassicalFem::assemble(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(200 + order as u64);

        // random nodal data: interpolation, energy, and gradient
        let nodal = DVector::from_iterator(
            mesh.num_nodes(),
            (0..mesh.num_nodes()).map(|_| rng.random_range(-1.0..1.0)),
        );
        let u = GfeFunction::new(
            mesh.clone(),
            kind,
            nodal
                .iter()
                .map(|v| ManifoldPoint::from_slice(&[*v]))
                .collect(),
        )
        .unwrap();
        let quad = quadrature_for(2, 2 * order + 2).unwrap();

        let re = mesh.reference_element();
        for e in [0, 7, 12] {
            for x in [[0.25, 0.3], [0.6, 0.1]] {
                let (lambda, _) = re.shape_values(&x).unwrap();
                let classical: f64 = mesh.element_nodes[e]
                    .iter()
                    .zip(lambda.iter())
                    .map(|(&i, l)| l * nodal[i])
                    .sum();
                let got = u.evaluate(e, &x).unwrap().coords[0];
                assert!((got - classical).abs() <= 1e-10);
            }
        }

        let energy = harmonic_energy(&u, &quad).unwrap().total;
        assert!((energy - fem.energy(&nodal)).abs() <= 1e-10);

        let free = mesh.free_nodes();
        let grad = energy_gradient(&u, &quad, &free).unwrap();
        let classical_grad = fem.gradient(&nodal, &free);
        for (g, c) in grad.entries.iter().zip(classical_grad.iter()) {
            assert!((g.vec[0] - c).abs() <= 1e-10);
        }

        // Dirichlet solve against the dense direct solution
        let boundary_values =
            DVector::from_iterator(mesh.num_nodes(), mesh.nodes.iter().map(|x| exact(x)));
        let direct = fem.solve_dirichlet(&mesh, &boundary_values);
        let u0 = GfeFunction::new(
            mesh.clone(),
            kind,
            boundary_values
                .iter()
                .map(|v| ManifoldPoint::from_slice(&[*v]))
                .collect(),
        )
        .unwrap();
        let config = gfe::solver::SolverConfig {
            grad_tol: 1e-12,
            ..Default::default()
        };
        let (u_h, report) = gfe::solver::solve(&u0, &mesh.boundary_nodes, &config).unwrap();
        assert!(report.converged);
        for (p, d) in u_h.nodal_values.iter().zip(direct.iter()) {
            assert!((p.coords[0] - d).abs() <= 1e-10);
        }

        // error metrics against the classical quadrature norms
        let exact_map = gfe::error_metrics::AnalyticMap::new(
            kind,
            move |x| ManifoldPoint::from_slice(&[exact(x)]),
            move |x| {
                let p = ManifoldPoint::from_slice(&[exact(x)]);
                let g = exact_grad(x);
                (
                    p.clone(),
                    vec![
                        TangentVector::new(p.clone(), DVector::from_row_slice(&[g[0]])),
                        TangentVector::new(p, DVector::from_row_slice(&[g[1]])),
                    ],
                )
            },
        );
        let (l2_classical, h1_classical) = fem.errors(&mesh, &direct, exact, exact_grad);
        let l2 = lp_distance(&exact_map, &u_h, &mesh, &fem.quad, 2.0).unwrap();
        let h1 = d12_halfmetric(&exact_map, &u_h, &mesh, &fem.quad).unwrap();
        assert!((l2 - l2_classical).abs() <= 1e-10, "L2 mismatch");
        assert!((h1 - h1_classical).abs() <= 1e-10, "H1 mismatch");
    }
    println!(
        "[criterion 2] PASS Euclidean reduction matches classical FEM to 1e-10 ({:.2?})",
        t.elapsed()
    );
}

/// Criterion 3: the Fréchet mean matches a brute-force grid search on 100
/// random sphere instances, with tiny stationarity residuals.
#[test]
fn acceptance_3_frechet_mean_oracle() {
    let t = Instant::now();
    let kind = ManifoldKind::Sphere2;
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let base = random_point(kind, &mut rng);
        let count = rng.random_range(2..=4);
        let values: Vec<ManifoldPoint> = (0..count)
            .map(|_| random_point_near(kind, &mut rng, &base, 0.25))
            .collect();
        let raw: Vec<f64> = (0..count).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / s).collect();

        let q = geodesic_interpolate(kind, &values, &weights).unwrap();
        let oracle = grid_search_mean(kind, &values, &weights);
        let err = kind.dist(&q, &oracle);
        worst = worst.max(err);
        assert!(err <= 1e-3, "grid-search disagreement {err}");

        let mut residual = DVector::zeros(3);
        for (v, w) in values.iter().zip(weights.iter()) {
            residual.axpy(*w, &kind.log(&q, v).unwrap().vec, 1.0);
        }
        assert!(residual.norm() <= 1e-12, "first-order residual");
    }
    println!(
        "[criterion 3] PASS Fréchet mean vs grid search on 100 instances, worst gap {worst:.2e} ({:.2?})",
        t.elapsed()
    );
}

/// Criterion 4: the analytic energy gradient matches central finite
/// differences to 1e-6 relative on 50 random configurations per manifold.
#[test]
fn acceptance_4_gradient_correctness() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    for kind in ALL_KINDS {
        let mut checked = 0;
        while checked < 50 {
            let order = 1 + checked % 2;
            let mesh = Arc::new(build_uniform_mesh(Domain::unit_square(), 2, order).unwrap());
            let base = random_point(kind, &mut rng);
            let u = GfeFunction::new(
                mesh.clone(),
                kind,
                (0..mesh.num_nodes())
                    .map(|_| random_point_near(kind, &mut rng, &base, 0.12))
                    .collect(),
            )
            .unwrap();
            let quad = quadrature_for(2, 2 * order + 2).unwrap();
            let free = mesh.free_nodes();
            let grad = energy_gradient(&u, &quad, &free).unwrap();

            let pick = rng.random_range(0..free.len());
            let node = free[pick];
            let frame = kind.tangent_frame(&u.nodal_values[node]);
            let dir = &frame[rng.random_range(0..frame.len())];

            let analytic = kind.ambient_inner(&grad.entries[pick].vec, dir);
            let h = 1e-5;
            let energy_at = |s: f64| {
                let mut nodal = u.nodal_values.clone();
                let p = &u.nodal_values[node];
                nodal[node] = kind.exp(p, &TangentVector::new(p.clone(), dir * s));
                let ut = GfeFunction::new(mesh.clone(), kind, nodal).unwrap();
                harmonic_energy(&ut, &quad).unwrap().total
            };
            let fd = (energy_at(h) - energy_at(-h)) / (2.0 * h);
            let rel = (analytic - fd).abs() / (fd.abs() + 1e-12);
            assert!(rel <= 1e-6, "{kind:?}: gradient mismatch rel {rel:.2e}");
            checked += 1;
        }
    }
    println!(
        "[criterion 4] PASS analytic gradient vs finite differences, 50 configurations per manifold ({:.2?})",
        t.elapsed()
    );
}

/// Criterion 5: interpolation error rates of the sphere test map, both
/// orders, plus the quadrature-refinement guard on the reported values.
#[test]
fn acceptance_5_interpolation_rates() {
    let t = Instant::now();
    let mut config = RunConfig::new("p2");
    config.order = Some(1);
    config.levels = Some(4);
    let study1 = bench::interpolation_study(&config).unwrap();
    let l2 = final_rate(&study1.report.eoc_l2);
    let d12 = final_rate(&study1.report.eoc_d12);
    assert!((1.85..=2.15).contains(&l2), "order 1 L2 rate {l2}");
    assert!((0.85..=1.15).contains(&d12), "order 1 D12 rate {d12}");

    config.order = Some(2);
    let study2 = bench::interpolation_study(&config).unwrap();
    let l2_2 = final_rate(&study2.report.eoc_l2);
    let d12_2 = final_rate(&study2.report.eoc_d12);
    assert!((2.8..=3.2).contains(&l2_2), "order 2 L2 rate {l2_2}");
    assert!((1.8..=2.2).contains(&d12_2), "order 2 D12 rate {d12_2}");

    // quadrature guard: reported errors move by less than 0.5% when the
    // quadrature degree increases by 2
    let mut refined = RunConfig::new("p2");
    refined.order = Some(1);
    refined.levels = Some(2);
    let base = bench::interpolation_study(&refined).unwrap();
    refined.quad_degree = Some(2 * (1 + 1) + 2 + 2);
    let finer = bench::interpolation_study(&refined).unwrap();
    for (a, b) in base.rows.iter().zip(finer.rows.iter()) {
        assert!((a.d_l2 - b.d_l2).abs() / b.d_l2 < 0.005);
        assert!((a.d_12 - b.d_12).abs() / b.d_12 < 0.005);
    }

    println!(
        "[criterion 5] PASS interpolation rates: order 1 ({l2:.3}, {d12:.3}), order 2 ({l2_2:.3}, {d12_2:.3}) ({:.2?})",
        t.elapsed()
    );
}

/// Criterion 6: a priori rates of the full solves; order 1 and 2 on the
/// sphere problem and order 1 on the hyperbolic problem.
#[test]
fn acceptance_6_solve_rates() {
    let t = Instant::now();
    let suite = solve_suite();
    assert!(suite.p2_m1.all_converged && suite.p2_m2.all_converged && suite.p3.all_converged);

    let l2 = final_rate(&suite.p2_m1.report.eoc_l2);
    let d12 = final_rate(&suite.p2_m1.report.eoc_d12);
    assert!((1.8..=2.2).contains(&l2), "p2 order 1 L2 rate {l2}");
    assert!((0.8..=1.2).contains(&d12), "p2 order 1 D12 rate {d12}");

    let l2_2 = final_rate(&suite.p2_m2.report.eoc_l2);
    let d12_2 = final_rate(&suite.p2_m2.report.eoc_d12);
    assert!((2.8..=3.2).contains(&l2_2), "p2 order 2 L2 rate {l2_2}");
    assert!((1.8..=2.2).contains(&d12_2), "p2 order 2 D12 rate {d12_2}");

    let l2_h = final_rate(&suite.p3.report.eoc_l2);
    let d12_h = final_rate(&suite.p3.report.eoc_d12);
    assert!((1.8..=2.2).contains(&l2_h), "p3 L2 rate {l2_h}");
    assert!((0.8..=1.2).contains(&d12_h), "p3 D12 rate {d12_h}");

    println!(
        "[criterion 6] PASS solve rates: p2 order 1 ({l2:.3}, {d12:.3}), order 2 ({l2_2:.3}, {d12_2:.3}), p3 ({l2_h:.3}, {d12_h:.3}) ({:.2?})",
        t.elapsed()
    );
}

/// Criterion 7: the 1d geodesic problem is reproduced to nodal error 1e-8
/// at every level.
#[test]
fn acceptance_7_geodesic_exactness() {
    let t = Instant::now();
    let suite = solve_suite();
    assert!(suite.p1.all_converged);
    let exact = |x: f64| ManifoldPoint::from_slice(&[x.cos(), x.sin(), 0.0]);
    for (row, u_h) in suite.p1.rows.iter().zip(suite.p1.solutions.iter()) {
        assert!(row.d_l2 <= 1e-8, "level {} error {}", row.level, row.d_l2);
        let mut worst = 0.0f64;
        for (i, x) in u_h.mesh.nodes.iter().enumerate() {
            worst = worst.max(u_h.manifold.dist(&u_h.nodal_values[i], &exact(x[0])));
        }
        assert!(worst <= 1e-8, "nodal error {worst} at level {}", row.level);
    }
    println!(
        "[criterion 7] PASS geodesic problem exact to 1e-8 at all {} levels ({:.2?})",
        suite.p1.rows.len(),
        t.elapsed()
    );
}

/// Criterion 8: discrete stationarity at every converged solution of the
/// rate and exactness studies.
#[test]
fn acceptance_8_galerkin_stationarity() {
    let t = Instant::now();
    let suite = solve_suite();
    let mut worst = 0.0f64;
    for outcome in [&suite.p1, &suite.p2_m1, &suite.p2_m2, &suite.p3] {
        for u_h in &outcome.solutions {
            let quad = quadrature_for(u_h.mesh.dim(), 2 * u_h.order() + 2).unwrap();
            let s = check_stationarity(u_h, &quad).unwrap();
            worst = worst.max(s);
            assert!(s <= 1e-9, "stationarity {s}");
        }
    }
    println!(
        "[criterion 8] PASS stationarity of all converged solutions, worst {worst:.2e} ({:.2?})",
        t.elapsed()
    );
}

/// Criterion 9: the second variation is positive at the sphere solution
/// (curvature condition regime) and dominates the flat part at the
/// hyperbolic solution (nonpositive curvature regime).
#[test]
fn acceptance_9_coercivity_witness() {
    let t = Instant::now();
    let suite = solve_suite();
    let mut rng = ChaCha8Rng::seed_from_u64(900);

    let u_sphere = &suite.p2_m1.solutions[2];
    let quad = quadrature_for(2, 4).unwrap();
    let mut min_ratio = f64::INFINITY;
    for _ in 0..100 {
        let v = random_test_field(u_sphere, &mut rng, 1.0);
        let (flat, curv) = second_variation_parts(u_sphere, &v, &v, &quad).unwrap();
        assert!(flat + curv > 0.0, "second variation not positive");
        min_ratio = min_ratio.min((flat + curv) / flat);
    }

    let u_hyp = &suite.p3.solutions[2];
    for _ in 0..100 {
        let v = random_test_field(u_hyp, &mut rng, 1.0);
        let (flat, curv) = second_variation_parts(u_hyp, &v, &v, &quad).unwrap();
        assert!(
            flat + curv >= (1.0 - 1e-10) * flat,
            "curvature term negative"
        );
    }
    println!(
        "[criterion 9] PASS coercivity witnesses; sphere min (flat+curv)/flat = {min_ratio:.3} ({:.2?})",
        t.elapsed()
    );
}

/// Criterion 10: the scaled elementwise inverse-estimate ratio on random
/// discrete functions stays within twice its level-0 value across four
/// refinements.
#[test]
fn acceptance_10_inverse_estimate_monitor() {
    let t = Instant::now();
    let kind = ManifoldKind::Sphere2;
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let base = random_point(kind, &mut rng);
    let quad = quadrature_for(2, 4).unwrap();
    let mut per_level = Vec::new();
    for level in 0..4 {
        let k = 2usize << level;
        let mesh = Arc::new(build_uniform_mesh(Domain::unit_square(), k, 1).unwrap());
        let mut level_max = 0.0f64;
        for _ in 0..8 {
            let u = GfeFunction::new(
                mesh.clone(),
                kind,
                (0..mesh.num_nodes())
                    .map(|_| random_point_near(kind, &mut rng, &base, 0.2))
                    .collect(),
            )
            .unwrap();
            for e in 0..mesh.num_elements() {
                level_max = level_max.max(inverse_estimate_ratio(&u, e, &quad).unwrap());
            }
        }
        per_level.push(level_max);
    }
    for m in &per_level[1..] {
        assert!(
            *m <= 2.0 * per_level[0],
            "ratio {m} exceeds twice the level-0 value {}",
            per_level[0]
        );
    }
    println!(
        "[criterion 10] PASS inverse-estimate monitor, per-level maxima {per_level:?} ({:.2?})",
        t.elapsed()
    );
}
