//! Benchmark driver: manufactured harmonic-map problems, refinement
//! sequences with warm starts, and CSV convergence tables with experimental
//! orders of convergence.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::energy::harmonic_energy;
use crate::error::{GfeError, Result};
use crate::error_metrics::{
    compute_eoc, d12_halfmetric, lp_distance, smoothness_descriptor, AnalyticMap,
    ConvergenceReport, EocEntry, ErrorSample,
};
use crate::interpolation::GfeFunction;
use crate::manifold::{sampling, ManifoldKind, ManifoldPoint, TangentVector};
use crate::mesh::{build_uniform_mesh, quadrature_for, Domain, Mesh, QuadratureRule};
use crate::solver::{solve, Method, SolverConfig};

/// How errors of a problem are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMode {
    /// Against the closed-form solution.
    Exact,
    /// Against a discrete solution this many uniform refinements finer than
    /// the finest study level.
    FineGrid { extra_levels: usize },
}

/// A manufactured test problem: domain, target manifold, closed-form
/// solution (or reference map), and defaults for the refinement study.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: &'static str,
    pub description: &'static str,
    pub domain: Domain,
    pub manifold: ManifoldKind,
    pub order: usize,
    pub exact: AnalyticMap,
    pub reference: ReferenceMode,
    /// Initial subdivision count; levels double it.
    pub start_subdivisions: usize,
    pub default_levels: usize,
    pub solver: SolverConfig,
}

impl ProblemSpec {
    /// Dense sampling check that the solution image sits inside a geodesic
    /// ball small enough for the curvature: radius below half the
    /// injectivity radius and below `pi / (4 sqrt(|Rm|))`.
    pub fn validate_image_ball(&self, seed: u64) -> Result<f64> {
        let kind = self.manifold;
        let center = self.exact.value_at(&self.domain.center());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut radius: f64 = 0.0;
        for _ in 0..10_000 {
            let x = random_domain_point(&self.domain, &mut rng);
            radius = radius.max(kind.dist(&center, &self.exact.value_at(&x)));
        }
        let bound = kind.curvature_bound();
        let limit = (0.5 * kind.injectivity_radius()).min(if bound > 0.0 {
            std::f64::consts::FRAC_PI_4 / bound.sqrt()
        } else {
            f64::INFINITY
        });
        if radius < limit {
            Ok(radius)
        } else {
            Err(GfeError::Config(format!(
                "problem {}: image radius {radius:.4} exceeds the admissible {limit:.4}",
                self.name
            )))
        }
    }
}

fn random_domain_point<R: rand::Rng>(domain: &Domain, rng: &mut R) -> Vec<f64> {
    match *domain {
        Domain::Interval { a, b } => vec![rng.random_range(a..b)],
        Domain::Rect { x0, y0, x1, y1 } => {
            vec![rng.random_range(x0..x1), rng.random_range(y0..y1)]
        }
    }
}

/// The built-in problems.
///
/// * `p1` - geodesic boundary problem on the line into the sphere; the
///   discrete space contains the solution exactly.
/// * `p2` - inverse stereographic image of a scaled plane into the sphere,
///   a closed-form harmonic map.
/// * `p3` - conformal disk map into the hyperboloid, measured against a
///   fine-grid reference solution.
/// * `p4` - flat reduction: a harmonic polynomial into the real line.
pub fn problem_registry() -> Vec<ProblemSpec> {
    vec![p1(), p2(), p3(), p4()]
}

pub fn find_problem(name: &str) -> Result<ProblemSpec> {
    problem_registry()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| GfeError::Config(format!("unknown problem '{name}'")))
}

fn p1() -> ProblemSpec {
    let kind = ManifoldKind::Sphere2;
    let value = |x: &[f64]| ManifoldPoint::from_slice(&[x[0].cos(), x[0].sin(), 0.0]);
    let jet = |x: &[f64]| {
        let p = ManifoldPoint::from_slice(&[x[0].cos(), x[0].sin(), 0.0]);
        let v = DVector::from_row_slice(&[-x[0].sin(), x[0].cos(), 0.0]);
        (p.clone(), vec![TangentVector::new(p, v)])
    };
    let hessian = |x: &[f64]| {
        let p = ManifoldPoint::from_slice(&[x[0].cos(), x[0].sin(), 0.0]);
        vec![vec![TangentVector::zero(p)]]
    };
    ProblemSpec {
        name: "p1",
        description: "1d geodesic into the sphere (exact in the discrete space)",
        domain: Domain::unit_interval(),
        manifold: kind,
        order: 1,
        exact: AnalyticMap::new(kind, value, jet).with_hessian(hessian),
        reference: ReferenceMode::Exact,
        start_subdivisions: 4,
        default_levels: 4,
        solver: SolverConfig::default(),
    }
}

/// Inverse stereographic projection onto the unit sphere and its Jacobian
/// columns.
fn inv_stereographic(w: &[f64; 2]) -> (DVector<f64>, [DVector<f64>; 2]) {
    let r2 = w[0] * w[0] + w[1] * w[1];
    let den = 1.0 + r2;
    let p = DVector::from_row_slice(&[2.0 * w[0] / den, 2.0 * w[1] / den, (1.0 - r2) / den]);
    let d2 = den * den;
    let d0 = DVector::from_row_slice(&[
        2.0 * (1.0 - w[0] * w[0] + w[1] * w[1]) / d2,
        -4.0 * w[0] * w[1] / d2,
        -4.0 * w[0] / d2,
    ]);
    let d1 = DVector::from_row_slice(&[
        -4.0 * w[0] * w[1] / d2,
        2.0 * (1.0 + w[0] * w[0] - w[1] * w[1]) / d2,
        -4.0 * w[1] / d2,
    ]);
    (p, [d0, d1])
}

fn p2() -> ProblemSpec {
    let kind = ManifoldKind::Sphere2;
    let lambda = 0.5;
    let value = move |x: &[f64]| {
        let (p, _) = inv_stereographic(&[lambda * x[0], lambda * x[1]]);
        ManifoldPoint::new(p)
    };
    let jet = move |x: &[f64]| {
        let (p, d) = inv_stereographic(&[lambda * x[0], lambda * x[1]]);
        let point = ManifoldPoint::new(p);
        let du = d
            .into_iter()
            .map(|col| TangentVector::new(point.clone(), col * lambda))
            .collect();
        (point, du)
    };
    ProblemSpec {
        name: "p2",
        description: "inverse stereographic harmonic map into the sphere",
        domain: Domain::Rect {
            x0: -0.5,
            y0: -0.5,
            x1: 0.5,
            y1: 0.5,
        },
        manifold: kind,
        order: 1,
        exact: AnalyticMap::new(kind, value, jet),
        reference: ReferenceMode::Exact,
        start_subdivisions: 4,
        default_levels: 4,
        solver: SolverConfig::default(),
    }
}

/// Poincaré-disk coordinates mapped onto the hyperboloid sheet, with
/// Jacobian columns.
fn disk_to_hyperboloid(w: &[f64; 2]) -> (DVector<f64>, [DVector<f64>; 2]) {
    let r2 = w[0] * w[0] + w[1] * w[1];
    let den = 1.0 - r2;
    let p = DVector::from_row_slice(&[(1.0 + r2) / den, 2.0 * w[0] / den, 2.0 * w[1] / den]);
    let d2 = den * den;
    let d0 = DVector::from_row_slice(&[
        4.0 * w[0] / d2,
        2.0 * (1.0 + w[0] * w[0] - w[1] * w[1]) / d2,
        4.0 * w[0] * w[1] / d2,
    ]);
    let d1 = DVector::from_row_slice(&[
        4.0 * w[1] / d2,
        4.0 * w[0] * w[1] / d2,
        2.0 * (1.0 - w[0] * w[0] + w[1] * w[1]) / d2,
    ]);
    (p, [d0, d1])
}

fn p3() -> ProblemSpec {
    let kind = ManifoldKind::Hyperbolic2;
    let lambda = 0.5;
    let value = move |x: &[f64]| {
        let (p, _) = disk_to_hyperboloid(&[lambda * x[0], lambda * x[1]]);
        ManifoldPoint::new(p)
    };
    let jet = move |x: &[f64]| {
        let (p, d) = disk_to_hyperboloid(&[lambda * x[0], lambda * x[1]]);
        let point = ManifoldPoint::new(p);
        let du = d
            .into_iter()
            .map(|col| TangentVector::new(point.clone(), col * lambda))
            .collect();
        (point, du)
    };
    ProblemSpec {
        name: "p3",
        description: "conformal disk map into the hyperboloid (fine-grid reference)",
        domain: Domain::Rect {
            x0: -0.5,
            y0: -0.5,
            x1: 0.5,
            y1: 0.5,
        },
        manifold: kind,
        order: 1,
        exact: AnalyticMap::new(kind, value, jet),
        reference: ReferenceMode::FineGrid { extra_levels: 2 },
        start_subdivisions: 4,
        default_levels: 3,
        solver: SolverConfig::default(),
    }
}

fn p4() -> ProblemSpec {
    let kind = ManifoldKind::Euclidean(1);
    let value = |x: &[f64]| ManifoldPoint::from_slice(&[x[0] * x[0] - x[1] * x[1]]);
    let jet = |x: &[f64]| {
        let p = ManifoldPoint::from_slice(&[x[0] * x[0] - x[1] * x[1]]);
        (
            p.clone(),
            vec![
                TangentVector::new(p.clone(), DVector::from_row_slice(&[2.0 * x[0]])),
                TangentVector::new(p, DVector::from_row_slice(&[-2.0 * x[1]])),
            ],
        )
    };
    let hessian = |x: &[f64]| {
        let p = ManifoldPoint::from_slice(&[x[0] * x[0] - x[1] * x[1]]);
        let mk = |v: f64| TangentVector::new(p.clone(), DVector::from_row_slice(&[v]));
        vec![vec![mk(2.0), mk(0.0)], vec![mk(0.0), mk(-2.0)]]
    };
    ProblemSpec {
        name: "p4",
        description: "harmonic polynomial into the real line (flat reduction)",
        domain: Domain::unit_square(),
        manifold: kind,
        order: 1,
        exact: AnalyticMap::new(kind, value, jet).with_hessian(hessian),
        reference: ReferenceMode::Exact,
        start_subdivisions: 4,
        default_levels: 4,
        solver: SolverConfig::default(),
    }
}

/// Parameters of one benchmark run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: String,
    pub order: Option<usize>,
    pub levels: Option<usize>,
    pub out: Option<PathBuf>,
    pub quad_degree: Option<usize>,
    pub seed: u64,
    pub solver: Option<SolverConfig>,
}

impl RunConfig {
    pub fn new(problem: &str) -> Self {
        Self {
            problem: problem.to_string(),
            order: None,
            levels: None,
            out: None,
            quad_degree: None,
            seed: 0,
            solver: None,
        }
    }
}

/// One refinement level of a solve run.
#[derive(Debug, Clone)]
pub struct LevelRow {
    pub level: usize,
    pub h: f64,
    pub nodes: usize,
    pub d_l2: f64,
    pub d_12: f64,
    pub energy: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub converged: bool,
}

/// Result of a benchmark run: per-level rows, convergence orders, and the
/// CSV that was written.
#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub report: ConvergenceReport,
    pub rows: Vec<LevelRow>,
    pub csv: String,
    pub all_converged: bool,
    /// Discrete solutions per level, for downstream checks.
    pub solutions: Vec<GfeFunction>,
}

fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_eoc(entries: &[EocEntry], i: usize) -> String {
    if i == 0 {
        "-".to_string()
    } else {
        match entries[i - 1] {
            EocEntry::Rate(r) => fmt_g17(r),
            EocEntry::Exact => "exact".to_string(),
        }
    }
}

fn subdivisions_for(problem: &ProblemSpec, levels: usize) -> Vec<usize> {
    (0..levels)
        .map(|l| problem.start_subdivisions << l)
        .collect()
}

fn error_quadrature(
    problem: &ProblemSpec,
    order: usize,
    config: &RunConfig,
) -> Result<QuadratureRule> {
    let degree = config.quad_degree.unwrap_or(2 * (order + 1) + 2);
    quadrature_for(problem.domain.dim(), degree)
}

/// Interpolate the boundary trace of the reference map and warm-start the
/// interior from the previous level (or the reference interpolant).
fn initial_iterate(
    mesh: &Arc<Mesh>,
    problem: &ProblemSpec,
    previous: Option<&GfeFunction>,
) -> Result<GfeFunction> {
    let kind = problem.manifold;
    let nodal: Vec<ManifoldPoint> = mesh
        .nodes
        .iter()
        .enumerate()
        .map(|(i, x)| {
            if mesh.is_boundary_node(i) {
                Ok(problem.exact.value_at(x))
            } else {
                match previous {
                    Some(prev) => prev.value_at_physical(x),
                    None => Ok(problem.exact.value_at(x)),
                }
            }
        })
        .collect::<Result<_>>()?;
    GfeFunction::new(mesh.clone(), kind, nodal)
}

/// Run the refinement study of a problem: build, solve, and measure each
/// level, then compute convergence orders and emit the CSV table.
pub fn run(config: &RunConfig) -> Result<BenchOutcome> {
    let problem = find_problem(&config.problem)?;
    let order = config.order.unwrap_or(problem.order);
    let levels = config.levels.unwrap_or(problem.default_levels);
    if levels < 2 {
        return Err(GfeError::Config("levels must be at least 2".into()));
    }
    problem.validate_image_ball(config.seed)?;
    let solver_config = config.solver.unwrap_or(problem.solver);
    let quad = error_quadrature(&problem, order, config)?;
    let subdivisions = subdivisions_for(&problem, levels);

    // fine-grid reference solution, when the problem needs one
    let reference: Option<GfeFunction> = match problem.reference {
        ReferenceMode::Exact => None,
        ReferenceMode::FineGrid { extra_levels } => {
            let k_ref = subdivisions.last().unwrap() << extra_levels;
            let mesh = Arc::new(build_uniform_mesh(problem.domain, k_ref, order)?);
            let u0 = initial_iterate(&mesh, &problem, None)?;
            let (u_ref, report) = solve(&u0, &mesh.boundary_nodes, &solver_config)?;
            if !report.converged {
                return Err(GfeError::NoConvergence {
                    iters: report.iterations,
                    residual: report.grad_norm,
                });
            }
            Some(u_ref)
        }
    };

    let mut rows = Vec::with_capacity(levels);
    let mut samples = Vec::with_capacity(levels);
    let mut solutions: Vec<GfeFunction> = Vec::with_capacity(levels);
    let mut previous: Option<GfeFunction> = None;
    for (level, &k) in subdivisions.iter().enumerate() {
        let mesh = Arc::new(build_uniform_mesh(problem.domain, k, order)?);
        let u0 = initial_iterate(&mesh, &problem, previous.as_ref())?;
        let (u_h, report) = solve(&u0, &mesh.boundary_nodes, &solver_config)?;

        let (d_l2, d_12) = match &reference {
            None => (
                lp_distance(&problem.exact, &u_h, &mesh, &quad, 2.0)?,
                d12_halfmetric(&problem.exact, &u_h, &mesh, &quad)?,
            ),
            Some(u_ref) => {
                let ref_mesh = u_ref.mesh.clone();
                (
                    lp_distance(u_ref, &u_h, &ref_mesh, &quad, 2.0)?,
                    d12_halfmetric(u_ref, &u_h, &ref_mesh, &quad)?,
                )
            }
        };
        let energy = harmonic_energy(&u_h, &quad)?.total;
        rows.push(LevelRow {
            level,
            h: mesh.h,
            nodes: mesh.num_nodes(),
            d_l2,
            d_12,
            energy,
            grad_norm: report.grad_norm,
            iters: report.iterations,
            converged: report.converged,
        });
        samples.push(ErrorSample {
            h: mesh.h,
            d_l2,
            d_12,
            energy,
        });
        solutions.push(u_h.clone());
        previous = Some(u_h);
    }

    let report = compute_eoc(&samples)?;
    let mut csv = String::from("level,h,nodes,d_L2,eoc_L2,D_12,eoc_D12,energy,grad_norm,iters\n");
    for (i, row) in rows.iter().enumerate() {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            row.level,
            fmt_g17(row.h),
            row.nodes,
            fmt_g17(row.d_l2),
            fmt_eoc(&report.eoc_l2, i),
            fmt_g17(row.d_12),
            fmt_eoc(&report.eoc_d12, i),
            fmt_g17(row.energy),
            fmt_g17(row.grad_norm),
            row.iters
        )
        .expect("string write");
    }
    if let Some(path) = &config.out {
        std::fs::write(path, &csv).map_err(|e| GfeError::Config(format!("write csv: {e}")))?;
    }
    let all_converged = rows.iter().all(|r| r.converged);
    Ok(BenchOutcome {
        report,
        rows,
        csv,
        all_converged,
        solutions,
    })
}

/// One level of an interpolation-only study.
#[derive(Debug, Clone)]
pub struct StudyRow {
    pub level: usize,
    pub h: f64,
    pub d_l2: f64,
    pub d_12: f64,
    pub theta_1q: f64,
}

/// Result of an interpolation study.
#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub report: ConvergenceReport,
    pub rows: Vec<StudyRow>,
    pub csv: String,
}

/// Measure interpolation-only errors of the problem's reference map (no
/// solves): nodal interpolation on each level against the closed form.
pub fn interpolation_study(config: &RunConfig) -> Result<StudyOutcome> {
    let problem = find_problem(&config.problem)?;
    let order = config.order.unwrap_or(problem.order);
    let levels = config.levels.unwrap_or(problem.default_levels);
    if levels < 2 {
        return Err(GfeError::Config("levels must be at least 2".into()));
    }
    problem.validate_image_ball(config.seed)?;
    let quad = error_quadrature(&problem, order, config)?;

    let mut rows = Vec::with_capacity(levels);
    let mut samples = Vec::with_capacity(levels);
    for (level, &k) in subdivisions_for(&problem, levels).iter().enumerate() {
        let mesh = Arc::new(build_uniform_mesh(problem.domain, k, order)?);
        let u_i = GfeFunction::interpolate_map(mesh.clone(), problem.manifold, |x| {
            problem.exact.value_at(x)
        })?;
        let d_l2 = lp_distance(&problem.exact, &u_i, &mesh, &quad, 2.0)?;
        let d_12 = d12_halfmetric(&problem.exact, &u_i, &mesh, &quad)?;
        let theta_1q = smoothness_descriptor(&u_i, &mesh, &quad, 1, 4.0)?;
        rows.push(StudyRow {
            level,
            h: mesh.h,
            d_l2,
            d_12,
            theta_1q,
        });
        samples.push(ErrorSample {
            h: mesh.h,
            d_l2,
            d_12,
            energy: 0.0,
        });
    }

    let report = compute_eoc(&samples)?;
    let mut csv = String::from("level,h,d_L2,eoc_L2,D_12,eoc_D12,theta_1q\n");
    for (i, row) in rows.iter().enumerate() {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            row.level,
            fmt_g17(row.h),
            fmt_g17(row.d_l2),
            fmt_eoc(&report.eoc_l2, i),
            fmt_g17(row.d_12),
            fmt_eoc(&report.eoc_d12, i),
            fmt_g17(row.theta_1q)
        )
        .expect("string write");
    }
    if let Some(path) = &config.out {
        std::fs::write(path, &csv).map_err(|e| GfeError::Config(format!("write csv: {e}")))?;
    }
    Ok(StudyOutcome { report, rows, csv })
}

/// TOML run configuration with `[problem]`, `[solver]`, and `[output]`
/// tables; any field may be omitted.
#[derive(Debug, Default, Deserialize)]
pub struct FileConfig {
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
pub struct ProblemSection {
    pub name: Option<String>,
    pub order: Option<usize>,
    pub levels: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
pub struct SolverSection {
    pub grad_tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub method: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub quad_degree: Option<usize>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| GfeError::Config(format!("config parse: {e}")))
    }

    /// Merge into a run configuration; explicit arguments win over the file.
    pub fn apply(&self, config: &mut RunConfig) -> Result<()> {
        if config.problem.is_empty() {
            config.problem = self
                .problem
                .name
                .clone()
                .ok_or_else(|| GfeError::Config("missing problem name".into()))?;
        }
        config.order = config.order.or(self.problem.order);
        config.levels = config.levels.or(self.problem.levels);
        config.out = config.out.clone().or_else(|| self.output.path.clone());
        config.quad_degree = config.quad_degree.or(self.output.quad_degree);
        if let Some(seed) = self.output.seed {
            if config.seed == 0 {
                config.seed = seed;
            }
        }
        let mut solver = config.solver.unwrap_or_default();
        if let Some(g) = self.solver.grad_tol {
            solver.grad_tol = g;
        }
        if let Some(m) = self.solver.max_iters {
            solver.max_iters = m;
        }
        if let Some(m) = &self.solver.method {
            solver.method = match m.as_str() {
                "cg" => Method::NonlinearCg,
                "gd" => Method::GradientDescent,
                other => return Err(GfeError::Config(format!("unknown method '{other}'"))),
            };
        }
        config.solver = Some(solver);
        Ok(())
    }
}

/// Numerically verify that a map is harmonic: transported central
/// differences of its closed-form derivative give the tension field, whose
/// norm is returned, maximized over `samples` random domain points.
pub fn max_tension_residual(problem: &ProblemSpec, samples: usize, seed: u64) -> f64 {
    let kind = problem.manifold;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        // keep the stencil inside the domain
        let x = loop {
            let x = random_domain_point(&problem.domain, &mut rng);
            let inside = match problem.domain {
                Domain::Interval { a, b } => x[0] > a + h && x[0] < b - h,
                Domain::Rect { x0, y0, x1, y1 } => {
                    x[0] > x0 + h && x[0] < x1 - h && x[1] > y0 + h && x[1] < y1 - h
                }
            };
            if inside {
                break x;
            }
        };
        let (p, _) = problem.exact.jet_at(&x);
        let mut tension = DVector::zeros(kind.ambient_dim());
        for alpha in 0..x.len() {
            let mut xp = x.clone();
            xp[alpha] += h;
            let mut xm = x.clone();
            xm[alpha] -= h;
            let (pp, dup) = problem.exact.jet_at(&xp);
            let (pm, dum) = problem.exact.jet_at(&xm);
            let tp = kind.parallel_transport(&pp, &p, &dup[alpha]).unwrap();
            let tm = kind.parallel_transport(&pm, &p, &dum[alpha]).unwrap();
            tension += (&tp.vec - &tm.vec) / (2.0 * h);
        }
        worst = worst.max(kind.ambient_inner(&tension, &tension).max(0.0).sqrt());
    }
    worst
}

/// Seeded random boundary-vanishing nodal vector fields, used by the
/// randomized coercivity checks.
pub fn random_test_field(
    u: &GfeFunction,
    rng: &mut ChaCha8Rng,
    magnitude: f64,
) -> crate::interpolation::GfeVectorField {
    let kind = u.manifold;
    let vectors = u
        .nodal_values
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if u.mesh.is_boundary_node(i) {
                TangentVector::zero(p.clone())
            } else {
                sampling::random_tangent(kind, rng, p, magnitude)
            }
        })
        .collect();
    crate::interpolation::GfeVectorField::new(u.clone(), vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_contains_the_four_problems() {
        let names: Vec<&str> = problem_registry().iter().map(|p| p.name).collect();
        assert_eq!(names, vec!["p1", "p2", "p3", "p4"]);
        for p in problem_registry() {
            let r = p.validate_image_ball(7).unwrap();
            if p.manifold.curvature_bound() > 0.0 {
                assert!(r < std::f64::consts::FRAC_PI_4);
            }
        }
    }

    /// The curved closed-form solutions are numerically harmonic.
    #[test]
    fn closed_form_solutions_are_harmonic() {
        for name in ["p1", "p2", "p3"] {
            let p = find_problem(name).unwrap();
            let residual = max_tension_residual(&p, 1000, 11);
            assert!(residual <= 1e-6, "{name}: tension residual {residual:.2e}");
        }
    }

    /// Analytic jets are consistent with finite differences of the values.
    #[test]
    fn problem_jets_match_finite_differences() {
        let h = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for p in problem_registry() {
            let kind = p.manifold;
            for _ in 0..50 {
                let x = loop {
                    let x = random_domain_point(&p.domain, &mut rng);
                    let ok = match p.domain {
                        Domain::Interval { a, b } => x[0] > a + h && x[0] < b - h,
                        Domain::Rect { x0, y0, x1, y1 } => {
                            x[0] > x0 + h && x[0] < x1 - h && x[1] > y0 + h && x[1] < y1 - h
                        }
                    };
                    if ok {
                        break x;
                    }
                };
                let (val, du) = p.exact.jet_at(&x);
                assert!(kind.constraint_residual(&val) <= 1e-12);
                for (alpha, g) in du.iter().enumerate() {
                    assert!(kind.tangency_residual(g) <= 1e-10);
                    let mut xp = x.clone();
                    xp[alpha] += h;
                    let mut xm = x.clone();
                    xm[alpha] -= h;
                    let a = p.exact.value_at(&xp);
                    let b = p.exact.value_at(&xm);
                    let fd = (&a.coords - &b.coords) / (2.0 * h);
                    for i in 0..kind.ambient_dim() {
                        assert!((g.vec[i] - fd[i]).abs() <= 1e-7);
                    }
                }
            }
        }
    }

    #[test]
    fn p1_run_is_exact_at_every_level() {
        let mut config = RunConfig::new("p1");
        config.levels = Some(3);
        let outcome = run(&config).unwrap();
        assert!(outcome.all_converged);
        for row in &outcome.rows {
            assert!(row.d_l2 <= 1e-8, "level {} error {}", row.level, row.d_l2);
        }
        for e in &outcome.report.eoc_l2 {
            assert_eq!(*e, EocEntry::Exact);
        }
    }

    #[test]
    fn p4_flat_run_has_classical_rates() {
        let mut config = RunConfig::new("p4");
        config.levels = Some(3);
        let outcome = run(&config).unwrap();
        assert!(outcome.all_converged);
        let last = outcome.report.eoc_l2.last().unwrap().rate().unwrap();
        assert!((1.85..=2.15).contains(&last), "L2 rate {last}");
        let last = outcome.report.eoc_d12.last().unwrap().rate().unwrap();
        assert!((0.85..=1.15).contains(&last), "H1 rate {last}");
    }

    #[test]
    fn csv_is_deterministic_and_formatted() {
        let mut config = RunConfig::new("p4");
        config.levels = Some(2);
        let a = run(&config).unwrap();
        let b = run(&config).unwrap();
        assert_eq!(a.csv, b.csv);
        assert!(a
            .csv
            .starts_with("level,h,nodes,d_L2,eoc_L2,D_12,eoc_D12,energy,grad_norm,iters\n"));
        assert!(!a.csv.contains('\r'));
        let second = a.csv.lines().nth(1).unwrap();
        assert!(second.starts_with("0,"));
        assert!(second.contains(",-,"));
    }

    #[test]
    fn interpolation_study_flat_rates() {
        let mut config = RunConfig::new("p4");
        config.levels = Some(3);
        let outcome = interpolation_study(&config).unwrap();
        assert!(outcome
            .csv
            .starts_with("level,h,d_L2,eoc_L2,D_12,eoc_D12,theta_1q\n"));
        let last = outcome.report.eoc_l2.last().unwrap().rate().unwrap();
        assert!((1.85..=2.15).contains(&last), "L2 rate {last}");
        let last = outcome.report.eoc_d12.last().unwrap().rate().unwrap();
        assert!((0.85..=1.15).contains(&last), "H1 rate {last}");

        // constant map: all interpolation errors vanish
        let kind = ManifoldKind::Sphere2;
        let p = ManifoldPoint::from_slice(&[0.0, 0.0, 1.0]);
        let q = p.clone();
        let constant = AnalyticMap::new(
            kind,
            move |_| p.clone(),
            move |_| {
                (
                    q.clone(),
                    vec![
                        TangentVector::zero(q.clone()),
                        TangentVector::zero(q.clone()),
                    ],
                )
            },
        );
        let mesh = Arc::new(build_uniform_mesh(Domain::unit_square(), 4, 1).unwrap());
        let quad = quadrature_for(2, 6).unwrap();
        let u_i =
            GfeFunction::interpolate_map(mesh.clone(), kind, |x| constant.value_at(x)).unwrap();
        assert!(lp_distance(&constant, &u_i, &mesh, &quad, 2.0).unwrap() <= 1e-14);
        assert!(d12_halfmetric(&constant, &u_i, &mesh, &quad).unwrap() <= 1e-12);
    }

    #[test]
    fn config_file_round_trip() {
        let text = r#"
[problem]
name = "p2"
order = 2
levels = 3

[solver]
grad_tol = 1e-8
max_iters = 500
method = "gd"

[output]
quad_degree = 8
seed = 42
"#;
        let file = FileConfig::parse(text).unwrap();
        let mut config = RunConfig::new("");
        file.apply(&mut config).unwrap();
        assert_eq!(config.problem, "p2");
        assert_eq!(config.order, Some(2));
        assert_eq!(config.levels, Some(3));
        assert_eq!(config.quad_degree, Some(8));
        assert_eq!(config.seed, 42);
        let solver = config.solver.unwrap();
        assert_eq!(solver.grad_tol, 1e-8);
        assert_eq!(solver.max_iters, 500);
        assert_eq!(solver.method, Method::GradientDescent);

        assert!(FileConfig::parse("[problem]\nname = 3").is_err());
        let mut bad = RunConfig::new("p1");
        bad.levels = Some(1);
        assert!(matches!(run(&bad), Err(GfeError::Config(_))));
    }
}
