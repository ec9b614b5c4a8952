//! Geodesic interpolation of nodal manifold values and tangent vector
//! fields.
//!
//! The interpolant at a point `x` with weights `lambda_i(x)` is the weighted
//! Fréchet mean of the nodal values, characterized by the first-order
//! condition `sum_i lambda_i(x) log_q v_i = 0`. Spatial derivatives and
//! vector-field interpolation come from implicit differentiation of that
//! condition; the inverted Newton system `A = sum_i lambda_i dlog_base(q, v_i)`
//! serves every right-hand side at an evaluation point.
//!
//! Flat targets reduce exactly to Lagrange interpolation and skip the
//! iteration; curved targets (ambient dimension 3) run on fixed-size
//! arrays.

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{GfeError, Result};
use crate::manifold::{arr3, dvec3, fast, LogPair, ManifoldKind, ManifoldPoint, TangentVector, V3};
use crate::mesh::Mesh;

/// Residual tolerance of the first-order condition, relative to the nodal
/// spread.
const RESIDUAL_REL_TOL: f64 = 1e-12;
const RESIDUAL_ABS_TOL: f64 = 1e-14;
const MAX_NEWTON_ITERS: usize = 100;
/// Singularity threshold for the interpolation system.
const MAX_INVERSE_NORM: f64 = 1e8;

type M2 = [[f64; 2]; 2];

/// Weighted Fréchet mean of `values` with weights summing to one.
///
/// Damped Newton on `F(q) = sum_i lambda_i log_q v_i`, started from the
/// constraint-projected weighted ambient average, with a fixed-point
/// fallback `q <- exp_q(tau F)` if a Newton step fails to decrease the
/// residual.
pub fn geodesic_interpolate(
    kind: ManifoldKind,
    values: &[ManifoldPoint],
    weights: &[f64],
) -> Result<ManifoldPoint> {
    check_ball(kind, values, weights)?;
    if kind.curvature() == 0.0 {
        return Ok(flat_mean(kind, values, weights));
    }
    let values3: Vec<V3> = values.iter().map(|p| arr3(&p.coords)).collect();
    let state = curved_core(kind, &values3, weights)?;
    Ok(ManifoldPoint::new(dvec3(&state.point)))
}

/// Validate the well-posedness ball: all values within an admissible
/// radius of the first one.
///
/// For nonnegative weights (first order) the classical radius is half the
/// injectivity radius; sign-indefinite weights (second order) get the
/// conservative curvature-limited radius.
pub fn check_ball(kind: ManifoldKind, values: &[ManifoldPoint], weights: &[f64]) -> Result<()> {
    let radius = if weights.iter().any(|w| *w < 0.0) {
        kind.interpolation_ball_radius()
    } else {
        0.5 * kind.injectivity_radius()
    };
    if !radius.is_finite() {
        return Ok(());
    }
    let mut spread: f64 = 0.0;
    for v in &values[1..] {
        spread = spread.max(kind.dist(&values[0], v));
    }
    if spread > radius + 1e-9 {
        Err(GfeError::BallViolation { spread, radius })
    } else {
        Ok(())
    }
}

/// Euclidean reduction: the weighted average (normalized by the weight sum,
/// which is one up to roundoff).
fn flat_mean(kind: ManifoldKind, values: &[ManifoldPoint], weights: &[f64]) -> ManifoldPoint {
    let n = kind.ambient_dim();
    let mut avg = DVector::zeros(n);
    let mut s = 0.0;
    for (v, w) in values.iter().zip(weights.iter()) {
        avg.axpy(*w, &v.coords, 1.0);
        s += w;
    }
    ManifoldPoint::new(avg / s)
}

/// Converged interpolation state on a curved target: the mean and the
/// cached pair geometry towards every nodal value.
struct CurvedState {
    point: V3,
    pairs: Vec<LogPair>,
}

fn curved_core(kind: ManifoldKind, values: &[V3], weights: &[f64]) -> Result<CurvedState> {
    assert_eq!(values.len(), weights.len());
    let g0 = kind.g0();

    // initial iterate: constraint-projected weighted ambient average
    let mut avg = [0.0f64; 3];
    for (v, w) in values.iter().zip(weights.iter()) {
        fast::axpy(&mut avg, *w, v);
    }
    let degenerate = kind.curvature() * fast::dot(g0, &avg, &avg) < 1e-12;
    let mut q = if degenerate {
        values[0]
    } else {
        // exp3 with zero vector projects onto the constraint set
        fast::exp3(kind, &avg, &[0.0; 3])
    };

    let pairs_at = |q: &V3| -> Result<Vec<LogPair>> {
        values.iter().map(|v| LogPair::new3(kind, q, v)).collect()
    };
    let eval = |pairs: &[LogPair]| -> (V3, f64, f64) {
        let mut f = [0.0f64; 3];
        let mut maxd: f64 = 0.0;
        for (pair, w) in pairs.iter().zip(weights.iter()) {
            fast::axpy(&mut f, *w, &pair.log());
            maxd = maxd.max(pair.dist());
        }
        let fnorm = fast::dot(g0, &f, &f).max(0.0).sqrt();
        (f, fnorm, RESIDUAL_REL_TOL * maxd + RESIDUAL_ABS_TOL)
    };

    let mut pairs = pairs_at(&q)?;
    let (mut f, mut fnorm, mut tol) = eval(&pairs);

    for _ in 0..MAX_NEWTON_ITERS {
        if fnorm <= tol {
            check_containment(kind, values, weights, &q)?;
            return Ok(CurvedState { point: q, pairs });
        }

        // Newton step in an orthonormal tangent frame at q
        let frame = fast::frame3(kind, &q);
        let mut a = [[0.0f64; 2]; 2];
        for (pair, w) in pairs.iter().zip(weights.iter()) {
            for (c, ec) in frame.iter().enumerate() {
                let col = pair.dlog_base_apply(ec);
                for (r, er) in frame.iter().enumerate() {
                    a[r][c] += w * fast::dot(g0, &col, er);
                }
            }
        }
        let rhs = [-fast::dot(g0, &f, &frame[0]), -fast::dot(g0, &f, &frame[1])];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let mut step = f; // fixed-point direction as the fallback
        if det.abs() > 1e-300 {
            let s0 = (rhs[0] * a[1][1] - rhs[1] * a[0][1]) / det;
            let s1 = (rhs[1] * a[0][0] - rhs[0] * a[1][0]) / det;
            step = fast::scaled(s0, &frame[0]);
            fast::axpy(&mut step, s1, &frame[1]);
        }

        // damping: halve until the residual decreases, then fall back to
        // the fixed-point direction
        let mut improved = false;
        'damping: for dir in [step, f] {
            let mut tau = 1.0;
            for _ in 0..40 {
                let trial = fast::exp3(kind, &q, &fast::scaled(tau, &dir));
                if let Ok(tp) = pairs_at(&trial) {
                    let (tf, tn, ttol) = eval(&tp);
                    if tn < fnorm || tn <= ttol {
                        q = trial;
                        pairs = tp;
                        f = tf;
                        fnorm = tn;
                        tol = ttol;
                        improved = true;
                        break 'damping;
                    }
                }
                tau *= 0.5;
            }
        }
        if !improved {
            return Err(GfeError::NoConvergence {
                iters: MAX_NEWTON_ITERS,
                residual: fnorm,
            });
        }
    }
    Err(GfeError::NoConvergence {
        iters: MAX_NEWTON_ITERS,
        residual: fnorm,
    })
}

/// Well-posedness containment: the mean stays inside the ball
/// `B_{C rho}(v_1)` with `C = 6 l max_i |lambda_i|`.
fn check_containment(kind: ManifoldKind, values: &[V3], weights: &[f64], q: &V3) -> Result<()> {
    let rho = kind.interpolation_ball_radius();
    if !rho.is_finite() {
        return Ok(());
    }
    let wmax = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let c = 6.0 * values.len() as f64 * wmax.max(1.0);
    let d = fast::dist3(kind, &values[0], q);
    if d > c * rho + 1e-9 {
        return Err(GfeError::NoConvergence {
            iters: MAX_NEWTON_ITERS,
            residual: d,
        });
    }
    Ok(())
}

/// A geodesic finite element function: one manifold point per global
/// Lagrange node, interpolated elementwise by weighted Fréchet means.
#[derive(Debug, Clone)]
pub struct GfeFunction {
    pub mesh: Arc<Mesh>,
    pub manifold: ManifoldKind,
    pub nodal_values: Vec<ManifoldPoint>,
}

impl GfeFunction {
    /// Build from explicit nodal values, validating constraints and the
    /// per-element well-posedness ball.
    pub fn new(
        mesh: Arc<Mesh>,
        manifold: ManifoldKind,
        nodal_values: Vec<ManifoldPoint>,
    ) -> Result<Self> {
        assert_eq!(nodal_values.len(), mesh.num_nodes());
        for p in &nodal_values {
            manifold.check_point(p)?;
        }
        let f = Self {
            mesh,
            manifold,
            nodal_values,
        };
        f.validate_ball()?;
        Ok(f)
    }

    /// Nodal interpolant of a map given in physical coordinates.
    pub fn interpolate_map<F>(mesh: Arc<Mesh>, manifold: ManifoldKind, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> ManifoldPoint,
    {
        let nodal_values: Vec<ManifoldPoint> = mesh.nodes.iter().map(|x| f(x)).collect();
        Self::new(mesh, manifold, nodal_values)
    }

    pub fn order(&self) -> usize {
        self.mesh.order
    }

    /// Check the elementwise nodal ball invariant.
    pub fn validate_ball(&self) -> Result<()> {
        let radius = self.manifold.interpolation_ball_radius();
        if !radius.is_finite() {
            return Ok(());
        }
        for en in &self.mesh.element_nodes {
            let first = &self.nodal_values[en[0]];
            for &i in &en[1..] {
                let d = self.manifold.dist(first, &self.nodal_values[i]);
                if d > radius {
                    return Err(GfeError::BallViolation { spread: d, radius });
                }
            }
        }
        Ok(())
    }

    pub(crate) fn element_values(&self, element: usize) -> Vec<ManifoldPoint> {
        self.mesh.element_nodes[element]
            .iter()
            .map(|&i| self.nodal_values[i].clone())
            .collect()
    }

    /// Evaluate the interpolant at reference coordinates of an element.
    pub fn evaluate(&self, element: usize, x_ref: &[f64]) -> Result<ManifoldPoint> {
        let (weights, _) = self.mesh.reference_element().shape_values(x_ref)?;
        geodesic_interpolate(self.manifold, &self.element_values(element), &weights)
    }

    /// Spatial derivatives `d^alpha u` in physical coordinates.
    pub fn evaluate_differential(
        &self,
        element: usize,
        x_ref: &[f64],
    ) -> Result<Vec<TangentVector>> {
        Ok(self.evaluate_jet(element, x_ref)?.1)
    }

    /// Value and physical derivatives in one evaluation.
    pub fn evaluate_jet(
        &self,
        element: usize,
        x_ref: &[f64],
    ) -> Result<(ManifoldPoint, Vec<TangentVector>)> {
        let ctx = ElementContext::new(self, element);
        let kernel = ctx.kernel(x_ref)?;
        let value = kernel.value.clone();
        let du = kernel.du_ambient();
        Ok((value, du))
    }

    /// Evaluate at a physical point by locating the containing element.
    pub fn value_at_physical(&self, x: &[f64]) -> Result<ManifoldPoint> {
        let (e, xr) = self.mesh.locate(x);
        self.evaluate(e, &xr)
    }

    /// Value and derivatives at a physical point.
    pub fn jet_at_physical(&self, x: &[f64]) -> Result<(ManifoldPoint, Vec<TangentVector>)> {
        let (e, xr) = self.mesh.locate(x);
        self.evaluate_jet(e, &xr)
    }
}

/// A tangent vector field given by one vector per Lagrange node, based at
/// the nodal values of an underlying function.
#[derive(Debug, Clone)]
pub struct GfeVectorField {
    pub base: GfeFunction,
    pub nodal_vectors: Vec<TangentVector>,
}

impl GfeVectorField {
    pub fn new(base: GfeFunction, nodal_vectors: Vec<TangentVector>) -> Self {
        assert_eq!(nodal_vectors.len(), base.nodal_values.len());
        for (v, p) in nodal_vectors.iter().zip(base.nodal_values.iter()) {
            assert_eq!(
                v.base.coords, p.coords,
                "nodal vector base must equal the nodal value"
            );
        }
        Self {
            base,
            nodal_vectors,
        }
    }

    /// Zero field along `base`.
    pub fn zero(base: GfeFunction) -> Self {
        let nodal_vectors = base
            .nodal_values
            .iter()
            .map(|p| TangentVector::zero(p.clone()))
            .collect();
        Self {
            base,
            nodal_vectors,
        }
    }
}

/// Interpolate a nodal vector field at reference coordinates of an element:
/// the variation of the geodesic interpolant when the nodal values move
/// along the nodal vectors.
pub fn interpolate_vector_field(
    field: &GfeVectorField,
    element: usize,
    x_ref: &[f64],
) -> Result<TangentVector> {
    let ctx = ElementContext::new(&field.base, element);
    let kernel = ctx.kernel(x_ref)?;
    let vecs: Vec<DVector<f64>> = field.base.mesh.element_nodes[element]
        .iter()
        .map(|&i| field.nodal_vectors[i].vec.clone())
        .collect();
    let (v, _) = kernel.vector_field_jet(&vecs, false)?;
    Ok(TangentVector::new(
        kernel.value.clone(),
        kernel.coords_to_ambient(&v),
    ))
}

/// Per-element evaluation context: gathered nodal values and frames, shared
/// by all evaluation points of the element.
pub(crate) struct ElementContext {
    pub kind: ManifoldKind,
    pub mesh: Arc<Mesh>,
    pub element: usize,
    pub nodal: Vec<ManifoldPoint>,
    /// Curved targets only: nodal coordinates and tangent frames.
    nodal3: Vec<V3>,
    nodal_frames3: Vec<[V3; 2]>,
}

impl ElementContext {
    pub fn new(u: &GfeFunction, element: usize) -> Self {
        let nodal = u.element_values(element);
        let (nodal3, nodal_frames3) = if u.manifold.curvature() != 0.0 {
            let n3: Vec<V3> = nodal.iter().map(|p| arr3(&p.coords)).collect();
            let f3 = n3.iter().map(|p| fast::frame3(u.manifold, p)).collect();
            (n3, f3)
        } else {
            (Vec::new(), Vec::new())
        };
        Self {
            kind: u.manifold,
            mesh: u.mesh.clone(),
            element,
            nodal,
            nodal3,
            nodal_frames3,
        }
    }

    /// Evaluate the pointwise kernel at reference coordinates.
    pub fn kernel(&self, x_ref: &[f64]) -> Result<PointKernel<'_>> {
        let re = self.mesh.reference_element();
        let (lambda, grads_ref) = re.shape_values(x_ref)?;
        let geo = self.mesh.geometry(self.element);
        let d = self.mesh.dim();
        // physical shape gradients
        let dlambda: Vec<Vec<f64>> = grads_ref
            .iter()
            .map(|g| {
                (0..d)
                    .map(|a| (0..d).map(|b| geo.inv_jacobian_t[(a, b)] * g[b]).sum())
                    .collect()
            })
            .collect();

        if self.kind.curvature() == 0.0 {
            return self.flat_kernel(lambda, dlambda);
        }

        let kind = self.kind;
        let g0 = kind.g0();
        let state = curved_core(kind, &self.nodal3, &lambda)?;
        let frame = fast::frame3(kind, &state.point);

        // per-node frame data and the interpolation system
        let l = self.nodal3.len();
        let mut logs_f = Vec::with_capacity(l);
        let mut b_mats: Vec<M2> = Vec::with_capacity(l);
        let mut a = [[0.0f64; 2]; 2];
        for (i, pair) in state.pairs.iter().enumerate() {
            let log = pair.log();
            logs_f.push([
                fast::dot(g0, &log, &frame[0]),
                fast::dot(g0, &log, &frame[1]),
            ]);
            let mut b = [[0.0f64; 2]; 2];
            for (c, ec) in frame.iter().enumerate() {
                let col = pair.dlog_base_apply(ec);
                for (r, er) in frame.iter().enumerate() {
                    b[r][c] = fast::dot(g0, &col, er);
                }
            }
            for r in 0..2 {
                for c in 0..2 {
                    a[r][c] += lambda[i] * b[r][c];
                }
            }
            b_mats.push(b);
        }

        // closed-form smallest singular value of the 2x2 system
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let fro2 = a[0][0] * a[0][0] + a[0][1] * a[0][1] + a[1][0] * a[1][0] + a[1][1] * a[1][1];
        let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
        let sigma_min = (0.5 * (fro2 - disc)).max(0.0).sqrt();
        if sigma_min <= 0.0 || 1.0 / sigma_min > MAX_INVERSE_NORM {
            return Err(GfeError::SingularSystem {
                inv_norm: 1.0 / sigma_min.max(f64::MIN_POSITIVE),
            });
        }
        let a_inv = [
            [a[1][1] / det, -a[0][1] / det],
            [-a[1][0] / det, a[0][0] / det],
        ];

        // first derivatives: A du_alpha = - sum_i dlambda_i^alpha log_i
        let mut du_f = Vec::with_capacity(d);
        let mut du3 = Vec::with_capacity(d);
        for alpha in 0..d {
            let mut rhs = [0.0f64; 2];
            for (i, lf) in logs_f.iter().enumerate() {
                rhs[0] -= dlambda[i][alpha] * lf[0];
                rhs[1] -= dlambda[i][alpha] * lf[1];
            }
            let sol = mat2_apply(&a_inv, &rhs);
            let mut amb = fast::scaled(sol[0], &frame[0]);
            fast::axpy(&mut amb, sol[1], &frame[1]);
            du_f.push(sol);
            du3.push(amb);
        }

        Ok(PointKernel {
            ctx: self,
            lambda,
            dlambda,
            value: ManifoldPoint::new(dvec3(&state.point)),
            flat: false,
            frame,
            pairs: state.pairs,
            logs_f,
            b_mats,
            a_inv,
            du_f,
            du3,
            flat_du: Vec::new(),
            lambda_sum: 0.0,
        })
    }

    /// Flat targets: exact Lagrange interpolation, no iteration.
    fn flat_kernel(&self, lambda: Vec<f64>, dlambda: Vec<Vec<f64>>) -> Result<PointKernel<'_>> {
        let n = self.kind.ambient_dim();
        let d = self.mesh.dim();
        let lambda_sum: f64 = lambda.iter().sum();
        let mut avg = DVector::zeros(n);
        for (v, w) in self.nodal.iter().zip(lambda.iter()) {
            avg.axpy(*w, &v.coords, 1.0);
        }
        let value = ManifoldPoint::new(avg / lambda_sum);
        let mut flat_du = Vec::with_capacity(d);
        for alpha in 0..d {
            let mut g = DVector::zeros(n);
            for (dl, v) in dlambda.iter().zip(self.nodal.iter()) {
                g.axpy(dl[alpha], &(&v.coords - &value.coords), 1.0);
            }
            flat_du.push(g / lambda_sum);
        }
        Ok(PointKernel {
            ctx: self,
            lambda,
            dlambda,
            value,
            flat: true,
            frame: [[0.0; 3]; 2],
            pairs: Vec::new(),
            logs_f: Vec::new(),
            b_mats: Vec::new(),
            a_inv: [[0.0; 2]; 2],
            du_f: Vec::new(),
            du3: Vec::new(),
            flat_du,
            lambda_sum,
        })
    }
}

#[inline]
fn mat2_apply(m: &M2, v: &[f64; 2]) -> [f64; 2] {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

/// Everything the assembly routines need at one evaluation point of one
/// element: the interpolated value, an orthonormal tangent frame there, the
/// inverted interpolation system, the nodal log vectors and operator
/// matrices, and the physical derivatives of the interpolant.
///
/// Vector quantities are exposed in "kernel coordinates": components in the
/// tangent frame at the value on curved targets, plain ambient coordinates
/// on flat ones. Inner products are invariant either way.
pub(crate) struct PointKernel<'c> {
    pub ctx: &'c ElementContext,
    pub lambda: Vec<f64>,
    /// Physical shape-function gradients, `dlambda[i][alpha]`.
    pub dlambda: Vec<Vec<f64>>,
    pub value: ManifoldPoint,
    flat: bool,
    // curved data
    frame: [V3; 2],
    pairs: Vec<LogPair>,
    logs_f: Vec<[f64; 2]>,
    b_mats: Vec<M2>,
    a_inv: M2,
    du_f: Vec<[f64; 2]>,
    du3: Vec<V3>,
    // flat data
    flat_du: Vec<DVector<f64>>,
    lambda_sum: f64,
}

impl PointKernel<'_> {
    pub fn dim_domain(&self) -> usize {
        self.ctx.mesh.dim()
    }

    fn coord_dim(&self) -> usize {
        if self.flat {
            self.ctx.kind.ambient_dim()
        } else {
            2
        }
    }

    /// Kernel-coordinate vector to ambient coordinates.
    pub fn coords_to_ambient(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.flat {
            v.clone()
        } else {
            let mut out = fast::scaled(v[0], &self.frame[0]);
            fast::axpy(&mut out, v[1], &self.frame[1]);
            dvec3(&out)
        }
    }

    /// Energy density `sum_alpha |d^alpha u|^2` at the point.
    pub fn energy_density(&self) -> f64 {
        if self.flat {
            self.flat_du.iter().map(|g| g.dot(g)).sum()
        } else {
            self.du_f.iter().map(|g| g[0] * g[0] + g[1] * g[1]).sum()
        }
    }

    /// Physical derivatives as ambient tangent vectors.
    pub fn du_ambient(&self) -> Vec<TangentVector> {
        if self.flat {
            self.flat_du
                .iter()
                .map(|g| TangentVector::new(self.value.clone(), g.clone()))
                .collect()
        } else {
            self.du3
                .iter()
                .map(|g| TangentVector::new(self.value.clone(), dvec3(g)))
                .collect()
        }
    }

    /// Largest derivative norm over the domain directions.
    pub fn du_max_norm(&self) -> f64 {
        if self.flat {
            self.flat_du.iter().map(|g| g.norm()).fold(0.0, f64::max)
        } else {
            self.du_f
                .iter()
                .map(|g| (g[0] * g[0] + g[1] * g[1]).sqrt())
                .fold(0.0, f64::max)
        }
    }

    /// Interpolate a nodal vector field (ambient coordinates per element
    /// node) and optionally its covariant physical derivatives, in kernel
    /// coordinates.
    ///
    /// The field solves `A V = -sum_i lambda_i dlog_target_i V_i`; its
    /// derivative solves the same system with the x-differentiated
    /// right-hand side, which brings in the covariant derivatives of the
    /// dlog operators along `d^alpha u`.
    pub fn vector_field_jet(
        &self,
        nodal_vecs: &[DVector<f64>],
        with_derivatives: bool,
    ) -> Result<(DVector<f64>, Vec<DVector<f64>>)> {
        let d = self.dim_domain();
        if self.flat {
            // linear interpolation of the vectors
            let n = self.coord_dim();
            let mut v = DVector::zeros(n);
            for (vec, w) in nodal_vecs.iter().zip(self.lambda.iter()) {
                v.axpy(*w, vec, 1.0);
            }
            v /= self.lambda_sum;
            if !with_derivatives {
                return Ok((v, Vec::new()));
            }
            let mut dv = Vec::with_capacity(d);
            for alpha in 0..d {
                let mut g = DVector::zeros(n);
                let mut dl_sum = 0.0;
                for (dl, vec) in self.dlambda.iter().zip(nodal_vecs.iter()) {
                    g.axpy(dl[alpha], vec, 1.0);
                    dl_sum += dl[alpha];
                }
                g.axpy(-dl_sum, &v, 1.0);
                dv.push(g / self.lambda_sum);
            }
            return Ok((v, dv));
        }

        let g0 = self.ctx.kind.g0();
        let vecs3: Vec<V3> = nodal_vecs.iter().map(arr3).collect();
        let mut rhs = [0.0f64; 2];
        let mut dts: Vec<[f64; 2]> = Vec::with_capacity(vecs3.len());
        for (i, vi) in vecs3.iter().enumerate() {
            let dt = self.pairs[i].dlog_target_apply(vi);
            let dtf = [
                fast::dot(g0, &dt, &self.frame[0]),
                fast::dot(g0, &dt, &self.frame[1]),
            ];
            rhs[0] -= self.lambda[i] * dtf[0];
            rhs[1] -= self.lambda[i] * dtf[1];
            dts.push(dtf);
        }
        let v = mat2_apply(&self.a_inv, &rhs);
        if !with_derivatives {
            return Ok((DVector::from_row_slice(&v), Vec::new()));
        }

        let mut v_amb = fast::scaled(v[0], &self.frame[0]);
        fast::axpy(&mut v_amb, v[1], &self.frame[1]);
        let mut dv = Vec::with_capacity(d);
        for alpha in 0..d {
            let mut rhs = [0.0f64; 2];
            for i in 0..vecs3.len() {
                let dl = self.dlambda[i][alpha];
                rhs[0] -= dl * dts[i][0];
                rhs[1] -= dl * dts[i][1];
                let bv = mat2_apply(&self.b_mats[i], &v);
                rhs[0] -= dl * bv[0];
                rhs[1] -= dl * bv[1];
                let t3 = self.pairs[i].dlog_target_deriv_apply(&self.du3[alpha], &vecs3[i]);
                let t1 = self.pairs[i].dlog_base_deriv_apply(&self.du3[alpha], &v_amb);
                rhs[0] -= self.lambda[i] * fast::dot(g0, &t3, &self.frame[0]);
                rhs[1] -= self.lambda[i] * fast::dot(g0, &t3, &self.frame[1]);
                rhs[0] -= self.lambda[i] * fast::dot(g0, &t1, &self.frame[0]);
                rhs[1] -= self.lambda[i] * fast::dot(g0, &t1, &self.frame[1]);
            }
            let sol = mat2_apply(&self.a_inv, &rhs);
            dv.push(DVector::from_row_slice(&sol));
        }
        Ok((DVector::from_row_slice(&v), dv))
    }

    /// Covariant second derivatives of the interpolant, as kernel-coordinate
    /// vectors indexed by `(alpha, beta)`.
    pub fn second_derivatives(&self) -> Result<Vec<Vec<DVector<f64>>>> {
        let d = self.dim_domain();
        let geo = self.ctx.mesh.geometry(self.ctx.element);
        let re = self.ctx.mesh.reference_element();
        let hess_ref = re.shape_hessians();
        let inv_t = &geo.inv_jacobian_t;
        let n = self.coord_dim();

        let mut out = vec![vec![DVector::zeros(n); d]; d];
        for alpha in 0..d {
            for beta in 0..=alpha {
                let sol = if self.flat {
                    let mut rhs = DVector::zeros(n);
                    let mut hsum = 0.0;
                    for (i, v) in self.ctx.nodal.iter().enumerate() {
                        let hess_phys = inv_t * &hess_ref[i] * inv_t.transpose();
                        rhs.axpy(hess_phys[(alpha, beta)], &v.coords, 1.0);
                        hsum += hess_phys[(alpha, beta)];
                    }
                    rhs.axpy(-hsum, &self.value.coords, 1.0);
                    let mut dl_a = 0.0;
                    let mut dl_b = 0.0;
                    for i in 0..self.lambda.len() {
                        dl_a += self.dlambda[i][alpha];
                        dl_b += self.dlambda[i][beta];
                    }
                    rhs.axpy(-dl_b, &self.flat_du[alpha], 1.0);
                    rhs.axpy(-dl_a, &self.flat_du[beta], 1.0);
                    rhs / self.lambda_sum
                } else {
                    let g0 = self.ctx.kind.g0();
                    let mut rhs = [0.0f64; 2];
                    for i in 0..self.lambda.len() {
                        let hess_phys = inv_t * &hess_ref[i] * inv_t.transpose();
                        let h = hess_phys[(alpha, beta)];
                        rhs[0] -= h * self.logs_f[i][0];
                        rhs[1] -= h * self.logs_f[i][1];
                        let ba = mat2_apply(&self.b_mats[i], &self.du_f[alpha]);
                        let bb = mat2_apply(&self.b_mats[i], &self.du_f[beta]);
                        rhs[0] -= self.dlambda[i][beta] * ba[0] + self.dlambda[i][alpha] * bb[0];
                        rhs[1] -= self.dlambda[i][beta] * ba[1] + self.dlambda[i][alpha] * bb[1];
                        let t1 =
                            self.pairs[i].dlog_base_deriv_apply(&self.du3[beta], &self.du3[alpha]);
                        rhs[0] -= self.lambda[i] * fast::dot(g0, &t1, &self.frame[0]);
                        rhs[1] -= self.lambda[i] * fast::dot(g0, &t1, &self.frame[1]);
                    }
                    DVector::from_row_slice(&mat2_apply(&self.a_inv, &rhs))
                };
                out[alpha][beta] = sol.clone();
                out[beta][alpha] = sol;
            }
        }
        Ok(out)
    }

    /// Precomputed per-direction operators for nodal-basis variations: maps
    /// a field value `V` (kernel coordinates) to
    /// `sum_i dlambda_i^alpha dlog_base_i V + lambda_i (D dlog_base_i)(du_alpha, V)`.
    pub fn variation_ops(&self) -> VariationOps {
        let d = self.dim_domain();
        if self.flat {
            return VariationOps { c_ops: Vec::new() };
        }
        let g0 = self.ctx.kind.g0();
        let mut c_ops = Vec::with_capacity(d);
        for alpha in 0..d {
            let mut c = [[0.0f64; 2]; 2];
            for (col, basis) in self.frame.iter().enumerate() {
                let basis_f = [
                    if col == 0 { 1.0 } else { 0.0 },
                    if col == 1 { 1.0 } else { 0.0 },
                ];
                let mut img = [0.0f64; 2];
                for i in 0..self.lambda.len() {
                    let bv = mat2_apply(&self.b_mats[i], &basis_f);
                    img[0] += self.dlambda[i][alpha] * bv[0];
                    img[1] += self.dlambda[i][alpha] * bv[1];
                    let t1 = self.pairs[i].dlog_base_deriv_apply(&self.du3[alpha], basis);
                    img[0] += self.lambda[i] * fast::dot(g0, &t1, &self.frame[0]);
                    img[1] += self.lambda[i] * fast::dot(g0, &t1, &self.frame[1]);
                }
                c[0][col] = img[0];
                c[1][col] = img[1];
            }
            c_ops.push(c);
        }
        VariationOps { c_ops }
    }

    /// `sum_alpha <d^alpha u, grad_alpha V>` for the variation field of
    /// moving local node `i` along tangent direction `dir` at that node
    /// (`dir` indexes the node's frame on curved targets, the ambient axis
    /// on flat ones).
    pub fn variation_density(&self, ops: &VariationOps, i: usize, dir: usize) -> f64 {
        let d = self.dim_domain();
        if self.flat {
            // V = lambda_i e / s with constant e: grad_alpha V picks up only
            // the shape gradient
            let mut acc = 0.0;
            for alpha in 0..d {
                acc += self.flat_du[alpha][dir] * self.dlambda[i][alpha];
            }
            return acc / self.lambda_sum;
        }
        let g0 = self.ctx.kind.g0();
        let basis = &self.ctx.nodal_frames3[i][dir];
        let dt = self.pairs[i].dlog_target_apply(basis);
        let dt_f = [
            fast::dot(g0, &dt, &self.frame[0]),
            fast::dot(g0, &dt, &self.frame[1]),
        ];
        let v = mat2_apply(
            &self.a_inv,
            &[-self.lambda[i] * dt_f[0], -self.lambda[i] * dt_f[1]],
        );
        let mut v_amb = fast::scaled(v[0], &self.frame[0]);
        fast::axpy(&mut v_amb, v[1], &self.frame[1]);
        let mut acc = 0.0;
        for alpha in 0..d {
            let t3 = self.pairs[i].dlog_target_deriv_apply(&self.du3[alpha], basis);
            let cv = mat2_apply(&ops.c_ops[alpha], &v);
            let rhs = [
                -self.dlambda[i][alpha] * dt_f[0]
                    - self.lambda[i] * fast::dot(g0, &t3, &self.frame[0])
                    - cv[0],
                -self.dlambda[i][alpha] * dt_f[1]
                    - self.lambda[i] * fast::dot(g0, &t3, &self.frame[1])
                    - cv[1],
            ];
            let dv = mat2_apply(&self.a_inv, &rhs);
            acc += self.du_f[alpha][0] * dv[0] + self.du_f[alpha][1] * dv[1];
        }
        acc
    }

    /// Curvature pairing `sum_alpha <du, R(du, W) V>` for fields in kernel
    /// coordinates.
    pub fn curvature_pairing(&self, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let kappa = self.ctx.kind.curvature();
        if kappa == 0.0 {
            return 0.0;
        }
        let wv = w.dot(v);
        let mut acc = 0.0;
        for g in &self.du_f {
            let gv = g[0] * v[0] + g[1] * v[1];
            let gw = g[0] * w[0] + g[1] * w[1];
            let gg = g[0] * g[0] + g[1] * g[1];
            acc += kappa * (wv * gg - gv * gw);
        }
        acc
    }
}

/// Cached per-direction operators for `variation_density`.
pub(crate) struct VariationOps {
    c_ops: Vec<M2>,
}
