//! Geometry kernel for the three constant-curvature model targets:
//! Euclidean space, the unit sphere in ambient coordinates, and the
//! hyperboloid model of the hyperbolic plane.
//!
//! Points and tangent vectors are stored in extrinsic (embedded) coordinates.
//! All maps (distance, exp, log, parallel transport, curvature operator, and
//! the first and second differentials of the bivariate logarithm) have closed
//! forms here, which keeps them exactly isometric and cheap to evaluate.

use nalgebra::{DMatrix, DVector};

use crate::error::{GfeError, Result};

/// Residual tolerance for the embedding constraints.
pub const CONSTRAINT_TOL: f64 = 1e-12;

/// Distance to the cut locus below which sphere logs are rejected.
pub const ANTIPODAL_TOL: f64 = 1e-8;

/// A point on a model manifold, in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPoint {
    pub coords: DVector<f64>,
}

impl ManifoldPoint {
    pub fn new(coords: DVector<f64>) -> Self {
        Self { coords }
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        Self {
            coords: DVector::from_row_slice(coords),
        }
    }
}

/// A tangent vector attached to a base point, in ambient coordinates.
#[derive(Debug, Clone)]
pub struct TangentVector {
    pub base: ManifoldPoint,
    pub vec: DVector<f64>,
}

impl TangentVector {
    pub fn new(base: ManifoldPoint, vec: DVector<f64>) -> Self {
        Self { base, vec }
    }

    pub fn zero(base: ManifoldPoint) -> Self {
        let n = base.coords.len();
        Self {
            base,
            vec: DVector::zeros(n),
        }
    }
}

/// The supported target manifolds.
///
/// `Sphere2` is the unit sphere in `R^3` (curvature +1), `Hyperbolic2` the
/// upper hyperboloid sheet in Minkowski `R^{1,2}` (curvature -1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKind {
    Euclidean(usize),
    Sphere2,
    Hyperbolic2,
}

impl ManifoldKind {
    /// Dimension of the ambient coordinate space.
    pub fn ambient_dim(&self) -> usize {
        match self {
            ManifoldKind::Euclidean(n) => *n,
            ManifoldKind::Sphere2 | ManifoldKind::Hyperbolic2 => 3,
        }
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match self {
            ManifoldKind::Euclidean(n) => *n,
            ManifoldKind::Sphere2 | ManifoldKind::Hyperbolic2 => 2,
        }
    }

    /// Sectional curvature.
    pub fn curvature(&self) -> f64 {
        match self {
            ManifoldKind::Euclidean(_) => 0.0,
            ManifoldKind::Sphere2 => 1.0,
            ManifoldKind::Hyperbolic2 => -1.0,
        }
    }

    /// Sup norm of the curvature tensor.
    pub fn curvature_bound(&self) -> f64 {
        self.curvature().abs()
    }

    pub fn injectivity_radius(&self) -> f64 {
        match self {
            ManifoldKind::Sphere2 => std::f64::consts::PI,
            _ => f64::INFINITY,
        }
    }

    /// Well-posedness radius for geodesic interpolation: nodal values of one
    /// element must stay within this distance of the element's first node.
    pub fn interpolation_ball_radius(&self) -> f64 {
        let inj = 0.5 * self.injectivity_radius();
        let curv = if self.curvature_bound() > 0.0 {
            0.5 / self.curvature_bound().sqrt()
        } else {
            f64::INFINITY
        };
        inj.min(curv)
    }

    /// Ambient bilinear form: the Euclidean dot product, or the Minkowski
    /// form `-x0*y0 + x1*y1 + x2*y2` on the hyperboloid.
    pub fn ambient_inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        match self {
            ManifoldKind::Hyperbolic2 => -x[0] * y[0] + x[1] * y[1] + x[2] * y[2],
            _ => x.dot(y),
        }
    }

    /// Riemannian inner product of two tangent vectors at the same base point.
    pub fn inner(&self, v: &TangentVector, w: &TangentVector) -> f64 {
        self.ambient_inner(&v.vec, &w.vec)
    }

    /// Riemannian norm of a tangent vector.
    pub fn norm(&self, v: &TangentVector) -> f64 {
        self.ambient_inner(&v.vec, &v.vec).max(0.0).sqrt()
    }

    /// Residual of the embedding constraint at `p` (0 for valid points).
    pub fn constraint_residual(&self, p: &ManifoldPoint) -> f64 {
        match self {
            ManifoldKind::Euclidean(_) => 0.0,
            ManifoldKind::Sphere2 => (p.coords.dot(&p.coords) - 1.0).abs(),
            ManifoldKind::Hyperbolic2 => {
                let s = self.ambient_inner(&p.coords, &p.coords);
                let sheet = if p.coords[0] > 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                (s + 1.0).abs() + sheet
            }
        }
    }

    pub fn check_point(&self, p: &ManifoldPoint) -> Result<()> {
        let r = self.constraint_residual(p);
        if r <= CONSTRAINT_TOL {
            Ok(())
        } else {
            Err(GfeError::ConstraintViolation(r))
        }
    }

    /// Tangency residual of `v` at its base point.
    pub fn tangency_residual(&self, v: &TangentVector) -> f64 {
        match self {
            ManifoldKind::Euclidean(_) => 0.0,
            _ => self.ambient_inner(&v.base.coords, &v.vec).abs(),
        }
    }

    /// Project ambient coordinates back onto the constraint set.
    pub fn project_point(&self, coords: &DVector<f64>) -> ManifoldPoint {
        match self {
            ManifoldKind::Euclidean(_) => ManifoldPoint::new(coords.clone()),
            ManifoldKind::Sphere2 => {
                let n = coords.norm();
                ManifoldPoint::new(coords / n)
            }
            ManifoldKind::Hyperbolic2 => {
                let s = self.ambient_inner(coords, coords);
                let scale = (-s).max(f64::MIN_POSITIVE).sqrt();
                let mut c = coords / scale;
                if c[0] < 0.0 {
                    c = -c;
                }
                ManifoldPoint::new(c)
            }
        }
    }

    /// Project an ambient vector onto the tangent space at `p`.
    pub fn project_tangent(&self, p: &ManifoldPoint, w: &DVector<f64>) -> DVector<f64> {
        match self {
            ManifoldKind::Euclidean(_) => w.clone(),
            _ => {
                let k = self.curvature();
                let c = self.ambient_inner(&p.coords, w);
                w - &p.coords * (k * c)
            }
        }
    }

    /// Geodesic distance.
    pub fn dist(&self, p: &ManifoldPoint, q: &ManifoldPoint) -> f64 {
        match self {
            ManifoldKind::Euclidean(_) => (&q.coords - &p.coords).norm(),
            // chordal formulas, accurate for all separations
            _ => fast::dist3(*self, &arr3(&p.coords), &arr3(&q.coords)),
        }
    }

    /// Exponential map.
    pub fn exp(&self, p: &ManifoldPoint, v: &TangentVector) -> ManifoldPoint {
        match self {
            ManifoldKind::Euclidean(_) => ManifoldPoint::new(&p.coords + &v.vec),
            _ => ManifoldPoint::new(dvec3(&fast::exp3(*self, &arr3(&p.coords), &arr3(&v.vec)))),
        }
    }

    /// Logarithm map: the tangent vector at `p` pointing to `q` with length
    /// `dist(p, q)`. Fails near the cut locus on the sphere.
    pub fn log(&self, p: &ManifoldPoint, q: &ManifoldPoint) -> Result<TangentVector> {
        match self {
            ManifoldKind::Euclidean(_) => Ok(TangentVector::new(p.clone(), &q.coords - &p.coords)),
            _ => {
                let theta = self.dist(p, q);
                self.guard_cut_locus(theta)?;
                let k = self.curvature();
                let c = cos_like(k, theta);
                let w = &q.coords - &p.coords * c;
                let vec = self.project_tangent(p, &(w * phi(k, theta)));
                Ok(TangentVector::new(p.clone(), vec))
            }
        }
    }

    fn guard_cut_locus(&self, theta: f64) -> Result<()> {
        if theta >= self.injectivity_radius() - ANTIPODAL_TOL {
            Err(GfeError::AntipodalPair { dist: theta })
        } else {
            Ok(())
        }
    }

    /// Parallel transport of `v` along the geodesic from `p` to `q`.
    pub fn parallel_transport(
        &self,
        p: &ManifoldPoint,
        q: &ManifoldPoint,
        v: &TangentVector,
    ) -> Result<TangentVector> {
        match self {
            ManifoldKind::Euclidean(_) => Ok(TangentVector::new(q.clone(), v.vec.clone())),
            _ => {
                let theta = self.dist(p, q);
                self.guard_cut_locus(theta)?;
                let k = self.curvature();
                let c = cos_like(k, theta);
                let factor = k * self.ambient_inner(&v.vec, &q.coords) / (1.0 + c);
                let w = &v.vec - (&p.coords + &q.coords) * factor;
                Ok(TangentVector::new(q.clone(), self.project_tangent(q, &w)))
            }
        }
    }

    /// Curvature operator `R(x, y) z` in the constant-curvature closed form
    /// `k * (<y, z> x - <x, z> y)`.
    pub fn curvature_op(
        &self,
        _p: &ManifoldPoint,
        x: &TangentVector,
        y: &TangentVector,
        z: &TangentVector,
    ) -> TangentVector {
        let k = self.curvature();
        let vec = &x.vec * (k * self.ambient_inner(&y.vec, &z.vec))
            - &y.vec * (k * self.ambient_inner(&x.vec, &z.vec));
        TangentVector::new(x.base.clone(), vec)
    }

    /// Differential of `log_p q` with respect to the target point `q`, as an
    /// ambient matrix acting on tangent vectors at `q` with values in `T_p M`.
    ///
    /// Components along the geodesic are transported unchanged; orthogonal
    /// components pick up the Jacobi-field factor `theta/sin(theta)` (sphere)
    /// or `theta/sinh(theta)` (hyperboloid).
    pub fn dlog_target(&self, p: &ManifoldPoint, q: &ManifoldPoint) -> Result<DMatrix<f64>> {
        let n = self.ambient_dim();
        match self {
            ManifoldKind::Euclidean(_) => Ok(DMatrix::identity(n, n)),
            _ => {
                let sc = self.log_scalars(p, q)?;
                let w = &q.coords - &p.coords * sc.c;
                // phi' * k * (q - c p) p^T G + phi * (I - k p p^T G)
                let gp = self.metric_apply(&p.coords);
                let mut m = DMatrix::identity(n, n) * sc.phi;
                m.gerc(-sc.phi * sc.k, &p.coords, &gp, 1.0);
                m.gerc(sc.dphi * sc.k, &w, &gp, 1.0);
                Ok(m)
            }
        }
    }

    /// Differential of `log_p q` with respect to the base point `p`, as an
    /// ambient matrix on `T_p M`. Equals `-I` to leading order; along the
    /// geodesic the factor is exactly -1, orthogonal to it the factor is
    /// `-theta*cot(theta)` (sphere) or `-theta*coth(theta)` (hyperboloid).
    pub fn dlog_base(&self, p: &ManifoldPoint, q: &ManifoldPoint) -> Result<DMatrix<f64>> {
        let n = self.ambient_dim();
        match self {
            ManifoldKind::Euclidean(_) => Ok(-DMatrix::identity(n, n)),
            _ => {
                let sc = self.log_scalars(p, q)?;
                let w = &q.coords - &p.coords * sc.c;
                // phi' * k * (q - c p) q^T G - c phi * (I - k p p^T G)
                let gq = self.metric_apply(&q.coords);
                let gp = self.metric_apply(&p.coords);
                let mut m = DMatrix::identity(n, n) * (-sc.c * sc.phi);
                m.gerc(sc.c * sc.phi * sc.k, &p.coords, &gp, 1.0);
                m.gerc(sc.dphi * sc.k, &w, &gq, 1.0);
                Ok(m)
            }
        }
    }

    /// Covariant derivative of the operator `p -> dlog_base(p, q)` in the
    /// base direction `x`, applied to `z in T_p M`.
    pub fn dlog_base_deriv(
        &self,
        p: &ManifoldPoint,
        q: &ManifoldPoint,
        x: &DVector<f64>,
        z: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        match self {
            ManifoldKind::Euclidean(n) => Ok(DVector::zeros(*n)),
            _ => {
                let sc = self.log_scalars(p, q)?;
                let k = sc.k;
                let xq = k * self.ambient_inner(x, &q.coords);
                let zq = k * self.ambient_inner(z, &q.coords);
                let zx = k * self.ambient_inner(z, x);
                let w = &q.coords - &p.coords * sc.c;
                let out = &w * (sc.ddphi * xq * zq - sc.c * sc.dphi * zx)
                    - x * (sc.c * sc.dphi * zq)
                    - z * (xq * (sc.phi + sc.c * sc.dphi));
                Ok(out)
            }
        }
    }

    /// Covariant derivative of the operator `p -> dlog_target(p, q)` in the
    /// base direction `x`, applied to a fixed `w in T_q M`.
    pub fn dlog_target_deriv(
        &self,
        p: &ManifoldPoint,
        q: &ManifoldPoint,
        x: &DVector<f64>,
        w: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        match self {
            ManifoldKind::Euclidean(n) => Ok(DVector::zeros(*n)),
            _ => {
                let sc = self.log_scalars(p, q)?;
                let k = sc.k;
                let xq = k * self.ambient_inner(x, &q.coords);
                let pw = k * self.ambient_inner(&p.coords, w);
                let xw = k * self.ambient_inner(x, w);
                let qcp = &q.coords - &p.coords * sc.c;
                let w_tan = w - &p.coords * pw;
                let out = &qcp * (sc.ddphi * xq * pw + sc.dphi * xw) + w_tan * (sc.dphi * xq)
                    - x * ((sc.c * sc.dphi + sc.phi) * pw);
                Ok(out)
            }
        }
    }

    /// Logarithm on the tangent bundle with the horizontal-lift structure:
    /// returns `(log_p q, dlog_target(vq) + dlog_base(vp))`, both at `p`.
    pub fn hlog(
        &self,
        p: &ManifoldPoint,
        vp: &TangentVector,
        q: &ManifoldPoint,
        vq: &TangentVector,
    ) -> Result<(TangentVector, TangentVector)> {
        let base = self.log(p, q)?;
        let dt = self.dlog_target(p, q)?;
        let db = self.dlog_base(p, q)?;
        let vec = dt * &vq.vec + db * &vp.vec;
        Ok((base, TangentVector::new(p.clone(), vec)))
    }

    /// A B-orthonormal basis of the tangent space at `p`.
    pub fn tangent_frame(&self, p: &ManifoldPoint) -> Vec<DVector<f64>> {
        match self {
            ManifoldKind::Euclidean(n) => (0..*n)
                .map(|i| {
                    let mut e = DVector::zeros(*n);
                    e[i] = 1.0;
                    e
                })
                .collect(),
            _ => fast::frame3(*self, &arr3(&p.coords))
                .iter()
                .map(dvec3)
                .collect(),
        }
    }

    /// Metric sign of the first ambient coordinate (-1 on the hyperboloid).
    pub(crate) fn g0(&self) -> f64 {
        match self {
            ManifoldKind::Hyperbolic2 => -1.0,
            _ => 1.0,
        }
    }

    /// Apply the ambient metric matrix (identity, or the Minkowski signature).
    fn metric_apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            ManifoldKind::Hyperbolic2 => {
                let mut y = x.clone();
                y[0] = -y[0];
                y
            }
            _ => x.clone(),
        }
    }

    /// Scalar data for the log differentials at a pair `(p, q)`.
    pub(crate) fn log_scalars(&self, p: &ManifoldPoint, q: &ManifoldPoint) -> Result<LogScalars> {
        let theta = self.dist(p, q);
        self.guard_cut_locus(theta)?;
        let k = self.curvature();
        if k == 0.0 {
            return Ok(LogScalars {
                k,
                theta,
                c: 1.0,
                phi: 1.0,
                dphi: 0.0,
                ddphi: 0.0,
            });
        }
        Ok(LogScalars {
            k,
            theta,
            c: cos_like(k, theta),
            phi: phi(k, theta),
            dphi: phi_d1(k, theta),
            ddphi: phi_d2(k, theta),
        })
    }
}

/// Cached geometry of one ordered pair `(p, q)`: the scalar coefficients of
/// the log differentials plus the chord `w = q - c p`. All the pointwise
/// operators the interpolation kernel needs evaluate through this without
/// recomputing distances or trigonometry.
///
/// The formulas are uniform in the curvature sign; for the flat case the
/// scalars reduce them exactly to `log = q - p`, `dlog_base = -I`,
/// `dlog_target = I`, and vanishing derivative tensors.
#[derive(Debug, Clone)]
pub(crate) struct LogPair {
    /// Metric sign of the first ambient coordinate: -1 on the hyperboloid.
    pub g0: f64,
    pub p: V3,
    pub q: V3,
    pub sc: LogScalars,
    /// `q - c p`, the unnormalized log direction.
    pub w: V3,
}

/// Fixed-size ambient vectors of the curved model targets.
pub(crate) type V3 = [f64; 3];

pub(crate) fn arr3(v: &DVector<f64>) -> V3 {
    [v[0], v[1], v[2]]
}

pub(crate) fn dvec3(a: &V3) -> DVector<f64> {
    DVector::from_row_slice(a)
}

/// Allocation-free geometry on the curved targets; the double-precision
/// source of truth stays in the `ManifoldKind` methods, which these mirror
/// (cross-checked in the tests).
pub(crate) mod fast {
    use super::{cos_like_and_sinc, ManifoldKind, V3};

    #[inline]
    pub fn dot(g0: f64, a: &V3, b: &V3) -> f64 {
        g0 * a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    #[inline]
    pub fn axpy(y: &mut V3, a: f64, x: &V3) {
        y[0] += a * x[0];
        y[1] += a * x[1];
        y[2] += a * x[2];
    }

    #[inline]
    pub fn scaled(a: f64, x: &V3) -> V3 {
        [a * x[0], a * x[1], a * x[2]]
    }

    /// Geodesic distance between two points on a curved target.
    pub fn dist3(kind: ManifoldKind, a: &V3, b: &V3) -> f64 {
        let g0 = kind.g0();
        let diff = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let s = dot(g0, &diff, &diff).max(0.0).sqrt();
        if kind.curvature() > 0.0 {
            2.0 * (0.5 * s).clamp(-1.0, 1.0).asin()
        } else {
            2.0 * (0.5 * s).asinh()
        }
    }

    /// Exponential map on a curved target, re-projected onto the constraint.
    pub fn exp3(kind: ManifoldKind, p: &V3, v: &V3) -> V3 {
        let g0 = kind.g0();
        let k = kind.curvature();
        let t = dot(g0, v, v).max(0.0).sqrt();
        let (c, sinc) = cos_like_and_sinc(k, t);
        let mut r = scaled(c, p);
        axpy(&mut r, sinc, v);
        // constraint projection
        let n2 = (k * dot(g0, &r, &r)).max(f64::MIN_POSITIVE).sqrt();
        let mut out = scaled(1.0 / n2, &r);
        if k < 0.0 && out[0] < 0.0 {
            out = scaled(-1.0, &out);
        }
        out
    }

    /// Orthonormal tangent frame at a point of a curved target.
    pub fn frame3(kind: ManifoldKind, p: &V3) -> [V3; 2] {
        if kind.curvature() > 0.0 {
            let i = if p[0].abs() <= p[1].abs() && p[0].abs() <= p[2].abs() {
                0
            } else if p[1].abs() <= p[2].abs() {
                1
            } else {
                2
            };
            let mut e1 = scaled(-p[i], p);
            e1[i] += 1.0;
            let n = dot(1.0, &e1, &e1).sqrt();
            let e1 = scaled(1.0 / n, &e1);
            let e2 = [
                p[1] * e1[2] - p[2] * e1[1],
                p[2] * e1[0] - p[0] * e1[2],
                p[0] * e1[1] - p[1] * e1[0],
            ];
            [e1, e2]
        } else {
            let g0 = -1.0;
            let axes = if p[1].abs() <= p[2].abs() {
                [1, 2]
            } else {
                [2, 1]
            };
            let mut frame = [[0.0; 3]; 2];
            for (slot, &i) in axes.iter().enumerate() {
                let mut a = [0.0; 3];
                a[i] = 1.0;
                let t = dot(g0, &a, p);
                let mut v = a;
                axpy(&mut v, t, p);
                for prev in frame.iter().take(slot) {
                    let c = dot(g0, &v, prev);
                    axpy(&mut v, -c, prev);
                }
                let n = dot(g0, &v, &v).sqrt();
                frame[slot] = scaled(1.0 / n, &v);
            }
            frame
        }
    }
}

impl LogPair {
    pub fn new(kind: ManifoldKind, p: &ManifoldPoint, q: &ManifoldPoint) -> Result<Self> {
        debug_assert!(kind.curvature() != 0.0, "log pairs are for curved targets");
        Self::new3(kind, &arr3(&p.coords), &arr3(&q.coords))
    }

    pub fn new3(kind: ManifoldKind, p: &V3, q: &V3) -> Result<Self> {
        let g0 = kind.g0();
        let theta = fast::dist3(kind, p, q);
        if theta >= kind.injectivity_radius() - ANTIPODAL_TOL {
            return Err(GfeError::AntipodalPair { dist: theta });
        }
        let k = kind.curvature();
        let sc = LogScalars {
            k,
            theta,
            c: cos_like(k, theta),
            phi: phi(k, theta),
            dphi: phi_d1(k, theta),
            ddphi: phi_d2(k, theta),
        };
        let mut w = *q;
        fast::axpy(&mut w, -sc.c, p);
        Ok(Self {
            g0,
            p: *p,
            q: *q,
            sc,
            w,
        })
    }

    #[inline]
    fn kip(&self, x: &V3, y: &V3) -> f64 {
        self.sc.k * fast::dot(self.g0, x, y)
    }

    pub fn dist(&self) -> f64 {
        self.sc.theta
    }

    /// `log_p q` in ambient coordinates.
    pub fn log(&self) -> V3 {
        fast::scaled(self.sc.phi, &self.w)
    }

    /// `dlog_base(p, q)` applied to `x in T_p M`.
    pub fn dlog_base_apply(&self, x: &V3) -> V3 {
        let sc = &self.sc;
        let mut out = fast::scaled(sc.dphi * self.kip(&self.q, x), &self.w);
        fast::axpy(&mut out, -sc.c * sc.phi, x);
        out
    }

    /// `dlog_target(p, q)` applied to `w in T_q M`.
    pub fn dlog_target_apply(&self, wv: &V3) -> V3 {
        let sc = &self.sc;
        let pw = self.kip(&self.p, wv);
        let mut out = fast::scaled(sc.dphi * pw, &self.w);
        fast::axpy(&mut out, sc.phi, wv);
        fast::axpy(&mut out, -sc.phi * pw, &self.p);
        out
    }

    /// Covariant derivative of `dlog_base` in base direction `x`, applied to
    /// `z in T_p M`.
    pub fn dlog_base_deriv_apply(&self, x: &V3, z: &V3) -> V3 {
        let sc = &self.sc;
        let xq = self.kip(x, &self.q);
        let zq = self.kip(z, &self.q);
        let zx = self.kip(z, x);
        let mut out = fast::scaled(sc.ddphi * xq * zq - sc.c * sc.dphi * zx, &self.w);
        fast::axpy(&mut out, -sc.c * sc.dphi * zq, x);
        fast::axpy(&mut out, -xq * (sc.phi + sc.c * sc.dphi), z);
        out
    }

    /// Covariant derivative of `dlog_target` in base direction `x`, applied
    /// to a fixed `w in T_q M`.
    pub fn dlog_target_deriv_apply(&self, x: &V3, wv: &V3) -> V3 {
        let sc = &self.sc;
        let xq = self.kip(x, &self.q);
        let pw = self.kip(&self.p, wv);
        let xw = self.kip(x, wv);
        let mut out = fast::scaled(sc.ddphi * xq * pw + sc.dphi * xw, &self.w);
        fast::axpy(&mut out, sc.dphi * xq, wv);
        fast::axpy(&mut out, -sc.dphi * xq * pw, &self.p);
        fast::axpy(&mut out, -(sc.c * sc.dphi + sc.phi) * pw, x);
        out
    }
}

/// Cached scalar coefficients of the bivariate log differentials.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogScalars {
    pub k: f64,
    #[allow(dead_code)]
    pub theta: f64,
    pub c: f64,
    pub phi: f64,
    pub dphi: f64,
    pub ddphi: f64,
}

/// `cos(theta)` for curvature +1, `cosh(theta)` for curvature -1.
fn cos_like(k: f64, theta: f64) -> f64 {
    if k > 0.0 {
        theta.cos()
    } else {
        theta.cosh()
    }
}

/// `sin(theta)` / `sinh(theta)`.
fn sin_like(k: f64, theta: f64) -> f64 {
    if k > 0.0 {
        theta.sin()
    } else {
        theta.sinh()
    }
}

/// `(cos_like(t), sin_like(t)/t)` with the removable singularity handled.
fn cos_like_and_sinc(k: f64, t: f64) -> (f64, f64) {
    if t < 1e-9 {
        (1.0 - k * t * t / 2.0, 1.0 - k * t * t / 6.0)
    } else {
        (cos_like(k, t), sin_like(k, t) / t)
    }
}

/// `phi(theta) = theta / sin_like(theta)`, the radial log coefficient.
fn phi(k: f64, theta: f64) -> f64 {
    if theta < 1e-9 {
        1.0 + k * theta * theta / 6.0
    } else {
        theta / sin_like(k, theta)
    }
}

/// Derivative of `phi` with respect to `c = cos_like(theta)`.
///
/// Closed form `(theta c - s) / (k s^3)`; series below the switch point where
/// the numerator cancels.
fn phi_d1(k: f64, theta: f64) -> f64 {
    if theta < 0.05 {
        let t2 = k * theta * theta;
        -1.0 / 3.0 - t2 * (2.0 / 15.0) - t2 * t2 * (2.0 / 63.0)
    } else {
        let s = sin_like(k, theta);
        let c = cos_like(k, theta);
        (theta * c - s) / (k * s * s * s)
    }
}

/// Second derivative of `phi` with respect to `c`.
fn phi_d2(k: f64, theta: f64) -> f64 {
    if theta < 0.05 {
        let t2 = k * theta * theta;
        4.0 / 15.0 + t2 * (6.0 / 35.0) - t2 * t2 * (353.0 / 37800.0)
    } else {
        let s = sin_like(k, theta);
        let c = cos_like(k, theta);
        (k * theta * s * s + 3.0 * theta * c * c - 3.0 * s * c) / (k * k * s.powi(5))
    }
}

/// Seeded sampling of random points and tangent vectors, used by tests and
/// the randomized benchmark checks.
pub mod sampling {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Uniform-ish random point: uniform on the sphere, a normal-tangent
    /// exponential around a base point on the hyperboloid, standard normal
    /// coordinates in Euclidean space.
    pub fn random_point<R: Rng>(kind: ManifoldKind, rng: &mut R) -> ManifoldPoint {
        match kind {
            ManifoldKind::Euclidean(n) => {
                let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
                ManifoldPoint::from_slice(&v)
            }
            ManifoldKind::Sphere2 => {
                let v: Vec<f64> = (0..3).map(|_| StandardNormal.sample(rng)).collect();
                kind.project_point(&DVector::from_row_slice(&v))
            }
            ManifoldKind::Hyperbolic2 => {
                let origin = ManifoldPoint::from_slice(&[1.0, 0.0, 0.0]);
                let v = random_tangent(kind, rng, &origin, 1.0);
                kind.exp(&origin, &v)
            }
        }
    }

    /// Random tangent vector at `p` with norm at most `max_norm`.
    pub fn random_tangent<R: Rng>(
        kind: ManifoldKind,
        rng: &mut R,
        p: &ManifoldPoint,
        max_norm: f64,
    ) -> TangentVector {
        let frame = kind.tangent_frame(p);
        let mut vec = DVector::zeros(kind.ambient_dim());
        for e in &frame {
            let c: f64 = StandardNormal.sample(rng);
            vec += e * c;
        }
        let norm = kind.ambient_inner(&vec, &vec).max(f64::MIN_POSITIVE).sqrt();
        let scale = rng.random_range(0.0..max_norm) / norm;
        TangentVector::new(p.clone(), vec * scale)
    }

    /// Random point within geodesic distance `radius` of `p`.
    pub fn random_point_near<R: Rng>(
        kind: ManifoldKind,
        rng: &mut R,
        p: &ManifoldPoint,
        radius: f64,
    ) -> ManifoldPoint {
        let v = random_tangent(kind, rng, p, radius);
        kind.exp(p, &v)
    }
}
