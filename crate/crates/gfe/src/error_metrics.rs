//! Intrinsic error measures between maps into a manifold: the `L^p`
//! distance, the first-order Sobolev half-metric built from covariant
//! derivatives of the pointwise log, smoothness descriptors replacing
//! Sobolev seminorms, and experimental convergence orders.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{GfeError, Result};
use crate::interpolation::{ElementContext, GfeFunction};
use crate::manifold::{arr3, fast, LogPair, ManifoldKind, ManifoldPoint, TangentVector};
use crate::mesh::{Mesh, QuadratureRule};

/// A map that can be sampled (with derivatives) at quadrature points of a
/// mesh. Implemented by discrete functions and by closed-form test maps.
pub trait FieldMap: Sync {
    fn manifold(&self) -> ManifoldKind;

    fn value(
        &self,
        mesh: &Mesh,
        element: usize,
        x_ref: &[f64],
        x_phys: &[f64],
    ) -> Result<ManifoldPoint>;

    /// Value and physical first derivatives.
    fn jet(
        &self,
        mesh: &Mesh,
        element: usize,
        x_ref: &[f64],
        x_phys: &[f64],
    ) -> Result<(ManifoldPoint, Vec<TangentVector>)>;

    /// Covariant second derivatives `(alpha, beta) -> grad_beta d^alpha u`,
    /// where available.
    fn hessian(
        &self,
        _mesh: &Mesh,
        _element: usize,
        _x_ref: &[f64],
        _x_phys: &[f64],
    ) -> Result<Vec<Vec<TangentVector>>> {
        Err(GfeError::Config(
            "second derivatives not available for this map".into(),
        ))
    }
}

impl FieldMap for GfeFunction {
    fn manifold(&self) -> ManifoldKind {
        self.manifold
    }

    fn value(
        &self,
        mesh: &Mesh,
        element: usize,
        x_ref: &[f64],
        x_phys: &[f64],
    ) -> Result<ManifoldPoint> {
        if std::ptr::eq(mesh, self.mesh.as_ref()) {
            self.evaluate(element, x_ref)
        } else {
            self.value_at_physical(x_phys)
        }
    }

    fn jet(
        &self,
        mesh: &Mesh,
        element: usize,
        x_ref: &[f64],
        x_phys: &[f64],
    ) -> Result<(ManifoldPoint, Vec<TangentVector>)> {
        if std::ptr::eq(mesh, self.mesh.as_ref()) {
            self.evaluate_jet(element, x_ref)
        } else {
            self.jet_at_physical(x_phys)
        }
    }

    fn hessian(
        &self,
        mesh: &Mesh,
        element: usize,
        x_ref: &[f64],
        x_phys: &[f64],
    ) -> Result<Vec<Vec<TangentVector>>> {
        let (element, x_ref) = if std::ptr::eq(mesh, self.mesh.as_ref()) {
            (element, x_ref.to_vec())
        } else {
            self.mesh.locate(x_phys)
        };
        let ctx = ElementContext::new(self, element);
        let kernel = ctx.kernel(&x_ref)?;
        let second = kernel.second_derivatives()?;
        Ok(second
            .iter()
            .map(|row| {
                row.iter()
                    .map(|v| TangentVector::new(kernel.value.clone(), kernel.coords_to_ambient(v)))
                    .collect()
            })
            .collect())
    }
}

type ValueFn = dyn Fn(&[f64]) -> ManifoldPoint + Send + Sync;
type JetFn = dyn Fn(&[f64]) -> (ManifoldPoint, Vec<TangentVector>) + Send + Sync;
type HessianFn = dyn Fn(&[f64]) -> Vec<Vec<TangentVector>> + Send + Sync;

/// A closed-form map given by physical-coordinate closures.
#[derive(Clone)]
pub struct AnalyticMap {
    pub manifold: ManifoldKind,
    value: Arc<ValueFn>,
    jet: Arc<JetFn>,
    hessian: Option<Arc<HessianFn>>,
}

impl AnalyticMap {
    pub fn new(
        manifold: ManifoldKind,
        value: impl Fn(&[f64]) -> ManifoldPoint + Send + Sync + 'static,
        jet: impl Fn(&[f64]) -> (ManifoldPoint, Vec<TangentVector>) + Send + Sync + 'static,
    ) -> Self {
        Self {
            manifold,
            value: Arc::new(value),
            jet: Arc::new(jet),
            hessian: None,
        }
    }

    pub fn with_hessian(
        mut self,
        hessian: impl Fn(&[f64]) -> Vec<Vec<TangentVector>> + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Arc::new(hessian));
        self
    }

    pub fn value_at(&self, x: &[f64]) -> ManifoldPoint {
        (self.value)(x)
    }

    pub fn jet_at(&self, x: &[f64]) -> (ManifoldPoint, Vec<TangentVector>) {
        (self.jet)(x)
    }
}

impl FieldMap for AnalyticMap {
    fn manifold(&self) -> ManifoldKind {
        self.manifold
    }

    fn value(&self, _: &Mesh, _: usize, _: &[f64], x_phys: &[f64]) -> Result<ManifoldPoint> {
        Ok((self.value)(x_phys))
    }

    fn jet(
        &self,
        _: &Mesh,
        _: usize,
        _: &[f64],
        x_phys: &[f64],
    ) -> Result<(ManifoldPoint, Vec<TangentVector>)> {
        Ok((self.jet)(x_phys))
    }

    fn hessian(
        &self,
        _: &Mesh,
        _: usize,
        _: &[f64],
        x_phys: &[f64],
    ) -> Result<Vec<Vec<TangentVector>>> {
        match &self.hessian {
            Some(h) => Ok(h(x_phys)),
            None => Err(GfeError::Config(
                "second derivatives not available for this map".into(),
            )),
        }
    }
}

fn integrate_elementwise<F>(mesh: &Mesh, quad: &QuadratureRule, f: F) -> Result<f64>
where
    F: Fn(usize, &[f64], &[f64]) -> Result<f64> + Sync,
{
    let per_element: Vec<f64> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| -> Result<f64> {
            let det = mesh.geometry(e).det_abs;
            let mut acc = 0.0;
            for (x, w) in quad.points.iter().zip(quad.weights.iter()) {
                let xp = mesh.to_physical(e, x);
                acc += w * det * f(e, x, &xp)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(per_element.iter().sum())
}

fn guard_pointwise_distance(kind: ManifoldKind, d: f64) -> Result<()> {
    if d >= kind.injectivity_radius() - crate::manifold::ANTIPODAL_TOL {
        Err(GfeError::AntipodalPair { dist: d })
    } else {
        Ok(())
    }
}

/// `L^p` distance: the `p`-th root of the integrated `p`-th power of the
/// pointwise geodesic distance, by quadrature on `mesh`.
pub fn lp_distance(
    u: &dyn FieldMap,
    v: &dyn FieldMap,
    mesh: &Mesh,
    quad: &QuadratureRule,
    p: f64,
) -> Result<f64> {
    let kind = u.manifold();
    let total = integrate_elementwise(mesh, quad, |e, x, xp| {
        let a = u.value(mesh, e, x, xp)?;
        let b = v.value(mesh, e, x, xp)?;
        let d = kind.dist(&a, &b);
        guard_pointwise_distance(kind, d)?;
        Ok(d.powf(p))
    })?;
    Ok(total.max(0.0).powf(1.0 / p))
}

/// First-order Sobolev half-metric: the integrated squared norm of the
/// covariant derivative of `x -> log_{u(x)} v(x)`, realized pointwise as
/// `dlog_target(u, v)(d^alpha v) + dlog_base(u, v)(d^alpha u)`.
pub fn d12_halfmetric(
    u: &dyn FieldMap,
    v: &dyn FieldMap,
    mesh: &Mesh,
    quad: &QuadratureRule,
) -> Result<f64> {
    let kind = u.manifold();
    let flat = kind.curvature() == 0.0;
    let total = integrate_elementwise(mesh, quad, |e, x, xp| {
        let (a, da) = u.jet(mesh, e, x, xp)?;
        let (b, db) = v.jet(mesh, e, x, xp)?;
        guard_pointwise_distance(kind, kind.dist(&a, &b))?;
        let mut acc = 0.0;
        if flat {
            for (ga, gb) in da.iter().zip(db.iter()) {
                let grad_log = &gb.vec - &ga.vec;
                acc += grad_log.dot(&grad_log);
            }
        } else {
            let g0 = kind.g0();
            let pair = LogPair::new(kind, &a, &b)?;
            for (ga, gb) in da.iter().zip(db.iter()) {
                let mut grad_log = pair.dlog_target_apply(&arr3(&gb.vec));
                let base = pair.dlog_base_apply(&arr3(&ga.vec));
                fast::axpy(&mut grad_log, 1.0, &base);
                acc += fast::dot(g0, &grad_log, &grad_log);
            }
        }
        Ok(acc)
    })?;
    Ok(total.max(0.0).sqrt())
}

/// Homogeneous smoothness descriptor of order `k` (0, 1, or 2) with
/// exponent `p`.
///
/// Order 0 measures distance to the map's value at the domain barycenter;
/// order 1 integrates `|du|^p`; order 2 adds the covariant second
/// derivatives and the product of two first derivatives. `p = infinity`
/// takes sample maxima instead of integrals (orders 0 and 1).
pub fn smoothness_descriptor(
    u: &dyn FieldMap,
    mesh: &Mesh,
    quad: &QuadratureRule,
    k: usize,
    p: f64,
) -> Result<f64> {
    let kind = u.manifold();
    match (k, p.is_infinite()) {
        (0, false) => {
            let center = mesh.domain.center();
            let (e0, xr0) = mesh.locate(&center);
            let q = u.value(mesh, e0, &xr0, &center)?;
            let total = integrate_elementwise(mesh, quad, |e, x, xp| {
                Ok(kind.dist(&u.value(mesh, e, x, xp)?, &q).powf(p))
            })?;
            Ok(total.max(0.0).powf(1.0 / p))
        }
        (0, true) => {
            let center = mesh.domain.center();
            let (e0, xr0) = mesh.locate(&center);
            let q = u.value(mesh, e0, &xr0, &center)?;
            sample_max(mesh, quad, |e, x, xp| {
                Ok(kind.dist(&u.value(mesh, e, x, xp)?, &q))
            })
        }
        (1, false) => {
            let total = integrate_elementwise(mesh, quad, |e, x, xp| {
                let (_, du) = u.jet(mesh, e, x, xp)?;
                Ok(du.iter().map(|g| kind.norm(g).powf(p)).sum())
            })?;
            Ok(total.max(0.0).powf(1.0 / p))
        }
        (1, true) => sample_max(mesh, quad, |e, x, xp| {
            let (_, du) = u.jet(mesh, e, x, xp)?;
            Ok(du.iter().map(|g| kind.norm(g)).fold(0.0, f64::max))
        }),
        (2, false) => {
            let total = integrate_elementwise(mesh, quad, |e, x, xp| {
                let (_, du) = u.jet(mesh, e, x, xp)?;
                let hess = u.hessian(mesh, e, x, xp)?;
                let mut acc = 0.0;
                for row in &hess {
                    for h in row {
                        acc += kind.norm(h).powf(p);
                    }
                }
                for ga in &du {
                    for gb in &du {
                        acc += (kind.norm(ga) * kind.norm(gb)).powf(p);
                    }
                }
                Ok(acc)
            })?;
            Ok(total.max(0.0).powf(1.0 / p))
        }
        _ => Err(GfeError::Config(format!(
            "unsupported smoothness descriptor order {k} with p = {p}"
        ))),
    }
}

fn sample_max<F>(mesh: &Mesh, quad: &QuadratureRule, f: F) -> Result<f64>
where
    F: Fn(usize, &[f64], &[f64]) -> Result<f64> + Sync,
{
    let per_element: Vec<f64> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| -> Result<f64> {
            let mut m: f64 = 0.0;
            for x in quad.points.iter() {
                let xp = mesh.to_physical(e, x);
                m = m.max(f(e, x, &xp)?);
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;
    Ok(per_element.iter().cloned().fold(0.0, f64::max))
}

/// Element-local ratio `h * sup|du| / sup_x d(u(x), Q)` with `Q` the nodal
/// value farthest from the element image, sampled at quadrature points.
/// Bounded uniformly over refinement for discrete functions.
pub fn inverse_estimate_ratio(
    u: &GfeFunction,
    element: usize,
    quad: &QuadratureRule,
) -> Result<f64> {
    let kind = u.manifold;
    let ctx = ElementContext::new(u, element);
    let mut values = Vec::with_capacity(quad.len());
    let mut sup_du: f64 = 0.0;
    for x in quad.points.iter() {
        let kernel = ctx.kernel(x)?;
        sup_du = sup_du.max(kernel.du_max_norm());
        values.push(kernel.value.clone());
    }
    // Q maximizes the zeroth-order descriptor over nodal values
    let theta0 = u.mesh.element_nodes[element]
        .iter()
        .map(|&n| {
            let q = &u.nodal_values[n];
            values
                .iter()
                .map(|v| kind.dist(v, q))
                .fold(0.0f64, f64::max)
        })
        .fold(0.0f64, f64::max);
    Ok(u.mesh.h * sup_du / theta0.max(1e-300))
}

/// One refinement level of an error study.
#[derive(Debug, Clone, Copy)]
pub struct ErrorSample {
    pub h: f64,
    pub d_l2: f64,
    pub d_12: f64,
    pub energy: f64,
}

/// An experimental order of convergence between two levels, or `Exact` when
/// the error has underflowed measurement precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EocEntry {
    Rate(f64),
    Exact,
}

impl EocEntry {
    pub fn rate(&self) -> Option<f64> {
        match self {
            EocEntry::Rate(r) => Some(*r),
            EocEntry::Exact => None,
        }
    }
}

impl fmt::Display for EocEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EocEntry::Rate(r) => write!(f, "{r:.3}"),
            EocEntry::Exact => write!(f, "exact"),
        }
    }
}

/// Error samples ordered by decreasing `h` with pairwise convergence orders.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub samples: Vec<ErrorSample>,
    pub eoc_l2: Vec<EocEntry>,
    pub eoc_d12: Vec<EocEntry>,
}

/// Threshold below which an error level counts as exact reproduction.
pub const EXACTNESS_FLOOR: f64 = 1e-14;

/// Pairwise log-ratio convergence orders of the error columns.
pub fn compute_eoc(samples: &[ErrorSample]) -> Result<ConvergenceReport> {
    if samples.len() < 2 {
        return Err(GfeError::Config("need at least 2 samples".into()));
    }
    for w in samples.windows(2) {
        if w[1].h >= w[0].h {
            return Err(GfeError::Config("h must be strictly decreasing".into()));
        }
    }
    let column = |get: fn(&ErrorSample) -> f64| -> Vec<EocEntry> {
        samples
            .windows(2)
            .map(|w| {
                let (e0, e1) = (get(&w[0]), get(&w[1]));
                if e0 <= EXACTNESS_FLOOR || e1 <= EXACTNESS_FLOOR {
                    EocEntry::Exact
                } else {
                    EocEntry::Rate((e0 / e1).ln() / (w[0].h / w[1].h).ln())
                }
            })
            .collect()
    };
    Ok(ConvergenceReport {
        samples: samples.to_vec(),
        eoc_l2: column(|s| s.d_l2),
        eoc_d12: column(|s| s.d_12),
    })
}
