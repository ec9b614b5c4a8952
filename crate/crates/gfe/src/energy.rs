//! Quadrature assembly of the harmonic energy, its first variation with
//! respect to free nodal values, and its second variation along interpolated
//! vector fields.
//!
//! The gradient is assembled analytically: the variation of the interpolant
//! when one nodal value moves along a tangent direction is an interpolated
//! vector field, and the chain rule contracts its covariant derivatives with
//! the derivatives of the function. Central finite differences of the
//! assembled energy serve as the test oracle.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::Result;
use crate::interpolation::{ElementContext, GfeFunction, GfeVectorField};
use crate::manifold::TangentVector;
use crate::mesh::QuadratureRule;

/// Total harmonic energy together with its per-element contributions.
#[derive(Debug, Clone)]
pub struct EnergyValue {
    pub total: f64,
    pub per_element: Vec<f64>,
}

/// One tangent vector per free node: the Riemannian gradient of the energy
/// with respect to the nodal values.
#[derive(Debug, Clone)]
pub struct NodalGradient {
    pub free_nodes: Vec<usize>,
    pub entries: Vec<TangentVector>,
}

impl NodalGradient {
    /// Euclidean norm over all entries.
    pub fn norm(&self, u: &GfeFunction) -> f64 {
        self.entries
            .iter()
            .map(|g| u.manifold.inner(g, g))
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    /// Largest absolute directional derivative over the free-node tangent
    /// basis.
    pub fn max_component(&self, u: &GfeFunction) -> f64 {
        let mut m: f64 = 0.0;
        for g in &self.entries {
            let frame = u.manifold.tangent_frame(&g.base);
            for e in &frame {
                m = m.max(u.manifold.ambient_inner(&g.vec, e).abs());
            }
        }
        m
    }
}

/// `1/2 integral |du|^2`, assembled elementwise with the given quadrature.
///
/// Per-element contributions are computed in parallel and reduced in element
/// order, so results do not depend on the thread count.
pub fn harmonic_energy(u: &GfeFunction, quad: &QuadratureRule) -> Result<EnergyValue> {
    let per_element: Vec<f64> = (0..u.mesh.num_elements())
        .into_par_iter()
        .map(|e| element_energy(u, e, quad))
        .collect::<Result<_>>()?;
    let total = per_element.iter().sum();
    Ok(EnergyValue { total, per_element })
}

fn element_energy(u: &GfeFunction, element: usize, quad: &QuadratureRule) -> Result<f64> {
    let ctx = ElementContext::new(u, element);
    let det = u.mesh.geometry(element).det_abs;
    let mut acc = 0.0;
    for (x, w) in quad.points.iter().zip(quad.weights.iter()) {
        let kernel = ctx.kernel(x)?;
        acc += 0.5 * w * det * kernel.energy_density();
    }
    Ok(acc)
}

/// Riemannian energy gradient with respect to the free nodal values.
///
/// Entry `j` is `d/dt J(u with node j moved along exp(t e))` at `t = 0` for
/// an orthonormal tangent basis `e` at node `j`.
pub fn energy_gradient(
    u: &GfeFunction,
    quad: &QuadratureRule,
    free_nodes: &[usize],
) -> Result<NodalGradient> {
    let kind = u.manifold;
    let dim = kind.dim();
    let mut slot = vec![usize::MAX; u.mesh.num_nodes()];
    for (s, &n) in free_nodes.iter().enumerate() {
        slot[n] = s;
    }

    // per-element contributions: (slot, frame coefficients)
    let contributions: Vec<Vec<(usize, DVector<f64>)>> = (0..u.mesh.num_elements())
        .into_par_iter()
        .map(|e| element_gradient(u, e, quad, &slot))
        .collect::<Result<_>>()?;

    let mut coeffs = vec![DVector::zeros(dim); free_nodes.len()];
    for elem in contributions {
        for (s, c) in elem {
            coeffs[s] += c;
        }
    }

    let entries = free_nodes
        .iter()
        .zip(coeffs.iter())
        .map(|(&n, c)| {
            let p = u.nodal_values[n].clone();
            let frame = kind.tangent_frame(&p);
            let mut vec = DVector::zeros(kind.ambient_dim());
            for (ci, e) in c.iter().zip(frame.iter()) {
                vec.axpy(*ci, e, 1.0);
            }
            TangentVector::new(p, vec)
        })
        .collect();

    Ok(NodalGradient {
        free_nodes: free_nodes.to_vec(),
        entries,
    })
}

fn element_gradient(
    u: &GfeFunction,
    element: usize,
    quad: &QuadratureRule,
    slot: &[usize],
) -> Result<Vec<(usize, DVector<f64>)>> {
    let kind = u.manifold;
    let dim = kind.dim();
    let det = u.mesh.geometry(element).det_abs;
    let ctx = ElementContext::new(u, element);
    let nodes = &u.mesh.element_nodes[element];

    let mut local: Vec<(usize, DVector<f64>)> = nodes
        .iter()
        .filter(|&&n| slot[n] != usize::MAX)
        .map(|&n| (slot[n], DVector::zeros(dim)))
        .collect();

    for (x, w) in quad.points.iter().zip(quad.weights.iter()) {
        let kernel = ctx.kernel(x)?;
        let ops = kernel.variation_ops();
        let mut cursor = 0;
        for (i, &n) in nodes.iter().enumerate() {
            if slot[n] == usize::MAX {
                continue;
            }
            let acc = &mut local[cursor].1;
            cursor += 1;
            for dir in 0..dim {
                acc[dir] += w * det * kernel.variation_density(&ops, i, dir);
            }
        }
    }
    Ok(local)
}

/// Second variation of the harmonic energy along two interpolated vector
/// fields: the covariant-gradient pairing minus the curvature term.
pub fn second_variation(
    u: &GfeFunction,
    v: &GfeVectorField,
    w: &GfeVectorField,
    quad: &QuadratureRule,
) -> Result<f64> {
    let (flat_term, curvature_term) = second_variation_parts(u, v, w, quad)?;
    Ok(flat_term + curvature_term)
}

/// The two contributions separately: `integral <grad V, grad W>` and
/// `-integral <du, R(du, W) V>`.
pub fn second_variation_parts(
    u: &GfeFunction,
    v: &GfeVectorField,
    w: &GfeVectorField,
    quad: &QuadratureRule,
) -> Result<(f64, f64)> {
    let kind = u.manifold;
    let kappa = kind.curvature();
    let parts: Vec<(f64, f64)> = (0..u.mesh.num_elements())
        .into_par_iter()
        .map(|e| -> Result<(f64, f64)> {
            let ctx = ElementContext::new(u, e);
            let det = u.mesh.geometry(e).det_abs;
            let nodes = &u.mesh.element_nodes[e];
            let vv: Vec<DVector<f64>> = nodes
                .iter()
                .map(|&i| v.nodal_vectors[i].vec.clone())
                .collect();
            let wv: Vec<DVector<f64>> = nodes
                .iter()
                .map(|&i| w.nodal_vectors[i].vec.clone())
                .collect();
            let mut flat = 0.0;
            let mut curv = 0.0;
            for (x, qw) in quad.points.iter().zip(quad.weights.iter()) {
                let kernel = ctx.kernel(x)?;
                let (vf, dvf) = kernel.vector_field_jet(&vv, true)?;
                let (wf, dwf) = kernel.vector_field_jet(&wv, true)?;
                let grad_pair: f64 = dvf.iter().zip(dwf.iter()).map(|(a, b)| a.dot(b)).sum();
                flat += qw * det * grad_pair;
                if kappa != 0.0 {
                    // <du, R(du, W) V> = k (<W, V>|du|^2 - <du, V><du, W>)
                    curv -= qw * det * kernel.curvature_pairing(&vf, &wf);
                }
            }
            Ok((flat, curv))
        })
        .collect::<Result<_>>()?;
    let flat_term = parts.iter().map(|p| p.0).sum();
    let curvature_term = parts.iter().map(|p| p.1).sum();
    Ok((flat_term, curvature_term))
}
