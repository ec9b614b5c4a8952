//! Shared oracles for the integration suites: an independently assembled
//! classical Lagrange FEM (dense matrices, direct solves) and a brute-force
//! Fréchet mean search. Both deliberately avoid the library's assembly
//! paths.

use gfe::manifold::{ManifoldKind, ManifoldPoint, TangentVector};
use gfe::mesh::{quadrature_for, Mesh, QuadratureRule};
use nalgebra::{DMatrix, DVector};

/// Dense classical Lagrange FEM on a mesh: stiffness matrix, Dirichlet
/// solve, and quadrature error norms for scalar-valued problems.
pub struct ClassicalFem {
    pub stiffness: DMatrix<f64>,
    pub quad: QuadratureRule,
}

impl ClassicalFem {
    pub fn assemble(mesh: &Mesh) -> Self {
        let quad = quadrature_for(mesh.dim(), 2 * mesh.order + 2).unwrap();
        let n = mesh.num_nodes();
        let mut k = DMatrix::zeros(n, n);
        let re = mesh.reference_element();
        for e in 0..mesh.num_elements() {
            let geo = mesh.geometry(e);
            let nodes = &mesh.element_nodes[e];
            for (x, w) in quad.points.iter().zip(quad.weights.iter()) {
                let (_, grads) = re.shape_values(x).unwrap();
                let phys: Vec<Vec<f64>> = grads
                    .iter()
                    .map(|g| {
                        (0..mesh.dim())
                            .map(|a| {
                                (0..mesh.dim())
                                    .map(|b| geo.inv_jacobian_t[(a, b)] * g[b])
                                    .sum()
                            })
                            .collect()
                    })
                    .collect();
                for (i, &gi) in nodes.iter().enumerate() {
                    for (j, &gj) in nodes.iter().enumerate() {
                        let dot: f64 = phys[i].iter().zip(phys[j].iter()).map(|(a, b)| a * b).sum();
                        k[(gi, gj)] += w * geo.det_abs * dot;
                    }
                }
            }
        }
        Self { stiffness: k, quad }
    }

    /// Dirichlet energy `u^T K u / 2` of nodal values.
    pub fn energy(&self, u: &DVector<f64>) -> f64 {
        0.5 * (u.transpose() * &self.stiffness * u)[(0, 0)]
    }

    /// Residual `K u` restricted to the free nodes.
    pub fn gradient(&self, u: &DVector<f64>, free: &[usize]) -> DVector<f64> {
        let r = &self.stiffness * u;
        DVector::from_iterator(free.len(), free.iter().map(|&i| r[i]))
    }

    /// Direct solve of the Dirichlet problem with boundary values taken
    /// from `u`.
    pub fn solve_dirichlet(&self, mesh: &Mesh, u_boundary: &DVector<f64>) -> DVector<f64> {
        let free = mesh.free_nodes();
        let n = mesh.num_nodes();
        let mut kff = DMatrix::zeros(free.len(), free.len());
        let mut rhs = DVector::zeros(free.len());
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                kff[(a, b)] = self.stiffness[(i, j)];
            }
            let mut s = 0.0;
            for j in 0..n {
                if mesh.is_boundary_node(j) {
                    s += self.stiffness[(i, j)] * u_boundary[j];
                }
            }
            rhs[a] = -s;
        }
        let uf = kff.lu().solve(&rhs).expect("stiffness block is SPD");
        let mut out = u_boundary.clone();
        for (a, &i) in free.iter().enumerate() {
            out[i] = uf[a];
        }
        out
    }

    /// Classical L2 and H1-seminorm errors of nodal values against a
    /// closed-form scalar solution with gradient.
    pub fn errors(
        &self,
        mesh: &Mesh,
        u: &DVector<f64>,
        exact: impl Fn(&[f64]) -> f64,
        exact_grad: impl Fn(&[f64]) -> Vec<f64>,
    ) -> (f64, f64) {
        let re = mesh.reference_element();
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for e in 0..mesh.num_elements() {
            let geo = mesh.geometry(e);
            let nodes = &mesh.element_nodes[e];
            for (x, w) in self.quad.points.iter().zip(self.quad.weights.iter()) {
                let xp = mesh.to_physical(e, x);
                let (vals, grads) = re.shape_values(x).unwrap();
                let mut uh = 0.0;
                let mut guh = vec![0.0; mesh.dim()];
                for (i, &gi) in nodes.iter().enumerate() {
                    uh += vals[i] * u[gi];
                    for a in 0..mesh.dim() {
                        let gphys: f64 = (0..mesh.dim())
                            .map(|b| geo.inv_jacobian_t[(a, b)] * grads[i][b])
                            .sum();
                        guh[a] += gphys * u[gi];
                    }
                }
                let diff = uh - exact(&xp);
                l2 += w * geo.det_abs * diff * diff;
                let ge = exact_grad(&xp);
                for a in 0..mesh.dim() {
                    let gd = guh[a] - ge[a];
                    h1 += w * geo.det_abs * gd * gd;
                }
            }
        }
        (l2.sqrt(), h1.sqrt())
    }
}

/// Brute-force weighted Fréchet mean on the sphere over a successively
/// refined tangent grid, final resolution 1e-4.
pub fn grid_search_mean(
    kind: ManifoldKind,
    values: &[ManifoldPoint],
    weights: &[f64],
) -> ManifoldPoint {
    let objective = |q: &ManifoldPoint| -> f64 {
        values
            .iter()
            .zip(weights)
            .map(|(v, w)| w * kind.dist(v, q).powi(2))
            .sum()
    };
    let mut center = values[0].clone();
    let mut half_width = 1.0f64;
    let mut res = 1e-2;
    loop {
        let frame = kind.tangent_frame(&center);
        let n = (half_width / res).ceil() as i64;
        let mut best = center.clone();
        let mut best_val = objective(&center);
        for i in -n..=n {
            for j in -n..=n {
                let vec = &frame[0] * (i as f64 * res) + &frame[1] * (j as f64 * res);
                let q = kind.exp(&center, &TangentVector::new(center.clone(), vec));
                let val = objective(&q);
                if val < best_val {
                    best_val = val;
                    best = q;
                }
            }
        }
        center = best;
        if res <= 1e-4 {
            return center;
        }
        half_width = 3.0 * res;
        res *= 0.1;
    }
}
