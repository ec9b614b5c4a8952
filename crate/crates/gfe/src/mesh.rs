//! Conforming simplicial grids on intervals and axis-aligned rectangles,
//! Lagrange reference elements of order 1 and 2, affine element maps, and
//! Gauss quadrature on the reference simplex.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{GfeError, Result};

/// The computational domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rect { .. } => 2,
        }
    }

    pub fn unit_interval() -> Self {
        Domain::Interval { a: 0.0, b: 1.0 }
    }

    pub fn unit_square() -> Self {
        Domain::Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 1.0,
            y1: 1.0,
        }
    }

    /// Barycenter of the domain.
    pub fn center(&self) -> Vec<f64> {
        match *self {
            Domain::Interval { a, b } => vec![0.5 * (a + b)],
            Domain::Rect { x0, y0, x1, y1 } => vec![0.5 * (x0 + x1), 0.5 * (y0 + y1)],
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Domain::Interval { a, b } => b > a,
            Domain::Rect { x0, y0, x1, y1 } => x1 > x0 && y1 > y0,
        };
        if ok {
            Ok(())
        } else {
            Err(GfeError::InvalidDomain(format!("{self:?}")))
        }
    }
}

/// Lagrange nodes and shape functions of order `order` on the reference
/// simplex (the unit interval or the unit triangle).
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub dim: usize,
    pub order: usize,
    /// Lagrange node coordinates in the reference simplex.
    pub nodes: Vec<Vec<f64>>,
}

impl ReferenceElement {
    pub fn new(dim: usize, order: usize) -> Self {
        assert!((1..=2).contains(&dim) && (1..=2).contains(&order));
        let nodes: Vec<Vec<f64>> = match (dim, order) {
            (1, 1) => vec![vec![0.0], vec![1.0]],
            (1, 2) => vec![vec![0.0], vec![0.5], vec![1.0]],
            (2, 1) => vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            (2, 2) => vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.5, 0.0],
                vec![0.5, 0.5],
                vec![0.0, 0.5],
            ],
            _ => unreachable!(),
        };
        Self { dim, order, nodes }
    }

    /// Number of Lagrange nodes per element.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn barycentric(&self, x: &[f64]) -> Vec<f64> {
        match self.dim {
            1 => vec![1.0 - x[0], x[0]],
            _ => vec![1.0 - x[0] - x[1], x[0], x[1]],
        }
    }

    /// Shape function values and reference gradients at `x`.
    ///
    /// The values form a partition of unity and the gradients sum to zero.
    pub fn shape_values(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let bary = self.barycentric(x);
        let min = bary.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-12 {
            return Err(GfeError::OutsideElement(min));
        }
        Ok((
            self.values_unchecked(&bary),
            self.gradients_unchecked(&bary),
        ))
    }

    fn values_unchecked(&self, b: &[f64]) -> Vec<f64> {
        match (self.dim, self.order) {
            (1, 1) => vec![b[0], b[1]],
            (1, 2) => vec![
                b[0] * (2.0 * b[0] - 1.0),
                4.0 * b[0] * b[1],
                b[1] * (2.0 * b[1] - 1.0),
            ],
            (2, 1) => vec![b[0], b[1], b[2]],
            (2, 2) => vec![
                b[0] * (2.0 * b[0] - 1.0),
                b[1] * (2.0 * b[1] - 1.0),
                b[2] * (2.0 * b[2] - 1.0),
                4.0 * b[0] * b[1],
                4.0 * b[1] * b[2],
                4.0 * b[2] * b[0],
            ],
            _ => unreachable!(),
        }
    }

    fn gradients_unchecked(&self, b: &[f64]) -> Vec<Vec<f64>> {
        // gradients of the barycentric coordinates in reference coordinates
        match (self.dim, self.order) {
            (1, 1) => vec![vec![-1.0], vec![1.0]],
            (1, 2) => vec![
                vec![1.0 - 4.0 * b[0]],
                vec![4.0 * (b[0] - b[1])],
                vec![4.0 * b[1] - 1.0],
            ],
            (2, 1) => vec![vec![-1.0, -1.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            (2, 2) => {
                let db = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
                let vertex = |i: usize| {
                    let f = 4.0 * b[i] - 1.0;
                    vec![f * db[i][0], f * db[i][1]]
                };
                let edge = |i: usize, j: usize| {
                    vec![
                        4.0 * (b[j] * db[i][0] + b[i] * db[j][0]),
                        4.0 * (b[j] * db[i][1] + b[i] * db[j][1]),
                    ]
                };
                vec![
                    vertex(0),
                    vertex(1),
                    vertex(2),
                    edge(0, 1),
                    edge(1, 2),
                    edge(2, 0),
                ]
            }
            _ => unreachable!(),
        }
    }

    /// Second derivatives of the shape functions in reference coordinates,
    /// one `dim x dim` matrix per node. Constant for order 2, zero for
    /// order 1.
    pub fn shape_hessians(&self) -> Vec<DMatrix<f64>> {
        let d = self.dim;
        match (self.dim, self.order) {
            (1, 1) | (2, 1) => vec![DMatrix::zeros(d, d); self.node_count()],
            (1, 2) => vec![
                DMatrix::from_row_slice(1, 1, &[4.0]),
                DMatrix::from_row_slice(1, 1, &[-8.0]),
                DMatrix::from_row_slice(1, 1, &[4.0]),
            ],
            (2, 2) => {
                let db = [
                    DVector::from_row_slice(&[-1.0, -1.0]),
                    DVector::from_row_slice(&[1.0, 0.0]),
                    DVector::from_row_slice(&[0.0, 1.0]),
                ];
                let vertex = |i: usize| &db[i] * db[i].transpose() * 4.0;
                let edge = |i: usize, j: usize| {
                    (&db[i] * db[j].transpose() + &db[j] * db[i].transpose()) * 4.0
                };
                vec![
                    vertex(0),
                    vertex(1),
                    vertex(2),
                    edge(0, 1),
                    edge(1, 2),
                    edge(2, 0),
                ]
            }
            _ => unreachable!(),
        }
    }
}

/// A quadrature rule on the reference simplex.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on [0, 1].
fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    // nodes/weights on [-1, 1], mapped to [0, 1]
    let (x, w): (Vec<f64>, Vec<f64>) = match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        5 => {
            let a = (5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
            let b = (5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
            let wa = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
            let wb = (322.0 - 13.0 * 70f64.sqrt()) / 900.0;
            (vec![-b, -a, 0.0, a, b], vec![wb, wa, 128.0 / 225.0, wa, wb])
        }
        6 => (
            vec![
                -0.932469514203152,
                -0.661209386466265,
                -0.238619186083197,
                0.238619186083197,
                0.661209386466265,
                0.932469514203152,
            ],
            vec![
                0.171324492379170,
                0.360761573048139,
                0.467913934572691,
                0.467913934572691,
                0.360761573048139,
                0.171324492379170,
            ],
        ),
        _ => panic!("unsupported Gauss-Legendre point count {n}"),
    };
    let nodes = x.iter().map(|t| 0.5 * (t + 1.0)).collect();
    let weights = w.iter().map(|t| 0.5 * t).collect();
    (nodes, weights)
}

/// A quadrature rule on the reference simplex that is exact for polynomials
/// up to `degree`.
///
/// Dimension 1 uses Gauss-Legendre. Dimension 2 uses the centroid rule for
/// degree at most 1 and a collapsed tensor-product (Duffy) Gauss rule
/// otherwise; exactness is checked against monomials in the tests.
pub fn quadrature_for(dim: usize, degree: usize) -> Result<QuadratureRule> {
    if degree > 10 {
        return Err(GfeError::UnsupportedDegree(degree));
    }
    match dim {
        1 => {
            let n = degree / 2 + 1;
            let (nodes, weights) = gauss_legendre_unit(n);
            Ok(QuadratureRule {
                points: nodes.into_iter().map(|x| vec![x]).collect(),
                weights,
                degree,
            })
        }
        2 => {
            if degree <= 1 {
                return Ok(QuadratureRule {
                    points: vec![vec![1.0 / 3.0, 1.0 / 3.0]],
                    weights: vec![0.5],
                    degree,
                });
            }
            // Duffy transform (x, y) = (u, v (1 - u)) with Jacobian (1 - u):
            // the u-integrand gains one degree, so use ceil((degree + 2) / 2)
            // points in u and ceil((degree + 1) / 2) in v.
            let nu = (degree + 2).div_ceil(2);
            let nv = (degree + 1).div_ceil(2);
            let (xu, wu) = gauss_legendre_unit(nu);
            let (xv, wv) = gauss_legendre_unit(nv);
            let mut points = Vec::with_capacity(nu * nv);
            let mut weights = Vec::with_capacity(nu * nv);
            for (u, a) in xu.iter().zip(wu.iter()) {
                for (v, b) in xv.iter().zip(wv.iter()) {
                    points.push(vec![*u, v * (1.0 - u)]);
                    weights.push(a * b * (1.0 - u));
                }
            }
            Ok(QuadratureRule {
                points,
                weights,
                degree,
            })
        }
        _ => Err(GfeError::InvalidDomain(format!("dimension {dim}"))),
    }
}

/// Affine geometry of one element: the map from reference to physical
/// coordinates, its Jacobian, and derived data.
#[derive(Debug, Clone)]
pub struct ElementGeometry {
    /// Physical coordinates of the first vertex.
    pub origin: DVector<f64>,
    /// Jacobian of the reference-to-physical map (columns are edge vectors).
    pub jacobian: DMatrix<f64>,
    /// Transposed inverse Jacobian, mapping reference gradients to physical.
    pub inv_jacobian_t: DMatrix<f64>,
    /// Absolute Jacobian determinant.
    pub det_abs: f64,
    /// Element diameter.
    pub diameter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GridKind {
    Interval { k: usize },
    Square { k: usize },
}

/// A conforming simplicial mesh with its global Lagrange node table.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub domain: Domain,
    pub order: usize,
    /// Vertex coordinates.
    pub vertices: Vec<Vec<f64>>,
    /// Elements as tuples of vertex indices.
    pub elements: Vec<Vec<usize>>,
    /// Global Lagrange node coordinates (vertices first).
    pub nodes: Vec<Vec<f64>>,
    /// Element-local to global node numbering, ordered like the reference
    /// element's nodes.
    pub element_nodes: Vec<Vec<usize>>,
    /// Indices of global nodes on the domain boundary, sorted.
    pub boundary_nodes: Vec<usize>,
    /// Maximum element diameter.
    pub h: f64,
    geometry: Vec<ElementGeometry>,
    reference: ReferenceElement,
    grid: GridKind,
}

/// Build a uniform mesh of the given domain: `k` intervals in 1d, or
/// `2 k^2` triangles from a `k x k` grid split along one diagonal
/// orientation in 2d. The Lagrange node table is built for `order`.
pub fn build_uniform_mesh(domain: Domain, k: usize, order: usize) -> Result<Mesh> {
    domain.validate()?;
    if k < 1 {
        return Err(GfeError::InvalidDomain("subdivisions must be >= 1".into()));
    }
    assert!((1..=2).contains(&order), "supported orders are 1 and 2");
    match domain {
        Domain::Interval { a, b } => build_interval(domain, a, b, k, order),
        Domain::Rect { x0, y0, x1, y1 } => build_square(domain, x0, y0, x1, y1, k, order),
    }
}

/// Regular (red) refinement: every element is split into `2^d` similar
/// children, so `h` halves exactly for the uniform grids produced here.
pub fn refine(mesh: &Mesh) -> Mesh {
    let k = match mesh.grid {
        GridKind::Interval { k } => k,
        GridKind::Square { k } => k,
    };
    build_uniform_mesh(mesh.domain, 2 * k, mesh.order).expect("refinement of a valid mesh")
}

fn build_interval(domain: Domain, a: f64, b: f64, k: usize, order: usize) -> Result<Mesh> {
    let dx = (b - a) / k as f64;
    let vertices: Vec<Vec<f64>> = (0..=k).map(|i| vec![a + i as f64 * dx]).collect();
    let elements: Vec<Vec<usize>> = (0..k).map(|i| vec![i, i + 1]).collect();

    let mut nodes = vertices.clone();
    let mut element_nodes = Vec::with_capacity(k);
    for (e, el) in elements.iter().enumerate() {
        if order == 1 {
            element_nodes.push(vec![el[0], el[1]]);
        } else {
            let mid = 0.5 * (vertices[el[0]][0] + vertices[el[1]][0]);
            nodes.push(vec![mid]);
            element_nodes.push(vec![el[0], k + 1 + e, el[1]]);
        }
    }

    let boundary_nodes = vec![0, k];
    let geometry = elements
        .iter()
        .map(|el| {
            let o = DVector::from_row_slice(&vertices[el[0]]);
            let j = DMatrix::from_row_slice(1, 1, &[dx]);
            ElementGeometry {
                origin: o,
                inv_jacobian_t: DMatrix::from_row_slice(1, 1, &[1.0 / dx]),
                det_abs: dx,
                diameter: dx,
                jacobian: j,
            }
        })
        .collect();

    Ok(Mesh {
        domain,
        order,
        vertices,
        elements,
        nodes,
        element_nodes,
        boundary_nodes,
        h: dx,
        geometry,
        reference: ReferenceElement::new(1, order),
        grid: GridKind::Interval { k },
    })
}

fn build_square(
    domain: Domain,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    k: usize,
    order: usize,
) -> Result<Mesh> {
    let dx = (x1 - x0) / k as f64;
    let dy = (y1 - y0) / k as f64;
    let vid = |i: usize, j: usize| j * (k + 1) + i;

    let mut vertices = Vec::with_capacity((k + 1) * (k + 1));
    for j in 0..=k {
        for i in 0..=k {
            vertices.push(vec![x0 + i as f64 * dx, y0 + j as f64 * dy]);
        }
    }

    // two triangles per cell, diagonal from the lower-left corner
    let mut elements = Vec::with_capacity(2 * k * k);
    for j in 0..k {
        for i in 0..k {
            let (c00, c10, c01, c11) = (vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1));
            elements.push(vec![c00, c10, c11]);
            elements.push(vec![c00, c11, c01]);
        }
    }

    let mut nodes = vertices.clone();
    let mut element_nodes = Vec::with_capacity(elements.len());
    if order == 1 {
        for el in &elements {
            element_nodes.push(el.clone());
        }
    } else {
        let mut edge_nodes: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edge_node = |a: usize, b: usize, nodes: &mut Vec<Vec<f64>>| {
            let key = (a.min(b), a.max(b));
            *edge_nodes.entry(key).or_insert_with(|| {
                let mid: Vec<f64> = nodes[a]
                    .iter()
                    .zip(nodes[b].iter())
                    .map(|(u, v)| 0.5 * (u + v))
                    .collect();
                nodes.push(mid);
                nodes.len() - 1
            })
        };
        for el in &elements {
            let (v0, v1, v2) = (el[0], el[1], el[2]);
            let e01 = edge_node(v0, v1, &mut nodes);
            let e12 = edge_node(v1, v2, &mut nodes);
            let e20 = edge_node(v2, v0, &mut nodes);
            element_nodes.push(vec![v0, v1, v2, e01, e12, e20]);
        }
    }

    let tol = 1e-12 * (x1 - x0).max(y1 - y0);
    let on_boundary = |p: &[f64]| {
        (p[0] - x0).abs() <= tol
            || (p[0] - x1).abs() <= tol
            || (p[1] - y0).abs() <= tol
            || (p[1] - y1).abs() <= tol
    };
    let boundary_nodes: Vec<usize> = nodes
        .iter()
        .enumerate()
        .filter(|(_, p)| on_boundary(p))
        .map(|(i, _)| i)
        .collect();

    let mut h: f64 = 0.0;
    let geometry: Vec<ElementGeometry> = elements
        .iter()
        .map(|el| {
            let o = DVector::from_row_slice(&vertices[el[0]]);
            let p1 = DVector::from_row_slice(&vertices[el[1]]);
            let p2 = DVector::from_row_slice(&vertices[el[2]]);
            let mut jac = DMatrix::zeros(2, 2);
            jac.set_column(0, &(&p1 - &o));
            jac.set_column(1, &(&p2 - &o));
            let det = jac[(0, 0)] * jac[(1, 1)] - jac[(0, 1)] * jac[(1, 0)];
            let inv = DMatrix::from_row_slice(
                2,
                2,
                &[
                    jac[(1, 1)] / det,
                    -jac[(1, 0)] / det,
                    -jac[(0, 1)] / det,
                    jac[(0, 0)] / det,
                ],
            );
            let diameter = (&p1 - &p2)
                .norm()
                .max((&p1 - &o).norm())
                .max((&p2 - &o).norm());
            h = h.max(diameter);
            ElementGeometry {
                origin: o,
                jacobian: jac,
                inv_jacobian_t: inv,
                det_abs: det.abs(),
                diameter,
            }
        })
        .collect();

    Ok(Mesh {
        domain,
        order,
        vertices,
        elements,
        nodes,
        element_nodes,
        boundary_nodes,
        h,
        geometry,
        reference: ReferenceElement::new(2, order),
        grid: GridKind::Square { k },
    })
}

impl Mesh {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn reference_element(&self) -> &ReferenceElement {
        &self.reference
    }

    pub fn geometry(&self, element: usize) -> &ElementGeometry {
        &self.geometry[element]
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        self.boundary_nodes.binary_search(&node).is_ok()
    }

    /// Free (non-Dirichlet) node indices.
    pub fn free_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|n| !self.is_boundary_node(*n))
            .collect()
    }

    /// Map reference coordinates of an element to physical coordinates.
    pub fn to_physical(&self, element: usize, x_ref: &[f64]) -> Vec<f64> {
        let g = &self.geometry[element];
        let mut out = g.origin.clone();
        for (c, xr) in x_ref.iter().enumerate() {
            out += g.jacobian.column(c) * *xr;
        }
        out.as_slice().to_vec()
    }

    /// Locate the element containing a physical point and return its
    /// reference coordinates. Points on shared faces resolve to one of the
    /// adjacent elements.
    pub fn locate(&self, x: &[f64]) -> (usize, Vec<f64>) {
        match self.grid {
            GridKind::Interval { k } => {
                let (a, b) = match self.domain {
                    Domain::Interval { a, b } => (a, b),
                    _ => unreachable!(),
                };
                let t = ((x[0] - a) / (b - a) * k as f64).clamp(0.0, k as f64 - 1e-12);
                let e = (t.floor() as usize).min(k - 1);
                (e, vec![t - e as f64])
            }
            GridKind::Square { k } => {
                let (x0, y0, x1, y1) = match self.domain {
                    Domain::Rect { x0, y0, x1, y1 } => (x0, y0, x1, y1),
                    _ => unreachable!(),
                };
                let tx = ((x[0] - x0) / (x1 - x0) * k as f64).clamp(0.0, k as f64 - 1e-12);
                let ty = ((x[1] - y0) / (y1 - y0) * k as f64).clamp(0.0, k as f64 - 1e-12);
                let (i, j) = (
                    (tx.floor() as usize).min(k - 1),
                    (ty.floor() as usize).min(k - 1),
                );
                let (fx, fy) = (tx - i as f64, ty - j as f64);
                let cell = 2 * (j * k + i);
                if fy <= fx {
                    // lower triangle (c00, c10, c11): x_ref = (fx - fy... )
                    // reference map: origin c00, columns c10-c00, c11-c00
                    // fx = r0 + r1, fy = r1
                    (cell, vec![fx - fy, fy])
                } else {
                    // upper triangle (c00, c11, c01): fx = r0, fy = r0 + r1
                    (cell + 1, vec![fx, fy - fx])
                }
            }
        }
    }

    /// Max ratio of element diameter to inradius over the mesh.
    pub fn shape_regularity_ratio(&self) -> f64 {
        match self.dim() {
            1 => 1.0,
            _ => self
                .elements
                .iter()
                .enumerate()
                .map(|(e, el)| {
                    let a = &self.vertices[el[0]];
                    let b = &self.vertices[el[1]];
                    let c = &self.vertices[el[2]];
                    let d = |p: &Vec<f64>, q: &Vec<f64>| {
                        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
                    };
                    let (la, lb, lc) = (d(b, c), d(a, c), d(a, b));
                    let s = 0.5 * (la + lb + lc);
                    let area = 0.5 * self.geometry[e].det_abs;
                    let inradius = area / s;
                    self.geometry[e].diameter / inradius
                })
                .fold(0.0, f64::max),
        }
    }

    /// Plain-text export: vertex lines `v x [y]`, element lines `e i j [k]`.
    pub fn export_text<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for v in &self.vertices {
            let coords: Vec<String> = v.iter().map(|c| format!("{c}")).collect();
            writeln!(out, "v {}", coords.join(" "))?;
        }
        for el in &self.elements {
            let ids: Vec<String> = el.iter().map(|i| format!("{i}")).collect();
            writeln!(out, "e {}", ids.join(" "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Exact integral of x^a y^b over the unit triangle.
    fn monomial_integral_tri(a: u32, b: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(|i| i as f64).product::<f64>().max(1.0);
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn interval_mesh_counts() {
        let m = build_uniform_mesh(Domain::unit_interval(), 4, 1).unwrap();
        assert_eq!(m.num_elements(), 4);
        assert_eq!(m.vertices.len(), 5);
        assert_abs_diff_eq!(m.h, 0.25, epsilon = 1e-15);
        assert_eq!(m.boundary_nodes, vec![0, 4]);
    }

    #[test]
    fn square_mesh_counts() {
        let m = build_uniform_mesh(Domain::unit_square(), 2, 1).unwrap();
        assert_eq!(m.num_elements(), 8);
        assert_eq!(m.vertices.len(), 9);
        assert_abs_diff_eq!(m.h, 2f64.sqrt() / 2.0, epsilon = 1e-15);
        assert_eq!(m.boundary_nodes.len(), 8);
    }

    #[test]
    fn refine_halves_h() {
        let m = build_uniform_mesh(Domain::unit_interval(), 4, 1).unwrap();
        let r = refine(&m);
        assert_eq!(r.num_elements(), 8);
        assert_abs_diff_eq!(r.h / m.h, 0.5, epsilon = 1e-14);

        let m = build_uniform_mesh(Domain::unit_square(), 2, 1).unwrap();
        let r = refine(&m);
        assert_eq!(r.num_elements(), 32);
        assert_abs_diff_eq!(r.h / m.h, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(
            r.shape_regularity_ratio(),
            m.shape_regularity_ratio(),
            epsilon = 1e-12
        );
        assert!(m.shape_regularity_ratio() <= 10.0);
    }

    #[test]
    fn invalid_domains_rejected() {
        assert!(build_uniform_mesh(Domain::Interval { a: 1.0, b: 1.0 }, 2, 1).is_err());
        assert!(build_uniform_mesh(
            Domain::Rect {
                x0: 0.0,
                y0: 0.0,
                x1: -1.0,
                y1: 1.0
            },
            2,
            1
        )
        .is_err());
    }

    #[test]
    fn shape_function_examples() {
        let r = ReferenceElement::new(1, 1);
        let (vals, _) = r.shape_values(&[0.25]).unwrap();
        assert_abs_diff_eq!(vals[0], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(vals[1], 0.25, epsilon = 1e-15);

        let r = ReferenceElement::new(1, 2);
        let (vals, _) = r.shape_values(&[0.5]).unwrap();
        assert_eq!(vals, vec![0.0, 1.0, 0.0]);

        // order 1 on triangles: shape functions are barycentric coordinates
        let r = ReferenceElement::new(2, 1);
        let (vals, _) = r.shape_values(&[0.2, 0.3]).unwrap();
        assert_abs_diff_eq!(vals[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(vals[1], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(vals[2], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn shape_functions_kronecker_partition_of_unity() {
        for dim in 1..=2 {
            for order in 1..=2 {
                let r = ReferenceElement::new(dim, order);
                for (j, node) in r.nodes.iter().enumerate() {
                    let (vals, _) = r.shape_values(node).unwrap();
                    for (i, v) in vals.iter().enumerate() {
                        let target = if i == j { 1.0 } else { 0.0 };
                        assert_abs_diff_eq!(*v, target, epsilon = 1e-14);
                    }
                }
                // partition of unity and zero-sum gradients at interior points
                let probe: Vec<Vec<f64>> = if dim == 1 {
                    vec![vec![0.17], vec![0.83]]
                } else {
                    vec![vec![0.21, 0.34], vec![0.05, 0.61]]
                };
                for x in &probe {
                    let (vals, grads) = r.shape_values(x).unwrap();
                    assert_abs_diff_eq!(vals.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
                    for c in 0..dim {
                        let gsum: f64 = grads.iter().map(|g| g[c]).sum();
                        assert_abs_diff_eq!(gsum, 0.0, epsilon = 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn outside_element_rejected() {
        let r = ReferenceElement::new(2, 1);
        assert!(matches!(
            r.shape_values(&[0.7, 0.7]),
            Err(GfeError::OutsideElement(_))
        ));
    }

    #[test]
    fn quadrature_examples() {
        let q = quadrature_for(1, 3).unwrap();
        assert_eq!(q.len(), 2);
        let a = 0.5 - 1.0 / (2.0 * 3f64.sqrt());
        assert_abs_diff_eq!(q.points[0][0], a, epsilon = 1e-15);
        assert_abs_diff_eq!(q.weights[0], 0.5, epsilon = 1e-15);

        let q = quadrature_for(2, 1).unwrap();
        assert_eq!(q.len(), 1);
        assert_abs_diff_eq!(q.weights[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(q.points[0][0], 1.0 / 3.0, epsilon = 1e-15);

        assert!(quadrature_for(2, 11).is_err());
    }

    #[test]
    fn quadrature_exact_for_monomials() {
        for degree in 0..=10usize {
            let q = quadrature_for(1, degree).unwrap();
            let total: f64 = q.weights.iter().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-14);
            for p in 0..=degree as u32 {
                let got: f64 = q
                    .points
                    .iter()
                    .zip(q.weights.iter())
                    .map(|(x, w)| w * x[0].powi(p as i32))
                    .sum();
                assert_abs_diff_eq!(got, 1.0 / (p as f64 + 1.0), epsilon = 1e-13);
            }

            let q = quadrature_for(2, degree).unwrap();
            let total: f64 = q.weights.iter().sum();
            assert_abs_diff_eq!(total, 0.5, epsilon = 1e-14);
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let got: f64 = q
                        .points
                        .iter()
                        .zip(q.weights.iter())
                        .map(|(x, w)| w * x[0].powi(a as i32) * x[1].powi(b as i32))
                        .sum();
                    assert_abs_diff_eq!(got, monomial_integral_tri(a, b), epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn element_maps_are_affine_with_consistent_volume() {
        let m = build_uniform_mesh(Domain::unit_square(), 3, 2).unwrap();
        let ref_vol = 0.5;
        let mut total = 0.0;
        for e in 0..m.num_elements() {
            let g = m.geometry(e);
            // |det DF| * reference volume = element volume
            total += g.det_abs * ref_vol;
            assert!(g.diameter <= m.h + 1e-15);
        }
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn node_table_is_consistent_between_neighbors() {
        let m = build_uniform_mesh(Domain::unit_square(), 3, 2).unwrap();
        // shared nodes must have identical global index and coordinates;
        // verify by recomputing each element's node coordinates from the map
        for e in 0..m.num_elements() {
            for (loc, gid) in m.element_nodes[e].iter().enumerate() {
                let x = m.to_physical(e, &m.reference_element().nodes[loc]);
                for (c, v) in x.iter().enumerate() {
                    assert_abs_diff_eq!(*v, m.nodes[*gid][c], epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn locate_inverts_to_physical() {
        for order in 1..=2 {
            let m = build_uniform_mesh(
                Domain::Rect {
                    x0: -0.5,
                    y0: -0.5,
                    x1: 0.5,
                    y1: 0.5,
                },
                4,
                order,
            )
            .unwrap();
            let probes = [[0.13, -0.41], [-0.29, 0.17], [0.49, 0.49], [-0.5, -0.5]];
            for p in probes {
                let (e, xr) = m.locate(&p);
                let back = m.to_physical(e, &xr);
                assert_abs_diff_eq!(back[0], p[0], epsilon = 1e-12);
                assert_abs_diff_eq!(back[1], p[1], epsilon = 1e-12);
            }
        }
        let m = build_uniform_mesh(Domain::unit_interval(), 5, 2).unwrap();
        let (e, xr) = m.locate(&[0.63]);
        let back = m.to_physical(e, &xr);
        assert_abs_diff_eq!(back[0], 0.63, epsilon = 1e-13);
    }

    #[test]
    fn export_format() {
        let m = build_uniform_mesh(Domain::unit_square(), 1, 1).unwrap();
        let mut buf = Vec::new();
        m.export_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("v 0 0\n"));
        assert!(text.contains("\ne 0 1 3\n"));
    }
}
