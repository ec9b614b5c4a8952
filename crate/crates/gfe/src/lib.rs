//! Geodesic finite elements for maps from Euclidean domains into Riemannian
//! manifolds.
//!
//! The crate provides a geometry kernel for three constant-curvature model
//! targets, simplicial meshes with Lagrange shape functions, geodesic
//! (weighted Fréchet mean) interpolation and its implicit differentials,
//! quadrature assembly of the harmonic energy with analytic gradients and
//! second variations, Riemannian first-order minimization, intrinsic error
//! metrics, and a benchmark driver that measures experimental convergence
//! orders on manufactured harmonic-map problems.
//!
//! See the `examples/` directory for runnable entry points per capability,
//! and the `gfe` binary for the benchmark command line.

pub mod bench;
pub mod energy;
pub mod error;
pub mod error_metrics;
pub mod interpolation;
pub mod manifold;
pub mod mesh;
pub mod solver;

pub use error::{GfeError, Result};
pub use manifold::{ManifoldKind, ManifoldPoint, TangentVector};
