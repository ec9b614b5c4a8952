//! Error type shared across the crate.

use thiserror::Error;

/// Errors raised by geometry, interpolation, assembly, and the benchmark driver.
#[derive(Debug, Clone, Error)]
pub enum GfeError {
    /// Two points are too close to the cut locus for a unique geodesic.
    #[error("antipodal pair: distance {dist:.6} is within tolerance of the injectivity radius")]
    AntipodalPair { dist: f64 },

    /// An iterative solve did not reach its tolerance.
    #[error("no convergence after {iters} iterations (residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },

    /// Nodal values of an element spread beyond the well-posedness ball.
    #[error("nodal values spread {spread:.6} exceeds interpolation ball radius {radius:.6}")]
    BallViolation { spread: f64, radius: f64 },

    /// The interpolation system is numerically singular.
    #[error("singular interpolation system (inverse norm {inv_norm:.3e})")]
    SingularSystem { inv_norm: f64 },

    /// A degenerate domain was passed to mesh construction.
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    /// No quadrature rule of the requested degree is available.
    #[error("unsupported quadrature degree {0}")]
    UnsupportedDegree(usize),

    /// A reference coordinate lies outside the closed reference element.
    #[error("point outside reference element (min barycentric coordinate {0:.3e})")]
    OutsideElement(f64),

    /// Backtracking produced no decrease at the minimum step size.
    #[error("line search stalled at step {0:.3e}")]
    LineSearchStall(f64),

    /// A point violates its manifold constraint.
    #[error("constraint violation: residual {0:.3e}")]
    ConstraintViolation(f64),

    /// Malformed run configuration.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, GfeError>;
