use thiserror::Error;

use crate::geometry::GraphPatch;
use crate::pde::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("height {x} is outside the weight domain ]{a}, +inf[")]
    Domain { x: f64, a: f64 },

    #[error("non-finite value while evaluating {0}")]
    NonFinite(&'static str),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("abscissa {x} lies outside the computed profile range [0, {max}]")]
    OutOfRange { x: f64, max: f64 },

    #[error("adaptive integrator step size underflow at s = {at}")]
    StepFailure { at: f64 },

    #[error("quadrature did not reach tolerance (estimate {estimate:e}, error {error:e})")]
    Quadrature { estimate: f64, error: f64 },

    #[error("integrability of exp(-phi) could not be certified: {0}")]
    Inconclusive(String),

    #[error("grid needs at least 3x3 nodes, got {nx}x{ny}")]
    GridTooSmall { nx: usize, ny: usize },

    #[error("field length {got} does not match the {expected} grid nodes")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("patch is not phi-minimal: residual {residual:e} exceeds tolerance {tol:e}")]
    NotMinimal { residual: f64, tol: f64 },

    #[error("normal speed must vanish on boundary nodes (max boundary |v| = {0:e})")]
    BoundarySupport(f64),

    #[error("newton iteration did not converge after {} iterations (residual {:e})", .0.1.iterations, .0.1.final_residual_norm)]
    NoConvergence(Box<(GraphPatch, SolveReport)>),

    #[error("iterate left the weight domain and the damping floor was reached")]
    DomainViolation,

    #[error("grid abscissa {x} violates the slab margin |x| <= {limit}")]
    SlabViolation { x: f64, limit: f64 },

    #[error("strip violation: {0}")]
    StripViolation(String),

    #[error("reflected window does not overlap the patch")]
    EmptyOverlap,

    #[error("singular linear system at pivot {0}")]
    Singular(usize),
}
