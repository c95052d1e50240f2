//! Numerical laboratory for translating-type weighted minimal surfaces: graphs
//! in R^3 whose mean curvature satisfies `H = -phi'(x3) <N, e3>`.
//!
//! * [`weight`]: weight functions `phi`, their derivatives and the structural
//!   hypotheses (monotonicity, convexity, integrability of `exp(-phi)`).
//! * [`profile`]: catenary-cylinder profiles, half-widths and width tables.
//! * [`geometry`]: discrete differential geometry of height graphs.
//! * [`pde`]: Dirichlet solver for the graph equation.
//! * [`experiments`]: reflection, perturbation and maximum-principle checks.

pub mod banded;
pub mod error;
pub mod experiments;
pub mod extended;
pub mod geometry;
pub mod ode;
pub mod pde;
pub mod profile;
pub mod quadrature;
pub mod weight;

pub use error::{Error, Result};
pub use geometry::{GraphPatch, Grid, SurfaceFields};
pub use pde::{BoundaryData, SolveOptions, SolveReport};
pub use profile::{ProfileOptions, ProfileSolution};
pub use weight::{Family, Jet, WeightSpec};
