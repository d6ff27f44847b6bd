//! Extension-based solver for the one-dimensional fractional porous medium
//! equation with variable density,
//!
//! ```text
//!   ρ(x) ∂_t u + (-∂²_x)^{1/2} [u^m] = 0,   u(·, 0) = u_0 >= 0,
//! ```
//!
//! realised through the harmonic extension to the upper half-plane:
//! implicit (Crandall–Liggett) time steps, each an elliptic problem with a
//! nonlinear Robin condition on a truncated domain. The crate also carries
//! independent oracles for the half-Laplacian and the linear evolution, and
//! a probe of the barrier-flux estimate on genuine half-disks.

pub mod elliptic;
pub mod error;
pub mod evolution;
pub mod fractional_oracle;
pub mod grid;
pub mod linalg;
pub mod profiles;
pub mod report;
pub mod uniqueness_probe;

pub use error::{Error, Result};
pub use fractional_oracle::TraceField;
pub use evolution::{SolverConfig, Trajectory};
pub use grid::{HalfDiskGrid, HalfStripGrid, LineGrid};
pub use profiles::{DensityProfile, InitialProfile};
pub use report::{Check, Report};
