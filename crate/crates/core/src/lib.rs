//! Spectral construction of standing waves for the pseudo-relativistic
//! nonlinear Schrödinger equation
//!
//! ```text
//! (sqrt(-c²Δ + m²c⁴) - mc²) u + μ u = |u|^{p-1} u
//! ```
//!
//! together with numerical checks of the symbol estimates, operator norms,
//! convergence rates and the Nehari/Pohozaev identities that govern when a
//! nontrivial solution exists.
//!
//! Everything below [`params`] works in the reduced normalization
//! `m = 1/2`, `μ = 1`, where the operator becomes the multiplier
//! `P_c(ξ) = sqrt(c²|ξ|² + c⁴/4) - c²/2 + 1`.

pub mod diagnostics;
pub mod error;
pub mod fixed_point;
pub mod ground_state;
pub mod krylov;
pub mod linsolve;
pub mod params;
pub mod spectral;
pub mod symbols;

pub use error::{Error, Result};
pub use params::{PhysicalParams, ReducedParams};
pub use spectral::{Field, Grid, SpectralField};
pub use symbols::Symbol;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
