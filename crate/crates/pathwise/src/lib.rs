//! Pathwise stochastic calculus toolkit.
//!
//! The crate is organized around a frozen driving path (the realized noise):
//! [`paths`] generates and refines discretized Brownian paths and computes
//! their second-level data (Stratonovich iterated integrals and Levy areas);
//! [`fields`] represents random fields `u(t, x, omega)` together with analytic
//! path-derivative suites; [`coefficients`] houses the equation coefficients
//! `(f, g)` and the Ito-form drift; [`taylor`] implements the pathwise
//! backward Taylor expansion operator and remainder-order estimation;
//! [`viscosity`] runs jet-based sub/supersolution checks; [`characteristics`]
//! reduces linear equations to a random PDE along stochastic characteristics
//! and evaluates it by Feynman-Kac Monte Carlo; [`refsolver`] is the
//! finite-difference cross-validation oracle.
//!
//! All operations are deterministic given a master seed: randomness is drawn
//! from named splittable streams (see [`rng`]), and parallel reductions
//! accumulate in index order so results are independent of thread count.

pub mod characteristics;
pub mod coefficients;
pub mod error;
pub mod exec;
pub mod families;
pub mod fields;
pub mod paths;
pub mod refsolver;
pub mod rng;
pub mod taylor;
pub mod viscosity;

pub use error::PathwiseError;

/// Crate version string recorded in experiment metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
