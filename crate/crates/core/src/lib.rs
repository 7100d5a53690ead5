//! Simulation of the stochastic heat equation on `[0, L]` driven by truncated
//! α-stable space-time white noise, with mollified (Lipschitz) approximations
//! of a continuous noise coefficient and Monte Carlo diagnostics for the
//! moment and modulus-of-continuity functionals of the approximating solutions.
//!
//! Module map:
//!
//! * [`heat_kernel`]: Dirichlet heat kernel by image series, semigroup action.
//! * [`stable_noise`]: truncated α-stable Lévy measure and compensated cell increments.
//! * [`coefficients`]: noise coefficients φ and their Gaussian mollifications φⁿ.
//! * [`solver`]: semi-implicit finite-difference stepping of the approximating SPDE.
//! * [`diagnostics`]: Lᵖ functionals, Monte Carlo estimators, KS distances.
//! * [`cli`]: experiment configuration, orchestration and CSV/SVG output.

pub mod cli;
pub mod coefficients;
pub mod diagnostics;
mod error;
pub mod heat_kernel;
pub mod quadrature;
pub mod rng;
pub mod solver;
pub mod stable_noise;
pub mod stats;

pub use error::{Error, Result};
