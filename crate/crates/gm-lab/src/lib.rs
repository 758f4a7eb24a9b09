//! Numerical laboratory for the stochastic shadow Gierer-Meinhardt system
//!
//! The model couples one reaction-diffusion PDE for the activator `u` with a
//! scalar SDE for the inhibitor `xi`, driven by a single Brownian motion:
//!
//! ```text
//! du/dt = Δu - u + u^p / ξ^q           (Neumann boundary)
//! dξ    = -ξ dt + (mean(u^α)/ξ^β) dt + σ ξ dB_t
//! ```
//!
//! The crate provides
//!
//! - [`model`]: parameter validation, grids, fields, trajectories;
//! - [`paths`]: seeded Brownian paths, bridge refinement, running suprema;
//! - [`pde`]: Neumann Laplacian, spectral semigroup `e^{(Δ-1)t}`, the
//!   exponential-Euler activator step;
//! - [`sde`]: the inhibitor step via exact geometric propagation of
//!   `ξ^{1+β}`, closed-form solutions, martingale diagnostics;
//! - [`sim`]: coupled trajectory integration (stochastic, skeleton, and
//!   controlled-stochastic regimes), the Picard mild-solution oracle,
//!   blow-up detection;
//! - [`bounds`]: numerical verification of the explicit pathwise estimates
//!   satisfied by the inhibitor and the activator energy;
//! - [`ldp`]: Cameron-Martin controls, rate-functional minimization,
//!   Monte Carlo tail probabilities with Girsanov tilting, and the
//!   weak-convergence continuity experiment.

pub mod bounds;
pub mod ldp;
pub mod model;
pub mod paths;
pub mod pde;
pub mod sde;
pub mod sim;

pub use model::{Field, Grid, ModelParams, Trajectory};
