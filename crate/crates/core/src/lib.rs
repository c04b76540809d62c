//! Maximum marginal likelihood estimation with slow-fast Langevin dynamics.
//!
//! Given a latent-variable model with potential `U(θ, x) = -log p_θ(x, y)`,
//! the slow-fast Langevin algorithm (SFLA) runs the parameter `θ` as a slow
//! overdamped Langevin diffusion at inverse temperature `β` while the latent
//! `x` relaxes on a time scale `ε` towards the posterior `p_θ(x | y)`. As
//! `ε → 0` the parameter process follows a noisy gradient ascent on
//! `log p_θ(y)`, and as `β → ∞` it concentrates on the maximiser `θ*`.
//!
//! The crate is split into:
//!
//! * [`models`]: the model interface, a hierarchical Gaussian model with a
//!   complete analytic oracle, Bayesian logistic regression, and the
//!   reference potentials used to probe convexity assumptions;
//! * [`dynamics`]: SFLA and its comparators (SOUL, PGD, IPLA and Langevin on
//!   the exact marginal) with gradient-evaluation accounting and budgets;
//! * [`analysis`]: assumption probes, exact stationary covariances for linear
//!   dynamics, and the scaling studies;
//! * [`harness`]: configuration files, experiment runners and artifact output
//!   behind the `mmle` binary.

pub mod analysis;
pub mod dynamics;
mod error;
pub mod harness;
pub mod models;

pub use error::{Error, Result};
