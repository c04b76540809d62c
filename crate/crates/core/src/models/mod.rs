//! Latent-variable models.
//!
//! A model is the negative joint log-likelihood `U(θ, x) = -log p_θ(x, y)` for a
//! fixed observed-data block `y`, together with its two partial gradients. The
//! observed data is baked in at construction and never mutated afterwards, so
//! every model is `Send + Sync` and can be shared across worker threads.
//!
//! Models whose marginal likelihood `p_θ(y) = ∫ exp(-U(θ, x)) dx` is available
//! in closed form additionally expose a [`MarginalOracle`].

mod dataset;
mod example;
mod gaussian;
mod logistic;

pub use dataset::{read_logistic_csv, write_logistic_csv};
pub use example::{ExamplePotential, ExampleVariant};
pub use gaussian::GaussianHierarchicalModel;
pub use logistic::{generate_logistic_data, CovariateLaw, LogisticDataOptions, LogisticRegressionModel};

use crate::error::{Error, Result};

/// Evaluation interface for `U`, `∇θU` and `∇xU`.
///
/// The `eval_*` methods are unchecked and write into caller-owned buffers so
/// integrators can run allocation-free; the provided `potential` / `grad_*`
/// methods validate dimensions first.
pub trait Model: Send + Sync {
    fn name(&self) -> &str;

    /// Parameter dimension `d_θ`.
    fn dim_theta(&self) -> usize;

    /// Latent dimension `d_x`.
    fn dim_latent(&self) -> usize;

    fn eval_potential(&self, theta: &[f64], x: &[f64]) -> f64;

    fn eval_grad_theta(&self, theta: &[f64], x: &[f64], out: &mut [f64]);

    fn eval_grad_x(&self, theta: &[f64], x: &[f64], out: &mut [f64]);

    /// Closed-form marginal quantities, when the model has them.
    fn oracle(&self) -> Option<&dyn MarginalOracle> {
        None
    }

    fn check_dims(&self, theta: &[f64], x: &[f64]) -> Result<()> {
        check_len("theta", self.dim_theta(), theta.len())?;
        check_len("x", self.dim_latent(), x.len())
    }

    fn potential(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        self.check_dims(theta, x)?;
        Ok(self.eval_potential(theta, x))
    }

    fn grad_theta(&self, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(theta, x)?;
        let mut out = vec![0.0; self.dim_theta()];
        self.eval_grad_theta(theta, x, &mut out);
        Ok(out)
    }

    fn grad_x(&self, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(theta, x)?;
        let mut out = vec![0.0; self.dim_latent()];
        self.eval_grad_x(theta, x, &mut out);
        Ok(out)
    }

    /// The oracle, or [`Error::UnsupportedOracle`].
    fn require_oracle(&self) -> Result<&dyn MarginalOracle> {
        self.oracle()
            .ok_or_else(|| Error::UnsupportedOracle(self.name().to_string()))
    }
}

/// Analytic marginal-likelihood quantities for tractable models.
pub trait MarginalOracle: Send + Sync {
    /// `log p_θ(y)`.
    fn marginal_log_likelihood(&self, theta: &[f64]) -> f64;

    /// `∇θ log p_θ(y)`, written into `out`.
    fn grad_marginal_into(&self, theta: &[f64], out: &mut [f64]);

    /// The maximiser `θ*` of the marginal likelihood.
    fn mmle(&self) -> Vec<f64>;

    /// One exact expectation-maximisation update.
    fn exact_em_step(&self, theta: &[f64]) -> Vec<f64>;

    /// Mean of the posterior `p_θ(x | y)`.
    fn posterior_mean(&self, theta: &[f64]) -> Vec<f64>;

    /// Smallest eigenvalue of `-∇²θ log p_θ(y)`.
    fn marginal_curvature(&self) -> f64;

    fn grad_marginal(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; theta.len()];
        self.grad_marginal_into(theta, &mut out);
        out
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, got })
    }
}

/// `log(1 + e^u)` without overflow.
pub(crate) fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

/// Logistic sigmoid, branch-stable for large `|t|`.
pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}
