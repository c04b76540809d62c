use rand_chacha::ChaCha8Rng;

use super::noise::{fill_standard_normal, stream, THETA_STREAM};
use super::{all_finite, Algorithm, Integrator, SdeConfig};
use crate::error::{Error, Result};
use crate::models::{MarginalOracle, Model};

/// Langevin dynamics on the exact marginal,
/// `θ_{k+1} = θ_k + δ ∇θ log p_{θ_k}(y) + √(2δ/β) ξ_k`.
///
/// This is the averaged limit the slow-fast system approximates; it needs a
/// model with an analytic oracle. Each oracle gradient counts as one unit.
pub struct AveragedUlaIntegrator<'m> {
    oracle: &'m dyn MarginalOracle,
    theta: Vec<f64>,
    grad: Vec<f64>,
    xi: Vec<f64>,
    delta: f64,
    noise: f64,
    rng: ChaCha8Rng,
    steps: u64,
}

impl<'m> AveragedUlaIntegrator<'m> {
    pub fn new(model: &'m dyn Model, config: &SdeConfig) -> Result<Self> {
        let oracle = model.require_oracle()?;
        config.validate_for(Algorithm::AveragedUla)?;
        crate::models::check_len("theta", model.dim_theta(), config.theta0.len())?;
        let d = model.dim_theta();
        Ok(Self {
            oracle,
            theta: config.theta0.clone(),
            grad: vec![0.0; d],
            xi: vec![0.0; d],
            delta: config.delta,
            noise: (2.0 * config.delta / config.beta).sqrt(),
            rng: stream(config.seed, THETA_STREAM),
            steps: 0,
        })
    }
}

impl Integrator for AveragedUlaIntegrator<'_> {
    fn algorithm(&self) -> Algorithm {
        Algorithm::AveragedUla
    }

    fn grad_evals_per_step(&self) -> u64 {
        1
    }

    fn step(&mut self) -> Result<()> {
        self.oracle.grad_marginal_into(&self.theta, &mut self.grad);
        fill_standard_normal(&mut self.rng, &mut self.xi);
        for ((t, g), z) in self.theta.iter_mut().zip(&self.grad).zip(&self.xi) {
            *t = *t + self.delta * g + self.noise * z;
        }
        self.steps += 1;
        if !all_finite(&self.theta) {
            return Err(Error::Divergence {
                algorithm: Algorithm::AveragedUla.to_string(),
                step: self.steps,
            });
        }
        Ok(())
    }

    fn theta(&self) -> &[f64] {
        &self.theta
    }

    fn latent(&self) -> &[f64] {
        &[]
    }

    fn steps_taken(&self) -> u64 {
        self.steps
    }
}
