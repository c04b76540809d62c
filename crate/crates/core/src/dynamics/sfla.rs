use rand_chacha::ChaCha8Rng;

use super::noise::{fill_standard_normal, latent_stream_id, stream, THETA_STREAM};
use super::{all_finite, Algorithm, Integrator, SdeConfig};
use crate::error::{Error, Result};
use crate::models::Model;

/// Euler–Maruyama discretisation of the slow-fast Langevin system
///
/// ```text
/// θ_{k+1} = θ_k - δ ∇θU(θ_k, X_k) + √(2δ/β) ξ¹_k
/// X_{k+1} = X_k - (δ/ε) ∇xU(θ_k, X_k) + √(2δ/ε) ξ²_k
/// ```
///
/// Both gradients are taken at the pre-update state.
pub struct SflaIntegrator<'m> {
    model: &'m dyn Model,
    theta: Vec<f64>,
    x: Vec<f64>,
    g_theta: Vec<f64>,
    g_x: Vec<f64>,
    xi_theta: Vec<f64>,
    xi_x: Vec<f64>,
    delta: f64,
    x_rate: f64,
    theta_noise: f64,
    x_noise: f64,
    rng_theta: ChaCha8Rng,
    rng_x: ChaCha8Rng,
    steps: u64,
}

impl<'m> SflaIntegrator<'m> {
    pub fn new(model: &'m dyn Model, config: &SdeConfig) -> Result<Self> {
        config.validate_for(Algorithm::Sfla)?;
        model.check_dims(&config.theta0, &config.x0)?;
        let (dt, dx) = (model.dim_theta(), model.dim_latent());
        let SdeConfig {
            delta, epsilon, beta, ..
        } = *config;
        Ok(Self {
            model,
            theta: config.theta0.clone(),
            x: config.x0.clone(),
            g_theta: vec![0.0; dt],
            g_x: vec![0.0; dx],
            xi_theta: vec![0.0; dt],
            xi_x: vec![0.0; dx],
            delta,
            x_rate: delta / epsilon,
            theta_noise: (2.0 * delta / beta).sqrt(),
            x_noise: (2.0 * delta / epsilon).sqrt(),
            rng_theta: stream(config.seed, THETA_STREAM),
            rng_x: stream(config.seed, latent_stream_id(0)),
            steps: 0,
        })
    }
}

impl Integrator for SflaIntegrator<'_> {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Sfla
    }

    fn grad_evals_per_step(&self) -> u64 {
        2
    }

    fn step(&mut self) -> Result<()> {
        self.model.eval_grad_theta(&self.theta, &self.x, &mut self.g_theta);
        self.model.eval_grad_x(&self.theta, &self.x, &mut self.g_x);
        fill_standard_normal(&mut self.rng_theta, &mut self.xi_theta);
        fill_standard_normal(&mut self.rng_x, &mut self.xi_x);
        for ((t, g), z) in self.theta.iter_mut().zip(&self.g_theta).zip(&self.xi_theta) {
            *t = *t - self.delta * g + self.theta_noise * z;
        }
        for ((x, g), z) in self.x.iter_mut().zip(&self.g_x).zip(&self.xi_x) {
            *x = *x - self.x_rate * g + self.x_noise * z;
        }
        self.steps += 1;
        if !all_finite(&self.theta) || !all_finite(&self.x) {
            return Err(Error::Divergence {
                algorithm: Algorithm::Sfla.to_string(),
                step: self.steps,
            });
        }
        Ok(())
    }

    fn theta(&self) -> &[f64] {
        &self.theta
    }

    fn latent(&self) -> &[f64] {
        &self.x
    }

    fn steps_taken(&self) -> u64 {
        self.steps
    }
}
