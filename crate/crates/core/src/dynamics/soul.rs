use rand_chacha::ChaCha8Rng;

use super::noise::{fill_standard_normal, latent_stream_id, stream};
use super::{all_finite, Algorithm, Integrator, SdeConfig};
use crate::error::{Error, Result};
use crate::models::Model;

/// SOUL: per outer iteration, `M` warm-started ULA steps on the latent chain at
/// frozen `θ`, then a noiseless gradient step on `θ` averaged over the last
/// `M̃` chain states. This implementation uses no burn-in, `M̃ = M`.
///
/// One outer iteration costs `M` latent gradients plus `M̃` parameter gradients.
pub struct SoulIntegrator<'m> {
    model: &'m dyn Model,
    theta: Vec<f64>,
    x: Vec<f64>,
    g_theta: Vec<f64>,
    g_sum: Vec<f64>,
    g_x: Vec<f64>,
    xi: Vec<f64>,
    inner_steps: usize,
    averaged: usize,
    gamma: f64,
    delta: f64,
    noise: f64,
    rng: ChaCha8Rng,
    steps: u64,
}

impl<'m> SoulIntegrator<'m> {
    pub fn new(model: &'m dyn Model, config: &SdeConfig) -> Result<Self> {
        config.validate_for(Algorithm::Soul)?;
        model.check_dims(&config.theta0, &config.x0)?;
        let (dt, dx) = (model.dim_theta(), model.dim_latent());
        Ok(Self {
            model,
            theta: config.theta0.clone(),
            x: config.x0.clone(),
            g_theta: vec![0.0; dt],
            g_sum: vec![0.0; dt],
            g_x: vec![0.0; dx],
            xi: vec![0.0; dx],
            inner_steps: config.n_inner,
            averaged: config.n_inner,
            gamma: config.gamma,
            delta: config.delta,
            noise: (2.0 * config.gamma).sqrt(),
            rng: stream(config.seed, latent_stream_id(0)),
            steps: 0,
        })
    }
}

impl Integrator for SoulIntegrator<'_> {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Soul
    }

    fn grad_evals_per_step(&self) -> u64 {
        (self.inner_steps + self.averaged) as u64
    }

    fn step(&mut self) -> Result<()> {
        self.g_sum.iter_mut().for_each(|g| *g = 0.0);
        let first_averaged = self.inner_steps - self.averaged + 1;
        for m in 1..=self.inner_steps {
            self.model.eval_grad_x(&self.theta, &self.x, &mut self.g_x);
            fill_standard_normal(&mut self.rng, &mut self.xi);
            for ((x, g), z) in self.x.iter_mut().zip(&self.g_x).zip(&self.xi) {
                *x = *x - self.gamma * g + self.noise * z;
            }
            if m >= first_averaged {
                self.model.eval_grad_theta(&self.theta, &self.x, &mut self.g_theta);
                for (s, g) in self.g_sum.iter_mut().zip(&self.g_theta) {
                    *s += g;
                }
            }
        }
        let scale = self.delta / self.averaged as f64;
        for (t, s) in self.theta.iter_mut().zip(&self.g_sum) {
            *t -= scale * s;
        }
        self.steps += 1;
        if !all_finite(&self.theta) || !all_finite(&self.x) {
            return Err(Error::Divergence {
                algorithm: Algorithm::Soul.to_string(),
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
