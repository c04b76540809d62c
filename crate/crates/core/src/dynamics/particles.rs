use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::noise::{fill_standard_normal, latent_stream_id, stream, THETA_STREAM};
use super::{all_finite, Algorithm, Integrator, SdeConfig};
use crate::error::{Error, Result};
use crate::models::Model;

/// Clouds at least this large are updated on the rayon pool.
const PARALLEL_THRESHOLD: usize = 256;

/// Euler discretisation of the interacting particle systems with step `γ`:
///
/// ```text
/// θ_{k+1}   = θ_k - γ (1/N) Σ_j ∇θU(θ_k, X^j_k) [+ √(2γ/N) ξ⁰_k]   (IPLA only)
/// X^i_{k+1} = X^i_k - γ ∇xU(θ_k, X^i_k) + √(2γ) ξ^i_k
/// ```
///
/// Without the bracketed term this is PGD. Each particle owns its noise
/// stream, so the parallel and sequential updates are bit-identical; the
/// parameter drift is reduced in particle order.
pub struct ParticleIntegrator<'m> {
    model: &'m dyn Model,
    algorithm: Algorithm,
    theta: Vec<f64>,
    particles: Vec<f64>,
    g_theta: Vec<f64>,
    g_x: Vec<f64>,
    xi: Vec<f64>,
    xi_theta: Vec<f64>,
    streams: Vec<ChaCha8Rng>,
    rng_theta: Option<ChaCha8Rng>,
    gamma: f64,
    noise: f64,
    theta_noise: f64,
    n: usize,
    steps: u64,
}

impl<'m> ParticleIntegrator<'m> {
    /// All `N = n_inner` particles start at `x0`; particle `i` draws from
    /// latent stream `i`.
    pub fn new(model: &'m dyn Model, algorithm: Algorithm, config: &SdeConfig) -> Result<Self> {
        let cloud = vec![config.x0.clone(); config.n_inner];
        let ids = (0..config.n_inner).map(latent_stream_id).collect();
        Self::with_cloud(model, algorithm, config, cloud, ids)
    }

    /// Explicit initial cloud and per-particle stream ids.
    pub fn with_cloud(
        model: &'m dyn Model,
        algorithm: Algorithm,
        config: &SdeConfig,
        cloud: Vec<Vec<f64>>,
        stream_ids: Vec<u64>,
    ) -> Result<Self> {
        if !matches!(algorithm, Algorithm::Pgd | Algorithm::Ipla) {
            return Err(Error::config(format!("{algorithm} is not a particle method")));
        }
        config.validate_for(algorithm)?;
        if cloud.is_empty() || cloud.len() != stream_ids.len() {
            return Err(Error::config(
                "particle cloud and stream ids must be non-empty and equal length",
            ));
        }
        for p in &cloud {
            model.check_dims(&config.theta0, p)?;
        }
        let (dt, dx, n) = (model.dim_theta(), model.dim_latent(), cloud.len());
        let gamma = config.gamma;
        Ok(Self {
            model,
            algorithm,
            theta: config.theta0.clone(),
            particles: cloud.into_iter().flatten().collect(),
            g_theta: vec![0.0; n * dt],
            g_x: vec![0.0; n * dx],
            xi: vec![0.0; n * dx],
            xi_theta: vec![0.0; dt],
            streams: stream_ids.into_iter().map(|id| stream(config.seed, id)).collect(),
            rng_theta: (algorithm == Algorithm::Ipla).then(|| stream(config.seed, THETA_STREAM)),
            gamma,
            noise: (2.0 * gamma).sqrt(),
            theta_noise: (2.0 * gamma / n as f64).sqrt(),
            n,
            steps: 0,
        })
    }

    pub fn num_particles(&self) -> usize {
        self.n
    }
}

struct ParticleStep<'a> {
    model: &'a dyn Model,
    theta: &'a [f64],
    gamma: f64,
    noise: f64,
}

impl ParticleStep<'_> {
    fn apply(&self, x: &mut [f64], g_theta: &mut [f64], g_x: &mut [f64], xi: &mut [f64], rng: &mut ChaCha8Rng) {
        self.model.eval_grad_theta(self.theta, x, g_theta);
        self.model.eval_grad_x(self.theta, x, g_x);
        fill_standard_normal(rng, xi);
        for ((x, g), z) in x.iter_mut().zip(g_x.iter()).zip(xi.iter()) {
            *x = *x - self.gamma * g + self.noise * z;
        }
    }
}

impl Integrator for ParticleIntegrator<'_> {
    fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    fn grad_evals_per_step(&self) -> u64 {
        2 * self.n as u64
    }

    fn step(&mut self) -> Result<()> {
        let (dt, dx) = (self.theta.len(), self.model.dim_latent());
        let op = ParticleStep {
            model: self.model,
            theta: &self.theta,
            gamma: self.gamma,
            noise: self.noise,
        };
        if self.n >= PARALLEL_THRESHOLD {
            self.particles
                .par_chunks_mut(dx)
                .zip(self.g_theta.par_chunks_mut(dt))
                .zip(self.g_x.par_chunks_mut(dx))
                .zip(self.xi.par_chunks_mut(dx))
                .zip(self.streams.par_iter_mut())
                .for_each(|((((x, gt), gx), xi), rng)| op.apply(x, gt, gx, xi, rng));
        } else {
            self.particles
                .chunks_mut(dx)
                .zip(self.g_theta.chunks_mut(dt))
                .zip(self.g_x.chunks_mut(dx))
                .zip(self.xi.chunks_mut(dx))
                .zip(self.streams.iter_mut())
                .for_each(|((((x, gt), gx), xi), rng)| op.apply(x, gt, gx, xi, rng));
        }
        let inv_n = 1.0 / self.n as f64;
        for (k, t) in self.theta.iter_mut().enumerate() {
            let sum: f64 = self.g_theta.iter().skip(k).step_by(dt).sum();
            *t -= self.gamma * (sum * inv_n);
        }
        if let Some(rng) = self.rng_theta.as_mut() {
            fill_standard_normal(rng, &mut self.xi_theta);
            for (t, z) in self.theta.iter_mut().zip(&self.xi_theta) {
                *t += self.theta_noise * z;
            }
        }
        self.steps += 1;
        if !all_finite(&self.theta) || !all_finite(&self.particles) {
            return Err(Error::Divergence {
                algorithm: self.algorithm.to_string(),
                step: self.steps,
            });
        }
        Ok(())
    }

    fn theta(&self) -> &[f64] {
        &self.theta
    }

    fn latent(&self) -> &[f64] {
        &self.particles
    }

    fn steps_taken(&self) -> u64 {
        self.steps
    }
}
