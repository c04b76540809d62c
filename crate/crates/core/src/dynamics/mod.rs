//! Stochastic MMLE algorithms.
//!
//! Every algorithm is an [`Integrator`]: a deterministic-given-seed state
//! machine advanced one step at a time. [`step_budget_loop`] turns any
//! integrator into a [`RunRecord`] under a step, grad-eval or wall-clock
//! budget. The `*_run` functions bundle the two.
//!
//! Cost is counted in gradient evaluations: one `∇θU` or `∇xU` at one point is
//! one unit, and an oracle marginal gradient is also one unit.

mod averaged;
mod config;
pub mod noise;
mod particles;
mod record;
mod sfla;
mod soul;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use averaged::AveragedUlaIntegrator;
pub use config::{Budget, SdeConfig};
pub use particles::ParticleIntegrator;
pub use record::{step_budget_loop, PathSample, RunRecord, RunSummary, MAX_PATH_SAMPLES};
pub use sfla::SflaIntegrator;
pub use soul::SoulIntegrator;

use crate::error::{Error, Result};
use crate::models::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Slow-fast Langevin algorithm.
    Sfla,
    Soul,
    /// Particle gradient descent.
    Pgd,
    /// Interacting particle Langevin algorithm.
    Ipla,
    /// Langevin on the exact marginal (oracle models only).
    AveragedUla,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Sfla,
        Algorithm::Soul,
        Algorithm::Pgd,
        Algorithm::Ipla,
        Algorithm::AveragedUla,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Sfla => "sfla",
            Algorithm::Soul => "soul",
            Algorithm::Pgd => "pgd",
            Algorithm::Ipla => "ipla",
            Algorithm::AveragedUla => "averaged_ula",
        }
    }

    /// Whether `n_inner` is read (inner chain length or particle count).
    pub fn uses_inner(&self) -> bool {
        matches!(self, Algorithm::Soul | Algorithm::Pgd | Algorithm::Ipla)
    }

    /// Gradient evaluations per step for `n_inner = n`.
    pub fn grad_evals_per_step(&self, n: usize) -> u64 {
        match self {
            Algorithm::Sfla => 2,
            Algorithm::Soul | Algorithm::Pgd | Algorithm::Ipla => 2 * n as u64,
            Algorithm::AveragedUla => 1,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown algorithm `{s}` (expected one of sfla, soul, pgd, ipla, averaged_ula)"
                ))
            })
    }
}

/// A single-trajectory stepper.
pub trait Integrator {
    fn algorithm(&self) -> Algorithm;

    fn grad_evals_per_step(&self) -> u64;

    /// Advances one step. A non-finite state aborts with
    /// [`Error::Divergence`] carrying the offending step index.
    fn step(&mut self) -> Result<()>;

    fn theta(&self) -> &[f64];

    /// Latent state, flattened (`N × d_x` for particle clouds, empty for the
    /// averaged dynamics).
    fn latent(&self) -> &[f64];

    fn steps_taken(&self) -> u64;
}

pub(crate) fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Builds the integrator for `algorithm` over `model`.
pub fn integrator<'m>(
    model: &'m dyn Model,
    algorithm: Algorithm,
    config: &SdeConfig,
) -> Result<Box<dyn Integrator + 'm>> {
    Ok(match algorithm {
        Algorithm::Sfla => Box::new(SflaIntegrator::new(model, config)?),
        Algorithm::Soul => Box::new(SoulIntegrator::new(model, config)?),
        Algorithm::Pgd | Algorithm::Ipla => Box::new(ParticleIntegrator::new(model, algorithm, config)?),
        Algorithm::AveragedUla => Box::new(AveragedUlaIntegrator::new(model, config)?),
    })
}

pub fn run(model: &dyn Model, algorithm: Algorithm, config: &SdeConfig) -> Result<RunRecord> {
    let mut integ = integrator(model, algorithm, config)?;
    step_budget_loop(integ.as_mut(), config)
}

pub fn sfla_run(model: &dyn Model, config: &SdeConfig) -> Result<RunRecord> {
    run(model, Algorithm::Sfla, config)
}

pub fn soul_run(model: &dyn Model, config: &SdeConfig) -> Result<RunRecord> {
    run(model, Algorithm::Soul, config)
}

pub fn pgd_run(model: &dyn Model, config: &SdeConfig) -> Result<RunRecord> {
    run(model, Algorithm::Pgd, config)
}

pub fn ipla_run(model: &dyn Model, config: &SdeConfig) -> Result<RunRecord> {
    run(model, Algorithm::Ipla, config)
}

pub fn averaged_ula_run(model: &dyn Model, config: &SdeConfig) -> Result<RunRecord> {
    run(model, Algorithm::AveragedUla, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{generate_logistic_data, GaussianHierarchicalModel};

    fn gaussian() -> GaussianHierarchicalModel {
        GaussianHierarchicalModel::new(vec![1.0, 3.0], 1.0, 1.0).unwrap()
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!("langevin".parse::<Algorithm>().is_err());
    }

    #[test]
    fn zero_step_budget_keeps_initial_state() {
        let m = gaussian();
        let cfg = SdeConfig::new(1e-3, Budget::MaxSteps(0), 3, vec![0.5], vec![0.0, 0.0]);
        let r = sfla_run(&m, &cfg).unwrap();
        assert_eq!(r.samples.len(), 1);
        assert_eq!(r.samples[0].theta, vec![0.5]);
        assert_eq!(r.total_grad_evals, 0);
    }

    #[test]
    fn grad_eval_budget_maps_to_whole_steps() {
        let m = gaussian();
        let cfg = SdeConfig::new(1e-3, Budget::MaxGradEvals(100), 3, vec![0.0], vec![0.0, 0.0]);
        let r = sfla_run(&m, &cfg).unwrap();
        assert_eq!(r.total_steps, 50);
        assert_eq!(r.total_grad_evals, 100);
        // SOUL with M = 3 costs 6 per outer step: 16 steps, 96 evals.
        let r = soul_run(&m, &cfg.clone().with_n_inner(3)).unwrap();
        assert_eq!((r.total_steps, r.total_grad_evals), (16, 96));
    }

    #[test]
    fn wall_clock_budget_stops_promptly() {
        let m = gaussian();
        let budget = 0.05;
        let cfg = SdeConfig::new(1e-3, Budget::MaxSeconds(budget), 3, vec![0.0], vec![0.0, 0.0]);
        let r = sfla_run(&m, &cfg).unwrap();
        let last = r.samples.last().unwrap();
        assert_eq!(last.step, r.total_steps);
        assert!(r.total_steps > 0);
        // One step is far below a millisecond here.
        assert!(last.elapsed_seconds <= budget + 1e-2, "{}", last.elapsed_seconds);
        let times: Vec<f64> = r.samples.iter().map(|s| s.elapsed_seconds).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn divergence_reports_step() {
        let m = gaussian();
        // Latent drift rate δ/ε · 2 = 5 > 2 makes the x chain blow up.
        let cfg = SdeConfig::new(0.25, Budget::MaxSteps(100_000), 3, vec![0.0], vec![0.0, 0.0]).with_epsilon(0.1);
        match sfla_run(&m, &cfg) {
            Err(Error::Divergence { algorithm, step }) => {
                assert_eq!(algorithm, "sfla");
                assert!(step > 1 && step < 100_000);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn averaged_requires_oracle() {
        let m = generate_logistic_data(2, 5, 0.0, 1.0, 1).unwrap();
        let cfg = SdeConfig::new(1e-2, Budget::MaxSteps(5), 1, vec![0.0], vec![0.0, 0.0]);
        assert!(matches!(averaged_ula_run(&m, &cfg), Err(Error::UnsupportedOracle(_))));
    }

    #[test]
    fn thinning_bounds_path_length() {
        let m = gaussian();
        let cfg = SdeConfig::new(1e-3, Budget::MaxSteps(25_001), 3, vec![0.0], vec![0.0, 0.0]);
        let r = sfla_run(&m, &cfg).unwrap();
        assert_eq!(r.thin_stride, 3);
        assert!(r.samples.len() as u64 <= MAX_PATH_SAMPLES + 2);
        assert_eq!(r.samples.last().unwrap().step, 25_001);
        assert!(r.samples.windows(2).all(|w| w[0].grad_evals < w[1].grad_evals));
    }
}
