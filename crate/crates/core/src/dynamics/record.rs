use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Algorithm, Budget, Integrator, SdeConfig};
use crate::error::Result;
use crate::models::Model;

/// Upper bound on retained path samples when the stride is chosen automatically.
pub const MAX_PATH_SAMPLES: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub step: u64,
    pub grad_evals: u64,
    pub elapsed_seconds: f64,
    pub theta: Vec<f64>,
}

/// One trajectory: the thinned `θ` path, cost accounting, and terminal state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub config: SdeConfig,
    /// Final sampling stride (wall-clock runs double it as the path grows).
    pub thin_stride: u64,
    pub samples: Vec<PathSample>,
    pub terminal_theta: Vec<f64>,
    /// Terminal latent state, `latent_chains` rows of `d_x` values.
    pub terminal_latent: Vec<f64>,
    pub latent_chains: usize,
    pub total_steps: u64,
    pub total_grad_evals: u64,
    pub wall_seconds: f64,
}

/// Equality ignores `wall_seconds`, which is measurement, not trajectory.
impl PartialEq for RunRecord {
    fn eq(&self, other: &Self) -> bool {
        self.algorithm == other.algorithm
            && self.config == other.config
            && self.thin_stride == other.thin_stride
            && self.samples == other.samples
            && self.terminal_theta == other.terminal_theta
            && self.terminal_latent == other.terminal_latent
            && self.latent_chains == other.latent_chains
            && self.total_steps == other.total_steps
            && self.total_grad_evals == other.total_grad_evals
    }
}

/// JSON summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub config: SdeConfig,
    pub theta_final: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_star: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_error: Option<f64>,
    pub total_grad_evals: u64,
    pub total_steps: u64,
    pub wall_seconds: f64,
}

impl RunRecord {
    /// Mean of the retained `θ` samples whose step lies in the final
    /// `fraction` of the run.
    pub fn tail_mean(&self, fraction: f64) -> Vec<f64> {
        let cutoff = self.total_steps as f64 * (1.0 - fraction);
        let tail: Vec<&PathSample> = self.samples.iter().filter(|s| s.step as f64 >= cutoff).collect();
        let d = self.terminal_theta.len();
        let mut mean = vec![0.0; d];
        for s in &tail {
            for (m, t) in mean.iter_mut().zip(&s.theta) {
                *m += t;
            }
        }
        mean.iter_mut().for_each(|m| *m /= tail.len().max(1) as f64);
        mean
    }

    pub fn summary(&self, model: &dyn Model) -> RunSummary {
        let theta_star = model.oracle().map(|o| o.mmle());
        let abs_error = theta_star.as_ref().map(|s| distance(s, &self.terminal_theta));
        RunSummary {
            algorithm: self.algorithm,
            config: self.config.clone(),
            theta_final: self.terminal_theta.clone(),
            theta_star,
            abs_error,
            total_grad_evals: self.total_grad_evals,
            total_steps: self.total_steps,
            wall_seconds: self.wall_seconds,
        }
    }

    /// CSV header `step,grad_evals,elapsed_s,theta_1,...`.
    pub fn csv_header(d_theta: usize) -> Vec<String> {
        let mut h = vec!["step".to_string(), "grad_evals".into(), "elapsed_s".into()];
        h.extend((1..=d_theta).map(|k| format!("theta_{k}")));
        h
    }

    pub fn csv_row(sample: &PathSample) -> Vec<String> {
        let mut row = vec![
            sample.step.to_string(),
            sample.grad_evals.to_string(),
            sample.elapsed_seconds.to_string(),
        ];
        row.extend(sample.theta.iter().map(|v| v.to_string()));
        row
    }

    /// Writes the path as CSV. `preamble` lines are emitted first, each
    /// prefixed with `# `.
    pub fn write_csv<W: Write>(&self, mut out: W, preamble: &[String]) -> Result<()> {
        for line in preamble {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(Self::csv_header(self.terminal_theta.len()))?;
        for s in &self.samples {
            w.write_record(Self::csv_row(s))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

/// Drives `integrator` until the budget in `config` is spent.
///
/// Step and grad-eval budgets fix the step count up front (a grad-eval budget
/// runs `floor(budget / cost_per_step)` steps); a wall-clock budget checks the
/// clock before every step, so the run overshoots by at most one step. The
/// initial and final states are always recorded.
pub fn step_budget_loop(integrator: &mut dyn Integrator, config: &SdeConfig) -> Result<RunRecord> {
    let start = Instant::now();
    let per_step = integrator.grad_evals_per_step();
    let max_steps = match config.budget {
        Budget::MaxSteps(n) => Some(n),
        Budget::MaxGradEvals(g) => Some(g / per_step),
        Budget::MaxSeconds(_) => None,
    };
    let mut stride = config
        .thin
        .unwrap_or_else(|| max_steps.map_or(1, |n| n.div_ceil(MAX_PATH_SAMPLES).max(1)));
    let timed = config.record_wall_clock || config.budget.is_wall_clock();
    let clock = |start: &Instant| {
        if timed {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        }
    };
    let sample = |integ: &dyn Integrator, elapsed: f64| PathSample {
        step: integ.steps_taken(),
        grad_evals: integ.steps_taken() * per_step,
        elapsed_seconds: elapsed,
        theta: integ.theta().to_vec(),
    };

    let mut samples = vec![sample(integrator, 0.0)];
    let mut steps = 0u64;
    loop {
        match (max_steps, config.budget) {
            (Some(n), _) if steps >= n => break,
            (None, Budget::MaxSeconds(limit)) if start.elapsed().as_secs_f64() >= limit => break,
            _ => {}
        }
        integrator.step()?;
        steps += 1;
        if steps.is_multiple_of(stride) {
            samples.push(sample(integrator, clock(&start)));
            if max_steps.is_none() && samples.len() as u64 > 2 * MAX_PATH_SAMPLES && config.thin.is_none() {
                stride *= 2;
                samples.retain(|s| s.step % stride == 0);
            }
        }
    }
    if samples.last().map(|s| s.step) != Some(steps) {
        samples.push(sample(integrator, clock(&start)));
    }
    let d_latent = if integrator.latent().is_empty() {
        0
    } else {
        integrator.latent().len() / config.x0.len().max(1)
    };
    Ok(RunRecord {
        algorithm: integrator.algorithm(),
        config: config.clone(),
        thin_stride: stride,
        samples,
        terminal_theta: integrator.theta().to_vec(),
        terminal_latent: integrator.latent().to_vec(),
        latent_chains: d_latent,
        total_steps: steps,
        total_grad_evals: steps * per_step,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}
