use serde::{Deserialize, Serialize};

use super::Algorithm;
use crate::error::{Error, Result};

/// When a run stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    MaxSteps(u64),
    MaxSeconds(f64),
    MaxGradEvals(u64),
}

impl Budget {
    pub fn kind(&self) -> &'static str {
        match self {
            Budget::MaxSteps(_) => "max_steps",
            Budget::MaxSeconds(_) => "max_seconds",
            Budget::MaxGradEvals(_) => "max_grad_evals",
        }
    }

    pub fn is_wall_clock(&self) -> bool {
        matches!(self, Budget::MaxSeconds(_))
    }
}

/// All tunables of one run.
///
/// Not every algorithm reads every field: SFLA uses `epsilon`, `beta`,
/// `delta`; SOUL uses `gamma` (inner ULA step), `delta` (outer step) and
/// `n_inner`; PGD and IPLA use `gamma` and `n_inner` (particles); the averaged
/// oracle dynamics uses `delta` and `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub epsilon: f64,
    pub beta: f64,
    pub delta: f64,
    pub gamma: f64,
    pub n_inner: usize,
    pub budget: Budget,
    pub seed: u64,
    pub theta0: Vec<f64>,
    pub x0: Vec<f64>,
    /// Path sampling stride; `None` picks one that keeps at most
    /// [`MAX_PATH_SAMPLES`](super::MAX_PATH_SAMPLES) samples.
    #[serde(default)]
    pub thin: Option<u64>,
    /// Record wall-clock time in the path even for step or grad-eval budgets.
    /// Off by default so that replayed trajectories are byte-identical.
    #[serde(default)]
    pub record_wall_clock: bool,
}

impl SdeConfig {
    /// A config with unit time-scale separation and temperature, one inner
    /// step, and the given step sizes.
    pub fn new(delta: f64, budget: Budget, seed: u64, theta0: Vec<f64>, x0: Vec<f64>) -> Self {
        Self {
            epsilon: 1.0,
            beta: 1.0,
            delta,
            gamma: delta,
            n_inner: 1,
            budget,
            seed,
            theta0,
            x0,
            thin: None,
            record_wall_clock: false,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_n_inner(mut self, n: usize) -> Self {
        self.n_inner = n;
        self
    }

    pub fn with_thin(mut self, stride: u64) -> Self {
        self.thin = Some(stride);
        self
    }

    /// Applies the equal-cost coupling between algorithms driven by one
    /// `(γ, N)` pair: SFLA gets `ε = 1/N, δ = γ/N`; SOUL gets `δ = γ` with
    /// `M = M̃ = N`; the averaged dynamics gets `δ = γ`; PGD and IPLA use
    /// `(γ, N)` as is.
    pub fn coupled_for(&self, algorithm: Algorithm) -> Self {
        let mut c = self.clone();
        let n = self.n_inner as f64;
        match algorithm {
            Algorithm::Sfla => {
                c.epsilon = 1.0 / n;
                c.delta = self.gamma / n;
            }
            Algorithm::Soul | Algorithm::AveragedUla => c.delta = self.gamma,
            Algorithm::Pgd | Algorithm::Ipla => {}
        }
        c
    }

    /// Checks the fields `algorithm` actually reads.
    pub fn validate_for(&self, algorithm: Algorithm) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && !v.is_nan() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive, got {v}")))
            }
        };
        let finite_positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match algorithm {
            Algorithm::Sfla => {
                finite_positive("epsilon", self.epsilon)?;
                positive("beta", self.beta)?;
                finite_positive("delta", self.delta)?;
            }
            Algorithm::Soul => {
                finite_positive("gamma", self.gamma)?;
                // δ = 0 freezes θ, which is how the inner chain is checked in isolation.
                if !(self.delta >= 0.0 && self.delta.is_finite()) {
                    return Err(Error::config(format!("delta must be non-negative, got {}", self.delta)));
                }
            }
            Algorithm::Pgd | Algorithm::Ipla => finite_positive("gamma", self.gamma)?,
            Algorithm::AveragedUla => {
                positive("beta", self.beta)?;
                finite_positive("delta", self.delta)?;
            }
        }
        if algorithm.uses_inner() && self.n_inner == 0 {
            return Err(Error::config("n_inner must be >= 1"));
        }
        match self.budget {
            Budget::MaxSeconds(s) if !(s >= 0.0 && s.is_finite()) => {
                return Err(Error::config(format!("max_seconds must be >= 0, got {s}")))
            }
            _ => {}
        }
        if self.thin == Some(0) {
            return Err(Error::config("thin stride must be >= 1"));
        }
        if self.theta0.iter().chain(&self.x0).any(|v| !v.is_finite()) {
            return Err(Error::config("initial state must be finite"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> SdeConfig {
        SdeConfig::new(1e-3, Budget::MaxSteps(10), 1, vec![0.0], vec![0.0; 2])
    }

    #[test]
    fn rejects_nonpositive_epsilon() {
        let c = base().with_epsilon(0.0);
        assert!(c.validate_for(Algorithm::Sfla).is_err());
        // PGD does not read epsilon.
        assert!(c.validate_for(Algorithm::Pgd).is_ok());
    }

    #[test]
    fn infinite_beta_is_allowed() {
        assert!(base().with_beta(f64::INFINITY).validate_for(Algorithm::Sfla).is_ok());
        assert!(base().with_beta(-1.0).validate_for(Algorithm::Sfla).is_err());
    }

    #[test]
    fn coupling_follows_equal_cost_rule() {
        let c = base().with_gamma(0.05).with_n_inner(100);
        let s = c.coupled_for(Algorithm::Sfla);
        assert_eq!(s.epsilon, 0.01);
        assert_eq!(s.delta, 0.05 / 100.0);
        assert_eq!(c.coupled_for(Algorithm::Soul).delta, 0.05);
    }
}
