use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{sigmoid, softplus, Model};
use crate::error::{Error, Result};

/// Bayesian logistic regression with a scalar prior-mean parameter.
///
/// Prior `x ~ N(θ·1, σ² I)`, labels `y_i ~ Bernoulli(s(v_iᵀ x))`. The potential
/// is the full negative joint log-likelihood
///
/// ```text
/// U(θ, x) = (d_x/2) log(2πσ²) - Σ_i [y_i log s(v_iᵀx) + (1 - y_i) log s(-v_iᵀx)]
///           + |x - θ·1|² / (2σ²)
/// ```
///
/// with every log-sigmoid evaluated through a softplus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegressionModel {
    labels: Vec<u8>,
    /// Row-major `d_y × d_x`.
    covariates: Vec<f64>,
    d_x: usize,
    sigma: f64,
}

impl LogisticRegressionModel {
    pub fn new(labels: Vec<u8>, covariates: Vec<Vec<f64>>, sigma: f64) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::config("logistic model needs d_y >= 1"));
        }
        if labels.len() != covariates.len() {
            return Err(Error::config(format!(
                "{} labels but {} covariate rows",
                labels.len(),
                covariates.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::config(format!("label {bad} is not 0 or 1")));
        }
        let d_x = covariates[0].len();
        if d_x == 0 {
            return Err(Error::config("logistic model needs d_x >= 1"));
        }
        if covariates.iter().any(|row| row.len() != d_x) {
            return Err(Error::config("covariate rows have unequal length"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::config(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self {
            labels,
            covariates: covariates.into_iter().flatten().collect(),
            d_x,
            sigma,
        })
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn covariate(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.d_x..(i + 1) * self.d_x]
    }

    pub fn num_observations(&self) -> usize {
        self.labels.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn rows(&self) -> impl Iterator<Item = (&[f64], u8)> {
        self.covariates.chunks_exact(self.d_x).zip(self.labels.iter().copied())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

impl Model for LogisticRegressionModel {
    fn name(&self) -> &str {
        "logistic"
    }

    fn dim_theta(&self) -> usize {
        1
    }

    fn dim_latent(&self) -> usize {
        self.d_x
    }

    fn eval_potential(&self, theta: &[f64], x: &[f64]) -> f64 {
        let var = self.sigma * self.sigma;
        let norm = 0.5 * self.d_x as f64 * (2.0 * std::f64::consts::PI * var).ln();
        let nll: f64 = self
            .rows()
            .map(|(v, y)| {
                let t = dot(v, x);
                if y == 1 {
                    softplus(-t)
                } else {
                    softplus(t)
                }
            })
            .sum();
        let prior: f64 = x.iter().map(|x| (x - theta[0]).powi(2)).sum::<f64>() / (2.0 * var);
        norm + nll + prior
    }

    fn eval_grad_theta(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        let t = theta[0];
        out[0] = x.iter().map(|x| t - x).sum::<f64>() / (self.sigma * self.sigma);
    }

    fn eval_grad_x(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        let var = self.sigma * self.sigma;
        for (o, x) in out.iter_mut().zip(x) {
            *o = (x - theta[0]) / var;
        }
        for (v, y) in self.rows() {
            let r = sigmoid(dot(v, x)) - y as f64;
            for (o, v) in out.iter_mut().zip(v) {
                *o += r * v;
            }
        }
    }
}

/// Distribution of the raw covariate entries before the `1/√d_x` scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateLaw {
    #[default]
    StandardNormal,
    /// `|N(0, 1)|`; every covariate entry positive.
    HalfNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticDataOptions {
    pub d_x: usize,
    pub d_y: usize,
    pub theta_true: f64,
    pub sigma: f64,
    pub seed: u64,
    #[serde(default)]
    pub covariates: CovariateLaw,
}

impl LogisticDataOptions {
    /// Synthesises a dataset: covariates scaled by `1/√d_x`, latent weights drawn
    /// from the prior at `theta_true`, Bernoulli labels.
    pub fn generate(&self) -> Result<LogisticRegressionModel> {
        if self.d_x == 0 || self.d_y == 0 {
            return Err(Error::config(format!(
                "d_x and d_y must be >= 1 (got d_x={}, d_y={})",
                self.d_x, self.d_y
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("sigma must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let scale = 1.0 / (self.d_x as f64).sqrt();
        let covariates: Vec<Vec<f64>> = (0..self.d_y)
            .map(|_| {
                (0..self.d_x)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        let z = match self.covariates {
                            CovariateLaw::StandardNormal => z,
                            CovariateLaw::HalfNormal => z.abs(),
                        };
                        z * scale
                    })
                    .collect()
            })
            .collect();
        let latent: Vec<f64> = (0..self.d_x)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                self.theta_true + self.sigma * z
            })
            .collect();
        let labels = covariates
            .iter()
            .map(|v| u8::from(rng.random::<f64>() < sigmoid(dot(v, &latent))))
            .collect();
        LogisticRegressionModel::new(labels, covariates, self.sigma)
    }
}

/// Standard-normal covariates; see [`LogisticDataOptions::generate`].
pub fn generate_logistic_data(
    d_x: usize,
    d_y: usize,
    theta_true: f64,
    sigma: f64,
    seed: u64,
) -> Result<LogisticRegressionModel> {
    LogisticDataOptions {
        d_x,
        d_y,
        theta_true,
        sigma,
        seed,
        covariates: CovariateLaw::StandardNormal,
    }
    .generate()
}
