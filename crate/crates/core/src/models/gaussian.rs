use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{MarginalOracle, Model};
use crate::error::{Error, Result};

/// Hierarchical Gaussian model with scalar parameter:
/// `x_j ~ N(θ, σx²)` independently and `y_j | x_j ~ N(x_j, σy²)`.
///
/// The potential drops the normalising constants of both Gaussian factors:
///
/// ```text
/// U(θ, x) = Σ_j (y_j - x_j)² / (2σy²) + Σ_j (x_j - θ)² / (2σx²)
/// ```
///
/// so `log ∫ exp(-U) dx = log p_θ(y) + normalizer()`. The oracle reports the
/// properly normalised `log p_θ(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianHierarchicalModel {
    y: Vec<f64>,
    sigma_x: f64,
    sigma_y: f64,
}

impl GaussianHierarchicalModel {
    pub fn new(y: Vec<f64>, sigma_x: f64, sigma_y: f64) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::config("gaussian model needs at least one observation"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("gaussian observations must be finite"));
        }
        for (name, s) in [("sigma_x", sigma_x), ("sigma_y", sigma_y)] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {s}")));
            }
        }
        Ok(Self { y, sigma_x, sigma_y })
    }

    /// Draws `d_x` observations from the model at `theta_true`.
    pub fn generate(d_x: usize, theta_true: f64, sigma_x: f64, sigma_y: f64, seed: u64) -> Result<Self> {
        if d_x == 0 {
            return Err(Error::config("gaussian model needs d_x >= 1"));
        }
        if !(sigma_x > 0.0 && sigma_y > 0.0) {
            return Err(Error::config("sigma_x and sigma_y must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prior = Normal::new(theta_true, sigma_x).expect("validated scale");
        let y = (0..d_x)
            .map(|_| {
                let x = prior.sample(&mut rng);
                let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
                x + sigma_y * z
            })
            .collect();
        Self::new(y, sigma_x, sigma_y)
    }

    pub fn observations(&self) -> &[f64] {
        &self.y
    }

    pub fn sigma_x(&self) -> f64 {
        self.sigma_x
    }

    pub fn sigma_y(&self) -> f64 {
        self.sigma_y
    }

    fn total_variance(&self) -> f64 {
        self.sigma_x * self.sigma_x + self.sigma_y * self.sigma_y
    }

    fn mean_y(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.y.len() as f64
    }

    /// `log p_θ(y)` for scalar `θ`.
    pub fn log_marginal(&self, theta: f64) -> f64 {
        let s = self.total_variance();
        let n = self.y.len() as f64;
        // Centred form: depends on θ only through (θ - ȳ)², so it is exactly
        // monotone in |θ - ȳ| under rounding.
        let mean = self.mean_y();
        let spread: f64 = self.y.iter().map(|y| (y - mean) * (y - mean)).sum();
        let d = theta - mean;
        -(spread + n * d * d) / (2.0 * s) - 0.5 * n * (2.0 * std::f64::consts::PI * s).ln()
    }

    /// `d/dθ log p_θ(y) = Σ_j (y_j - θ) / (σx² + σy²)`.
    pub fn grad_log_marginal(&self, theta: f64) -> f64 {
        self.y.iter().map(|y| y - theta).sum::<f64>() / self.total_variance()
    }

    /// `θ* = mean(y)`.
    pub fn theta_star(&self) -> f64 {
        self.mean_y()
    }

    /// `θ_{k+1} = (σx² mean(y) + σy² θ_k) / (σx² + σy²)`, evaluated as
    /// `θ* + r (θ_k - θ*)` so that `θ*` is an exact fixed point.
    pub fn em_step(&self, theta: f64) -> f64 {
        let star = self.mean_y();
        star + self.em_rate() * (theta - star)
    }

    /// Error contraction factor of exact EM, `σy² / (σx² + σy²)`.
    pub fn em_rate(&self) -> f64 {
        self.sigma_y.powi(2) / self.total_variance()
    }

    /// `μ_G = d_x / (σx² + σy²)`, the curvature of `-log p_θ(y)`.
    pub fn mu_marginal(&self) -> f64 {
        self.y.len() as f64 / self.total_variance()
    }

    pub fn posterior_mean_at(&self, theta: f64) -> Vec<f64> {
        let (vx, vy) = (self.sigma_x.powi(2), self.sigma_y.powi(2));
        let s = vx + vy;
        self.y.iter().map(|y| (vx * y + vy * theta) / s).collect()
    }

    /// Per-coordinate posterior variance `σx² σy² / (σx² + σy²)`.
    pub fn posterior_variance(&self) -> f64 {
        let (vx, vy) = (self.sigma_x.powi(2), self.sigma_y.powi(2));
        vx * vy / (vx + vy)
    }

    /// `log ∫ exp(-U(θ, x)) dx - log p_θ(y)`, independent of `θ`.
    pub fn normalizer(&self) -> f64 {
        let n = self.y.len() as f64;
        let two_pi = 2.0 * std::f64::consts::PI;
        0.5 * n * ((two_pi * self.sigma_x.powi(2)).ln() + (two_pi * self.sigma_y.powi(2)).ln())
    }

    /// Constant joint Hessian of `U`, ordered `(θ, x_1, ..., x_{d_x})`.
    pub fn hessian(&self) -> DMatrix<f64> {
        let n = self.y.len();
        let (px, py) = (self.sigma_x.powi(-2), self.sigma_y.powi(-2));
        let mut h = DMatrix::zeros(n + 1, n + 1);
        h[(0, 0)] = n as f64 * px;
        for j in 1..=n {
            h[(0, j)] = -px;
            h[(j, 0)] = -px;
            h[(j, j)] = px + py;
        }
        h
    }

    /// Joint minimiser of `U`: `(θ*, m(θ*))`.
    pub fn joint_minimizer(&self) -> (f64, Vec<f64>) {
        let t = self.theta_star();
        (t, self.posterior_mean_at(t))
    }

    /// `min U = Σ_j (y_j - mean(y))² / (2(σx² + σy²))`.
    pub fn potential_minimum(&self) -> f64 {
        let m = self.mean_y();
        self.y.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / (2.0 * self.total_variance())
    }
}

impl Model for GaussianHierarchicalModel {
    fn name(&self) -> &str {
        "gaussian"
    }

    fn dim_theta(&self) -> usize {
        1
    }

    fn dim_latent(&self) -> usize {
        self.y.len()
    }

    fn eval_potential(&self, theta: &[f64], x: &[f64]) -> f64 {
        let (py, px) = (0.5 / (self.sigma_y * self.sigma_y), 0.5 / (self.sigma_x * self.sigma_x));
        let t = theta[0];
        self.y
            .iter()
            .zip(x)
            .map(|(y, x)| (y - x) * (y - x) * py + (x - t) * (x - t) * px)
            .sum()
    }

    fn eval_grad_theta(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        let t = theta[0];
        out[0] = x.iter().map(|x| t - x).sum::<f64>() / (self.sigma_x * self.sigma_x);
    }

    fn eval_grad_x(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        let (py, px) = (1.0 / (self.sigma_y * self.sigma_y), 1.0 / (self.sigma_x * self.sigma_x));
        let t = theta[0];
        for ((o, x), y) in out.iter_mut().zip(x).zip(&self.y) {
            *o = (x - y) * py + (x - t) * px;
        }
    }

    fn oracle(&self) -> Option<&dyn MarginalOracle> {
        Some(self)
    }
}

impl MarginalOracle for GaussianHierarchicalModel {
    fn marginal_log_likelihood(&self, theta: &[f64]) -> f64 {
        self.log_marginal(theta[0])
    }

    fn grad_marginal_into(&self, theta: &[f64], out: &mut [f64]) {
        out[0] = self.grad_log_marginal(theta[0]);
    }

    fn mmle(&self) -> Vec<f64> {
        vec![self.theta_star()]
    }

    fn exact_em_step(&self, theta: &[f64]) -> Vec<f64> {
        vec![self.em_step(theta[0])]
    }

    fn posterior_mean(&self, theta: &[f64]) -> Vec<f64> {
        self.posterior_mean_at(theta[0])
    }

    fn marginal_curvature(&self) -> f64 {
        self.mu_marginal()
    }
}
