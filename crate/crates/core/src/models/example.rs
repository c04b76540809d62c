use serde::{Deserialize, Serialize};

use super::Model;
use crate::error::{Error, Result};

/// Bounded nonlinear coupling of an [`ExamplePotential`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ExampleVariant {
    /// `Σ_i b(θ_i) g(x_i)` with `b = c_b cos`, `g = c_g cos`.
    Product { c_b: f64, c_g: f64 },
    /// `Σ_i h(x_i - θ_i)` with `h = c_h cos`.
    Difference { c_h: f64 },
}

/// `U(θ, x) = a|x|² + ã|θ|² + coupling`, with `d_θ = d_x = d`.
///
/// These are the reference potentials for the convexity/monotonicity probes:
/// the coupling has every derivative bounded by its amplitude, so the
/// sufficient conditions on `(a, ã)` can be read off directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamplePotential {
    pub dim: usize,
    pub a: f64,
    pub a_tilde: f64,
    pub variant: ExampleVariant,
}

impl ExamplePotential {
    pub fn new(dim: usize, a: f64, a_tilde: f64, variant: ExampleVariant) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("example potential needs dim >= 1"));
        }
        if !(a > 0.0 && a_tilde > 0.0) {
            return Err(Error::config("a and a_tilde must be positive"));
        }
        Ok(Self {
            dim,
            a,
            a_tilde,
            variant,
        })
    }

    /// Plain quadratic `a|x|² + ã|θ|²`.
    pub fn quadratic(dim: usize, a: f64, a_tilde: f64) -> Result<Self> {
        Self::new(dim, a, a_tilde, ExampleVariant::Product { c_b: 0.0, c_g: 0.0 })
    }

    /// Largest `κ` for which the fast-variable condition holds, if positive:
    /// `2a - ‖g''‖‖b‖` (product) or `2a - ‖h''‖` (difference).
    pub fn kappa(&self) -> Option<f64> {
        let k = match self.variant {
            ExampleVariant::Product { c_b, c_g } => 2.0 * self.a - c_g.abs() * c_b.abs(),
            ExampleVariant::Difference { c_h } => 2.0 * self.a - c_h.abs(),
        };
        (k > 0.0).then_some(k)
    }

    /// Whether `(a, ã)` satisfy the sufficient conditions that make the
    /// potential meet every convexity assumption.
    pub fn satisfies_conditions(&self) -> bool {
        let Some(kappa) = self.kappa() else {
            return false;
        };
        let d = self.dim as f64;
        match self.variant {
            ExampleVariant::Product { c_b, c_g } => {
                let (b, g) = (c_b.abs(), c_g.abs());
                2.0 * self.a_tilde - b * g >= d * g * g * b * b / (2.0 * kappa)
            }
            ExampleVariant::Difference { c_h } => 2.0 * self.a_tilde >= (1.0 + d / (2.0 * kappa)) * c_h.abs(),
        }
    }

    /// Lower bound on the smallest joint-Hessian eigenvalue.
    ///
    /// Each coordinate pair `(θ_i, x_i)` has a 2×2 Hessian block; its smallest
    /// eigenvalue is concave in the coupling curvatures, so the bound is
    /// attained at a corner of their range.
    pub fn joint_mu(&self) -> f64 {
        let min_eig = |p: f64, q: f64, r: f64| {
            // [[p, r], [r, q]]
            0.5 * (p + q) - (0.25 * (p - q) * (p - q) + r * r).sqrt()
        };
        let (two_at, two_a) = (2.0 * self.a_tilde, 2.0 * self.a);
        match self.variant {
            ExampleVariant::Difference { c_h } => {
                let c = c_h.abs();
                [-c, c]
                    .into_iter()
                    .map(|t| min_eig(two_at + t, two_a + t, -t))
                    .fold(f64::INFINITY, f64::min)
            }
            ExampleVariant::Product { c_b, c_g } => {
                let c = (c_b * c_g).abs();
                let mut best = f64::INFINITY;
                for tt in [-c, c] {
                    for xx in [-c, c] {
                        for tx in [-c, c] {
                            best = best.min(min_eig(two_at + tt, two_a + xx, tx));
                        }
                    }
                }
                best
            }
        }
    }

    fn split<'a>(&self, theta: &'a [f64], x: &'a [f64]) -> impl Iterator<Item = (f64, f64)> + 'a {
        theta.iter().copied().zip(x.iter().copied())
    }
}

impl Model for ExamplePotential {
    fn name(&self) -> &str {
        match self.variant {
            ExampleVariant::Product { .. } => "example_product",
            ExampleVariant::Difference { .. } => "example_difference",
        }
    }

    fn dim_theta(&self) -> usize {
        self.dim
    }

    fn dim_latent(&self) -> usize {
        self.dim
    }

    fn eval_potential(&self, theta: &[f64], x: &[f64]) -> f64 {
        self.split(theta, x)
            .map(|(t, x)| {
                let coupling = match self.variant {
                    ExampleVariant::Product { c_b, c_g } => c_b * t.cos() * c_g * x.cos(),
                    ExampleVariant::Difference { c_h } => c_h * (x - t).cos(),
                };
                self.a * x * x + self.a_tilde * t * t + coupling
            })
            .sum()
    }

    fn eval_grad_theta(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        for (o, (t, x)) in out.iter_mut().zip(self.split(theta, x)) {
            let coupling = match self.variant {
                ExampleVariant::Product { c_b, c_g } => -c_b * t.sin() * c_g * x.cos(),
                ExampleVariant::Difference { c_h } => c_h * (x - t).sin(),
            };
            *o = 2.0 * self.a_tilde * t + coupling;
        }
    }

    fn eval_grad_x(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        for (o, (t, x)) in out.iter_mut().zip(self.split(theta, x)) {
            let coupling = match self.variant {
                ExampleVariant::Product { c_b, c_g } => -c_b * t.cos() * c_g * x.sin(),
                ExampleVariant::Difference { c_h } => -c_h * (x - t).sin(),
            };
            *o = 2.0 * self.a * x + coupling;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn difference_conditions() {
        // 2a - c_h = 1.5, 2ã = 1 >= (1 + 2/3) 0.5.
        let good = ExamplePotential::new(2, 1.0, 0.5, ExampleVariant::Difference { c_h: 0.5 }).unwrap();
        assert!(good.satisfies_conditions());
        assert_eq!(good.kappa(), Some(1.5));
        let bad = ExamplePotential::new(2, 0.1, 0.5, ExampleVariant::Difference { c_h: 1.0 }).unwrap();
        assert!(!bad.satisfies_conditions());
        assert_eq!(bad.kappa(), None);
    }

    #[test]
    fn joint_mu_matches_dense_scan() {
        let m = ExamplePotential::new(1, 1.0, 0.5, ExampleVariant::Difference { c_h: 0.5 }).unwrap();
        let mut scan = f64::INFINITY;
        for k in 0..=2000 {
            let t = -0.5 + k as f64 / 2000.0;
            let h = nalgebra::Matrix2::new(1.0 + t, -t, -t, 2.0 + t);
            scan = scan.min(h.symmetric_eigen().eigenvalues.min());
        }
        assert!((m.joint_mu() - scan).abs() < 1e-12);
    }

    #[test]
    fn quadratic_is_plain() {
        let q = ExamplePotential::quadratic(3, 0.5, 0.5).unwrap();
        let u = q.potential(&[1.0, 2.0, 0.0], &[0.0, 1.0, 1.0]).unwrap();
        assert_eq!(u, 0.5 * 2.0 + 0.5 * 5.0);
    }
}
