//! Weighted log-log regression with a bootstrap confidence interval.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BOOTSTRAP_REPLICAS: usize = 2_000;
const BOOTSTRAP_SEED: u64 = 0x05ee_df17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% percentile interval for the slope.
    pub ci_low: f64,
    pub ci_high: f64,
    pub bootstrap_replicas: usize,
}

fn wls(lx: &[f64], ly: &[f64], w: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let mx = lx.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = ly.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for ((x, y), w) in lx.iter().zip(ly).zip(w) {
        sxy += w * (x - mx) * (y - my);
        sxx += w * (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Fits `log y = slope · log x + intercept` to `(x, y, stderr)` points.
///
/// Points are weighted by inverse variance in log space, `(y / stderr)²`;
/// if any standard error is zero the points are treated as exact and
/// weighted uniformly. The interval comes from a parametric bootstrap that
/// redraws each `y` as `y · exp(z · stderr / y)`.
pub fn fit_loglog_slope(points: &[(f64, f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::config(format!(
            "slope fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0 && p.2 >= 0.0)) {
        return Err(Error::config(format!(
            "slope fit needs positive x, y and non-negative stderr, got {p:?}"
        )));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    if lx.iter().all(|x| (x - lx[0]).abs() < 1e-300) {
        return Err(Error::config("slope fit needs distinct x values"));
    }
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let rel: Vec<f64> = points.iter().map(|p| p.2 / p.1).collect();
    let exact = rel.contains(&0.0);
    let w: Vec<f64> = if exact {
        vec![1.0; points.len()]
    } else {
        rel.iter().map(|r| 1.0 / (r * r)).collect()
    };
    let (slope, intercept) = wls(&lx, &ly, &w);

    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let mut slopes: Vec<f64> = (0..BOOTSTRAP_REPLICAS)
        .map(|_| {
            let by: Vec<f64> = ly
                .iter()
                .zip(&rel)
                .map(|(y, r)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    y + z * r
                })
                .collect();
            wls(&lx, &by, &w).0
        })
        .collect();
    slopes.sort_by(f64::total_cmp);
    Ok(SlopeFit {
        slope,
        intercept,
        ci_low: percentile(&slopes, 0.025),
        ci_high: percentile(&slopes, 0.975),
        bootstrap_replicas: BOOTSTRAP_REPLICAS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = [0.5, 1.0, 2.0, 4.0].iter().map(|&x| (x, 3.0 * x * x, 0.0)).collect();
        let f = fit_loglog_slope(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((f.ci_high - f.ci_low).abs() < 1e-12);
    }

    #[test]
    fn noisy_linear_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<_> = (0..10)
            .map(|i| {
                let x = 10f64.powf(i as f64 / 9.0);
                let z: f64 = StandardNormal.sample(&mut rng);
                let y = 2.0 * x * (1.0 + 0.01 * z);
                (x, y, 0.01 * y)
            })
            .collect();
        let f = fit_loglog_slope(&pts).unwrap();
        assert!(f.ci_low >= 0.95 && f.ci_high <= 1.05, "{f:?}");
        assert!(f.ci_low <= f.slope && f.slope <= f.ci_high);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_loglog_slope(&[(1.0, 1.0, 0.0), (2.0, 2.0, 0.0)]).is_err());
        assert!(fit_loglog_slope(&[(1.0, 1.0, 0.0), (2.0, -2.0, 0.0), (3.0, 3.0, 0.0)]).is_err());
    }
}
