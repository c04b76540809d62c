//! Sweeps that measure the averaging, concentration, EM-ascent and
//! discretisation-bias behaviour on the Gaussian model.
//!
//! Every study is deterministic given its seed. Replicas run in parallel,
//! each on its own seed derived from the master seed, and are reduced in
//! replica order with pairwise summation.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_loglog_slope, SlopeFit};
use super::lyapunov::{
    averaged_euler_stationary_variance, averaged_stationary_variance, stationary_covariance_euler,
    stationary_covariance_lyapunov, ExactTransition, LinearSde,
};
use crate::dynamics::noise::{derive_seed, fill_standard_normal, stream};
use crate::dynamics::{integrator, Algorithm, Budget, SdeConfig};
use crate::error::{Error, Result};
use crate::models::{GaussianHierarchicalModel, Model};

/// Monte Carlo settings shared by the simulation-backed studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSettings {
    /// Time horizon per replica; `None` uses the study's default.
    pub t_end: Option<f64>,
    /// Leading fraction of each replica discarded before averaging.
    pub burn_fraction: f64,
    pub n_replicas: usize,
    pub seed: u64,
    /// Step size; `None` uses the study's default.
    pub delta: Option<f64>,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            t_end: None,
            burn_fraction: 0.5,
            n_replicas: 64,
            seed: 0,
            delta: None,
        }
    }
}

impl SimulationSettings {
    fn validate(&self) -> Result<()> {
        if self.n_replicas < 2 {
            return Err(Error::config("studies need at least 2 replicas"));
        }
        if !(0.0..1.0).contains(&self.burn_fraction) {
            return Err(Error::config("burn_fraction must lie in [0, 1)"));
        }
        if let Some(t) = self.t_end.filter(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::config(format!("t_end must be positive, got {t}")));
        }
        if let Some(d) = self.delta.filter(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::config(format!("delta must be positive, got {d}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    /// Swept parameter value.
    pub value: f64,
    /// Regression abscissa (the value itself, or `1/β`).
    pub abscissa: f64,
    pub error: f64,
    /// Monte Carlo standard error; zero for exact points.
    pub stderr: f64,
    pub details: BTreeMap<String, f64>,
}

/// Long-run simulation compared against an exact stationary value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationCheck {
    pub value: f64,
    pub delta: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub exact: f64,
    pub relative_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub study: String,
    pub parameter: String,
    pub abscissa: String,
    pub points: Vec<ScalingPoint>,
    pub fit: SlopeFit,
    pub simulation: Vec<SimulationCheck>,
    pub checks: BTreeMap<String, bool>,
    pub settings: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl ScalingReport {
    pub fn passed(&self) -> bool {
        self.checks.values().all(|&c| c)
    }

    /// Raw sweep points: `value,abscissa,error,stderr` then the detail keys.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let keys: Vec<&String> = self
            .points
            .first()
            .map(|p| p.details.keys().collect())
            .unwrap_or_default();
        let mut header = vec![
            self.parameter.clone(),
            self.abscissa.clone(),
            "error".into(),
            "stderr".into(),
        ];
        header.extend(keys.iter().map(|k| k.to_string()));
        let rows = self.points.iter().map(|p| {
            let mut r = vec![p.value, p.abscissa, p.error, p.stderr];
            r.extend(keys.iter().map(|k| p.details.get(*k).copied().unwrap_or(f64::NAN)));
            r
        });
        write_rows(out, &header, rows)
    }
}

pub(crate) fn write_rows<W: Write, I>(out: W, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Mean and standard error of the mean.
fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = pairwise_sum(v) / n;
    let dev: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_sweep(name: &str, values: &[f64]) -> Result<()> {
    if values.len() < 3 {
        return Err(Error::config(format!(
            "{name} sweep needs at least 3 values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::config(format!(
            "{name} sweep values must be positive and finite"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::config(format!("{name} sweep values must be distinct")));
    }
    Ok(())
}

/// One replica's starting state, from its seed.
type InitFn<'a> = dyn Fn(u64) -> (Vec<f64>, Vec<f64>) + Sync + 'a;

/// Per-replica time averages of `(θ_1 - centre)²` over the post-burn-in
/// steps, in replica order.
#[allow(clippy::too_many_arguments)]
fn replica_second_moments(
    model: &dyn Model,
    algorithm: Algorithm,
    base: &SdeConfig,
    steps: u64,
    burn: u64,
    centre: f64,
    settings: &SimulationSettings,
    init: &InitFn<'_>,
) -> Result<Vec<f64>> {
    (0..settings.n_replicas)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(settings.seed, r as u64);
            let (theta0, x0) = init(seed);
            let cfg = SdeConfig {
                seed,
                theta0,
                x0,
                budget: Budget::MaxSteps(steps),
                ..base.clone()
            };
            let mut integ = integrator(model, algorithm, &cfg)?;
            for _ in 0..burn {
                integ.step()?;
            }
            let mut acc = 0.0;
            for _ in burn..steps {
                integ.step()?;
                acc += (integ.theta()[0] - centre).powi(2);
            }
            Ok(acc / (steps - burn) as f64)
        })
        .collect()
}

/// Draws `(θ, x)` from the continuous-time stationary law of the slow-fast
/// system, so replicas start without an initial transient.
fn stationary_sampler(
    model: &GaussianHierarchicalModel,
    epsilon: f64,
    beta: f64,
) -> Result<impl Fn(u64) -> (Vec<f64>, Vec<f64>) + Sync + '_> {
    let sigma = stationary_covariance_lyapunov(model, epsilon, beta)?;
    let n = sigma.nrows();
    let chol = sigma
        .cholesky()
        .ok_or_else(|| Error::config("stationary covariance is not positive definite"))?
        .l();
    let (t, x) = model.joint_minimizer();
    let mean = DVector::from_iterator(n, std::iter::once(t).chain(x));
    Ok(move |seed: u64| {
        // Stream ids below 2^32 belong to integrator noise.
        let mut rng = stream(seed, u64::MAX);
        let mut z = vec![0.0; n];
        fill_standard_normal(&mut rng, &mut z);
        let draw: DVector<f64> = &mean + &chol * DVector::from_vec(z);
        (vec![draw[0]], draw.as_slice()[1..].to_vec())
    })
}

fn steps_for(t: f64, delta: f64) -> u64 {
    (t / delta).ceil() as u64
}

fn sfla_variance(
    model: &GaussianHierarchicalModel,
    epsilon: f64,
    beta: f64,
    delta: f64,
    t_end: f64,
    settings: &SimulationSettings,
) -> Result<(f64, f64)> {
    let init = stationary_sampler(model, epsilon, beta)?;
    let base = SdeConfig::new(delta, Budget::MaxSteps(0), 0, vec![0.0], vec![0.0; model.dim_latent()])
        .with_epsilon(epsilon)
        .with_beta(beta);
    let steps = steps_for(t_end, delta);
    let burn = (steps as f64 * settings.burn_fraction) as u64;
    let moments = replica_second_moments(
        model,
        Algorithm::Sfla,
        &base,
        steps,
        burn,
        model.theta_star(),
        settings,
        &init,
    )?;
    Ok(mean_stderr(&moments))
}

/// Default simulation horizon for the averaging cross-check.
pub const AVERAGING_DEFAULT_T_END: f64 = 200.0;

/// Stationary `θ`-variance discrepancy between the slow-fast system and the
/// averaged dynamics, `|Σ_θθ(ε) - 1/(βμ_G)|`, across `epsilons`.
///
/// The sweep points are exact (Lyapunov solves). The exact values at the
/// largest and smallest `ε` are also checked against SFLA replicas with
/// `δ = ε/50`, started from the stationary law; a check passes when the
/// relative error is within 10% or 3 standard errors.
pub fn averaging_scaling_study(
    model: &GaussianHierarchicalModel,
    epsilons: &[f64],
    beta: f64,
    settings: &SimulationSettings,
) -> Result<ScalingReport> {
    check_sweep("epsilon", epsilons)?;
    settings.validate()?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::config(format!("beta must be positive and finite, got {beta}")));
    }
    let ou = averaged_stationary_variance(model, beta);
    let mut points = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let s = stationary_covariance_lyapunov(model, eps, beta)?[(0, 0)];
        points.push(ScalingPoint {
            value: eps,
            abscissa: eps,
            error: (s - ou).abs(),
            stderr: 0.0,
            details: BTreeMap::from([("sigma_theta_theta".into(), s), ("averaged_variance".into(), ou)]),
        });
    }
    let fit = fit_loglog_slope(
        &points
            .iter()
            .map(|p| (p.abscissa, p.error, p.stderr))
            .collect::<Vec<_>>(),
    )?;

    let t_end = settings.t_end.unwrap_or(AVERAGING_DEFAULT_T_END);
    let (lo, hi) = points.iter().fold((&points[0], &points[0]), |(lo, hi), p| {
        (
            if p.value < lo.value { p } else { lo },
            if p.value > hi.value { p } else { hi },
        )
    });
    let mut simulation = Vec::new();
    for p in [hi, lo] {
        let delta = settings.delta.unwrap_or(p.value / 50.0);
        let (emp, se) = sfla_variance(model, p.value, beta, delta, t_end, settings)?;
        let exact = p.details["sigma_theta_theta"];
        let rel = (emp - exact).abs() / exact;
        simulation.push(SimulationCheck {
            value: p.value,
            delta,
            empirical: emp,
            stderr: se,
            exact,
            relative_error: rel,
            pass: rel <= 0.1 || (emp - exact).abs() <= 3.0 * se,
        });
    }
    let checks = BTreeMap::from([
        ("error_decreases_with_epsilon".to_string(), lo.error < hi.error),
        ("slope_in_0.7_1.3".to_string(), (0.7..=1.3).contains(&fit.slope)),
        ("simulation_agrees".to_string(), simulation.iter().all(|s| s.pass)),
    ]);
    Ok(ScalingReport {
        study: "averaging_scaling".into(),
        parameter: "epsilon".into(),
        abscissa: "epsilon".into(),
        points,
        fit,
        simulation,
        checks,
        settings: BTreeMap::from([
            ("beta".to_string(), beta),
            ("mu_marginal".to_string(), model.mu_marginal()),
            ("t_end".to_string(), t_end),
            ("n_replicas".to_string(), settings.n_replicas as f64),
            ("seed".to_string(), settings.seed as f64),
        ]),
        notes: vec![
            "error is the stationary theta-variance gap between the slow-fast system and the averaged dynamics".into(),
            "sweep points are exact Lyapunov solves; the fit weights them uniformly".into(),
        ],
    })
}

/// Default concentration horizon: twice the larger of `10/μ` and the time
/// after which the initial transient `e^{-2μt}|θ0 - θ*|²` is below 1% of
/// `2 d_θ / β`.
pub fn concentration_default_t_end(mu: f64, beta: f64, initial_gap: f64) -> f64 {
    let transient = (50.0 * beta * initial_gap * initial_gap).ln().max(0.0) / (2.0 * mu);
    2.0 * (10.0 / mu).max(transient)
}

/// `E|θ̄_t - θ*|²` for Langevin on the exact marginal, across `betas`.
///
/// Each replica starts at `theta0`, discards the first half of the horizon
/// (by default), and time-averages the squared error over the rest. The
/// estimate is compared with the exact stationary value `d_θ/(βμ_G)` and the
/// bound `2 d_θ/β`; the slope is fitted against `1/β`. The default step is
/// `δ = 0.01/μ_G`, whose Euler bias on the variance is 0.5%.
pub fn concentration_study(
    model: &GaussianHierarchicalModel,
    betas: &[f64],
    theta0: f64,
    settings: &SimulationSettings,
) -> Result<ScalingReport> {
    check_sweep("beta", betas)?;
    settings.validate()?;
    let mu = model.mu_marginal();
    let delta = settings.delta.unwrap_or(0.01 / mu);
    let d_theta = 1.0;
    let theta_star = model.theta_star();
    let mut points = Vec::with_capacity(betas.len());
    let mut horizons = Vec::new();
    for (i, &beta) in betas.iter().enumerate() {
        // Independent replicas per sweep point.
        let sub = SimulationSettings {
            seed: derive_seed(settings.seed, (1 << 32) + i as u64),
            ..settings.clone()
        };
        let t_end = settings
            .t_end
            .unwrap_or_else(|| concentration_default_t_end(mu, beta, theta0 - theta_star));
        horizons.push(t_end);
        let steps = steps_for(t_end, delta);
        let burn = (steps as f64 * settings.burn_fraction) as u64;
        let base = SdeConfig::new(
            delta,
            Budget::MaxSteps(0),
            0,
            vec![theta0],
            vec![0.0; model.dim_latent()],
        )
        .with_beta(beta);
        let init = |_: u64| (vec![theta0], vec![0.0; model.dim_latent()]);
        let moments = replica_second_moments(
            model,
            Algorithm::AveragedUla,
            &base,
            steps,
            burn,
            theta_star,
            &sub,
            &init,
        )?;
        let (est, se) = mean_stderr(&moments);
        let exact = d_theta * averaged_stationary_variance(model, beta);
        points.push(ScalingPoint {
            value: beta,
            abscissa: 1.0 / beta,
            error: est,
            stderr: se,
            details: BTreeMap::from([
                ("exact_ou".to_string(), exact),
                (
                    "euler_exact".to_string(),
                    averaged_euler_stationary_variance(model, beta, delta),
                ),
                ("bound".to_string(), 2.0 * d_theta / beta),
                ("relative_error".to_string(), (est - exact).abs() / exact),
                ("t_end".to_string(), t_end),
                (
                    "transient".to_string(),
                    (-2.0 * mu * t_end * settings.burn_fraction).exp() * (theta0 - theta_star).powi(2),
                ),
            ]),
        });
    }
    let fit = fit_loglog_slope(
        &points
            .iter()
            .map(|p| (p.abscissa, p.error, p.stderr))
            .collect::<Vec<_>>(),
    )?;
    let bound_applies = mu >= 0.5;
    let checks = BTreeMap::from([
        (
            "within_10pct_of_exact".to_string(),
            points.iter().all(|p| p.details["relative_error"] <= 0.1),
        ),
        ("mu_at_least_half".to_string(), bound_applies),
        (
            "below_bound".to_string(),
            points.iter().all(|p| p.error <= 1.1 * p.details["bound"]),
        ),
        ("slope_in_0.8_1.2".to_string(), (0.8..=1.2).contains(&fit.slope)),
    ]);
    let mut notes = vec!["error is the mean squared distance to the maximiser at stationarity".to_string()];
    if !bound_applies {
        notes.push("mu_marginal < 1/2, so the 2 d_theta / beta bound is not expected to hold".into());
    }
    Ok(ScalingReport {
        study: "concentration".into(),
        parameter: "beta".into(),
        abscissa: "inverse_beta".into(),
        points,
        fit,
        simulation: Vec::new(),
        checks,
        settings: BTreeMap::from([
            ("delta".to_string(), delta),
            ("mu_marginal".to_string(), mu),
            ("theta0".to_string(), theta0),
            ("theta_star".to_string(), theta_star),
            ("burn_fraction".to_string(), settings.burn_fraction),
            ("n_replicas".to_string(), settings.n_replicas as f64),
            ("seed".to_string(), settings.seed as f64),
        ]),
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmIterate {
    pub k: usize,
    pub theta: f64,
    pub log_marginal: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmTrace {
    pub theta0: f64,
    pub theta_star: f64,
    pub rate: f64,
    pub iterates: Vec<EmIterate>,
    /// Log-marginal never decreases.
    pub monotone: bool,
    /// Largest `| |θ_{k+1} - θ*| - rate · |θ_k - θ*| |`.
    pub max_contraction_residual: f64,
    /// Terminal error within `rate^k_max |θ0 - θ*| + 1e-12`.
    pub within_bound: bool,
}

impl EmTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let header = ["k", "theta", "log_marginal", "abs_error"].map(String::from);
        let rows = self
            .iterates
            .iter()
            .map(|i| vec![i.k as f64, i.theta, i.log_marginal, i.abs_error]);
        write_rows(out, &header, rows)
    }
}

/// Runs `k_max` exact EM steps from `theta0`.
pub fn em_ascent_study(model: &GaussianHierarchicalModel, theta0: f64, k_max: usize) -> EmTrace {
    let theta_star = model.theta_star();
    let rate = model.em_rate();
    let mut theta = theta0;
    let mut iterates = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        if k > 0 {
            theta = model.em_step(theta);
        }
        iterates.push(EmIterate {
            k,
            theta,
            log_marginal: model.log_marginal(theta),
            abs_error: (theta - theta_star).abs(),
        });
    }
    let monotone = iterates.windows(2).all(|w| w[1].log_marginal >= w[0].log_marginal);
    let max_contraction_residual = iterates
        .windows(2)
        .map(|w| (w[1].abs_error - rate * w[0].abs_error).abs())
        .fold(0.0, f64::max);
    let bound = rate.powi(k_max as i32) * (theta0 - theta_star).abs() + 1e-12;
    EmTrace {
        theta0,
        theta_star,
        rate,
        within_bound: iterates[k_max].abs_error <= bound,
        iterates,
        monotone,
        max_contraction_residual,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    pub delta: f64,
    /// SFLA stationary `θ`-variance.
    pub empirical: f64,
    pub stderr: f64,
    /// Exact stationary variance of the Euler chain at this `δ`.
    pub euler_exact: f64,
    /// Estimate of `E[empirical] - continuous`; against the exact reference
    /// chain when coupled.
    pub bias: f64,
    pub bias_stderr: f64,
    /// `|bias|`.
    pub discrepancy: f64,
    /// Standard error of `empirical` minus the previous (larger `δ`) point's
    /// `empirical`, from paired replicas; `None` for the first point or when
    /// the step sizes are not coupled.
    pub paired_stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasDecayReport {
    pub epsilon: f64,
    pub beta: f64,
    /// Exact continuous-time stationary `θ`-variance.
    pub continuous: f64,
    /// Stationary variance of the averaged dynamics.
    pub averaged: f64,
    /// Sorted by decreasing `δ`.
    pub points: Vec<BiasPoint>,
    /// Discrepancy non-increasing as `δ` shrinks, up to 3 standard errors of
    /// each consecutive difference (paired when the chains are coupled).
    pub non_increasing: bool,
    /// Whether all step sizes ran on a shared Brownian path together with an
    /// exact reference chain.
    pub coupled: bool,
    /// Mean and standard error of the reference chain's `θ`-variance.
    pub reference_mean: Option<f64>,
    pub reference_stderr: Option<f64>,
    /// Reference mean within 3 standard errors of `continuous`.
    pub reference_unbiased: bool,
    /// `discrepancy <= |continuous - averaged| + 3 SE` at every `δ`.
    pub triangle: bool,
    pub t_end: f64,
    pub n_replicas: usize,
    pub seed: u64,
}

impl BiasDecayReport {
    pub fn passed(&self) -> bool {
        self.non_increasing && self.triangle && self.reference_unbiased
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let header = [
            "delta",
            "empirical",
            "stderr",
            "continuous",
            "euler_exact",
            "bias",
            "bias_stderr",
            "discrepancy",
            "paired_stderr",
        ]
        .map(String::from);
        let rows = self.points.iter().map(|p| {
            vec![
                p.delta,
                p.empirical,
                p.stderr,
                self.continuous,
                p.euler_exact,
                p.bias,
                p.bias_stderr,
                p.discrepancy,
                p.paired_stderr.unwrap_or(f64::NAN),
            ]
        });
        write_rows(out, &header, rows)
    }
}

/// Default per-replica horizon for the bias study.
pub const BIAS_DEFAULT_T_END: f64 = 2_000.0;

/// Integer ratios `δ_i / min δ` when every step size is a multiple of the
/// smallest one.
fn step_ratios(deltas: &[f64]) -> Option<Vec<u64>> {
    let fine = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
    deltas
        .iter()
        .map(|d| {
            let k = (d / fine).round();
            ((d / fine - k).abs() <= 1e-9 * k).then_some(k as u64)
        })
        .collect()
}

/// Exact continuous-time chain on the fine grid, run alongside the SFLA
/// chains as a control variate.
struct Reference<'a> {
    step: &'a ExactTransition,
    /// Joint minimiser `(θ*, x*)`, the centre of the linear dynamics.
    centre: Vec<f64>,
}

/// Stream for the reference chain's residual noise, clear of the integrator
/// and initial-draw streams.
const REFERENCE_STREAM: u64 = u64::MAX - 1;

/// One SFLA chain per step size, all driven by the same Brownian path: chain
/// `i` advances every `k_i` fine steps using the sum of the fine increments.
/// Returns each chain's time-averaged `(θ - centre)²` after its burn-in,
/// followed by the same average for the exact reference chain when one is
/// given.
#[allow(clippy::too_many_arguments)]
fn coupled_sfla_replica(
    model: &dyn Model,
    epsilon: f64,
    beta: f64,
    fine: f64,
    ratios: &[u64],
    fine_steps: u64,
    burn_fraction: f64,
    centre: f64,
    seed: u64,
    start: (Vec<f64>, Vec<f64>),
    reference: Option<&Reference<'_>>,
) -> Result<Vec<f64>> {
    struct Chain {
        k: u64,
        delta: f64,
        theta: Vec<f64>,
        x: Vec<f64>,
        w_theta: Vec<f64>,
        w_x: Vec<f64>,
        steps: u64,
        burn: u64,
        acc: f64,
    }
    let (dt, dx) = (model.dim_theta(), model.dim_latent());
    let mut chains: Vec<Chain> = ratios
        .iter()
        .map(|&k| {
            let steps = fine_steps / k;
            Chain {
                k,
                delta: fine * k as f64,
                theta: start.0.clone(),
                x: start.1.clone(),
                w_theta: vec![0.0; dt],
                w_x: vec![0.0; dx],
                steps: 0,
                burn: (steps as f64 * burn_fraction) as u64,
                acc: 0.0,
            }
        })
        .collect();
    let mut rng_theta = stream(seed, crate::dynamics::noise::THETA_STREAM);
    let mut rng_x = stream(seed, crate::dynamics::noise::latent_stream_id(0));
    let (mut xi_theta, mut xi_x) = (vec![0.0; dt], vec![0.0; dx]);
    let (mut g_theta, mut g_x) = (vec![0.0; dt], vec![0.0; dx]);

    let mut rng_ref = stream(seed, REFERENCE_STREAM);
    let mut z = reference.map(|r| {
        let joint = start.0.iter().chain(&start.1);
        DVector::from_iterator(dt + dx, joint.zip(&r.centre).map(|(v, c)| v - c))
    });
    let mut dw = DVector::zeros(dt + dx);
    let mut resid = DVector::zeros(dt + dx);
    let mut next = DVector::zeros(dt + dx);
    let ref_burn = (fine_steps as f64 * burn_fraction) as u64;
    let mut ref_acc = 0.0;
    let sqrt_fine = fine.sqrt();

    for n in 1..=fine_steps {
        fill_standard_normal(&mut rng_theta, &mut xi_theta);
        fill_standard_normal(&mut rng_x, &mut xi_x);
        if let (Some(r), Some(z)) = (reference, z.as_mut()) {
            for (w, v) in dw.iter_mut().zip(xi_theta.iter().chain(&xi_x)) {
                *w = sqrt_fine * v;
            }
            fill_standard_normal(&mut rng_ref, resid.as_mut_slice());
            next.gemv(1.0, &r.step.transition, z, 0.0);
            next.gemv(1.0, &r.step.gain, &dw, 1.0);
            next.gemv(1.0, &r.step.residual_factor, &resid, 1.0);
            std::mem::swap(z, &mut next);
            if n > ref_burn {
                // The reference is centred at the joint minimiser, whose θ is θ*.
                ref_acc += (z[0] + r.centre[0] - centre).powi(2);
            }
        }
        for c in chains.iter_mut() {
            c.w_theta.iter_mut().zip(&xi_theta).for_each(|(w, z)| *w += z);
            c.w_x.iter_mut().zip(&xi_x).for_each(|(w, z)| *w += z);
            if n % c.k != 0 {
                continue;
            }
            // The summed increments have variance k; rescale to unit variance.
            let unit = 1.0 / (c.k as f64).sqrt();
            model.eval_grad_theta(&c.theta, &c.x, &mut g_theta);
            model.eval_grad_x(&c.theta, &c.x, &mut g_x);
            let theta_noise = (2.0 * c.delta / beta).sqrt() * unit;
            let x_noise = (2.0 * c.delta / epsilon).sqrt() * unit;
            let x_rate = c.delta / epsilon;
            for ((t, g), w) in c.theta.iter_mut().zip(&g_theta).zip(&c.w_theta) {
                *t = *t - c.delta * g + theta_noise * w;
            }
            for ((x, g), w) in c.x.iter_mut().zip(&g_x).zip(&c.w_x) {
                *x = *x - x_rate * g + x_noise * w;
            }
            c.w_theta.fill(0.0);
            c.w_x.fill(0.0);
            c.steps += 1;
            if !c.theta.iter().chain(&c.x).all(|v| v.is_finite()) {
                return Err(Error::Divergence {
                    algorithm: Algorithm::Sfla.to_string(),
                    step: c.steps,
                });
            }
            if c.steps > c.burn {
                c.acc += (c.theta[0] - centre).powi(2);
            }
        }
    }
    let mut out: Vec<f64> = chains.iter().map(|c| c.acc / (c.steps - c.burn) as f64).collect();
    if reference.is_some() {
        out.push(ref_acc / (fine_steps - ref_burn) as f64);
    }
    Ok(out)
}

/// Discretisation bias of SFLA's stationary `θ`-variance across `deltas` at
/// fixed `(ε, β)`. Replicas start from the continuous stationary law.
///
/// When every step size is an integer multiple of the smallest, each replica
/// runs all step sizes on one shared Brownian path together with the exact
/// continuous-time chain. The bias at each step size is then estimated
/// against that reference, and consecutive differences are judged against
/// paired standard errors. Otherwise the step sizes run on independent
/// replicas and the bias is measured against the exact value alone.
pub fn discretization_bias_study(
    model: &GaussianHierarchicalModel,
    epsilon: f64,
    beta: f64,
    deltas: &[f64],
    settings: &SimulationSettings,
) -> Result<BiasDecayReport> {
    if deltas.len() < 2 {
        return Err(Error::config("bias study needs at least 2 step sizes"));
    }
    if deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::config("step sizes must be positive"));
    }
    settings.validate()?;
    let continuous = stationary_covariance_lyapunov(model, epsilon, beta)?[(0, 0)];
    let averaged = averaged_stationary_variance(model, beta);
    let t_end = settings.t_end.unwrap_or(BIAS_DEFAULT_T_END);
    let mut sorted = deltas.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::config("step sizes must be distinct"));
    }
    let centre = model.theta_star();

    let ratios = step_ratios(&sorted);
    let coupled = ratios.is_some();
    // moments[r][i]: replica r, step size sorted[i]; coupled runs append the
    // exact reference chain as a final column.
    let moments: Vec<Vec<f64>> = match &ratios {
        Some(ratios) => {
            let fine = *sorted.last().expect("at least 2 step sizes");
            let coarse = ratios[0];
            let fine_steps = steps_for(t_end, fine).div_ceil(coarse) * coarse;
            let init = stationary_sampler(model, epsilon, beta)?;
            let exact = LinearSde::slow_fast(&model.hessian(), 1, epsilon, beta).exact_transition(fine)?;
            let (t, x) = model.joint_minimizer();
            let reference = Reference {
                step: &exact,
                centre: std::iter::once(t).chain(x).collect(),
            };
            (0..settings.n_replicas)
                .into_par_iter()
                .map(|r| {
                    let seed = derive_seed(settings.seed, r as u64);
                    coupled_sfla_replica(
                        model,
                        epsilon,
                        beta,
                        fine,
                        ratios,
                        fine_steps,
                        settings.burn_fraction,
                        centre,
                        seed,
                        init(seed),
                        Some(&reference),
                    )
                })
                .collect::<Result<_>>()?
        }
        None => {
            let per_delta = sorted
                .iter()
                .map(|&delta| {
                    let init = stationary_sampler(model, epsilon, beta)?;
                    let base = SdeConfig::new(delta, Budget::MaxSteps(0), 0, vec![0.0], vec![0.0; model.dim_latent()])
                        .with_epsilon(epsilon)
                        .with_beta(beta);
                    let steps = steps_for(t_end, delta);
                    let burn = (steps as f64 * settings.burn_fraction) as u64;
                    replica_second_moments(model, Algorithm::Sfla, &base, steps, burn, centre, settings, &init)
                })
                .collect::<Result<Vec<_>>>()?;
            (0..settings.n_replicas)
                .map(|r| per_delta.iter().map(|m| m[r]).collect())
                .collect()
        }
    };

    let column = |f: &dyn Fn(&[f64]) -> f64| mean_stderr(&moments.iter().map(|m| f(m)).collect::<Vec<f64>>());
    let k = sorted.len();
    let reference = coupled.then(|| column(&|m| m[k]));
    let mut points = Vec::with_capacity(k);
    for (i, &delta) in sorted.iter().enumerate() {
        let (emp, se) = column(&|m| m[i]);
        // Against the coupled exact chain the bias estimate shares its noise
        // with the reference, which has mean `continuous` exactly.
        let (bias, bias_se) = if coupled {
            column(&|m| m[i] - m[k])
        } else {
            (emp - continuous, se)
        };
        let paired_stderr = (coupled && i > 0).then(|| column(&|m| m[i] - m[i - 1]).1);
        points.push(BiasPoint {
            delta,
            empirical: emp,
            stderr: se,
            euler_exact: stationary_covariance_euler(model, epsilon, beta, delta)?[(0, 0)],
            bias,
            bias_stderr: bias_se,
            discrepancy: bias.abs(),
            paired_stderr,
        });
    }
    let non_increasing = points.windows(2).all(|w| {
        // With both biases of one sign, the discrepancy difference is the
        // paired difference of the estimates.
        let slack = match w[1].paired_stderr {
            Some(se) if w[0].bias.signum() == w[1].bias.signum() => 3.0 * se,
            _ => 3.0 * (w[0].bias_stderr.powi(2) + w[1].bias_stderr.powi(2)).sqrt(),
        };
        w[1].discrepancy <= w[0].discrepancy + slack
    });
    let triangle = points
        .iter()
        .all(|p| p.discrepancy <= (continuous - averaged).abs() + 3.0 * p.bias_stderr);
    let reference_unbiased = reference.is_none_or(|(m, se)| (m - continuous).abs() <= 3.0 * se);
    Ok(BiasDecayReport {
        epsilon,
        beta,
        continuous,
        averaged,
        points,
        non_increasing,
        coupled,
        reference_mean: reference.map(|r| r.0),
        reference_stderr: reference.map(|r| r.1),
        reference_unbiased,
        triangle,
        t_end,
        n_replicas: settings.n_replicas,
        seed: settings.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GaussianHierarchicalModel {
        GaussianHierarchicalModel::new(vec![1.0, 3.0], 1.0, 1.0).unwrap()
    }

    #[test]
    fn em_trace_matches_hand_values() {
        let t = em_ascent_study(&small(), 0.0, 3);
        let thetas: Vec<f64> = t.iterates.iter().map(|i| i.theta).collect();
        assert_eq!(thetas, [0.0, 1.0, 1.5, 1.75]);
        assert!(t.monotone && t.within_bound);
        assert!(t.max_contraction_residual < 1e-15);
    }

    #[test]
    fn finest_coupled_chain_is_plain_sfla() {
        let m = small();
        let (eps, beta, fine) = (0.2, 50.0, 0.01);
        let settings = SimulationSettings {
            n_replicas: 2,
            burn_fraction: 0.1,
            seed: 5,
            ..SimulationSettings::default()
        };
        let init = stationary_sampler(&m, eps, beta).unwrap();
        let base = SdeConfig::new(fine, Budget::MaxSteps(0), 0, vec![0.0], vec![0.0; 2])
            .with_epsilon(eps)
            .with_beta(beta);
        let plain = replica_second_moments(&m, Algorithm::Sfla, &base, 4_000, 400, 2.0, &settings, &init).unwrap();
        for (r, want) in plain.iter().enumerate() {
            let seed = derive_seed(5, r as u64);
            let got =
                coupled_sfla_replica(&m, eps, beta, fine, &[4, 2, 1], 4_000, 0.1, 2.0, seed, init(seed), None).unwrap();
            assert_eq!(got.len(), 3);
            assert_eq!(got[2], *want);
            assert!(got[0] != got[2] && got[0].is_finite());
        }
    }

    #[test]
    fn coupled_bias_matches_the_euler_chain() {
        let m = small();
        let settings = SimulationSettings {
            t_end: Some(200.0),
            burn_fraction: 0.05,
            n_replicas: 8,
            seed: 1,
            delta: None,
        };
        let r = discretization_bias_study(&m, 0.1, 1e3, &[8e-3, 4e-3, 2e-3], &settings).unwrap();
        assert!(r.coupled && r.passed());
        for p in &r.points {
            let exact = p.euler_exact - r.continuous;
            assert!(
                (p.bias - exact).abs() <= 4.0 * p.bias_stderr,
                "{} vs {exact} ± {}",
                p.bias,
                p.bias_stderr
            );
            assert!(p.bias_stderr < 0.05 * p.stderr);
        }
        let uncoupled = discretization_bias_study(&m, 0.1, 1e3, &[5e-3, 3e-3, 2e-3], &settings).unwrap();
        assert!(!uncoupled.coupled && uncoupled.reference_mean.is_none());
    }

    #[test]
    fn step_ratios_need_integer_multiples() {
        assert_eq!(step_ratios(&[4e-3, 2e-3, 1e-3]), Some(vec![4, 2, 1]));
        assert_eq!(step_ratios(&[3e-3, 2e-3, 1e-3]), Some(vec![3, 2, 1]));
        assert_eq!(step_ratios(&[2.5e-3, 1e-3]), None);
    }

    #[test]
    fn sweeps_are_validated() {
        let m = small();
        let s = SimulationSettings::default();
        assert!(averaging_scaling_study(&m, &[0.1, 0.05], 1e2, &s).is_err());
        assert!(averaging_scaling_study(&m, &[0.1, 0.1, 0.05], 1e2, &s).is_err());
        assert!(concentration_study(&m, &[1e2, -1.0, 1e3], 0.0, &s).is_err());
    }

    #[test]
    fn pairwise_mean_stderr() {
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let (m, se) = mean_stderr(&v);
        assert_eq!(m, 49.5);
        let sd = (v.iter().map(|x| (x - 49.5f64).powi(2)).sum::<f64>() / 99.0).sqrt();
        assert!((se - sd / 10.0).abs() < 1e-12);
    }

    #[test]
    fn concentration_horizon() {
        // Transient dominates: ln(50 · 1e4 · 4) / 2 ≈ 7.3 < 10.
        assert_eq!(concentration_default_t_end(1.0, 1e4, 2.0), 20.0);
        let long = concentration_default_t_end(0.1, 1e4, 2.0);
        assert!((long - 200.0).abs() < 1e-12);
    }
}
