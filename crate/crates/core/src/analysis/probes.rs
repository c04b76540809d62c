//! Sampling-based probes of the convexity and monotonicity assumptions.
//!
//! Each probe minimises a margin over points drawn from a ball: first by
//! uniform random sampling, then by a local random search started from the
//! worst sample. The local phase matters for tight constants: for a quadratic
//! potential the margin depends only on the direction between the two points,
//! and random directions rarely land close to the extreme eigenvector.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::models::{ExamplePotential, ExampleVariant, GaussianHierarchicalModel, Model};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    pub n_samples: usize,
    pub radius: f64,
    pub seed: u64,
    /// Local-search iterations after the random phase.
    pub refine_steps: usize,
    pub tolerance: f64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            radius: 5.0,
            seed: 0,
            refine_steps: 4_000,
            tolerance: 1e-10,
        }
    }
}

/// Outcome of one probe. `pass` holds iff `worst_violation >= -tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub probe: String,
    pub parameter_name: String,
    pub parameter: f64,
    pub samples: usize,
    pub pass: bool,
    /// Smallest observed margin (negative means the claim is violated).
    pub worst_violation: f64,
    pub tolerance: f64,
    /// Point blocks achieving `worst_violation`.
    pub witness: Vec<Vec<f64>>,
    pub details: BTreeMap<String, f64>,
}

fn sample_ball(rng: &mut ChaCha8Rng, radius: f64, out: &mut [f64]) {
    let mut norm = 0.0;
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
        norm += *v * *v;
    }
    let norm = norm.sqrt().max(f64::MIN_POSITIVE);
    let r = radius * rng.random::<f64>().powf(1.0 / out.len() as f64);
    out.iter_mut().for_each(|v| *v *= r / norm);
}

fn project_ball(v: &mut [f64], radius: f64) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > radius {
        v.iter_mut().for_each(|x| *x *= radius / n);
    }
}

/// Minimises `f` over points made of `blocks`, each block confined to the
/// `radius` ball. `f` may return `None` for degenerate points.
fn adversarial_min<F>(blocks: &[usize], settings: &ProbeSettings, mut f: F) -> (f64, Vec<f64>, usize)
where
    F: FnMut(&[f64]) -> Option<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let dim: usize = blocks.iter().sum();
    let mut point = vec![0.0; dim];
    let mut best = (f64::INFINITY, vec![0.0; dim]);
    let mut evaluated = 0;
    let fill = |rng: &mut ChaCha8Rng, p: &mut [f64]| {
        let mut off = 0;
        for &b in blocks {
            sample_ball(rng, settings.radius, &mut p[off..off + b]);
            off += b;
        }
    };
    for _ in 0..settings.n_samples.max(1) {
        fill(&mut rng, &mut point);
        if let Some(v) = f(&point) {
            evaluated += 1;
            if v < best.0 {
                best = (v, point.clone());
            }
        }
    }
    if !best.0.is_finite() {
        return (best.0, best.1, evaluated);
    }
    let mut sigma = settings.radius / 4.0;
    let mut cand = vec![0.0; dim];
    for _ in 0..settings.refine_steps {
        for (c, b) in cand.iter_mut().zip(&best.1) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *c = b + sigma * z;
        }
        let mut off = 0;
        for &b in blocks {
            project_ball(&mut cand[off..off + b], settings.radius);
            off += b;
        }
        match f(&cand) {
            Some(v) if v < best.0 => {
                evaluated += 1;
                best = (v, cand.clone());
                sigma = (sigma * 1.5).min(settings.radius);
            }
            _ => sigma = (sigma * 0.95).max(settings.radius * 1e-9),
        }
    }
    (best.0, best.1, evaluated)
}

/// Squared minimum separation of a point pair. Closer pairs make the
/// difference quotient dominated by rounding, which the local search would
/// otherwise exploit.
fn min_gap(settings: &ProbeSettings) -> f64 {
    (1e-3 * settings.radius).powi(2)
}

fn split_blocks(p: &[f64], blocks: &[usize]) -> Vec<Vec<f64>> {
    let mut off = 0;
    blocks
        .iter()
        .map(|&b| {
            let v = p[off..off + b].to_vec();
            off += b;
            v
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(a, b)| a - b).collect()
}

#[allow(clippy::too_many_arguments)]
fn report(
    probe: &str,
    parameter_name: &str,
    parameter: f64,
    settings: &ProbeSettings,
    worst: f64,
    witness: Vec<Vec<f64>>,
    samples: usize,
    details: BTreeMap<String, f64>,
) -> ProbeReport {
    ProbeReport {
        probe: probe.to_string(),
        parameter_name: parameter_name.to_string(),
        parameter,
        samples,
        pass: worst >= -settings.tolerance,
        worst_violation: worst,
        tolerance: settings.tolerance,
        witness,
        details,
    }
}

fn joint_grad(model: &dyn Model, z: &[f64], out: &mut [f64]) {
    let dt = model.dim_theta();
    let (t, x) = z.split_at(dt);
    let (gt, gx) = out.split_at_mut(dt);
    model.eval_grad_theta(t, x, gt);
    model.eval_grad_x(t, x, gx);
}

/// Checks `⟨z - z', ∇U(z) - ∇U(z')⟩ >= μ |z - z'|²` on pairs from the ball.
pub fn probe_joint_convexity(model: &dyn Model, mu_claim: f64, settings: &ProbeSettings) -> ProbeReport {
    let d = model.dim_theta() + model.dim_latent();
    let (mut g1, mut g2) = (vec![0.0; d], vec![0.0; d]);
    let blocks = [d, d];
    let (worst, p, n) = adversarial_min(&blocks, settings, |p| {
        let (z1, z2) = p.split_at(d);
        let dz = diff(z1, z2);
        let nn = dot(&dz, &dz);
        if nn < min_gap(settings) {
            return None;
        }
        joint_grad(model, z1, &mut g1);
        joint_grad(model, z2, &mut g2);
        Some(dot(&dz, &diff(&g1, &g2)) / nn - mu_claim)
    });
    let details = BTreeMap::from([("min_ratio".to_string(), worst + mu_claim)]);
    report(
        "joint_convexity",
        "mu",
        mu_claim,
        settings,
        worst,
        split_blocks(&p, &blocks),
        n,
        details,
    )
}

/// Checks `⟨x - x', ∇xU(θ, x) - ∇xU(θ, x')⟩ >= (κ/2) |x - x'|²` uniformly in θ.
pub fn probe_fast_convexity(model: &dyn Model, kappa_claim: f64, settings: &ProbeSettings) -> ProbeReport {
    let (dt, dx) = (model.dim_theta(), model.dim_latent());
    let (mut g1, mut g2) = (vec![0.0; dx], vec![0.0; dx]);
    let blocks = [dt, dx, dx];
    let (worst, p, n) = adversarial_min(&blocks, settings, |p| {
        let (t, rest) = p.split_at(dt);
        let (x1, x2) = rest.split_at(dx);
        let d = diff(x1, x2);
        let nn = dot(&d, &d);
        if nn < min_gap(settings) {
            return None;
        }
        model.eval_grad_x(t, x1, &mut g1);
        model.eval_grad_x(t, x2, &mut g2);
        Some(dot(&d, &diff(&g1, &g2)) / nn - 0.5 * kappa_claim)
    });
    let details = BTreeMap::from([("min_ratio".to_string(), worst + 0.5 * kappa_claim)]);
    report(
        "fast_convexity",
        "kappa",
        kappa_claim,
        settings,
        worst,
        split_blocks(&p, &blocks),
        n,
        details,
    )
}

/// Largest `|∇x ∂θ_i U|²` over the ball, by central differences in `θ`.
pub fn estimate_mixed_bound(model: &dyn Model, settings: &ProbeSettings) -> f64 {
    let (dt, dx) = (model.dim_theta(), model.dim_latent());
    let h = 1e-5;
    let (mut gp, mut gm) = (vec![0.0; dx], vec![0.0; dx]);
    let mut shifted = vec![0.0; dt];
    let (neg, _, _) = adversarial_min(&[dt, dx], settings, |p| {
        let (t, x) = p.split_at(dt);
        let mut worst: f64 = 0.0;
        for i in 0..dt {
            shifted.copy_from_slice(t);
            shifted[i] += h;
            model.eval_grad_x(&shifted, x, &mut gp);
            shifted[i] -= 2.0 * h;
            model.eval_grad_x(&shifted, x, &mut gm);
            let sq: f64 = gp.iter().zip(&gm).map(|(a, b)| ((a - b) / (2.0 * h)).powi(2)).sum();
            worst = worst.max(sq);
        }
        Some(-worst)
    });
    -neg
}

/// Checks `⟨θ - θ', ∇θU(θ, x) - ∇θU(θ', x)⟩ >= (d_θ D²/κ + ζ₀) |θ - θ'|²`,
/// the strong convexity in `θ` needed by the averaged dynamics. `D` bounds
/// `|∇x ∂θ_i U|²`; when `mixed_bound` is `None` it is estimated on the ball.
pub fn probe_slow_convexity(
    model: &dyn Model,
    zeta0_claim: f64,
    kappa: f64,
    mixed_bound: Option<f64>,
    settings: &ProbeSettings,
) -> ProbeReport {
    let (dt, dx) = (model.dim_theta(), model.dim_latent());
    let d_bound = mixed_bound.unwrap_or_else(|| estimate_mixed_bound(model, settings));
    let threshold = dt as f64 * d_bound * d_bound / kappa + zeta0_claim;
    let (mut g1, mut g2) = (vec![0.0; dt], vec![0.0; dt]);
    let blocks = [dt, dt, dx];
    let (worst, p, n) = adversarial_min(&blocks, settings, |p| {
        let (t1, rest) = p.split_at(dt);
        let (t2, x) = rest.split_at(dt);
        let d = diff(t1, t2);
        let nn = dot(&d, &d);
        if nn < min_gap(settings) {
            return None;
        }
        model.eval_grad_theta(t1, x, &mut g1);
        model.eval_grad_theta(t2, x, &mut g2);
        Some(dot(&d, &diff(&g1, &g2)) / nn - threshold)
    });
    let details = BTreeMap::from([
        ("mixed_bound_D".to_string(), d_bound),
        ("kappa".to_string(), kappa),
        ("threshold".to_string(), threshold),
        ("min_ratio".to_string(), worst + threshold),
    ]);
    report(
        "slow_convexity",
        "zeta0",
        zeta0_claim,
        settings,
        worst,
        split_blocks(&p, &blocks),
        n,
        details,
    )
}

/// Fits strong-monotonicity constants of both drifts:
/// `-⟨∇xU(θ,x), x⟩ <= -r|x|² + R` and `-⟨∇θU(θ,x), θ⟩ <= -r̃|θ|² + R̃`.
///
/// `r` is the smallest sampled monotonicity ratio
/// `⟨∇xU(θ,x) - ∇xU(θ,0), x⟩ / |x|²`, and `R` the smallest offset making the
/// bound hold on the samples (likewise for `r̃, R̃`). The report also checks the
/// weaker pair `(r/2, 2C²/r)` with `C = sup |∇xU(θ, 0)|`, which the ratio bound
/// implies. Passes iff `r, r̃ > 0` and both weaker pairs hold on every sample.
pub fn probe_monotonicity(model: &dyn Model, settings: &ProbeSettings) -> ProbeReport {
    let (dt, dx) = (model.dim_theta(), model.dim_latent());
    let blocks = [dt, dx];
    let zeros_t = vec![0.0; dt];
    let zeros_x = vec![0.0; dx];

    // (which, variable) -> sampled constants. `which` = false for x, true for θ.
    let fit = |slow: bool| {
        let dim = if slow { dt } else { dx };
        let (mut g, mut g0) = (vec![0.0; dim], vec![0.0; dim]);
        let grad = |t: &[f64], x: &[f64], out: &mut [f64]| {
            if slow {
                model.eval_grad_theta(t, x, out)
            } else {
                model.eval_grad_x(t, x, out)
            }
        };
        let var = |p: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let (t, x) = p.split_at(dt);
            (t.to_vec(), x.to_vec())
        };
        // r: min monotonicity ratio against the origin of the variable.
        let (r, r_witness, _) = adversarial_min(&blocks, settings, |p| {
            let (t, x) = var(p);
            let v = if slow { &t } else { &x };
            let nn = dot(v, v);
            if nn < min_gap(settings) {
                return None;
            }
            grad(&t, &x, &mut g);
            if slow {
                grad(&zeros_t, &x, &mut g0);
            } else {
                grad(&t, &zeros_x, &mut g0);
            }
            Some(dot(v, &diff(&g, &g0)) / nn)
        });
        // C: sup of the gradient at the variable's origin.
        let (neg_c, _, _) = adversarial_min(&blocks, settings, |p| {
            let (t, x) = var(p);
            if slow {
                grad(&zeros_t, &x, &mut g0);
            } else {
                grad(&t, &zeros_x, &mut g0);
            }
            Some(-dot(&g0, &g0).sqrt())
        });
        let c = -neg_c;
        // R: sup of r|v|² - ⟨∇U, v⟩.
        let (neg_big_r, _, _) = adversarial_min(&blocks, settings, |p| {
            let (t, x) = var(p);
            let v = if slow { &t } else { &x };
            grad(&t, &x, &mut g);
            Some(-(r * dot(v, v) - dot(&g, v)))
        });
        let big_r = (-neg_big_r).max(0.0);
        // Weaker pair (r/2, 2C²/r): worst slack over the ball.
        let (half_r, lemma_r) = (0.5 * r, 2.0 * c * c / r);
        let (slack, _, _) = adversarial_min(&blocks, settings, |p| {
            let (t, x) = var(p);
            let v = if slow { &t } else { &x };
            grad(&t, &x, &mut g);
            // -⟨∇U, v⟩ <= -(r/2)|v|² + 2C²/r  ⇔  slack >= 0
            Some(dot(&g, v) - half_r * dot(v, v) + lemma_r)
        });
        (r, big_r, c, half_r, lemma_r, slack, r_witness)
    };

    let (r, big_r, c, half_r, lemma_r, slack_x, wx) = fit(false);
    let (rt, big_rt, ct, half_rt, lemma_rt, slack_t, wt) = fit(true);
    let positivity = r.min(rt);
    let worst = positivity.min(slack_x).min(slack_t);
    let details = BTreeMap::from([
        ("r".to_string(), r),
        ("R".to_string(), big_r),
        ("r_tilde".to_string(), rt),
        ("R_tilde".to_string(), big_rt),
        ("C".to_string(), c),
        ("C_tilde".to_string(), ct),
        ("lemma_r".to_string(), half_r),
        ("lemma_R".to_string(), lemma_r),
        ("lemma_r_tilde".to_string(), half_rt),
        ("lemma_R_tilde".to_string(), lemma_rt),
        ("lemma_slack_x".to_string(), slack_x),
        ("lemma_slack_theta".to_string(), slack_t),
    ]);
    let mut witness = split_blocks(&wx, &blocks);
    witness.extend(split_blocks(&wt, &blocks));
    let mut rep = report(
        "monotonicity",
        "r_min",
        positivity,
        settings,
        worst,
        witness,
        settings.n_samples,
        details,
    );
    rep.pass = r > 0.0 && rt > 0.0 && slack_x >= -settings.tolerance && slack_t >= -settings.tolerance;
    rep
}

/// Checks the growth condition `|∇U(z)|² >= c + c̃ |U(z) - offset|` used by
/// the discretisation-error estimate. `offset` is an additive constant of `U`
/// (e.g. its minimum, so the bound can hold at the minimiser).
pub fn probe_growth_condition(
    model: &dyn Model,
    c: f64,
    c_tilde: f64,
    offset: f64,
    settings: &ProbeSettings,
) -> ProbeReport {
    let dt = model.dim_theta();
    let d = dt + model.dim_latent();
    let mut g = vec![0.0; d];
    let (worst, p, n) = adversarial_min(&[d], settings, |z| {
        joint_grad(model, z, &mut g);
        let gg = dot(&g, &g);
        let u = model.eval_potential(&z[..dt], &z[dt..]) - offset;
        Some((gg - c - c_tilde * u.abs()) / (1.0 + gg))
    });
    let details = BTreeMap::from([
        ("c".to_string(), c),
        ("c_tilde".to_string(), c_tilde),
        ("offset".to_string(), offset),
    ]);
    let mut s = settings.clone();
    // Relative margin; rounding in |∇U|² and U is ~1e-15 relative.
    s.tolerance = settings.tolerance.max(1e-9);
    report(
        "growth_condition",
        "c_tilde",
        c_tilde,
        &s,
        worst,
        split_blocks(&p, &[d]),
        n,
        details,
    )
}

/// Assumption constants a probe suite checks against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConstants {
    /// Joint strong-convexity constant.
    pub mu: f64,
    /// Fast-variable convexity constant (the probe checks `κ/2`).
    pub kappa: f64,
    /// Bound `D` on `|∇x ∂θ_i U|²`.
    pub mixed_bound: f64,
    /// Slow-variable margin above `d_θ D²/κ`.
    pub zeta0: f64,
    /// `(c, c̃, offset)` for the growth condition, when known.
    pub growth: Option<(f64, f64, f64)>,
}

impl ProbeConstants {
    /// Exact constants of the Gaussian model, from its constant Hessian.
    pub fn gaussian(model: &GaussianHierarchicalModel) -> Self {
        let h = model.hessian();
        let lambda_min = h
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let n = model.dim_latent();
        let kappa = 2.0 * h[(1, 1)];
        let mixed_bound = n as f64 * h[(0, 1)].powi(2);
        let zeta0 = h[(0, 0)] - mixed_bound * mixed_bound / kappa;
        Self {
            mu: lambda_min,
            kappa,
            mixed_bound,
            zeta0,
            growth: Some((0.0, 2.0 * lambda_min, model.potential_minimum())),
        }
    }

    /// Constants implied by the example potential's coefficients, or `None`
    /// when its fast-variable condition fails.
    pub fn example(p: &ExamplePotential) -> Option<Self> {
        let kappa = p.kappa()?;
        let d = p.dim as f64;
        let (mixed_bound, slow_min) = match p.variant {
            ExampleVariant::Product { c_b, c_g } => {
                let c = (c_b * c_g).abs();
                (c * c, 2.0 * p.a_tilde - c)
            }
            ExampleVariant::Difference { c_h } => (c_h * c_h, 2.0 * p.a_tilde - c_h.abs()),
        };
        Some(Self {
            mu: p.joint_mu(),
            kappa,
            mixed_bound,
            zeta0: slow_min - d * mixed_bound * mixed_bound / kappa,
            growth: None,
        })
    }
}

/// Runs the joint, fast, slow and monotonicity probes, plus the growth probe
/// when `constants.growth` is set. The growth probe samples a ball of radius
/// at least 10.
pub fn probe_suite(model: &dyn Model, constants: &ProbeConstants, settings: &ProbeSettings) -> Vec<ProbeReport> {
    let mut out = vec![
        probe_joint_convexity(model, constants.mu, settings),
        probe_fast_convexity(model, constants.kappa, settings),
        probe_slow_convexity(
            model,
            constants.zeta0,
            constants.kappa,
            Some(constants.mixed_bound),
            settings,
        ),
        probe_monotonicity(model, settings),
    ];
    if let Some((c, c_tilde, offset)) = constants.growth {
        let wide = ProbeSettings {
            radius: settings.radius.max(10.0),
            ..settings.clone()
        };
        out.push(probe_growth_condition(model, c, c_tilde, offset, &wide));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ProbeSettings {
        ProbeSettings {
            n_samples: 2_000,
            refine_steps: 2_000,
            ..Default::default()
        }
    }

    #[test]
    fn zero_claims_pass_on_convex_model() {
        let m = GaussianHierarchicalModel::new(vec![1.0, 3.0], 1.0, 1.0).unwrap();
        assert!(probe_joint_convexity(&m, 0.0, &quick()).pass);
        assert!(probe_fast_convexity(&m, 0.0, &quick()).pass);
    }

    #[test]
    fn quadratic_monotonicity_constants() {
        let q = ExamplePotential::quadratic(2, 0.5, 0.5).unwrap();
        let r = probe_monotonicity(&q, &quick());
        assert!(r.pass);
        assert!((r.details["r"] - 1.0).abs() < 1e-12);
        assert!((r.details["r_tilde"] - 1.0).abs() < 1e-12);
        assert!(r.details["R"].abs() < 1e-12);
        assert!(r.details["R_tilde"].abs() < 1e-12);
    }

    #[test]
    fn broken_difference_example_fails_with_witness() {
        let m = ExamplePotential::new(2, 0.05, 0.5, ExampleVariant::Difference { c_h: 1.0 }).unwrap();
        let r = probe_fast_convexity(&m, 0.2, &quick());
        assert!(!r.pass);
        assert_eq!(r.witness.len(), 3);
        // Re-evaluate the witness independently.
        let (t, x1, x2) = (&r.witness[0], &r.witness[1], &r.witness[2]);
        let g1 = m.grad_x(t, x1).unwrap();
        let g2 = m.grad_x(t, x2).unwrap();
        let d = diff(x1, x2);
        let ratio = dot(&d, &diff(&g1, &g2)) / dot(&d, &d);
        assert!(ratio < 0.1);
    }

    #[test]
    fn gaussian_constants_small_case() {
        let m = GaussianHierarchicalModel::new(vec![1.0, 3.0], 1.0, 1.0).unwrap();
        let c = ProbeConstants::gaussian(&m);
        assert!((c.mu - (2.0 - 2f64.sqrt())).abs() < 1e-12);
        assert_eq!((c.kappa, c.mixed_bound, c.zeta0), (4.0, 2.0, 1.0));
    }

    #[test]
    fn gaussian_suite_tight() {
        let m = GaussianHierarchicalModel::new(vec![1.0, 3.0], 1.0, 1.0).unwrap();
        let c = ProbeConstants::gaussian(&m);
        // Lowering κ would raise the slow threshold, so only the probed
        // constant moves.
        let below = ProbeConstants {
            mu: c.mu - 1e-9,
            zeta0: c.zeta0 - 1e-9,
            growth: c.growth.map(|(a, b, o)| (a, b - 1e-9, o)),
            ..c.clone()
        };
        for r in probe_suite(&m, &below, &quick()) {
            assert!(r.pass, "{r:?}");
        }
        let above = ProbeConstants {
            mu: c.mu + 1e-3,
            zeta0: c.zeta0 + 1e-3,
            growth: c.growth.map(|(a, b, o)| (a, b + 1e-3, o)),
            ..c
        };
        let fails: Vec<_> = probe_suite(&m, &above, &quick())
            .into_iter()
            .filter(|r| !r.pass)
            .map(|r| r.probe)
            .collect();
        assert_eq!(fails, ["joint_convexity", "slow_convexity", "growth_condition"]);
        assert!(probe_fast_convexity(&m, c.kappa - 1e-9, &quick()).pass);
        assert!(!probe_fast_convexity(&m, c.kappa + 1e-3, &quick()).pass);
    }
}
