use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use slowfast_mmle::models::{
    generate_logistic_data, ExamplePotential, ExampleVariant, GaussianHierarchicalModel, Model,
};

/// Largest mixed relative error of the analytic gradients against central
/// differences of `U` with `h = 1e-5`, `|fd - g| / max(1, |g|)`.
fn gradient_error(model: &dyn Model, theta: &[f64], x: &[f64]) -> f64 {
    let h = 1e-5;
    let gt = model.grad_theta(theta, x).unwrap();
    let gx = model.grad_x(theta, x).unwrap();
    let mut worst: f64 = 0.0;
    let mut t = theta.to_vec();
    for i in 0..theta.len() {
        t[i] = theta[i] + h;
        let up = model.potential(&t, x).unwrap();
        t[i] = theta[i] - h;
        let down = model.potential(&t, x).unwrap();
        t[i] = theta[i];
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - gt[i]).abs() / gt[i].abs().max(1.0));
    }
    let mut xx = x.to_vec();
    for j in 0..x.len() {
        xx[j] = x[j] + h;
        let up = model.potential(theta, &xx).unwrap();
        xx[j] = x[j] - h;
        let down = model.potential(theta, &xx).unwrap();
        xx[j] = x[j];
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - gx[j]).abs() / gx[j].abs().max(1.0));
    }
    worst
}

fn ball_point(rng: &mut ChaCha8Rng, d: usize, radius: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
    let r = radius * rng.random::<f64>();
    v.into_iter().map(|a| a * r / n).collect()
}

fn max_error_on_ball(model: &dyn Model, points: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..points)
        .map(|_| {
            let t = ball_point(&mut rng, model.dim_theta(), 5.0);
            let x = ball_point(&mut rng, model.dim_latent(), 5.0);
            gradient_error(model, &t, &x)
        })
        .fold(0.0, f64::max)
}

#[test]
fn gaussian_gradients_match_finite_differences() {
    let m = GaussianHierarchicalModel::generate(6, 0.5, 0.8, 1.3, 2).unwrap();
    assert!(max_error_on_ball(&m, 100, 1) <= 1e-6);
}

#[test]
fn logistic_gradients_match_finite_differences() {
    let m = generate_logistic_data(8, 60, 1.0, 1.5, 3).unwrap();
    assert!(max_error_on_ball(&m, 100, 2) <= 1e-6);
}

#[test]
fn example_gradients_match_finite_differences() {
    for v in [
        ExampleVariant::Difference { c_h: 0.7 },
        ExampleVariant::Product { c_b: 0.4, c_g: 1.1 },
    ] {
        let m = ExamplePotential::new(3, 1.0, 0.8, v).unwrap();
        assert!(max_error_on_ball(&m, 100, 3) <= 1e-6);
    }
}

proptest! {
    #[test]
    fn logistic_gradients_at_arbitrary_points(
        theta in -5.0f64..5.0,
        x in proptest::collection::vec(-5.0f64..5.0, 4),
        seed in 0u64..50,
    ) {
        let m = generate_logistic_data(4, 30, 0.5, 1.0, seed).unwrap();
        prop_assert!(gradient_error(&m, &[theta], &x) <= 1e-6);
    }

    #[test]
    fn gaussian_marginal_is_translation_invariant(shift in -10.0f64..10.0, theta in -3.0f64..3.0) {
        let y = vec![1.0, 3.0, -0.5];
        let a = GaussianHierarchicalModel::new(y.clone(), 1.2, 0.7).unwrap();
        let b = GaussianHierarchicalModel::new(y.iter().map(|v| v + shift).collect(), 1.2, 0.7).unwrap();
        prop_assert!((a.log_marginal(theta) - b.log_marginal(theta + shift)).abs() < 1e-9);
    }
}

#[test]
fn gaussian_potential_examples() {
    let m = GaussianHierarchicalModel::new(vec![1.0, 3.0], 1.0, 1.0).unwrap();
    // Independent evaluation of the two residual sums.
    let direct = |t: f64, x: [f64; 2]| -> f64 {
        let mut u = 0.0;
        for j in 0..2 {
            u += 0.5 * ([1.0, 3.0][j] - x[j]).powi(2) + 0.5 * (x[j] - t).powi(2);
        }
        u
    };
    assert_eq!(m.potential(&[0.0], &[1.0, 3.0]).unwrap(), 5.0);
    assert_eq!(direct(0.0, [1.0, 3.0]), 5.0);
    assert_eq!(m.grad_theta(&[2.0], &[1.0, 3.0]).unwrap(), [0.0]);
    assert_eq!(m.grad_x(&[0.0], &[0.0, 0.0]).unwrap(), [-1.0, -3.0]);
    let post = m.posterior_mean_at(0.7);
    assert!(m.grad_x(&[0.7], &post).unwrap().iter().all(|g| g.abs() < 1e-15));
    assert!(m.potential(&[0.0], &[1.0]).is_err());
}

#[test]
fn logistic_potential_examples() {
    let m = generate_logistic_data(3, 7, 0.0, 2.0, 1).unwrap();
    let expected = 1.5 * (2.0 * std::f64::consts::PI * 4.0).ln() + 7.0 * 2f64.ln();
    assert_relative_eq!(m.potential(&[0.0], &[0.0; 3]).unwrap(), expected, max_relative = 1e-14);
    let x = [0.3, -1.0, 2.0];
    let g = m.grad_theta(&[0.5], &x).unwrap()[0];
    assert_relative_eq!(g, x.iter().map(|v| 0.5 - v).sum::<f64>() / 4.0, max_relative = 1e-14);
}

/// Composite Simpson rule of `exp(-f)` over `[a, b]` with `n` (even) panels.
fn simpson_exp(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = (-f(a)).exp() + (-f(b)).exp();
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * (-f(a + i as f64 * h)).exp();
    }
    s * h / 3.0
}

#[test]
fn marginal_matches_quadrature() {
    let (sx, sy) = (0.9, 1.4);
    let y = vec![0.3, -1.2, 2.5, 0.8];
    let m = GaussianHierarchicalModel::new(y.clone(), sx, sy).unwrap();
    for theta in [-2.0, 0.0, 0.6, 3.0] {
        // The potential factorises over coordinates.
        let log_int: f64 = y
            .iter()
            .map(|&yj| {
                let f = |x: f64| (yj - x).powi(2) / (2.0 * sy * sy) + (x - theta).powi(2) / (2.0 * sx * sx);
                simpson_exp(f, -40.0, 40.0, 40_000).ln()
            })
            .sum();
        let normaliser = y.len() as f64 * (2.0 * std::f64::consts::PI * sx * sy).ln();
        let quad = log_int - normaliser;
        let exact = m.log_marginal(theta);
        assert!(((quad - exact) / exact).abs() <= 1e-8, "θ={theta}: {quad} vs {exact}");
    }
}

#[test]
fn marginal_value_and_gradient_examples() {
    let m = GaussianHierarchicalModel::new(vec![1.0, 3.0], 1.0, 1.0).unwrap();
    let c = m.log_marginal(2.0) - (-(1.0 + 1.0) / 4.0);
    assert_relative_eq!(m.log_marginal(0.0), -2.5 + c, max_relative = 1e-14);
    assert_eq!(m.grad_log_marginal(0.0), 2.0);
    assert_eq!(m.grad_log_marginal(2.0), 0.0);
    let wider = GaussianHierarchicalModel::new(vec![1.0, 3.0], 1.0, 3f64.sqrt()).unwrap();
    assert_relative_eq!(wider.grad_log_marginal(0.0), 1.0, max_relative = 1e-14);
    assert_eq!(m.mu_marginal(), 1.0);
}

#[test]
fn oracle_gradient_matches_finite_differences() {
    let m = GaussianHierarchicalModel::generate(5, 1.0, 0.7, 1.1, 9).unwrap();
    let h = 1e-5;
    for theta in [-3.0, -0.2, 1.0, 4.5] {
        let fd = (m.log_marginal(theta + h) - m.log_marginal(theta - h)) / (2.0 * h);
        let g = m.grad_log_marginal(theta);
        assert!((fd - g).abs() <= 1e-8 * g.abs().max(1.0), "{fd} vs {g}");
    }
    assert!(m.grad_log_marginal(m.theta_star()).abs() < 1e-12);
}

#[test]
fn mmle_matches_golden_section_search() {
    let m = GaussianHierarchicalModel::new(vec![1.0, 3.0], 1.0, 1.0).unwrap();
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (-10.0, 10.0);
    for _ in 0..200 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if m.log_marginal(c) > m.log_marginal(d) {
            b = d;
        } else {
            a = c;
        }
    }
    assert!(((a + b) / 2.0 - 2.0).abs() < 1e-6);
    assert_eq!(m.oracle().unwrap().mmle(), [2.0]);
}

#[test]
fn marginal_gradient_is_posterior_average_of_parameter_gradient() {
    let m = GaussianHierarchicalModel::new(vec![0.5, 2.0, -1.0], 1.0, 0.8).unwrap();
    let theta = 0.3;
    let mean = m.posterior_mean_at(theta);
    let sd = m.posterior_variance().sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 20_000;
    let samples: Vec<f64> = (0..n)
        .map(|_| {
            let x: Vec<f64> = mean
                .iter()
                .map(|&mu| Normal::new(mu, sd).unwrap().sample(&mut rng))
                .collect();
            -m.grad_theta(&[theta], &x).unwrap()[0]
        })
        .collect();
    let avg = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s - avg).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((avg - m.grad_log_marginal(theta)).abs() <= 3.0 * se, "{avg} ± {se}");
}

#[test]
fn em_steps_ascend_and_contract() {
    let m = GaussianHierarchicalModel::new(vec![1.0, 3.0], 1.0, 1.0).unwrap();
    let oracle = m.oracle().unwrap();
    let mut t = vec![0.0];
    let mut seq = vec![0.0];
    for _ in 0..3 {
        t = oracle.exact_em_step(&t);
        seq.push(t[0]);
    }
    assert_eq!(seq, [0.0, 1.0, 1.5, 1.75]);
    assert_eq!(m.em_step(2.0), 2.0);
    let m = GaussianHierarchicalModel::new(vec![0.1, -0.4, 2.2], 0.6, 1.7).unwrap();
    let (star, rate) = (m.theta_star(), m.em_rate());
    let mut theta = 5.0;
    for _ in 0..30 {
        let next = m.em_step(theta);
        assert!(m.log_marginal(next) >= m.log_marginal(theta));
        assert!(((next - star).abs() - rate * (theta - star).abs()).abs() < 1e-12);
        theta = next;
    }
}

#[test]
fn logistic_generator_is_deterministic() {
    let a = generate_logistic_data(4, 20, 1.0, 1.0, 5).unwrap();
    let b = generate_logistic_data(4, 20, 1.0, 1.0, 5).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, generate_logistic_data(4, 20, 1.0, 1.0, 6).unwrap());
    assert!(generate_logistic_data(4, 0, 1.0, 1.0, 5).is_err());
}
