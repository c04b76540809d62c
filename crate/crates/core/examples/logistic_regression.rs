//! SFLA and PGD on synthetic Bayesian logistic regression, with a CSV round trip.

use slowfast_mmle::dynamics::{run, Algorithm, Budget, SdeConfig};
use slowfast_mmle::models::{read_logistic_csv, write_logistic_csv, CovariateLaw, LogisticDataOptions, Model};

fn main() -> slowfast_mmle::Result<()> {
    // Half-normal covariates make the prior mean visible in the labels.
    let model = LogisticDataOptions {
        d_x: 10,
        d_y: 500,
        theta_true: 1.0,
        sigma: 1.0,
        seed: 11,
        covariates: CovariateLaw::HalfNormal,
    }
    .generate()?;
    let mut csv = Vec::new();
    write_logistic_csv(&model, &mut csv)?;
    let reloaded = read_logistic_csv(csv.as_slice(), model.sigma())?;
    assert_eq!(reloaded, model);
    println!(
        "{} observations, d_x = {}",
        model.num_observations(),
        model.dim_latent()
    );

    let base = SdeConfig::new(0.05, Budget::MaxGradEvals(400_000), 1, vec![0.0], vec![0.0; 10])
        .with_gamma(0.05)
        .with_n_inner(100)
        .with_beta(1e4);
    for alg in [Algorithm::Sfla, Algorithm::Pgd] {
        let r = run(&model, alg, &base.coupled_for(alg))?;
        println!("{alg:>4}: tail mean θ = {:.4}", r.tail_mean(0.5)[0]);
    }
    Ok(())
}
