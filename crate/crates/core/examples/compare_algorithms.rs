//! SFLA, SOUL, PGD and IPLA under one gradient-evaluation budget, with the
//! equal-cost coupling derived from a shared (γ, N).

use slowfast_mmle::dynamics::{run, Algorithm, Budget, SdeConfig};
use slowfast_mmle::models::GaussianHierarchicalModel;

fn main() -> slowfast_mmle::Result<()> {
    let model = GaussianHierarchicalModel::generate(10, 1.0, 1.0, 1.0, 42)?;
    let base = SdeConfig::new(0.01, Budget::MaxGradEvals(1_000_000), 3, vec![0.0], vec![0.0; 10])
        .with_gamma(0.01)
        .with_n_inner(100)
        .with_beta(1e4);
    println!("theta* = {:.4}", model.theta_star());
    for alg in [Algorithm::Sfla, Algorithm::Soul, Algorithm::Pgd, Algorithm::Ipla] {
        let record = run(&model, alg, &base.coupled_for(alg))?;
        let s = record.summary(&model);
        println!(
            "{alg:>5}: θ = {:.4}  |error| = {:.2e}  steps = {:>6}  grad evals = {}",
            s.theta_final[0],
            s.abs_error.unwrap_or(f64::NAN),
            s.total_steps,
            s.total_grad_evals,
        );
    }
    Ok(())
}
