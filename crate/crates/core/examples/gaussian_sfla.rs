//! SFLA on the hierarchical Gaussian model, compared with the closed-form MMLE.

use slowfast_mmle::dynamics::{sfla_run, Budget, SdeConfig};
use slowfast_mmle::models::GaussianHierarchicalModel;

fn main() -> slowfast_mmle::Result<()> {
    let model = GaussianHierarchicalModel::generate(10, 1.0, 1.0, 1.0, 42)?;
    let config = SdeConfig::new(1e-3, Budget::MaxSteps(200_000), 7, vec![0.0], vec![0.0; 10])
        .with_epsilon(0.05)
        .with_beta(1e4);
    let record = sfla_run(&model, &config)?;
    let tail = record.tail_mean(0.5)[0];
    println!("theta*            = {:.6}", model.theta_star());
    println!("tail mean of θ    = {tail:.6}");
    println!("|error|           = {:.2e}", (tail - model.theta_star()).abs());
    println!("gradient evals    = {}", record.total_grad_evals);
    Ok(())
}
