//! Exact EM on the Gaussian model: monotone ascent and geometric contraction.

use slowfast_mmle::analysis::em_ascent_study;
use slowfast_mmle::models::GaussianHierarchicalModel;

fn main() -> slowfast_mmle::Result<()> {
    let model = GaussianHierarchicalModel::new(vec![1.0, 3.0], 1.0, 1.0)?;
    let trace = em_ascent_study(&model, 0.0, 10);
    for it in &trace.iterates {
        println!(
            "k = {:>2}  θ = {:.6}  log p = {:.6}  |θ - θ*| = {:.3e}",
            it.k, it.theta, it.log_marginal, it.abs_error
        );
    }
    println!("monotone = {}, contraction rate = {}", trace.monotone, trace.rate);
    Ok(())
}
