//! Stationary spread of Langevin on the exact marginal versus β.

use slowfast_mmle::analysis::{concentration_study, SimulationSettings};
use slowfast_mmle::models::GaussianHierarchicalModel;

fn main() -> slowfast_mmle::Result<()> {
    let model = GaussianHierarchicalModel::new(vec![0.4, 1.9], 1.0, 1.0)?;
    let settings = SimulationSettings {
        n_replicas: 1000,
        seed: 5,
        ..Default::default()
    };
    let report = concentration_study(&model, &[1e2, 1e3, 1e4], 0.0, &settings)?;
    for p in &report.points {
        println!(
            "beta = {:<7e} E|θ - θ*|² = {:.4e} ± {:.1e}  exact {:.4e}  bound {:.4e}",
            p.value, p.error, p.stderr, p.details["exact_ou"], p.details["bound"]
        );
    }
    println!(
        "slope vs 1/beta = {:.3} [{:.3}, {:.3}]",
        report.fit.slope, report.fit.ci_low, report.fit.ci_high
    );
    println!("checks: {:?}", report.checks);
    Ok(())
}
