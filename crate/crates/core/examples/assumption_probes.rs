//! Sampling probes of the convexity and monotonicity assumptions on the
//! Gaussian model and on the cosine-coupled reference potential.

use slowfast_mmle::analysis::{probe_fast_convexity, probe_suite, ProbeConstants, ProbeSettings};
use slowfast_mmle::models::{ExamplePotential, ExampleVariant, GaussianHierarchicalModel};

fn main() -> slowfast_mmle::Result<()> {
    let settings = ProbeSettings::default();
    let gaussian = GaussianHierarchicalModel::new(vec![0.4, 1.9], 1.0, 1.0)?;
    println!("gaussian:");
    for r in probe_suite(&gaussian, &ProbeConstants::gaussian(&gaussian), &settings) {
        println!(
            "  {:<17} {}={:<8.5} pass={} worst={:.2e}",
            r.probe, r.parameter_name, r.parameter, r.pass, r.worst_violation
        );
    }

    let good = ExamplePotential::new(2, 1.0, 0.5, ExampleVariant::Difference { c_h: 0.5 })?;
    let constants = ProbeConstants::example(&good).expect("conditions hold");
    println!("example (a = 1, ã = 0.5, c_h = 0.5):");
    for r in probe_suite(&good, &constants, &settings) {
        println!(
            "  {:<17} {}={:<8.5} pass={}",
            r.probe, r.parameter_name, r.parameter, r.pass
        );
    }

    let broken = ExamplePotential::new(2, 0.05, 0.5, ExampleVariant::Difference { c_h: 1.0 })?;
    let r = probe_fast_convexity(&broken, 0.2, &settings);
    println!(
        "broken example: pass={} worst={:.3} witness={:?}",
        r.pass, r.worst_violation, r.witness
    );
    Ok(())
}
