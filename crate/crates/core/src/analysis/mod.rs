//! Assumption probes, exact linear-SDE oracles, and scaling studies.

mod fit;
mod lyapunov;
mod probes;
mod studies;

pub use fit::{fit_loglog_slope, SlopeFit, BOOTSTRAP_REPLICAS};
pub use lyapunov::{
    averaged_euler_stationary_variance, averaged_stationary_variance, solve_continuous_lyapunov,
    solve_discrete_lyapunov, stationary_covariance_euler, stationary_covariance_lyapunov, ExactTransition, LinearSde,
};
pub use probes::{
    estimate_mixed_bound, probe_fast_convexity, probe_growth_condition, probe_joint_convexity, probe_monotonicity,
    probe_slow_convexity, probe_suite, ProbeConstants, ProbeReport, ProbeSettings,
};
pub use studies::*;
