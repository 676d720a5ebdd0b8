//! Configuration, experiment orchestration and report output.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{ExperimentConfig, OutputFormat, DEFAULT_CONFIG};
pub use experiments::{
    run_convergence_sweep, run_derivative_check, run_dispersion, run_fixed_point, run_hypothesis_check,
    run_propagation, SweepContext,
};
pub use report::{ConvergenceReport, ReportRow, CSV_HEADER};

/// Environment variable selecting the worker-pool size.
pub const THREADS_ENV: &str = "FAEDO_THREADS";

/// Sizes the global worker pool from [`THREADS_ENV`] (default: available
/// parallelism). Results do not depend on the pool size.
pub fn configure_threads() -> crate::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| crate::Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    // a pool that is already initialized keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Process exit code for an error: 2 configuration, 3 numerical, 4 I/O.
pub fn exit_code(err: &crate::Error) -> i32 {
    use crate::Error::*;
    match err {
        Config(_) | InvalidArgument(_) | InvalidDomain(_) | QuadratureResolution { .. } | DimensionCap { .. } => 2,
        Io { .. } => 4,
        _ => 3,
    }
}
