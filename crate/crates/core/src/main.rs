use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use faedo_core::harness::experiments::{
    DerivativeCheck, DispersionReport, FixedPointRow, HypothesisTable, PropagationRow,
};
use faedo_core::harness::report::{fmt_float, write_outputs, Table};
use faedo_core::harness::{self, ExperimentConfig};
use faedo_core::Result;

#[derive(Parser)]
#[command(name = "faedo", version, about = "Faedo-Galerkin solver and convergence harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file, or `default` for the built-in scenario.
    #[arg(long, global = true, default_value = "default")]
    config: String,

    /// Overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// External-only propagation of the initial datum for every sweep level.
    Propagate,
    /// Faedo-Galerkin fixed point for every sweep level.
    FixedPoint,
    /// Finite-difference check of the derivative, operator norm and margin.
    DerivativeCheck,
    /// Full convergence sweep against the reference solution.
    Sweep,
    /// Hypothesis residuals h3..h8.
    Hypotheses,
    /// Dispersion of the derivative's image of the unit ball.
    Dispersion,
}

/// Runs the command; `Ok(false)` means it completed but a check failed.
fn run(command: Command, config: &ExperimentConfig) -> Result<bool> {
    match command {
        Command::Propagate => {
            let rows = harness::run_propagation(config)?;
            let mut t = Table::new(&["n", "l2_drift", "h10_max"]);
            for r in &rows {
                println!("n={} l2_drift={} h10_max={}", r.n, fmt_float(r.l2_drift), fmt_float(r.h10_max));
                t.push(vec![r.n.to_string(), fmt_float(r.l2_drift), fmt_float(r.h10_max)]);
            }
            write_outputs::<Vec<PropagationRow>>(config, "propagate", &t.to_csv(), &rows)?;
            Ok(true)
        }
        Command::FixedPoint => {
            let rows = harness::run_fixed_point(config)?;
            let mut t = Table::new(&["n", "iters", "contraction", "residual"]);
            for r in &rows {
                match &r.error {
                    None => println!(
                        "n={} iters={} contraction={} residual={}",
                        r.n,
                        r.iters,
                        fmt_float(r.contraction),
                        fmt_float(r.residual)
                    ),
                    Some(e) => println!("n={} failed: {e}", r.n),
                }
                t.push(vec![r.n.to_string(), r.iters.to_string(), fmt_float(r.contraction), fmt_float(r.residual)]);
            }
            write_outputs::<Vec<FixedPointRow>>(config, "fixed_point", &t.to_csv(), &rows)?;
            Ok(rows.iter().all(|r| r.error.is_none()))
        }
        Command::DerivativeCheck => {
            let check = harness::run_derivative_check(config)?;
            for r in &check.finite_differences {
                let errs: Vec<String> = r.errors.iter().map(|&e| fmt_float(e)).collect();
                println!(
                    "n={} pair={} errors=[{}] slope={} {}",
                    r.n,
                    r.pair,
                    errs.join(", "),
                    fmt_float(r.slope),
                    if r.pass { "pass" } else { "FAIL" }
                );
            }
            for o in &check.operators {
                println!(
                    "n={} dim={} norm_est={} margin={}",
                    o.n,
                    o.dim,
                    fmt_float(o.norm),
                    fmt_float(o.margin)
                );
            }
            write_outputs::<DerivativeCheck>(config, "derivative_check", &check.to_table().to_csv(), &check)?;
            Ok(check.passed())
        }
        Command::Sweep => {
            let report = harness::run_convergence_sweep(config)?;
            println!(
                "reference: n_ref={} substeps={} residual={} iterations={}",
                report.n_ref,
                report.reference_substeps,
                fmt_float(report.reference_residual),
                report.reference_iterations
            );
            for r in &report.rows {
                match &r.error {
                    None => println!(
                        "n={} e_proj={} e_init={} e_fp={} e_total={} c_n={} iters={} contraction={}",
                        r.n,
                        fmt_float(r.e_proj),
                        fmt_float(r.e_init),
                        fmt_float(r.e_fp),
                        fmt_float(r.e_total),
                        fmt_float(r.c_n),
                        r.iters,
                        fmt_float(r.contraction)
                    ),
                    Some(e) => println!("n={} failed: {e}", r.n),
                }
            }
            report.write(config)?;
            Ok(!report.failed())
        }
        Command::Hypotheses => {
            let table = harness::run_hypothesis_check(config)?;
            for r in &table.rows {
                println!(
                    "n={} h3={} h4={} h5(est)={} h6={} h7(est)={} h8(est)={}",
                    r.n,
                    fmt_float(r.h3),
                    fmt_float(r.h4),
                    fmt_float(r.h5),
                    fmt_float(r.h6),
                    fmt_float(r.h7),
                    fmt_float(r.h8)
                );
            }
            write_outputs::<HypothesisTable>(config, "hypotheses", &table.to_table().to_csv(), &table)?;
            Ok(true)
        }
        Command::Dispersion => {
            let report = harness::run_dispersion(config)?;
            let mut t = Table::new(&["n", "estimate"]);
            for &(n, e) in &report.estimates {
                println!("n={n} dispersion(est)={}", fmt_float(e));
                t.push(vec![n.to_string(), fmt_float(e)]);
            }
            write_outputs::<DispersionReport>(config, "dispersion", &t.to_csv(), &report)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = harness::configure_threads()
        .and_then(|_| ExperimentConfig::load(&cli.config))
        .and_then(|mut config| {
            if let Some(dir) = cli.out {
                config.output_dir = dir;
            }
            run(cli.command, &config)
        });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
