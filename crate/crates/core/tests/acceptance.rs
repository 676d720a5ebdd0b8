//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs as a plain binary (no libtest harness) so the report is always shown.

use std::f64::consts::PI;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use faedo_core::derivative::{build_operator, invertibility_margin, Linearization};
use faedo_core::evolution::{evolution_identity_residual, GalerkinSystem, Model, Physics, PropagatorConfig};
use faedo_core::fixed_point::{apply_kn, free_evolution, initial_coefficients, initial_fields, solve_fixed_point};
use faedo_core::function_space::{build_basis, SpatialDomain, TimeGrid};
use faedo_core::harness::experiments::{finite_difference_check, loglog_slope, FD_SLOPE_RANGE};
use faedo_core::harness::{run_convergence_sweep, run_dispersion, ConvergenceReport, ExperimentConfig};
use faedo_core::linalg::CMatrix;
use faedo_core::potentials::{DensityTrajectory, ExternalPotential, HartreeKernel};
use num_complex::Complex64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn default_config() -> ExperimentConfig {
    ExperimentConfig::default_scenario()
}

fn level(config: &ExperimentConfig, model: &Arc<Model>, n: usize) -> (GalerkinSystem, CMatrix) {
    let basis = build_basis(&model.domain, n).unwrap();
    let fields = initial_fields(config.initial, &model.domain, config.orbitals);
    let psi0 = initial_coefficients(&basis, &fields).unwrap();
    (GalerkinSystem::new(model.clone(), basis).unwrap(), psi0)
}

/// L² drift per unit time of every propagated trajectory in the default
/// scenario (external-only and self-consistent), budget 5 s.
fn conservation() -> Outcome {
    let start = Instant::now();
    let config = default_config();
    let model = config.model().unwrap();
    let horizon = config.horizon;
    let mut worst: f64 = 0.0;
    for &n in config.sweep_n.iter().chain([config.n_ref()].iter()) {
        let (system, psi0) = level(&config, &model, n);
        let free = free_evolution(&system, &psi0).unwrap();
        let coupled = apply_kn(&system, &free, &psi0).unwrap();
        let n0 = system.l2_norm_sq(&psi0);
        for traj in [&free, &coupled] {
            for s in traj.samples() {
                worst = worst.max((system.l2_norm_sq(s) - n0).abs() / horizon);
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-10 && elapsed < Duration::from_secs(5),
        format!("max drift {worst:.3e} per unit time (limit 1e-10), {:.2} s (limit 5 s)", elapsed.as_secs_f64()),
    )
}

/// Phase error of the lowest free eigenmode against `exp(-i E₁ t / ħ)` as the
/// substep count doubles; ratios must lie in 4 ± 0.8. Budget 10 s.
fn propagator_order() -> Outcome {
    let start = Instant::now();
    let domain = Arc::new(SpatialDomain::new(1.0, 64).unwrap());
    let hartree = HartreeKernel::new(0.1, 1.0, 0.0).unwrap().operator(domain.clone()).unwrap();
    let grid = TimeGrid::new(0.5, 32).unwrap();
    let e1 = PI * PI / 2.0;
    let errors: Vec<f64> = [1usize, 2, 4, 8]
        .iter()
        .map(|&substeps| {
            let model = Arc::new(Model {
                domain: domain.clone(),
                external: ExternalPotential::zero(1.0),
                hartree: Arc::new(hartree.clone()),
                physics: Physics::new(1.0, 1.0).unwrap(),
                grid,
                propagator: PropagatorConfig::new(substeps).unwrap(),
            });
            let basis = build_basis(&domain, 4).unwrap();
            let system = GalerkinSystem::new(model, basis.clone()).unwrap();
            // lowest L²-normalized sine mode: f_1 scaled by sqrt(1 + π²)
            let mut c0 = CMatrix::zeros(4, 1);
            c0[(0, 0)] = Complex64::new((1.0 + PI * PI).sqrt(), 0.0);
            let rho = DensityTrajectory::zeros(&domain, grid);
            let traj = system.propagate_trajectory(&rho, &c0).unwrap();
            (0..grid.samples())
                .map(|j| {
                    let exact = c0[(0, 0)] * Complex64::from_polar(1.0, -e1 * grid.time(j));
                    let mut diff = traj.sample(j).clone();
                    diff[(0, 0)] -= exact;
                    system.h10_norm(&diff)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let elapsed = start.elapsed();
    let pass = ratios.iter().all(|r| (r - 4.0).abs() <= 0.8) && elapsed < Duration::from_secs(10);
    outcome(
        pass,
        format!(
            "error ratios {:?} (need 4 ± 0.8), {:.2} s (limit 10 s)",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    )
}

/// Difference-quotient slope against `K'_n` on 5 random pairs per level.
/// Budget 60 s.
fn derivative_correctness() -> Outcome {
    let start = Instant::now();
    let config = default_config();
    let model = config.model().unwrap();
    let mut slopes = Vec::new();
    for &n in &config.sweep_n {
        let (system, psi0) = level(&config, &model, n);
        for row in finite_difference_check(&system, &psi0, 5, config.seed).unwrap() {
            slopes.push(row.slope);
        }
    }
    let elapsed = start.elapsed();
    let (lo, hi) = slopes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
    let pass = slopes.len() >= 5
        && slopes.iter().all(|s| (FD_SLOPE_RANGE.0..=FD_SLOPE_RANGE.1).contains(s))
        && elapsed < Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "{} pairs, slopes in [{lo:.4}, {hi:.4}] (need [0.8, 1.2]), {:.2} s (limit 60 s)",
            slopes.len(),
            elapsed.as_secs_f64()
        ),
    )
}

/// Picard residual ratios ≤ 0.95 at every iteration and convergence to 1e-8
/// within 15 iterations, for every level of the default sweep.
fn contraction() -> Outcome {
    let config = default_config();
    let model = config.model().unwrap();
    let mut worst_ratio: f64 = 0.0;
    let mut most_iters = 0;
    for &n in &config.sweep_n {
        let (system, psi0) = level(&config, &model, n);
        match solve_fixed_point(&system, &psi0, &config.fixed_point) {
            Ok((_, log)) => {
                worst_ratio = worst_ratio.max(log.max_ratio());
                most_iters = most_iters.max(log.iterations());
                if log.final_residual() > 1e-8 {
                    return outcome(false, format!("n={n}: final residual {:.3e}", log.final_residual()));
                }
            }
            Err(e) => return outcome(false, format!("n={n}: {e}")),
        }
    }
    outcome(
        worst_ratio <= 0.95 && most_iters <= 15 && config.fixed_point.tolerance == 1e-8,
        format!("max ratio {worst_ratio:.4} (limit 0.95), max iterations {most_iters} (limit 15) at tolerance 1e-8"),
    )
}

/// Duhamel identity defect for a perturbed density pair: ≈4× smaller when
/// the sample count and the total number of substeps both double (so the
/// sample spacing and the step both halve), and exactly zero for equal
/// densities or without coupling. The ratio for doubling the per-interval
/// substep count as well (step shrinks 4×) is reported alongside.
fn identity_residual() -> Outcome {
    let config = default_config();
    let rho1 = |x: f64, t: f64| 1.5 * (PI * x).sin().powi(2) * (1.0 + 0.4 * (3.0 * t).sin()) + x * (1.0 - x);
    let rho2 = move |x: f64, t: f64| rho1(x, t) * (1.0 + 1e-3 * (2.0 * PI * x).cos() * (1.0 + t));
    let residual = |coupling: f64, intervals: usize, substeps: usize, same: bool| {
        let mut c = config.clone();
        c.coupling = coupling;
        let model = c.model_with_time(intervals, substeps).unwrap();
        let (system, psi0) = level(&c, &model, 8);
        let r1 = DensityTrajectory::from_fn(&model.domain, model.grid, rho1);
        let r2 = if same { r1.clone() } else { DensityTrajectory::from_fn(&model.domain, model.grid, rho2) };
        evolution_identity_residual(&system, &r1, &r2, &psi0, intervals).unwrap()
    };
    let coarse = residual(config.coupling, config.intervals, config.substeps, false);
    let fine = residual(config.coupling, 2 * config.intervals, config.substeps, false);
    let ratio = coarse / fine;
    let both = coarse / residual(config.coupling, 2 * config.intervals, 2 * config.substeps, false);
    let same = residual(config.coupling, config.intervals, config.substeps, true);
    let uncoupled = residual(0.0, config.intervals, config.substeps, false);
    outcome(
        (2.5..=6.0).contains(&ratio) && same <= 1e-12 && uncoupled <= 1e-12,
        format!(
            "refinement ratio {ratio:.3} (need [2.5, 6]; {coarse:.3e} -> {fine:.3e}; per-interval substeps also doubled: {both:.3}), equal densities {same:.1e}, uncoupled {uncoupled:.1e} (limit 1e-12)"
        ),
    )
}

/// Spread of `e_fp / c_n` across the sweep.
fn two_sided_estimate(report: &ConvergenceReport) -> Outcome {
    let ratios: Vec<f64> = report.rows.iter().map(|r| r.e_fp / r.c_n).collect();
    let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = max / min;
    outcome(
        ratios.iter().all(|r| r.is_finite() && *r > 0.0) && spread <= 100.0,
        format!("e_fp/c_n in [{min:.4}, {max:.4}], spread {spread:.3} (limit 100)"),
    )
}

/// Regression slope of log e_total on log(e_proj + e_init), and
/// e_total(16) < e_total(4) / 3.
fn order_of_convergence(report: &ConvergenceReport) -> Outcome {
    let xs: Vec<f64> = report.rows.iter().map(|r| r.e_proj + r.e_init).collect();
    let ys: Vec<f64> = report.rows.iter().map(|r| r.e_total).collect();
    let slope = loglog_slope(&xs, &ys);
    let (e4, e16) = (report.row(4).unwrap().e_total, report.row(16).unwrap().e_total);
    outcome(
        (0.8..=1.2).contains(&slope) && e16 < e4 / 3.0,
        format!("slope {slope:.4} (need [0.8, 1.2]), e_total(16)/e_total(4) = {:.4} (need < 1/3)", e16 / e4),
    )
}

/// Each of h3..h8 at n = 16 at most half its value at n = 4.
fn hypothesis_decay(report: &ConvergenceReport) -> Outcome {
    let (a, b) = (report.row(4).unwrap(), report.row(16).unwrap());
    let pairs = [
        ("h3", a.h3, b.h3),
        ("h4", a.h4, b.h4),
        ("h5", a.h5, b.h5),
        ("h6", a.h6, b.h6),
        ("h7", a.h7, b.h7),
        ("h8", a.h8, b.h8),
    ];
    let ratios: Vec<String> = pairs.iter().map(|(k, x, y)| format!("{k} {:.3}", y / x)).collect();
    outcome(
        pairs.iter().all(|(_, x, y)| *y <= 0.5 * x),
        format!("value(16)/value(4): {} (limit 0.5)", ratios.join(", ")),
    )
}

/// Dispersion strictly decreasing over n ∈ {4, 8, 16} on seeded draws.
fn dispersion() -> Outcome {
    let mut config = default_config();
    config.sweep_n = vec![4, 8, 16];
    let report = run_dispersion(&config).unwrap();
    let values: Vec<f64> = report.estimates.iter().map(|e| e.1).collect();
    outcome(
        values.windows(2).all(|w| w[1] < w[0]),
        format!("estimates {:?} over n = 4, 8, 16", values.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>()),
    )
}

/// Smallest singular value of I - K'_n(Ψ_n) at n = 16: at least 0.5 and
/// within 10% when the sample count doubles.
fn invertibility() -> Outcome {
    let config = default_config();
    let n = *config.sweep_n.last().unwrap();
    let margin = |intervals: usize| {
        let model = config.model_with_time(intervals, config.substeps).unwrap();
        let (system, psi0) = level(&config, &model, n);
        let (psi, _) = solve_fixed_point(&system, &psi0, &config.fixed_point).unwrap();
        let lin = Linearization::new(&system, &psi, &psi0).unwrap();
        invertibility_margin(&build_operator(&lin, usize::MAX).unwrap()).unwrap()
    };
    let m1 = margin(config.intervals);
    let m2 = margin(2 * config.intervals);
    let change = (m2 - m1).abs() / m1;
    outcome(
        m1 >= 0.5 && change <= 0.1,
        format!("margin {m1:.4} (need >= 0.5), doubled S {m2:.4}, relative change {change:.4} (limit 0.1)"),
    )
}

/// Two CLI sweeps with the same config give byte-identical CSV, with
/// different worker-pool sizes.
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_faedo"))
            .args(["sweep", "--config", "default", "--out"])
            .arg(&out)
            .env("FAEDO_THREADS", threads)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out.join("sweep.csv")).unwrap()
    };
    let a = run("a", "1");
    let b = run("b", "2");
    outcome(a == b && !a.is_empty(), format!("{} bytes, identical: {}", a.len(), a == b))
}

fn main() {
    let sweep = run_convergence_sweep(&default_config()).expect("default sweep");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("conservation", Box::new(conservation)),
        ("propagator order", Box::new(propagator_order)),
        ("derivative correctness", Box::new(derivative_correctness)),
        ("contraction", Box::new(contraction)),
        ("identity residual", Box::new(identity_residual)),
        ("two-sided estimate", Box::new(|| two_sided_estimate(&sweep))),
        ("order of convergence", Box::new(|| order_of_convergence(&sweep))),
        ("hypothesis decay", Box::new(|| hypothesis_decay(&sweep))),
        ("dispersion", Box::new(dispersion)),
        ("invertibility margin", Box::new(invertibility)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        println!("criterion {:>2} {name}: {} -- {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
