//! Experiment drivers: convergence sweep, hypothesis residuals, propagation,
//! fixed-point, derivative and dispersion checks.
//!
//! Every continuum quantity (the solution `Ψ`, the map `K` and its
//! derivative `K'`) is represented by its counterpart on the reference basis
//! of dimension `n_ref`. The reference uses the same time grid and substeps
//! as the sweep, so the measured errors isolate the spatial discretization.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::derivative::{
    build_operator, dispersion_estimate, invertibility_margin, operator_norm, random_unit_trajectory, Linearization,
};
use crate::error::{Error, Result};
use crate::evolution::{GalerkinSystem, Model};
use crate::fixed_point::{
    apply_k_ref, apply_kn, free_evolution, initial_coefficients, initial_fields, reference_solution, solve_fixed_point,
    ReferenceSolution,
};
use crate::function_space::{build_basis, h10_norm, project_pn, traj_norm, GalerkinBasis, H1Field, Trajectory};
use crate::harness::config::ExperimentConfig;
use crate::harness::report::{fmt_float, ConvergenceReport, ReportRow, Table};
use crate::linalg::CMatrix;

/// Finite-difference step sizes of the derivative check.
pub const FD_STEPS: [f64; 3] = [1e-2, 1e-3, 1e-4];
/// Number of random `(ψ, ω)` pairs per basis in the derivative check.
pub const FD_PAIRS: usize = 5;
/// Accepted range of the finite-difference log-log slope.
pub const FD_SLOPE_RANGE: (f64, f64) = (0.8, 1.2);
/// Random points, besides `Ψ_n`, sampled in the probe ball for `h8`.
pub const BALL_POINTS: usize = 4;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Shared inputs of every experiment: the model, the initial datum and the
/// reference solution with its linearization and probe images.
pub struct SweepContext {
    pub config: ExperimentConfig,
    pub model: Arc<Model>,
    pub fields: Vec<H1Field>,
    pub reference: ReferenceSolution,
    pub reference_linearization: Linearization,
    /// Random unit directions on the reference basis and their images under `K'(Ψ)`.
    pub probes: Vec<(Trajectory, Trajectory)>,
}

impl SweepContext {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let model = config.model()?;
        let fields = initial_fields(config.initial, &model.domain, config.orbitals);
        let reference = reference_solution(model.clone(), config.n_ref(), &fields, &config.reference_fixed_point())?;
        let reference_linearization = Linearization::new(&reference.system, &reference.trajectory, &reference.psi0)?;
        let mut rng = rng_for(config.seed, u64::MAX);
        let directions = (0..config.derivative_samples)
            .map(|_| random_unit_trajectory(reference.basis(), &reference.trajectory, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let probes = directions
            .into_par_iter()
            .map(|w| {
                let image = reference_linearization.apply(&w)?;
                Ok((w, image))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: config.clone(),
            model,
            fields,
            reference,
            reference_linearization,
            probes,
        })
    }

    pub fn reference_basis(&self) -> &Arc<GalerkinBasis> {
        self.reference.basis()
    }

    /// Embeds a trajectory into the reference space.
    pub fn inject(&self, psi: &Trajectory) -> Result<Trajectory> {
        project_pn(self.reference_basis(), psi)
    }

    pub fn level(&self, n: usize) -> Result<Level> {
        let basis = build_basis(&self.model.domain, n)?;
        let system = GalerkinSystem::new(self.model.clone(), basis.clone())?;
        let psi0 = initial_coefficients(&basis, &self.fields)?;
        Ok(Level { n, basis, system, psi0 })
    }

    /// `||Ψ₀ - Q_n Ψ₀||_{H¹₀}` over all orbitals, evaluated on the grid.
    pub fn initial_error(&self, level: &Level) -> Result<f64> {
        let domain = &self.model.domain;
        let mut sum = 0.0;
        for (o, f) in self.fields.iter().enumerate() {
            let approx = level.basis.synthesize(&level.psi0.column(o).into_owned())?;
            sum += h10_norm(domain, &f.sub(&approx))?.powi(2);
        }
        Ok(sum.sqrt())
    }
}

/// One sweep entry: a basis, its Galerkin system and `Q_n Ψ₀`.
pub struct Level {
    pub n: usize,
    pub basis: Arc<GalerkinBasis>,
    pub system: GalerkinSystem,
    pub psi0: CMatrix,
}

fn random_unit_on(level: &Level, like: &Trajectory, rng: &mut ChaCha8Rng) -> Result<Trajectory> {
    random_unit_trajectory(&level.basis, like, rng)
}

/// Largest `||A ω - B ω||` over the given directions.
fn sampled_distance<F, G>(probes: &[Trajectory], a: F, b: G) -> Result<f64>
where
    F: Fn(&Trajectory) -> Result<Trajectory>,
    G: Fn(&Trajectory) -> Result<Trajectory>,
{
    let mut worst: f64 = 0.0;
    for w in probes {
        worst = worst.max(traj_norm(&a(w)?, Some(&b(w)?))?);
    }
    Ok(worst)
}

fn measure_level(ctx: &SweepContext, n: usize) -> Result<ReportRow> {
    let cfg = &ctx.config;
    let level = ctx.level(n)?;
    let psi_ref = &ctx.reference.trajectory;
    let ref_basis = ctx.reference_basis();

    let pn_psi = project_pn(&level.basis, psi_ref)?;
    let e_proj = traj_norm(&ctx.inject(&pn_psi)?, Some(psi_ref))?;
    let e_init = ctx.initial_error(&level)?;

    // K Ψ and K P_n Ψ through the reference proxy
    let k_psi = apply_k_ref(&ctx.reference, psi_ref)?;
    let k_pn_psi = apply_k_ref(&ctx.reference, &pn_psi)?;
    let kn_pn_psi = apply_kn(&level.system, &pn_psi, &level.psi0)?;
    let pn_k_psi = project_pn(&level.basis, &k_psi)?;
    let pn_k_pn_psi = project_pn(&level.basis, &k_pn_psi)?;
    let c_n = traj_norm(&pn_k_psi, Some(&kn_pn_psi))?;
    let h4 = traj_norm(&ctx.inject(&pn_k_pn_psi)?, Some(&k_psi))?;
    let h6 = traj_norm(&pn_k_pn_psi, Some(&kn_pn_psi))?;

    // h5: P_n K'(P_n Ψ) against K'(Ψ) on reference-space probes
    let injected_pn_psi = ctx.inject(&pn_psi)?;
    let lin_ref_at_pn = Linearization::new(&ctx.reference.system, &injected_pn_psi, &ctx.reference.psi0)?;
    let mut h5: f64 = 0.0;
    for (w, k_prime_w) in &ctx.probes {
        let projected = project_pn(&level.basis, &lin_ref_at_pn.apply(w)?)?;
        h5 = h5.max(traj_norm(&ctx.inject(&projected)?, Some(k_prime_w))?);
    }

    // h7: K'_n(P_n Ψ) against P_n K'(P_n Ψ) on probes in E_n
    let mut rng = rng_for(cfg.seed, n as u64);
    let local_probes = (0..cfg.derivative_samples)
        .map(|_| random_unit_on(&level, &pn_psi, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let lin_n_at_pn = Linearization::new(&level.system, &pn_psi, &level.psi0)?;
    let h7 = sampled_distance(
        &local_probes,
        |w| lin_n_at_pn.apply(w),
        |w| project_pn(&level.basis, &lin_ref_at_pn.apply(&project_pn(ref_basis, w)?)?),
    )?;

    let mut row = ReportRow {
        n,
        e_proj,
        e_init,
        e_fp: f64::NAN,
        e_total: f64::NAN,
        c_n,
        iters: 0,
        contraction: f64::NAN,
        h3: e_proj,
        h4,
        h5,
        h6,
        h7,
        h8: f64::NAN,
        error: None,
    };

    let (psi_n, log) = match solve_fixed_point(&level.system, &level.psi0, &cfg.fixed_point) {
        Ok(v) => v,
        Err(e) if e.is_numerical() => {
            row.error = Some(e.to_string());
            return Ok(row);
        }
        Err(e) => return Err(e),
    };
    row.iters = log.iterations();
    row.contraction = log.max_ratio();
    row.e_fp = traj_norm(&psi_n, Some(&pn_psi))?;
    row.e_total = traj_norm(&ctx.inject(&psi_n)?, Some(psi_ref))?;

    // h8: sup over a ball of radius e_fp(n) around P_n Ψ, containing Ψ_n
    let radius = row.e_fp;
    let mut points = vec![psi_n.clone()];
    for _ in 0..BALL_POINTS {
        let u = random_unit_on(&level, &pn_psi, &mut rng)?;
        points.push(
            pn_psi
                .add_scaled(radius, &u)?
                .map_samples(|j, s| if j == 0 { pn_psi.sample(0).clone() } else { s.clone() }),
        );
    }
    let mut h8: f64 = 0.0;
    for p in &points {
        let lin = Linearization::new(&level.system, p, &level.psi0)?;
        h8 = h8.max(sampled_distance(&local_probes, |w| lin.apply(w), |w| lin_n_at_pn.apply(w))?);
    }
    row.h8 = h8;
    Ok(row)
}

/// Reference solution once, then every sweep level; per-level numerical
/// failures are recorded in the row and do not stop the sweep.
pub fn run_convergence_sweep(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    let ctx = SweepContext::new(config)?;
    sweep_with_context(&ctx)
}

pub fn sweep_with_context(ctx: &SweepContext) -> Result<ConvergenceReport> {
    let rows = ctx
        .config
        .sweep_n
        .par_iter()
        .map(|&n| measure_level(ctx, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport {
        rows,
        n_ref: ctx.reference.n_ref,
        reference_substeps: ctx.reference.substeps,
        reference_residual: ctx.reference.residual,
        reference_iterations: ctx.reference.log.iterations(),
        seed: ctx.config.seed,
        estimated_columns: vec!["h5".into(), "h7".into(), "h8".into()],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisRow {
    pub n: usize,
    pub h3: f64,
    pub h4: f64,
    pub h5: f64,
    pub h6: f64,
    pub h7: f64,
    pub h8: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisTable {
    pub rows: Vec<HypothesisRow>,
    pub n_ref: usize,
    pub reference_residual: f64,
    pub seed: u64,
    pub estimated_columns: Vec<String>,
}

impl HypothesisTable {
    pub fn from_report(report: &ConvergenceReport) -> Self {
        Self {
            rows: report
                .rows
                .iter()
                .map(|r| HypothesisRow {
                    n: r.n,
                    h3: r.h3,
                    h4: r.h4,
                    h5: r.h5,
                    h6: r.h6,
                    h7: r.h7,
                    h8: r.h8,
                })
                .collect(),
            n_ref: report.n_ref,
            reference_residual: report.reference_residual,
            seed: report.seed,
            estimated_columns: report.estimated_columns.clone(),
        }
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["n", "h3", "h4", "h5_est", "h6", "h7_est", "h8_est"]);
        for r in &self.rows {
            let mut row = vec![r.n.to_string()];
            row.extend([r.h3, r.h4, r.h5, r.h6, r.h7, r.h8].map(fmt_float));
            t.push(row);
        }
        t
    }
}

/// The six hypothesis residuals per sweep level.
pub fn run_hypothesis_check(config: &ExperimentConfig) -> Result<HypothesisTable> {
    Ok(HypothesisTable::from_report(&run_convergence_sweep(config)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropagationRow {
    pub n: usize,
    /// Largest `|‖c(t)‖²_{L²} - ‖c(0)‖²_{L²}|` over the samples.
    pub l2_drift: f64,
    pub h10_max: f64,
}

/// External-only propagation of `Q_n Ψ₀` for every sweep level.
pub fn run_propagation(config: &ExperimentConfig) -> Result<Vec<PropagationRow>> {
    let model = config.model()?;
    let fields = initial_fields(config.initial, &model.domain, config.orbitals);
    config
        .sweep_n
        .par_iter()
        .map(|&n| {
            let basis = build_basis(&model.domain, n)?;
            let system = GalerkinSystem::new(model.clone(), basis.clone())?;
            let psi0 = initial_coefficients(&basis, &fields)?;
            let traj = free_evolution(&system, &psi0)?;
            let n0 = system.l2_norm_sq(&psi0);
            let l2_drift = traj
                .samples()
                .iter()
                .map(|s| (system.l2_norm_sq(s) - n0).abs())
                .fold(0.0, f64::max);
            Ok(PropagationRow {
                n,
                l2_drift,
                h10_max: traj_norm(&traj, None)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointRow {
    pub n: usize,
    pub iters: usize,
    pub contraction: f64,
    pub residual: f64,
    pub residuals: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// The Faedo-Galerkin fixed point for every sweep level.
pub fn run_fixed_point(config: &ExperimentConfig) -> Result<Vec<FixedPointRow>> {
    let model = config.model()?;
    let fields = initial_fields(config.initial, &model.domain, config.orbitals);
    config
        .sweep_n
        .par_iter()
        .map(|&n| {
            let basis = build_basis(&model.domain, n)?;
            let system = GalerkinSystem::new(model.clone(), basis.clone())?;
            let psi0 = initial_coefficients(&basis, &fields)?;
            Ok(match solve_fixed_point(&system, &psi0, &config.fixed_point) {
                Ok((_, log)) => FixedPointRow {
                    n,
                    iters: log.iterations(),
                    contraction: log.max_ratio(),
                    residual: log.final_residual(),
                    residuals: log.residuals,
                    error: None,
                },
                Err(e) if e.is_numerical() => FixedPointRow {
                    n,
                    iters: 0,
                    contraction: f64::NAN,
                    residual: f64::NAN,
                    residuals: vec![],
                    error: Some(e.to_string()),
                },
                Err(e) => return Err(e),
            })
        })
        .collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteDifferenceRow {
    pub n: usize,
    pub pair: usize,
    /// `‖(K_n(ψ+εω) - K_n(ψ))/ε - K'_n[ψ](ω)‖` for each step in [`FD_STEPS`].
    pub errors: Vec<f64>,
    pub slope: f64,
    pub pass: bool,
}

/// A random trajectory with uniform coefficients in the unit square.
fn random_trajectory(basis: &Arc<GalerkinBasis>, like: &Trajectory, rng: &mut ChaCha8Rng) -> Result<Trajectory> {
    let k = basis.dim();
    let n = like.orbitals();
    let samples = (0..like.grid().samples())
        .map(|_| CMatrix::from_fn(k, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
        .collect();
    Trajectory::new(basis.clone(), *like.grid(), samples)
}

/// Difference-quotient check of `K'_n` on seeded random `(ψ, ω)` pairs.
pub fn finite_difference_check(system: &GalerkinSystem, psi0: &CMatrix, pairs: usize, seed: u64) -> Result<Vec<FiniteDifferenceRow>> {
    let n = system.dim();
    let template = Trajectory::zeros(system.basis().clone(), *system.grid(), psi0.ncols());
    let mut rng = rng_for(seed, 1_000 + n as u64);
    let inputs = (0..pairs)
        .map(|_| {
            let psi = random_trajectory(system.basis(), &template, &mut rng)?;
            let omega = random_trajectory(system.basis(), &template, &mut rng)?;
            Ok((psi, omega))
        })
        .collect::<Result<Vec<_>>>()?;
    inputs
        .par_iter()
        .enumerate()
        .map(|(pair, (psi, omega))| {
            let analytic = Linearization::new(system, psi, psi0)?.apply(omega)?;
            let base = apply_kn(system, psi, psi0)?;
            let errors = FD_STEPS
                .iter()
                .map(|&e| {
                    let moved = apply_kn(system, &psi.add_scaled(e, omega)?, psi0)?;
                    let fd = moved.sub(&base)?.scaled(Complex64::new(1.0 / e, 0.0));
                    traj_norm(&fd, Some(&analytic))
                })
                .collect::<Result<Vec<_>>>()?;
            let slope = loglog_slope(&FD_STEPS, &errors);
            Ok(FiniteDifferenceRow {
                n,
                pair,
                errors,
                slope,
                pass: (FD_SLOPE_RANGE.0..=FD_SLOPE_RANGE.1).contains(&slope),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorRow {
    pub n: usize,
    pub dim: usize,
    /// Power-iteration estimate of `‖K'_n(Ψ_n)‖`.
    pub norm: f64,
    /// Smallest singular value of `I - K'_n(Ψ_n)`.
    pub margin: f64,
}

/// `K'_n` at the Faedo-Galerkin fixed point: norm estimate and invertibility margin.
pub fn operator_at_fixed_point(system: &GalerkinSystem, psi0: &CMatrix, config: &ExperimentConfig) -> Result<OperatorRow> {
    let (psi, _) = solve_fixed_point(system, psi0, &config.fixed_point)?;
    let lin = Linearization::new(system, &psi, psi0)?;
    let op = build_operator(&lin, config.dim_cap)?;
    Ok(OperatorRow {
        n: system.dim(),
        dim: op.dim(),
        norm: operator_norm(&op),
        margin: invertibility_margin(&op)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeCheck {
    pub finite_differences: Vec<FiniteDifferenceRow>,
    /// Levels whose trajectory space exceeds the dimension cap are skipped.
    pub operators: Vec<OperatorRow>,
    pub seed: u64,
}

impl DerivativeCheck {
    pub fn passed(&self) -> bool {
        self.finite_differences.iter().all(|r| r.pass)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["n", "pair", "err_1e-2", "err_1e-3", "err_1e-4", "slope", "pass"]);
        for r in &self.finite_differences {
            let mut row = vec![r.n.to_string(), r.pair.to_string()];
            row.extend(r.errors.iter().map(|&e| fmt_float(e)));
            row.push(fmt_float(r.slope));
            row.push(r.pass.to_string());
            t.push(row);
        }
        t
    }
}

/// Finite-difference slopes for every sweep level, plus operator norm and
/// invertibility margin where the dimension cap allows.
pub fn run_derivative_check(config: &ExperimentConfig) -> Result<DerivativeCheck> {
    let model = config.model()?;
    let fields = initial_fields(config.initial, &model.domain, config.orbitals);
    let mut finite_differences = Vec::new();
    let mut operators = Vec::new();
    for &n in &config.sweep_n {
        let basis = build_basis(&model.domain, n)?;
        let system = GalerkinSystem::new(model.clone(), basis.clone())?;
        let psi0 = initial_coefficients(&basis, &fields)?;
        finite_differences.extend(finite_difference_check(&system, &psi0, FD_PAIRS, config.seed)?);
        match operator_at_fixed_point(&system, &psi0, config) {
            Ok(row) => operators.push(row),
            Err(Error::DimensionCap { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(DerivativeCheck {
        finite_differences,
        operators,
        seed: config.seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionReport {
    /// `(n, estimate)`; each estimate is a sampled lower bound.
    pub estimates: Vec<(usize, f64)>,
    pub samples: usize,
    pub n_ref: usize,
    pub seed: u64,
}

/// Dispersion estimates for every sweep level on seeded reference-space draws.
pub fn run_dispersion(config: &ExperimentConfig) -> Result<DispersionReport> {
    let model = config.model()?;
    let fields = initial_fields(config.initial, &model.domain, config.orbitals);
    let reference = reference_solution(model.clone(), config.n_ref(), &fields, &config.reference_fixed_point())?;
    let bases = config
        .sweep_n
        .iter()
        .map(|&n| build_basis(&model.domain, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(DispersionReport {
        estimates: dispersion_estimate(&bases, &reference, config.derivative_samples, config.seed)?,
        samples: config.derivative_samples,
        n_ref: config.n_ref(),
        seed: config.seed,
    })
}
