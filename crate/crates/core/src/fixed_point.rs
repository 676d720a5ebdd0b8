//! The Faedo-Galerkin fixed-point map `K_n`, its Picard iteration, and the
//! fine-basis reference solution used as a stand-in for the continuum
//! solution.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{GalerkinSystem, Model};
use crate::function_space::{build_basis, project_pn, traj_norm, GalerkinBasis, H1Field, SpatialDomain, Trajectory};
use crate::linalg::CMatrix;
use crate::potentials::{density_from_trajectory, DensityTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    pub tolerance: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl FixedPointConfig {
    pub fn new(tolerance: f64, max_iter: usize, damping: f64) -> Result<Self> {
        if !(tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tolerance}")));
        }
        if max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(damping > 0.0 && damping <= 1.0) {
            return Err(Error::InvalidArgument(format!("damping must lie in (0, 1], got {damping}")));
        }
        Ok(Self {
            tolerance,
            max_iter,
            damping,
        })
    }
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iter: 50,
            damping: 1.0,
        }
    }
}

/// Presets for the initial datum `Ψ₀`; both lie in `H² ∩ H¹₀`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// The two lowest sine modes, mixed with different weights per orbital.
    TwoMode,
    /// `x²(L-x)²` for the first orbital, times `(2x/L - 1)` for the second,
    /// alternating; L²-normalized.
    Bump,
}

impl FromStr for InitialState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-mode" => Ok(Self::TwoMode),
            "bump" => Ok(Self::Bump),
            other => Err(Error::Config(format!("unknown initial state `{other}` (expected two-mode or bump)"))),
        }
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TwoMode => "two-mode",
            Self::Bump => "bump",
        })
    }
}

/// `Ψ₀` as grid fields, one per orbital, each with unit L² norm.
pub fn initial_fields(preset: InitialState, domain: &SpatialDomain, orbitals: usize) -> Vec<H1Field> {
    let l = domain.length();
    (0..orbitals)
        .map(|o| {
            let field = match preset {
                InitialState::TwoMode => {
                    let theta = PI * (o as f64 + 1.0) / (2.0 * orbitals as f64 + 3.0);
                    let (a, b) = (theta.cos(), theta.sin());
                    let s = (2.0 / l).sqrt();
                    let k1 = PI / l;
                    let k2 = 2.0 * PI / l;
                    H1Field::from_real_fn(
                        domain,
                        |x| s * (a * (k1 * x).sin() + b * (k2 * x).sin()),
                        |x| s * (a * k1 * (k1 * x).cos() + b * k2 * (k2 * x).cos()),
                    )
                }
                InitialState::Bump => {
                    let odd = o % 2 == 1;
                    // bump q = x²(L-x)², optionally times the odd factor p = 2x/L - 1
                    let f = move |x: f64| {
                        let q = x * x * (l - x) * (l - x);
                        if odd {
                            q * (2.0 * x / l - 1.0)
                        } else {
                            q
                        }
                    };
                    let df = move |x: f64| {
                        let q = x * x * (l - x) * (l - x);
                        let dq = 2.0 * x * (l - x) * (l - 2.0 * x);
                        if odd {
                            dq * (2.0 * x / l - 1.0) + q * 2.0 / l
                        } else {
                            dq
                        }
                    };
                    H1Field::from_real_fn(domain, f, df)
                }
            };
            let norm = domain
                .integrate(&field.values.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>())
                .sqrt();
            field.scale(Complex64::new(1.0 / norm, 0.0))
        })
        .collect()
}

/// `Q_n Ψ₀` as a `k x N` coefficient matrix.
pub fn initial_coefficients(basis: &GalerkinBasis, fields: &[H1Field]) -> Result<CMatrix> {
    let mut c = CMatrix::zeros(basis.dim(), fields.len());
    for (o, f) in fields.iter().enumerate() {
        c.set_column(o, &basis.project(f)?);
    }
    Ok(c)
}

/// `K_n ψ*`: propagate the linear Faedo-Galerkin problem whose Hartree term
/// uses `ρ = |ψ*|²`, starting from `psi0`.
pub fn apply_kn(system: &GalerkinSystem, psi_star: &Trajectory, psi0: &CMatrix) -> Result<Trajectory> {
    check_trajectory(system, psi_star)?;
    let rho = density_from_trajectory(psi_star);
    system.propagate_trajectory(&rho, psi0)
}

/// Evolution under the external potential alone.
pub fn free_evolution(system: &GalerkinSystem, psi0: &CMatrix) -> Result<Trajectory> {
    let rho = DensityTrajectory::zeros(&system.model().domain, system.model().grid);
    system.propagate_trajectory(&rho, psi0)
}

fn check_trajectory(system: &GalerkinSystem, psi: &Trajectory) -> Result<()> {
    if !psi.basis().compatible(system.basis()) {
        return Err(Error::GridMismatch(format!(
            "trajectory on a basis of dimension {}, system has {}",
            psi.basis().dim(),
            system.dim()
        )));
    }
    if psi.grid() != system.grid() {
        return Err(Error::GridMismatch("trajectory on a different time grid".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    /// `r_k = ||K_n ψ^k - ψ^k||` for each evaluated iterate.
    pub residuals: Vec<f64>,
}

impl IterationLog {
    pub fn iterations(&self) -> usize {
        self.residuals.len()
    }

    /// `r_k / r_{k-1}`; empty when fewer than two residuals are nonzero.
    pub fn ratios(&self) -> Vec<f64> {
        self.residuals
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratios().into_iter().fold(0.0, f64::max)
    }

    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::INFINITY)
    }
}

const NON_CONTRACTION_RUN: usize = 3;

/// Damped Picard iteration `ψ ← (1-θ)ψ + θ K_n ψ`, started from `K_n` applied
/// to the external-only evolution. Returns the first iterate whose residual
/// `||K_n ψ - ψ||` is within tolerance, together with the residual log.
pub fn solve_fixed_point(
    system: &GalerkinSystem,
    psi0: &CMatrix,
    cfg: &FixedPointConfig,
) -> Result<(Trajectory, IterationLog)> {
    let free = free_evolution(system, psi0)?;
    let mut psi = apply_kn(system, &free, psi0)?;
    let mut log = IterationLog::default();
    let mut growing = 0;
    loop {
        let image = apply_kn(system, &psi, psi0)?;
        let residual = traj_norm(&image, Some(&psi))?;
        if let Some(&prev) = log.residuals.last() {
            growing = if residual >= prev { growing + 1 } else { 0 };
        }
        log.residuals.push(residual);
        if residual <= cfg.tolerance {
            return Ok((psi, log));
        }
        if growing >= NON_CONTRACTION_RUN {
            return Err(Error::NonContraction {
                consecutive: growing,
                residual,
            });
        }
        if log.iterations() >= cfg.max_iter {
            return Err(Error::MaxIterations {
                iterations: log.iterations(),
                tolerance: cfg.tolerance,
                residual,
            });
        }
        psi = if cfg.damping == 1.0 {
            image
        } else {
            psi.scaled(Complex64::new(1.0 - cfg.damping, 0.0))
                .add_scaled(cfg.damping, &image)?
                .map_samples(|j, s| if j == 0 { psi0.clone() } else { s.clone() })
        };
    }
}

/// The fixed point on a fine basis, standing in for the continuum solution.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub system: GalerkinSystem,
    pub trajectory: Trajectory,
    /// `Q_{n_ref} Ψ₀`.
    pub psi0: CMatrix,
    pub n_ref: usize,
    pub substeps: usize,
    /// `||K_{n_ref} Ψ_ref - Ψ_ref||` at return.
    pub residual: f64,
    pub log: IterationLog,
}

impl ReferenceSolution {
    pub fn basis(&self) -> &Arc<GalerkinBasis> {
        self.system.basis()
    }
}

/// Solves the fixed point on a basis of dimension `n_ref`.
pub fn reference_solution(
    model: Arc<Model>,
    n_ref: usize,
    initial: &[H1Field],
    cfg: &FixedPointConfig,
) -> Result<ReferenceSolution> {
    let basis = build_basis(&model.domain, n_ref)?;
    let substeps = model.propagator.substeps;
    let system = GalerkinSystem::new(model, basis.clone())?;
    let psi0 = initial_coefficients(&basis, initial)?;
    let (trajectory, log) = solve_fixed_point(&system, &psi0, cfg)?;
    Ok(ReferenceSolution {
        residual: log.final_residual(),
        system,
        trajectory,
        psi0,
        n_ref,
        substeps,
        log,
    })
}

/// `K` acting on a trajectory from any basis: inject it into the reference
/// basis and apply `K_{n_ref}`.
pub fn apply_k_ref(reference: &ReferenceSolution, psi: &Trajectory) -> Result<Trajectory> {
    let injected = project_pn(reference.basis(), psi)?;
    apply_kn(&reference.system, &injected, &reference.psi0)
}
