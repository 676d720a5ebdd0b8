//! Galerkin Hamiltonian assembly and the discrete Faedo-Galerkin evolution
//! operator.
//!
//! On the `H¹₀`-orthonormal basis the linear Faedo-Galerkin equation reads
//! `iħ M dc/dt = G(t) c`, with `M` the L² Gram matrix and
//! `G = (ħ²/2m) A + B(V_e)`. It is stepped with Crank-Nicolson, the
//! Hamiltonian frozen at each substep midpoint and the density interpolated
//! linearly between sample times. Each step is unitary in the `M` inner
//! product.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_space::{GalerkinBasis, SpatialDomain, TimeGrid, Trajectory};
use crate::linalg::{gram_norm_sq, real_times_complex, to_complex, CMatrix};
use crate::potentials::{effective_potential, DensityTrajectory, ExternalPotential, HartreeOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Physics {
    pub hbar: f64,
    pub mass: f64,
}

impl Physics {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        if !(hbar > 0.0 && mass > 0.0 && hbar.is_finite() && mass.is_finite()) {
            return Err(Error::InvalidArgument(format!("hbar and mass must be positive, got {hbar}, {mass}")));
        }
        Ok(Self { hbar, mass })
    }

    /// `ħ² / 2m`.
    pub fn kinetic_factor(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.mass)
    }
}

impl Default for Physics {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DensityInterpolation {
    /// Piecewise linear in time between samples.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropagatorConfig {
    pub substeps: usize,
    pub interpolation: DensityInterpolation,
}

impl PropagatorConfig {
    pub fn new(substeps: usize) -> Result<Self> {
        if substeps == 0 {
            return Err(Error::InvalidArgument("substep count must be at least 1".into()));
        }
        Ok(Self {
            substeps,
            interpolation: DensityInterpolation::Linear,
        })
    }
}

/// The basis-independent part of a problem: domain, potentials, constants,
/// time sampling and propagator settings.
#[derive(Debug, Clone)]
pub struct Model {
    pub domain: Arc<SpatialDomain>,
    pub external: ExternalPotential,
    pub hartree: Arc<HartreeOperator>,
    pub physics: Physics,
    pub grid: TimeGrid,
    pub propagator: PropagatorConfig,
}

impl Model {
    /// Same model with a different time sampling.
    pub fn with_time(&self, grid: TimeGrid, propagator: PropagatorConfig) -> Model {
        Model {
            grid,
            propagator,
            ..self.clone()
        }
    }
}

/// `G(t)` in the orthonormal basis; real symmetric since `V_e` is real.
#[derive(Debug, Clone)]
pub struct GalerkinHamiltonian {
    pub matrix: DMatrix<f64>,
    pub physics: Physics,
}

impl GalerkinHamiltonian {
    pub fn is_hermitian(&self, tol: f64) -> bool {
        (&self.matrix - self.matrix.transpose()).amax() <= tol
    }
}

/// `G_ij = ∫ (ħ²/2m) f_i' f_j' + V_e(·, t, ρ) f_i f_j` by quadrature.
pub fn assemble(
    basis: &GalerkinBasis,
    external: &ExternalPotential,
    hartree: &HartreeOperator,
    rho_t: &[f64],
    t: f64,
    physics: Physics,
) -> Result<GalerkinHamiltonian> {
    let ve = effective_potential(external, hartree, rho_t, t)?;
    let matrix = basis.stiffness() * physics.kinetic_factor() + basis.potential_matrix(&ve)?;
    Ok(GalerkinHamiltonian { matrix, physics })
}

/// A model paired with one Galerkin basis, with the density-independent
/// matrices cached.
#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    model: Arc<Model>,
    basis: Arc<GalerkinBasis>,
    kinetic: DMatrix<f64>,
    external_shape: DMatrix<f64>,
    mass_inverse: DMatrix<f64>,
}

impl GalerkinSystem {
    pub fn new(model: Arc<Model>, basis: Arc<GalerkinBasis>) -> Result<Self> {
        if **basis.domain() != *model.domain {
            return Err(Error::GridMismatch("basis and model use different domains".into()));
        }
        let kinetic = basis.stiffness() * model.physics.kinetic_factor();
        let external_shape = basis.potential_matrix(&model.external.shape_samples(&model.domain))?;
        let mass_inverse = basis
            .mass()
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("L² Gram matrix is not positive definite".into()))?
            .inverse();
        Ok(Self {
            model,
            basis,
            kinetic,
            external_shape,
            mass_inverse,
        })
    }

    pub fn model(&self) -> &Arc<Model> {
        &self.model
    }

    pub fn basis(&self) -> &Arc<GalerkinBasis> {
        &self.basis
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.model.grid
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn mass_inverse(&self) -> &DMatrix<f64> {
        &self.mass_inverse
    }

    fn total_substeps(&self) -> usize {
        self.model.grid.intervals() * self.model.propagator.substeps
    }

    /// `dt / 2ħ` for one substep.
    pub fn half_step(&self) -> f64 {
        self.model.grid.step() / self.model.propagator.substeps as f64 / (2.0 * self.model.physics.hbar)
    }

    fn check_density(&self, rho: &DensityTrajectory) -> Result<()> {
        if *rho.grid() != self.model.grid {
            return Err(Error::GridMismatch("density sampled on a different time grid".into()));
        }
        if rho.points() != self.model.domain.points() {
            return Err(Error::GridMismatch("density sampled on a different spatial grid".into()));
        }
        Ok(())
    }

    /// `B(W * ρ_j)` for one sample.
    pub fn hartree_matrix(&self, rho_j: &[f64]) -> Result<DMatrix<f64>> {
        let h = self.model.hartree.convolve(rho_j)?;
        self.basis.potential_matrix(&h)
    }

    fn hartree_matrices(&self, rho: &DensityTrajectory, from: usize, to: usize) -> Result<Vec<Option<DMatrix<f64>>>> {
        let mut out = vec![None; self.model.grid.samples()];
        if self.model.hartree.is_zero() {
            let k = self.dim();
            for slot in out.iter_mut().take(to + 1).skip(from) {
                *slot = Some(DMatrix::zeros(k, k));
            }
            return Ok(out);
        }
        for (j, slot) in out.iter_mut().enumerate().take(to + 1).skip(from) {
            *slot = Some(self.hartree_matrix(rho.sample(j))?);
        }
        Ok(out)
    }

    /// Midpoint time and density weight of substep `r` in interval `j`.
    pub fn substep_midpoint(&self, j: usize, r: usize) -> (f64, f64) {
        let s = self.model.propagator.substeps as f64;
        let theta = (r as f64 + 0.5) / s;
        (self.model.grid.time(j) + theta * self.model.grid.step(), theta)
    }

    /// `G` at the midpoint of substep `r` of interval `j`, using the linearity
    /// of `B` in the potential.
    fn midpoint_hamiltonian(&self, hm: &[Option<DMatrix<f64>>], j: usize, r: usize) -> DMatrix<f64> {
        let (t, theta) = self.substep_midpoint(j, r);
        let left = hm[j].as_ref().expect("hartree matrix computed");
        let right = hm[j + 1].as_ref().expect("hartree matrix computed");
        &self.kinetic + &self.external_shape * self.model.external.envelope(t) + left * (1.0 - theta) + right * theta
    }

    fn step_operators(&self, g: &DMatrix<f64>) -> (CMatrix, CMatrix) {
        let tau = Complex64::new(0.0, self.half_step());
        let m = to_complex(self.basis.mass());
        let gc = to_complex(g);
        (&m + &gc * tau, &m - &gc * tau)
    }

    /// Crank-Nicolson from sample `from` to sample `to`; returns the states at
    /// samples `from..=to`, the first being `psi0` itself.
    pub fn propagate(&self, rho: &DensityTrajectory, psi0: &CMatrix, from: usize, to: usize) -> Result<Vec<CMatrix>> {
        self.check_density(rho)?;
        if from > to || to > self.model.grid.intervals() {
            return Err(Error::InvalidArgument(format!(
                "invalid sample range {from}..={to} on a grid with {} intervals",
                self.model.grid.intervals()
            )));
        }
        if psi0.nrows() != self.dim() {
            return Err(Error::GridMismatch(format!(
                "initial state has {} coefficients, basis has {}",
                psi0.nrows(),
                self.dim()
            )));
        }
        let hm = self.hartree_matrices(rho, from, to)?;
        let substeps = self.model.propagator.substeps;
        let mut out = Vec::with_capacity(to - from + 1);
        out.push(psi0.clone());
        let mut c = psi0.clone();
        for j in from..to {
            for r in 0..substeps {
                let g = self.midpoint_hamiltonian(&hm, j, r);
                let (lhs, rhs) = self.step_operators(&g);
                let b = rhs * &c;
                c = lhs
                    .lu()
                    .solve(&b)
                    .ok_or(Error::SingularStep { substep: j * substeps + r })?;
            }
            out.push(c.clone());
        }
        Ok(out)
    }

    /// Full trajectory over `[0, T₀]` starting at `psi0`.
    pub fn propagate_trajectory(&self, rho: &DensityTrajectory, psi0: &CMatrix) -> Result<Trajectory> {
        let samples = self.propagate(rho, psi0, 0, self.model.grid.intervals())?;
        Trajectory::new(self.basis.clone(), self.model.grid, samples)
    }

    /// Caches every substep map for a fixed density.
    pub fn flow(&self, rho: &DensityTrajectory) -> Result<Flow> {
        self.check_density(rho)?;
        let intervals = self.model.grid.intervals();
        let substeps = self.model.propagator.substeps;
        let hm = self.hartree_matrices(rho, 0, intervals)?;
        let k = self.dim();
        let identity = CMatrix::identity(k, k);
        let mut steps = Vec::with_capacity(self.total_substeps());
        let mut interval_maps = Vec::with_capacity(intervals);
        for j in 0..intervals {
            let mut phi = identity.clone();
            for r in 0..substeps {
                let g = self.midpoint_hamiltonian(&hm, j, r);
                let (lhs, rhs) = self.step_operators(&g);
                let lu = lhs.lu();
                let substep = j * substeps + r;
                let left = lu.solve(&identity).ok_or(Error::SingularStep { substep })?;
                let forward = &left * rhs;
                phi = &forward * phi;
                steps.push(StepMaps { forward, left });
            }
            interval_maps.push(phi);
        }
        Ok(Flow {
            steps,
            intervals: interval_maps,
            substeps,
        })
    }

    /// Crank-Nicolson residual of a candidate solution at every substep:
    /// `max_m |M(c^{m+1} - c^m) + iτ G_m (c^{m+1} + c^m)|` over the substep
    /// states `states` (length `S * substeps + 1`).
    pub fn step_residual(&self, rho: &DensityTrajectory, states: &[CMatrix]) -> Result<f64> {
        self.check_density(rho)?;
        if states.len() != self.total_substeps() + 1 {
            return Err(Error::GridMismatch(format!(
                "{} substep states, expected {}",
                states.len(),
                self.total_substeps() + 1
            )));
        }
        let hm = self.hartree_matrices(rho, 0, self.model.grid.intervals())?;
        let substeps = self.model.propagator.substeps;
        let mut worst: f64 = 0.0;
        for m in 0..self.total_substeps() {
            let (j, r) = (m / substeps, m % substeps);
            let g = self.midpoint_hamiltonian(&hm, j, r);
            let (lhs, rhs) = self.step_operators(&g);
            let res = lhs * &states[m + 1] - rhs * &states[m];
            worst = worst.max(res.camax());
        }
        Ok(worst)
    }

    /// L² norm (orbitals combined) of a coefficient state.
    pub fn l2_norm_sq(&self, state: &CMatrix) -> f64 {
        gram_norm_sq(self.basis.mass(), state)
    }

    pub fn h10_norm(&self, state: &CMatrix) -> f64 {
        gram_norm_sq(self.basis.h10_gram(), state).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct StepMaps {
    /// `R_m = (M + iτG_m)⁻¹ (M - iτG_m)`.
    pub forward: CMatrix,
    /// `(M + iτG_m)⁻¹`.
    pub left: CMatrix,
}

/// The discrete evolution operator `U_G^ρ` for one density: all substep maps
/// and the per-interval products.
#[derive(Debug, Clone)]
pub struct Flow {
    steps: Vec<StepMaps>,
    intervals: Vec<CMatrix>,
    substeps: usize,
}

impl Flow {
    pub fn steps(&self) -> &[StepMaps] {
        &self.steps
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    /// `U(t_{j+1}, t_j)`.
    pub fn interval(&self, j: usize) -> &CMatrix {
        &self.intervals[j]
    }

    /// `U(t_b, t_a)` applied to `state`.
    pub fn evolve(&self, a: usize, b: usize, state: &CMatrix) -> CMatrix {
        let mut c = state.clone();
        for j in a..b {
            c = &self.intervals[j] * c;
        }
        c
    }

    /// Every substep state starting from `psi0` at `t = 0`.
    pub fn substep_states(&self, psi0: &CMatrix) -> Vec<CMatrix> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push(psi0.clone());
        let mut c = psi0.clone();
        for s in &self.steps {
            c = &s.forward * c;
            out.push(c.clone());
        }
        out
    }
}

/// `H¹₀` norm at sample `t_index` of
/// `U^{ρ₁}ψ₀ - U^{ρ₂}ψ₀ + (i/ħ) ∫₀ᵗ U^{ρ₁}(t,s) [V_e(s,ρ₁) - V_e(s,ρ₂)] U^{ρ₂}(s,0) ψ₀ ds`,
/// the defect of the Duhamel identity relating two evolution operators. The
/// time integral is the trapezoid rule over sample times and the bracket acts
/// through the L² projection onto the basis (`M⁻¹ B(ΔV)`).
pub fn evolution_identity_residual(
    system: &GalerkinSystem,
    rho1: &DensityTrajectory,
    rho2: &DensityTrajectory,
    psi0: &CMatrix,
    t_index: usize,
) -> Result<f64> {
    Ok(evolution_identity_residuals(system, rho1, rho2, psi0)?[t_index])
}

/// [`evolution_identity_residual`] at every sample time.
pub fn evolution_identity_residuals(
    system: &GalerkinSystem,
    rho1: &DensityTrajectory,
    rho2: &DensityTrajectory,
    psi0: &CMatrix,
) -> Result<Vec<f64>> {
    let s = system.grid().intervals();
    let u1 = system.propagate(rho1, psi0, 0, s)?;
    let u2 = system.propagate(rho2, psi0, 0, s)?;
    let flow1 = system.flow(rho1)?;
    let hartree = &system.model().hartree;
    let minv = system.mass_inverse();

    let brackets = (0..=s)
        .map(|j| {
            let h1 = hartree.convolve(rho1.sample(j))?;
            let h2 = hartree.convolve(rho2.sample(j))?;
            let dv: Vec<f64> = h1.iter().zip(&h2).map(|(a, b)| a - b).collect();
            let b = minv * system.basis().potential_matrix(&dv)?;
            Ok(real_times_complex(&b, &u2[j]))
        })
        .collect::<Result<Vec<_>>>()?;

    let dt = system.grid().step();
    let factor = Complex64::new(0.0, -dt / system.model().physics.hbar);
    let k = system.dim();
    let n = psi0.ncols();
    let mut running = CMatrix::zeros(k, n);
    let mut first = CMatrix::zeros(k, n);
    let mut out = Vec::with_capacity(s + 1);
    for j in 0..=s {
        if j == 0 {
            running = brackets[0].clone();
            first = brackets[0].clone();
        } else {
            running = flow1.interval(j - 1) * running + &brackets[j];
            first = flow1.interval(j - 1) * first;
        }
        // trapezoid: Σ_j dt U(t_J, s_j) g_j with half weights at both ends
        let rhs = if j == 0 {
            CMatrix::zeros(k, n)
        } else {
            (&running - (&first + &brackets[j]) * Complex64::new(0.5, 0.0)) * factor
        };
        let lhs = &u1[j] - &u2[j];
        out.push(system.h10_norm(&(lhs - rhs)));
    }
    Ok(out)
}
