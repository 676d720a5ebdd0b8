//! The derivative `K'_n[ψ]` of the fixed-point map, its real-linear matrix
//! realization, the invertibility margin of `I - K'_n`, and the dispersion
//! estimator for the image of the unit ball under `K'`.
//!
//! For `iħ∂ₜψ = Hψ` the derivative in direction `ω` is the Duhamel integral
//! `K'[ψ](ω)(t) = -(i/ħ) ∫₀ᵗ U(t,s) [W * δρ(s)] U(s,0) Ψ₀ ds` with
//! `δρ = 2 Re(ψ̄ ω)`. [`Linearization::apply`] evaluates it with the midpoint
//! rule on the propagator's own substeps, which makes it the exact derivative
//! of the discrete map; [`Linearization::apply_trapezoid`] uses the trapezoid
//! rule on sample times. The two agree to second order in the sample spacing.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::evolution::{Flow, GalerkinSystem};
use crate::fixed_point::ReferenceSolution;
use crate::function_space::{traj_norm, GalerkinBasis, Trajectory};
use crate::linalg::{gram_norm_sq, power_norm, real_times_complex, singular_values, CMatrix};
use crate::potentials::density_from_trajectory;

pub const DEFAULT_DIM_CAP: usize = 8192;
pub const POWER_ITERATIONS: usize = 20;
pub const POWER_TOLERANCE: f64 = 1e-8;

/// `K_n` linearized at `ψ`: the flow maps for `ρ = |ψ|²` and the substep
/// states of `K_n ψ`, cached for repeated directional derivatives.
#[derive(Debug, Clone)]
pub struct Linearization {
    system: GalerkinSystem,
    psi: Trajectory,
    psi_nodes: Vec<CMatrix>,
    flow: Flow,
    states: Vec<CMatrix>,
}

impl Linearization {
    pub fn new(system: &GalerkinSystem, psi: &Trajectory, psi0: &CMatrix) -> Result<Self> {
        if !psi.basis().compatible(system.basis()) || psi.grid() != system.grid() {
            return Err(Error::GridMismatch("linearization point not on the system's basis and grid".into()));
        }
        let rho = density_from_trajectory(psi);
        let flow = system.flow(&rho)?;
        let states = flow.substep_states(psi0);
        let basis = system.basis();
        let psi_nodes = psi.samples().iter().map(|s| basis.synthesize_values(s)).collect();
        Ok(Self {
            system: system.clone(),
            psi: psi.clone(),
            psi_nodes,
            flow,
            states,
        })
    }

    pub fn system(&self) -> &GalerkinSystem {
        &self.system
    }

    pub fn point(&self) -> &Trajectory {
        &self.psi
    }

    /// `K_n ψ` at the sample times.
    pub fn image(&self) -> Result<Trajectory> {
        let s = self.flow.substeps();
        let samples = (0..self.system.grid().samples()).map(|j| self.states[j * s].clone()).collect();
        Trajectory::new(self.system.basis().clone(), *self.system.grid(), samples)
    }

    fn orbitals(&self) -> usize {
        self.psi.orbitals()
    }

    fn check_direction(&self, omega: &Trajectory) -> Result<()> {
        self.psi.same_space(omega)
    }

    /// `B(W * 2Re(ψ̄_j ω_j))`, or `None` when it vanishes identically.
    fn delta_hartree_nodes(&self, j: usize, omega_nodes: &CMatrix) -> Result<Option<DMatrix<f64>>> {
        let hartree = &self.system.model().hartree;
        if hartree.is_zero() {
            return Ok(None);
        }
        let psi = &self.psi_nodes[j];
        let drho: Vec<f64> = (0..psi.nrows())
            .map(|q| {
                2.0 * (0..psi.ncols())
                    .map(|o| (psi[(q, o)].conj() * omega_nodes[(q, o)]).re)
                    .sum::<f64>()
            })
            .collect();
        if drho.iter().all(|&v| v == 0.0) {
            return Ok(None);
        }
        let dv = hartree.convolve(&drho)?;
        Ok(Some(self.system.basis().potential_matrix(&dv)?))
    }

    fn delta_hartree(&self, j: usize, omega_j: &CMatrix) -> Result<Option<DMatrix<f64>>> {
        if omega_j.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            return Ok(None);
        }
        self.delta_hartree_nodes(j, &self.system.basis().synthesize_values(omega_j))
    }

    /// Core recursion, given the Hartree perturbation matrix at each sample.
    fn propagate_perturbation(&self, dh: &[Option<DMatrix<f64>>]) -> Vec<CMatrix> {
        let k = self.system.dim();
        let n = self.orbitals();
        let intervals = self.system.grid().intervals();
        let substeps = self.flow.substeps();
        let tau = Complex64::new(0.0, -self.system.half_step());
        let zero = CMatrix::zeros(k, n);
        let mut out = Vec::with_capacity(intervals + 1);
        out.push(zero.clone());
        let mut dc: Option<CMatrix> = None;
        for j in 0..intervals {
            if dh[j].is_none() && dh[j + 1].is_none() {
                dc = dc.map(|d| self.flow.interval(j) * d);
                out.push(dc.clone().unwrap_or_else(|| zero.clone()));
                continue;
            }
            for r in 0..substeps {
                let m = j * substeps + r;
                let (_, theta) = self.system.substep_midpoint(j, r);
                let step = &self.flow.steps()[m];
                let mut dg = DMatrix::<f64>::zeros(k, k);
                if let Some(a) = &dh[j] {
                    dg += a * (1.0 - theta);
                }
                if let Some(b) = &dh[j + 1] {
                    dg += b * theta;
                }
                let source = real_times_complex(&dg, &(&self.states[m] + &self.states[m + 1]));
                let kick = &step.left * source * tau;
                dc = Some(match dc {
                    Some(d) => &step.forward * d + kick,
                    None => kick,
                });
            }
            out.push(dc.clone().expect("set inside the loop"));
        }
        out
    }

    /// `K'_n[ψ](ω)`, exact for the discrete map.
    pub fn apply(&self, omega: &Trajectory) -> Result<Trajectory> {
        self.check_direction(omega)?;
        let dh = omega
            .samples()
            .iter()
            .enumerate()
            .map(|(j, w)| self.delta_hartree(j, w))
            .collect::<Result<Vec<_>>>()?;
        let samples = self.propagate_perturbation(&dh);
        Trajectory::new(self.system.basis().clone(), *self.system.grid(), samples)
    }

    /// `K'_n[ψ](ω)` with the time integral replaced by the trapezoid rule on
    /// the sample times and the bracket applied through the L² projection.
    pub fn apply_trapezoid(&self, omega: &Trajectory) -> Result<Trajectory> {
        self.check_direction(omega)?;
        let k = self.system.dim();
        let n = self.orbitals();
        let image = self.image()?;
        let minv = self.system.mass_inverse();
        let brackets = omega
            .samples()
            .iter()
            .enumerate()
            .map(|(j, w)| {
                Ok(match self.delta_hartree(j, w)? {
                    Some(b) => real_times_complex(&(minv * b), image.sample(j)),
                    None => CMatrix::zeros(k, n),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let dt = self.system.grid().step();
        let factor = Complex64::new(0.0, -dt / self.system.model().physics.hbar);
        let half = Complex64::new(0.5, 0.0);
        let mut samples = vec![CMatrix::zeros(k, n)];
        let mut running = brackets[0].clone();
        let mut first = brackets[0].clone();
        for j in 1..brackets.len() {
            running = self.flow.interval(j - 1) * running + &brackets[j];
            first = self.flow.interval(j - 1) * first;
            samples.push((&running - (&first + &brackets[j]) * half) * factor);
        }
        Trajectory::new(self.system.basis().clone(), *self.system.grid(), samples)
    }

    /// Column `p` of the real-ified operator: the image of the `p`-th unit
    /// coordinate (sample, orbital, basis index, re/im).
    fn unit_column(&self, p: usize) -> Result<Vec<f64>> {
        let k = self.system.dim();
        let n = self.orbitals();
        let part = p % 2;
        let i = (p / 2) % k;
        let o = (p / (2 * k)) % n;
        let j = p / (2 * k * n);
        let basis = self.system.basis();
        let mut omega_nodes = CMatrix::zeros(basis.domain().points(), n);
        let unit = if part == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 1.0)
        };
        for q in 0..omega_nodes.nrows() {
            omega_nodes[(q, o)] = unit * basis.values()[(q, i)];
        }
        let mut dh = vec![None; self.system.grid().samples()];
        dh[j] = self.delta_hartree_nodes(j, &omega_nodes)?;
        let samples = self.propagate_perturbation(&dh);
        let mut col = Vec::with_capacity(2 * k * n * samples.len());
        for s in &samples {
            for orb in 0..n {
                for b in 0..k {
                    col.push(s[(b, orb)].re);
                    col.push(s[(b, orb)].im);
                }
            }
        }
        Ok(col)
    }
}

/// `K'_n[ψ](ω)` for a single direction.
pub fn apply_kn_prime(system: &GalerkinSystem, psi: &Trajectory, omega: &Trajectory, psi0: &CMatrix) -> Result<Trajectory> {
    Linearization::new(system, psi, psi0)?.apply(omega)
}

/// `K'_n[ψ]` as a dense real matrix on interleaved real coordinates.
#[derive(Debug, Clone)]
pub struct RealLinearOperator {
    pub matrix: DMatrix<f64>,
    pub basis: Arc<GalerkinBasis>,
    pub orbitals: usize,
    pub samples: usize,
}

impl RealLinearOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, omega: &Trajectory) -> Result<Trajectory> {
        let x = nalgebra::DVector::from_vec(omega.to_real());
        if x.len() != self.dim() {
            return Err(Error::GridMismatch(format!(
                "probe has {} real coordinates, operator has {}",
                x.len(),
                self.dim()
            )));
        }
        let y = &self.matrix * x;
        Trajectory::from_real(self.basis.clone(), *omega.grid(), self.orbitals, y.as_slice())
    }
}

/// Assembles `K'_n[ψ]` column by column from unit probes.
pub fn build_operator(lin: &Linearization, dim_cap: usize) -> Result<RealLinearOperator> {
    let dim = lin.point().real_dim();
    if dim > dim_cap {
        return Err(Error::DimensionCap { dim, cap: dim_cap });
    }
    let columns = (0..dim)
        .into_par_iter()
        .map(|p| lin.unit_column(p))
        .collect::<Result<Vec<_>>>()?;
    let matrix = DMatrix::from_fn(dim, dim, |r, c| columns[c][r]);
    Ok(RealLinearOperator {
        matrix,
        basis: lin.system().basis().clone(),
        orbitals: lin.point().orbitals(),
        samples: lin.system().grid().samples(),
    })
}

/// Spectral-norm estimate by power iteration.
pub fn operator_norm(op: &RealLinearOperator) -> f64 {
    power_norm(&op.matrix, POWER_ITERATIONS, POWER_TOLERANCE)
}

/// Smallest singular value of `I - K'`.
pub fn invertibility_margin(op: &RealLinearOperator) -> Result<f64> {
    let n = op.dim();
    let a = DMatrix::<f64>::identity(n, n) - &op.matrix;
    let s = singular_values(&a)?;
    s.into_iter()
        .reduce(f64::min)
        .ok_or_else(|| Error::SingularValues("empty operator".into()))
}

/// Standard Gaussian coefficients, rescaled so every sample has unit `H¹₀`
/// norm: a random point on the unit sphere of `C(J; H¹₀)`.
pub fn random_unit_trajectory(basis: &Arc<GalerkinBasis>, like: &Trajectory, rng: &mut ChaCha8Rng) -> Result<Trajectory> {
    let k = basis.dim();
    let n = like.orbitals();
    let samples = (0..like.grid().samples())
        .map(|_| {
            let s = CMatrix::from_fn(k, n, |_, _| {
                Complex64::new(StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng))
            });
            let norm = gram_norm_sq(basis.h10_gram(), &s).sqrt();
            s / Complex64::new(norm, 0.0)
        })
        .collect();
    Trajectory::new(basis.clone(), *like.grid(), samples)
}

/// Sampled dispersion of `K'(Ψ_ref)` applied to the unit ball: for each basis
/// in `bases`, the largest `||φ - P_n φ||` over `samples` seeded random
/// directions. A lower bound on the true supremum.
pub fn dispersion_estimate(
    bases: &[Arc<GalerkinBasis>],
    reference: &ReferenceSolution,
    samples: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    let lin = Linearization::new(&reference.system, &reference.trajectory, &reference.psi0)?;
    let ref_basis = reference.basis();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let directions = (0..samples)
        .map(|_| random_unit_trajectory(ref_basis, &reference.trajectory, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let images = directions
        .par_iter()
        .map(|w| lin.apply(w))
        .collect::<Result<Vec<_>>>()?;
    bases
        .iter()
        .map(|b| {
            // P_n seen inside the reference space
            let round_trip = ref_basis.transfer_from(b)? * b.transfer_from(ref_basis)?;
            let mut worst: f64 = 0.0;
            for phi in &images {
                let tail = phi.map_samples(|_, s| s - real_times_complex(&round_trip, s));
                worst = worst.max(traj_norm(&tail, None)?);
            }
            Ok((b.dim(), worst))
        })
        .collect()
}
