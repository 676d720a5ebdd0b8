//! External potential presets, the soft-core Hartree kernel and its
//! convolution with the density, and the effective potential
//! `V_e = V + W * ρ`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_space::{traj_norm, SpatialDomain, TimeGrid, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExternalPreset {
    Zero,
    StaticWell,
    DrivenWell,
}

impl FromStr for ExternalPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Self::Zero),
            "static-well" => Ok(Self::StaticWell),
            "driven-well" => Ok(Self::DrivenWell),
            other => Err(Error::Config(format!(
                "unknown external potential preset '{other}' (expected zero, static-well or driven-well)"
            ))),
        }
    }
}

impl fmt::Display for ExternalPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Zero => "zero",
            Self::StaticWell => "static-well",
            Self::DrivenWell => "driven-well",
        })
    }
}

/// `V(x, t) = V₀ g(t) sin²(s π x / L)` with `g = 1` for the static well and
/// `g(t) = 1 + α sin(ω_d t)` for the driven one. Every preset is smooth on
/// the closed space-time domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExternalPotential {
    pub preset: ExternalPreset,
    pub amplitude: f64,
    pub drive_amplitude: f64,
    pub drive_frequency: f64,
    /// Number of wells `s` across the interval.
    pub wells: f64,
    pub length: f64,
}

impl ExternalPotential {
    pub fn zero(length: f64) -> Self {
        Self {
            preset: ExternalPreset::Zero,
            amplitude: 0.0,
            drive_amplitude: 0.0,
            drive_frequency: 0.0,
            wells: 1.0,
            length,
        }
    }

    pub fn static_well(length: f64, amplitude: f64) -> Self {
        Self {
            preset: ExternalPreset::StaticWell,
            amplitude,
            ..Self::zero(length)
        }
    }

    pub fn driven_well(length: f64, amplitude: f64, drive_amplitude: f64, drive_frequency: f64) -> Self {
        Self {
            preset: ExternalPreset::DrivenWell,
            amplitude,
            drive_amplitude,
            drive_frequency,
            ..Self::zero(length)
        }
    }

    pub fn shape(&self, x: f64) -> f64 {
        let s = (self.wells * PI * x / self.length).sin();
        s * s
    }

    /// Time envelope multiplying [`ExternalPotential::shape`].
    pub fn envelope(&self, t: f64) -> f64 {
        match self.preset {
            ExternalPreset::Zero => 0.0,
            ExternalPreset::StaticWell => self.amplitude,
            ExternalPreset::DrivenWell => self.amplitude * (1.0 + self.drive_amplitude * (self.drive_frequency * t).sin()),
        }
    }

    pub fn value(&self, x: f64, t: f64) -> f64 {
        self.envelope(t) * self.shape(x)
    }

    pub fn shape_samples(&self, domain: &SpatialDomain) -> Vec<f64> {
        domain.sample(|x| self.shape(x))
    }

    pub fn sample(&self, domain: &SpatialDomain, t: f64) -> Vec<f64> {
        let e = self.envelope(t);
        domain.sample(|x| e * self.shape(x))
    }
}

/// `W(ξ) = λ / sqrt(ξ² + a²) · χ(|ξ| / R)`, where `χ` is a C^∞ cutoff equal
/// to 1 on `[0, 1]` and 0 beyond 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HartreeKernel {
    pub softening: f64,
    pub truncation: f64,
    pub coupling: f64,
}

impl HartreeKernel {
    pub fn new(softening: f64, truncation: f64, coupling: f64) -> Result<Self> {
        if !(softening > 0.0 && softening.is_finite()) {
            return Err(Error::InvalidArgument(format!("kernel softening must be positive, got {softening}")));
        }
        if !(coupling >= 0.0 && coupling.is_finite()) {
            return Err(Error::InvalidArgument(format!("kernel coupling must be nonnegative, got {coupling}")));
        }
        if !(truncation > 0.0 && truncation.is_finite()) {
            return Err(Error::InvalidArgument(format!("kernel truncation must be positive, got {truncation}")));
        }
        Ok(Self {
            softening,
            truncation,
            coupling,
        })
    }

    pub fn with_coupling(&self, coupling: f64) -> Self {
        Self { coupling, ..*self }
    }

    pub fn value(&self, xi: f64) -> f64 {
        let chi = smooth_cutoff(xi.abs() / self.truncation);
        if chi == 0.0 {
            return 0.0;
        }
        self.coupling / (xi * xi + self.softening * self.softening).sqrt() * chi
    }

    /// Precomputes the quadrature convolution matrix for `domain`.
    pub fn operator(&self, domain: Arc<SpatialDomain>) -> Result<HartreeOperator> {
        if self.truncation < domain.length() {
            return Err(Error::InvalidArgument(format!(
                "kernel truncation radius {} is smaller than the domain diameter {}",
                self.truncation,
                domain.length()
            )));
        }
        let x = domain.nodes();
        let w = domain.weights();
        let m = domain.points();
        let matrix = DMatrix::from_fn(m, m, |i, j| w[j] * self.value(x[i] - x[j]));
        Ok(HartreeOperator {
            kernel: *self,
            domain,
            matrix,
        })
    }
}

/// 1 on `[0, 1]`, 0 on `[2, ∞)`, C^∞ in between.
pub fn smooth_cutoff(r: f64) -> f64 {
    fn h(s: f64) -> f64 {
        if s > 0.0 {
            (-1.0 / s).exp()
        } else {
            0.0
        }
    }
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let a = h(2.0 - r);
        a / (a + h(r - 1.0))
    }
}

/// The Hartree convolution on a fixed quadrature grid:
/// `(W * ρ)(x_i) = Σ_j w_j W(x_i - x_j) ρ(x_j)`.
#[derive(Debug, Clone)]
pub struct HartreeOperator {
    kernel: HartreeKernel,
    domain: Arc<SpatialDomain>,
    matrix: DMatrix<f64>,
}

impl HartreeOperator {
    pub fn kernel(&self) -> &HartreeKernel {
        &self.kernel
    }

    pub fn domain(&self) -> &Arc<SpatialDomain> {
        &self.domain
    }

    pub fn is_zero(&self) -> bool {
        self.kernel.coupling == 0.0
    }

    pub fn convolve(&self, rho: &[f64]) -> Result<Vec<f64>> {
        if rho.len() != self.domain.points() {
            return Err(Error::GridMismatch(format!(
                "density has {} values, domain has {} nodes",
                rho.len(),
                self.domain.points()
            )));
        }
        let r = DVector::from_column_slice(rho);
        Ok((&self.matrix * r).as_slice().to_vec())
    }
}

/// Free-function form of [`HartreeOperator::convolve`].
pub fn hartree_convolve(op: &HartreeOperator, rho: &[f64]) -> Result<Vec<f64>> {
    op.convolve(rho)
}

/// Density `ρ(x, t_j)` at the quadrature nodes for every sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTrajectory {
    grid: TimeGrid,
    values: Vec<Vec<f64>>,
}

impl DensityTrajectory {
    pub fn new(grid: TimeGrid, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != grid.samples() {
            return Err(Error::GridMismatch(format!(
                "{} density samples for {} sample times",
                values.len(),
                grid.samples()
            )));
        }
        let m = values[0].len();
        if values.iter().any(|v| v.len() != m) {
            return Err(Error::GridMismatch("density samples of unequal length".into()));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x, t)` on the domain nodes and grid times.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(domain: &SpatialDomain, grid: TimeGrid, f: F) -> Self {
        let values = grid.times().iter().map(|&t| domain.sample(|x| f(x, t))).collect();
        Self { grid, values }
    }

    pub fn zeros(domain: &SpatialDomain, grid: TimeGrid) -> Self {
        Self {
            grid,
            values: vec![vec![0.0; domain.points()]; grid.samples()],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn sample(&self, j: usize) -> &[f64] {
        &self.values[j]
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn points(&self) -> usize {
        self.values[0].len()
    }
}

/// `ρ = Σ_k |ψ_k|²` at every node and sample time.
pub fn density_from_trajectory(psi: &Trajectory) -> DensityTrajectory {
    let basis = psi.basis();
    let values = psi
        .samples()
        .iter()
        .map(|s| {
            let nodal = basis.synthesize_values(s);
            nodal.row_iter().map(|row| row.iter().map(|z| z.norm_sqr()).sum()).collect()
        })
        .collect();
    DensityTrajectory {
        grid: *psi.grid(),
        values,
    }
}

/// `V_e(x_i, t) = V(x_i, t) + (W * ρ)(x_i)`.
pub fn effective_potential(external: &ExternalPotential, hartree: &HartreeOperator, rho: &[f64], t: f64) -> Result<Vec<f64>> {
    let h = hartree.convolve(rho)?;
    let v = external.sample(hartree.domain(), t);
    Ok(v.iter().zip(&h).map(|(a, b)| a + b).collect())
}

/// `sup_t ||(V_e(ρ₁) - V_e(ρ₂)) probe||_{H¹} / (||ψ₁ - ψ₂|| sup_t ||probe||_{H¹₀})`,
/// the empirical constant of the local Lipschitz bound on the effective
/// potential. Product gradients are centered finite differences.
pub fn lipschitz_ratio(hartree: &HartreeOperator, psi1: &Trajectory, psi2: &Trajectory, probe: &Trajectory) -> Result<f64> {
    psi1.same_space(psi2)?;
    if psi1.grid() != probe.grid() {
        return Err(Error::GridMismatch("probe on a different time grid".into()));
    }
    let distance = traj_norm(psi1, Some(psi2))?;
    if distance == 0.0 {
        return Err(Error::DivisionByZero("psi1 and psi2 coincide".into()));
    }
    let probe_norm = traj_norm(probe, None)?;
    if probe_norm == 0.0 {
        return Err(Error::DivisionByZero("probe is zero".into()));
    }
    let domain = hartree.domain().clone();
    let w = domain.weights();
    let rho1 = density_from_trajectory(psi1);
    let rho2 = density_from_trajectory(psi2);
    let mut numerator: f64 = 0.0;
    for j in 0..psi1.grid().samples() {
        let drho: Vec<f64> = rho1.sample(j).iter().zip(rho2.sample(j)).map(|(a, b)| a - b).collect();
        let dv = hartree.convolve(&drho)?;
        let nodal = probe.basis().synthesize_values(probe.sample(j));
        let mut sq = 0.0;
        for orb in 0..nodal.ncols() {
            let prod: Vec<_> = nodal.column(orb).iter().zip(&dv).map(|(p, v)| p * *v).collect();
            let grad = domain.centered_gradient(&prod)?;
            sq += (0..prod.len())
                .map(|q| w[q] * (prod[q].norm_sqr() + grad[q].norm_sqr()))
                .sum::<f64>();
        }
        numerator = numerator.max(sq.sqrt());
    }
    Ok(numerator / (distance * probe_norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_space::build_basis;
    use crate::linalg::CMatrix;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};

    fn domain() -> Arc<SpatialDomain> {
        Arc::new(SpatialDomain::new(1.0, 128).unwrap())
    }

    fn kernel(coupling: f64) -> HartreeKernel {
        HartreeKernel::new(0.1, 1.0, coupling).unwrap()
    }

    // Adaptive Simpson quadrature, an oracle independent of the Gauss rule.
    fn adaptive_simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
            let c = 0.5 * (a + b);
            (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b))
        }
        fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let c = 0.5 * (a + b);
            let left = simpson(f, a, c);
            let right = simpson(f, c, b);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, c, left, tol / 2.0, depth - 1) + rec(f, c, b, right, tol / 2.0, depth - 1)
        }
        rec(&f, a, b, simpson(&f, a, b), tol, 50)
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(smooth_cutoff(0.0), 1.0);
        assert_eq!(smooth_cutoff(1.0), 1.0);
        assert_eq!(smooth_cutoff(2.0), 0.0);
        assert!((smooth_cutoff(1.5) - 0.5).abs() < 1e-12);
        let xs: Vec<f64> = (0..=100).map(|i| 1.0 + i as f64 / 100.0).collect();
        assert!(xs.windows(2).all(|p| smooth_cutoff(p[1]) <= smooth_cutoff(p[0])));
        let k = kernel(1.0);
        assert_eq!(k.value(0.3), k.value(-0.3));
        assert_eq!(k.value(2.5), 0.0);
    }

    #[test]
    fn convolution_of_zero_density() {
        let op = kernel(1.0).operator(domain()).unwrap();
        let out = op.convolve(&vec![0.0; 128]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn convolution_preserves_symmetry() {
        let d = domain();
        let op = kernel(1.0).operator(d.clone()).unwrap();
        let rho = d.sample(|x| (PI * x).sin().powi(2) + 0.3 * (x * (1.0 - x)));
        let out = op.convolve(&rho).unwrap();
        let m = out.len();
        for i in 0..m {
            assert!((out[i] - out[m - 1 - i]).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_density_matches_adaptive_oracle() {
        let d = domain();
        let op = kernel(1.0).operator(d.clone()).unwrap();
        let rho = vec![1.0; d.points()];
        let out = op.convolve(&rho).unwrap();
        // evaluate the quadrature sum at x = 0.5 directly from the kernel
        let ours: f64 = d
            .nodes()
            .iter()
            .zip(d.weights())
            .map(|(&y, &w)| w * kernel(1.0).value(0.5 - y))
            .sum();
        let oracle = adaptive_simpson(|y| 1.0 / ((0.5 - y) * (0.5 - y) + 0.01).sqrt(), 0.0, 1.0, 1e-13);
        assert!(((ours - oracle) / oracle).abs() < 1e-6);
        // closed form: 2 asinh(5)
        assert!((oracle - 2.0 * (5.0f64).asinh()).abs() < 1e-10);
        // nodal values are positive and peak in the middle
        assert!(out.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn linearity_and_coupling_scaling() {
        let d = domain();
        let op = kernel(0.7).operator(d.clone()).unwrap();
        let op2 = kernel(1.4).operator(d.clone()).unwrap();
        let r1 = d.sample(|x| (PI * x).sin().powi(2));
        let r2 = d.sample(|x| x * x);
        let (a, b) = (0.3, 2.5);
        let combo: Vec<f64> = r1.iter().zip(&r2).map(|(p, q)| a * p + b * q).collect();
        let lhs = op.convolve(&combo).unwrap();
        let c1 = op.convolve(&r1).unwrap();
        let c2 = op.convolve(&r2).unwrap();
        for i in 0..lhs.len() {
            assert!((lhs[i] - (a * c1[i] + b * c2[i])).abs() < 1e-12);
        }
        let doubled = op2.convolve(&r1).unwrap();
        for i in 0..lhs.len() {
            assert_eq!(doubled[i], 2.0 * c1[i]);
            assert!(c1[i] >= 0.0);
        }
    }

    #[test]
    fn truncation_must_cover_domain() {
        let k = HartreeKernel::new(0.1, 0.5, 1.0).unwrap();
        assert!(k.operator(domain()).is_err());
        assert!(HartreeKernel::new(0.0, 1.0, 1.0).is_err());
        assert!(HartreeKernel::new(0.1, 1.0, -1.0).is_err());
    }

    #[test]
    fn effective_potential_examples() {
        let d = domain();
        let zero = ExternalPotential::zero(1.0);
        let op0 = kernel(0.0).operator(d.clone()).unwrap();
        let rho = vec![1.0; d.points()];
        assert!(effective_potential(&zero, &op0, &rho, 0.3).unwrap().iter().all(|&v| v == 0.0));

        let well = ExternalPotential::driven_well(1.0, 5.0, 0.5, 3.0);
        let ve = effective_potential(&well, &op0, &rho, 0.3).unwrap();
        assert_eq!(ve, well.sample(&d, 0.3));

        let st = ExternalPotential::static_well(1.0, 2.0);
        let op = kernel(1.0).operator(d.clone()).unwrap();
        let ve = effective_potential(&st, &op, &rho, 0.0).unwrap();
        for (q, &x) in d.nodes().iter().enumerate() {
            let hart: f64 = d
                .nodes()
                .iter()
                .zip(d.weights())
                .map(|(&y, &w)| w / ((x - y) * (x - y) + 0.01).sqrt())
                .sum();
            let ext = 2.0 * (PI * x).sin().powi(2);
            assert!((ve[q] - (ext + hart)).abs() < 1e-12);
        }
    }

    fn random_state(rng: &mut impl Rng, k: usize) -> CMatrix {
        CMatrix::from_fn(k, 2, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn density_matches_synthesis_oracle() {
        let d = domain();
        let b = build_basis(&d, 6).unwrap();
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<_> = (0..3).map(|_| random_state(&mut rng, 6)).collect();
        let psi = Trajectory::new(b.clone(), grid, samples.clone()).unwrap();
        let rho = density_from_trajectory(&psi);
        for (j, s) in samples.iter().enumerate() {
            for (q, &x) in d.nodes().iter().enumerate() {
                let mut expect = 0.0;
                for orb in 0..2 {
                    let mut z = Complex64::new(0.0, 0.0);
                    for i in 0..6 {
                        let kk = (i + 1) as f64 * PI;
                        let scale = (0.5 * (1.0 + kk * kk)).powf(-0.5);
                        z += s[(i, orb)] * scale * (kk * x).sin();
                    }
                    expect += z.norm_sqr();
                }
                assert!((rho.sample(j)[q] - expect).abs() < 1e-12);
            }
        }
        let zero = Trajectory::zeros(b.clone(), grid, 2);
        assert!(density_from_trajectory(&zero).samples().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn density_ignores_phase() {
        let d = domain();
        let b = build_basis(&d, 4).unwrap();
        let grid = TimeGrid::new(1.0, 1).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let col = random_state(&mut rng, 4).column(0).into_owned();
        let mut s = CMatrix::zeros(4, 2);
        s.set_column(0, &col);
        s.set_column(1, &(col.clone() * Complex64::new(0.0, 1.0)));
        let psi = Trajectory::constant(b.clone(), grid, &s).unwrap();
        let rho = density_from_trajectory(&psi);
        let single = b.synthesize_values(&CMatrix::from_column_slice(4, 1, col.as_slice()));
        for q in 0..d.points() {
            assert!((rho.sample(0)[q] - 2.0 * single[(q, 0)].norm_sqr()).abs() < 1e-12);
        }
    }

    #[test]
    fn lipschitz_ratio_behaviour() {
        let d = domain();
        let b = build_basis(&d, 6).unwrap();
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let psi = Trajectory::new(b.clone(), grid, (0..3).map(|_| random_state(&mut rng, 6)).collect()).unwrap();
        let probe = Trajectory::new(b.clone(), grid, (0..3).map(|_| random_state(&mut rng, 6)).collect()).unwrap();
        let op = kernel(1.0).operator(d.clone()).unwrap();

        let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&eps| {
                let psi1 = psi.scaled(Complex64::new(1.0 + eps, 0.0));
                lipschitz_ratio(&op, &psi1, &psi, &probe).unwrap()
            })
            .collect();
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min.is_finite() && max / min < 2.0, "{ratios:?}");

        let psi1 = psi.scaled(Complex64::new(1.01, 0.0));
        let r = lipschitz_ratio(&op, &psi1, &psi, &probe).unwrap();
        let r3 = lipschitz_ratio(&op, &psi1, &psi, &probe.scaled(Complex64::new(3.0, 0.0))).unwrap();
        assert!((r - r3).abs() < 1e-10 * r);

        let op0 = kernel(0.0).operator(d.clone()).unwrap();
        assert_eq!(lipschitz_ratio(&op0, &psi1, &psi, &probe).unwrap(), 0.0);
        assert!(matches!(lipschitz_ratio(&op, &psi, &psi, &probe), Err(Error::DivisionByZero(_))));
    }
}
