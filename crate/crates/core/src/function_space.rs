//! Spatial domain, quadrature, the nested sine Galerkin bases, Sobolev inner
//! products, and the spatial (`Q_n`) and timewise (`P_n`) projections.
//!
//! Every basis is orthonormal in `H¹₀(0, L)`, so coefficient vectors carry the
//! `H¹₀` geometry directly: the norm of a trajectory sample is the Euclidean
//! norm of its coefficients (up to the quadrature Gram matrix, which is the
//! identity to roundoff).

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{gram_norm_sq, real_times_complex, CMatrix};

/// Nodes per Gauss-Legendre panel.
pub const PANEL_ORDER: usize = 8;

/// Quadrature nodes per basis function required by [`GalerkinBasis::new`].
pub const NODES_PER_MODE: usize = 4;

/// The interval `(0, L)` with a composite Gauss-Legendre rule.
#[derive(Debug, Clone)]
pub struct SpatialDomain {
    length: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl PartialEq for SpatialDomain {
    fn eq(&self, other: &Self) -> bool {
        self.length == other.length && self.nodes.len() == other.nodes.len()
    }
}

impl SpatialDomain {
    /// Builds `points / PANEL_ORDER` equal panels of `PANEL_ORDER`-point
    /// Gauss-Legendre rules. `points` must be a positive multiple of
    /// [`PANEL_ORDER`].
    pub fn new(length: f64, points: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidDomain(format!("length must be positive, got {length}")));
        }
        if points == 0 || points % PANEL_ORDER != 0 {
            return Err(Error::InvalidDomain(format!(
                "quadrature point count must be a positive multiple of {PANEL_ORDER}, got {points}"
            )));
        }
        let (ref_nodes, ref_weights) = gauss_legendre(PANEL_ORDER);
        let panels = points / PANEL_ORDER;
        let h = length / panels as f64;
        let mut nodes = Vec::with_capacity(points);
        let mut weights = Vec::with_capacity(points);
        for p in 0..panels {
            let a = p as f64 * h;
            for (xi, wi) in ref_nodes.iter().zip(&ref_weights) {
                nodes.push(a + 0.5 * h * (1.0 + xi));
                weights.push(0.5 * h * wi);
            }
        }
        Ok(Self { length, nodes, weights })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn points(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.points() {
            return Err(Error::GridMismatch(format!(
                "{what} has {len} values, domain has {} nodes",
                self.points()
            )));
        }
        Ok(())
    }

    /// Second-order centered differences on the (non-uniform) node set, with
    /// the Dirichlet values `f(0) = f(L) = 0` as end neighbours.
    pub fn centered_gradient(&self, values: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(values.len(), "field")?;
        let m = values.len();
        let zero = Complex64::new(0.0, 0.0);
        let mut out = Vec::with_capacity(m);
        for i in 0..m {
            let (xl, fl) = if i == 0 { (0.0, zero) } else { (self.nodes[i - 1], values[i - 1]) };
            let (xr, fr) = if i + 1 == m {
                (self.length, zero)
            } else {
                (self.nodes[i + 1], values[i + 1])
            };
            let h1 = self.nodes[i] - xl;
            let h2 = xr - self.nodes[i];
            let d = -h2 / (h1 * (h1 + h2)) * fl
                + (h2 - h1) / (h1 * h2) * values[i]
                + h1 / (h2 * (h1 + h2)) * fr;
            out.push(d);
        }
        Ok(out)
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A complex field sampled at the quadrature nodes together with its
/// derivative samples.
#[derive(Debug, Clone, PartialEq)]
pub struct H1Field {
    pub values: Vec<Complex64>,
    pub gradient: Vec<Complex64>,
}

impl H1Field {
    pub fn zeros(domain: &SpatialDomain) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); domain.points()];
        Self { values: z.clone(), gradient: z }
    }

    /// Samples `f` and its derivative `df` at the nodes.
    pub fn from_fn<F, D>(domain: &SpatialDomain, f: F, df: D) -> Self
    where
        F: Fn(f64) -> Complex64,
        D: Fn(f64) -> Complex64,
    {
        Self {
            values: domain.nodes().iter().map(|&x| f(x)).collect(),
            gradient: domain.nodes().iter().map(|&x| df(x)).collect(),
        }
    }

    /// Real-valued convenience constructor.
    pub fn from_real_fn<F, D>(domain: &SpatialDomain, f: F, df: D) -> Self
    where
        F: Fn(f64) -> f64,
        D: Fn(f64) -> f64,
    {
        Self::from_fn(domain, |x| Complex64::new(f(x), 0.0), |x| Complex64::new(df(x), 0.0))
    }

    /// Values with a finite-difference gradient. For grid fields that are not
    /// basis expansions (products with potentials, for instance).
    pub fn from_values(domain: &SpatialDomain, values: Vec<Complex64>) -> Result<Self> {
        let gradient = domain.centered_gradient(&values)?;
        Ok(Self { values, gradient })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sub(&self, other: &H1Field) -> H1Field {
        H1Field {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            gradient: self.gradient.iter().zip(&other.gradient).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> H1Field {
        H1Field {
            values: self.values.iter().map(|a| a * s).collect(),
            gradient: self.gradient.iter().map(|a| a * s).collect(),
        }
    }
}

fn check_pair(domain: &SpatialDomain, f: &H1Field, g: &H1Field) -> Result<()> {
    domain.check_len(f.values.len(), "first field")?;
    domain.check_len(f.gradient.len(), "first field gradient")?;
    domain.check_len(g.values.len(), "second field")?;
    domain.check_len(g.gradient.len(), "second field gradient")
}

/// `(f, g)_{L²} = ∫ f conj(g)`.
pub fn l2_inner(domain: &SpatialDomain, f: &H1Field, g: &H1Field) -> Result<Complex64> {
    check_pair(domain, f, g)?;
    Ok(domain
        .weights()
        .iter()
        .zip(f.values.iter().zip(&g.values))
        .map(|(w, (a, b))| *w * a * b.conj())
        .sum())
}

/// `(f, g)_{H¹₀} = (f, g)_{L²} + ∫ f' conj(g')`.
pub fn h10_inner(domain: &SpatialDomain, f: &H1Field, g: &H1Field) -> Result<Complex64> {
    check_pair(domain, f, g)?;
    let grad: Complex64 = domain
        .weights()
        .iter()
        .zip(f.gradient.iter().zip(&g.gradient))
        .map(|(w, (a, b))| *w * a * b.conj())
        .sum();
    Ok(l2_inner(domain, f, g)? + grad)
}

pub fn h10_norm(domain: &SpatialDomain, f: &H1Field) -> Result<f64> {
    Ok(h10_inner(domain, f, f)?.re.max(0.0).sqrt())
}

/// Orthonormal (in `H¹₀`) basis of the first `k` sine modes on the domain,
/// with its Gram, mass and stiffness matrices.
#[derive(Debug, Clone)]
pub struct GalerkinBasis {
    domain: Arc<SpatialDomain>,
    /// `M x k`: basis function values at the nodes.
    values: DMatrix<f64>,
    /// `M x k`: basis function derivatives at the nodes.
    gradients: DMatrix<f64>,
    h10_gram: DMatrix<f64>,
    mass: DMatrix<f64>,
    stiffness: DMatrix<f64>,
}

impl GalerkinBasis {
    /// Gram-Schmidt in `H¹₀` applied to `sin(iπx/L)`, `i = 1..=n`.
    ///
    /// The procedure is sequential, so the basis of dimension `n` is exactly
    /// the prefix of every larger basis on the same domain.
    pub fn new(domain: Arc<SpatialDomain>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("basis dimension must be at least 1".into()));
        }
        let required = NODES_PER_MODE * n;
        if domain.points() < required {
            return Err(Error::QuadratureResolution {
                points: domain.points(),
                dim: n,
                required,
            });
        }
        let m = domain.points();
        let l = domain.length();
        let w = domain.weights();
        let inner = |a: &[f64], da: &[f64], b: &[f64], db: &[f64]| -> f64 {
            (0..m).map(|q| w[q] * (a[q] * b[q] + da[q] * db[q])).sum()
        };

        let mut values = DMatrix::<f64>::zeros(m, n);
        let mut gradients = DMatrix::<f64>::zeros(m, n);
        for i in 0..n {
            let k = (i + 1) as f64 * PI / l;
            let mut v: Vec<f64> = domain.nodes().iter().map(|&x| (k * x).sin()).collect();
            let mut dv: Vec<f64> = domain.nodes().iter().map(|&x| k * (k * x).cos()).collect();
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for j in 0..i {
                    let fj = values.column(j);
                    let dfj = gradients.column(j);
                    let c = inner(&v, &dv, fj.as_slice(), dfj.as_slice());
                    for q in 0..m {
                        v[q] -= c * fj[q];
                        dv[q] -= c * dfj[q];
                    }
                }
            }
            let norm = inner(&v, &dv, &v, &dv).sqrt();
            for q in 0..m {
                values[(q, i)] = v[q] / norm;
                gradients[(q, i)] = dv[q] / norm;
            }
        }

        let weighted = |a: &DMatrix<f64>| {
            let mut out = a.clone();
            for (q, mut row) in out.row_iter_mut().enumerate() {
                row *= w[q];
            }
            out
        };
        let mass = values.tr_mul(&weighted(&values));
        let stiffness = gradients.tr_mul(&weighted(&gradients));
        let h10_gram = &mass + &stiffness;
        Ok(Self {
            domain,
            values,
            gradients,
            h10_gram,
            mass,
            stiffness,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn domain(&self) -> &Arc<SpatialDomain> {
        &self.domain
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn gradients(&self) -> &DMatrix<f64> {
        &self.gradients
    }

    pub fn h10_gram(&self) -> &DMatrix<f64> {
        &self.h10_gram
    }

    /// L² Gram matrix.
    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    /// `A_ij = ∫ f_i' f_j'`.
    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    /// True when both bases live on the same domain with the same dimension.
    pub fn compatible(&self, other: &GalerkinBasis) -> bool {
        self.dim() == other.dim() && *self.domain == *other.domain
    }

    /// Field of `Σ_i c_i f_i`.
    pub fn synthesize(&self, coeffs: &DVector<Complex64>) -> Result<H1Field> {
        if coeffs.len() != self.dim() {
            return Err(Error::GridMismatch(format!(
                "{} coefficients for a basis of dimension {}",
                coeffs.len(),
                self.dim()
            )));
        }
        let c = CMatrix::from_column_slice(coeffs.len(), 1, coeffs.as_slice());
        let v = real_times_complex(&self.values, &c);
        let g = real_times_complex(&self.gradients, &c);
        Ok(H1Field {
            values: v.as_slice().to_vec(),
            gradient: g.as_slice().to_vec(),
        })
    }

    /// Node values (`M x N`) of every orbital column of `state`.
    pub fn synthesize_values(&self, state: &CMatrix) -> CMatrix {
        real_times_complex(&self.values, state)
    }

    /// `B(V)_il = ∫ V f_i f_l`, the Galerkin matrix of multiplication by a real potential.
    pub fn potential_matrix(&self, potential: &[f64]) -> Result<DMatrix<f64>> {
        self.domain.check_len(potential.len(), "potential")?;
        let w = self.domain.weights();
        let mut scaled = self.values.clone();
        for (q, mut row) in scaled.row_iter_mut().enumerate() {
            row *= w[q] * potential[q];
        }
        let b = self.values.tr_mul(&scaled);
        // exact symmetry
        Ok((&b + b.transpose()) * 0.5)
    }

    /// Coefficients `α_i = (f, f_i)_{H¹₀}` of the orthogonal projection `Q_n f`.
    pub fn project(&self, f: &H1Field) -> Result<DVector<Complex64>> {
        self.domain.check_len(f.values.len(), "field")?;
        self.domain.check_len(f.gradient.len(), "field gradient")?;
        let w = self.domain.weights();
        let m = self.domain.points();
        Ok(DVector::from_fn(self.dim(), |i, _| {
            (0..m)
                .map(|q| {
                    w[q] * (f.values[q] * self.values[(q, i)] + f.gradient[q] * self.gradients[(q, i)])
                })
                .sum()
        }))
    }

    /// `T_il = (g_l, f_i)_{H¹₀}` for source basis `g` and this basis `f`: the
    /// matrix of `Q_n` restricted to the source space. For nested bases this
    /// restricts (coarse target) or injects (fine target) exactly.
    pub fn transfer_from(&self, source: &GalerkinBasis) -> Result<DMatrix<f64>> {
        if *self.domain != *source.domain {
            return Err(Error::GridMismatch("bases live on different domains".into()));
        }
        let w = self.domain.weights();
        let mut sv = source.values.clone();
        let mut sg = source.gradients.clone();
        for q in 0..self.domain.points() {
            sv.row_mut(q).scale_mut(w[q]);
            sg.row_mut(q).scale_mut(w[q]);
        }
        Ok(self.values.tr_mul(&sv) + self.gradients.tr_mul(&sg))
    }
}

/// Convenience wrapper over [`GalerkinBasis::new`].
pub fn build_basis(domain: &Arc<SpatialDomain>, n: usize) -> Result<Arc<GalerkinBasis>> {
    GalerkinBasis::new(domain.clone(), n).map(Arc::new)
}

/// Uniform sampling `t_j = j T₀ / S` of `J = [0, T₀]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    intervals: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, intervals: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("time horizon must be positive, got {horizon}")));
        }
        if intervals == 0 {
            return Err(Error::InvalidArgument("time grid needs at least one interval".into()));
        }
        Ok(Self { horizon, intervals })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of sample intervals `S`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Number of samples `S + 1`.
    pub fn samples(&self) -> usize {
        self.intervals + 1
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.intervals as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        if j == self.intervals {
            self.horizon
        } else {
            j as f64 * self.horizon / self.intervals as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.samples()).map(|j| self.time(j)).collect()
    }
}

/// Time-sampled coefficient vectors of `N` orbitals on a Galerkin basis: an
/// element of `E_n`. Sample `j` is a `k x N` matrix, one column per orbital.
#[derive(Debug, Clone)]
pub struct Trajectory {
    basis: Arc<GalerkinBasis>,
    grid: TimeGrid,
    samples: Vec<CMatrix>,
}

impl Trajectory {
    pub fn new(basis: Arc<GalerkinBasis>, grid: TimeGrid, samples: Vec<CMatrix>) -> Result<Self> {
        if samples.len() != grid.samples() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a time grid with {} samples",
                samples.len(),
                grid.samples()
            )));
        }
        let k = basis.dim();
        let n = samples.first().map(|s| s.ncols()).unwrap_or(0);
        if n == 0 {
            return Err(Error::InvalidArgument("trajectory needs at least one orbital".into()));
        }
        if samples.iter().any(|s| s.nrows() != k || s.ncols() != n) {
            return Err(Error::GridMismatch(format!("every sample must be {k} x {n}")));
        }
        Ok(Self { basis, grid, samples })
    }

    pub fn zeros(basis: Arc<GalerkinBasis>, grid: TimeGrid, orbitals: usize) -> Self {
        let k = basis.dim();
        Self {
            samples: vec![CMatrix::zeros(k, orbitals); grid.samples()],
            basis,
            grid,
        }
    }

    /// The same state at every sample time.
    pub fn constant(basis: Arc<GalerkinBasis>, grid: TimeGrid, state: &CMatrix) -> Result<Self> {
        let samples = vec![state.clone(); grid.samples()];
        Self::new(basis, grid, samples)
    }

    pub fn basis(&self) -> &Arc<GalerkinBasis> {
        &self.basis
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn orbitals(&self) -> usize {
        self.samples[0].ncols()
    }

    pub fn samples(&self) -> &[CMatrix] {
        &self.samples
    }

    pub fn sample(&self, j: usize) -> &CMatrix {
        &self.samples[j]
    }

    pub fn into_samples(self) -> Vec<CMatrix> {
        self.samples
    }

    /// Number of real coordinates `2 N k (S+1)`.
    pub fn real_dim(&self) -> usize {
        2 * self.orbitals() * self.basis.dim() * self.grid.samples()
    }

    pub fn same_space(&self, other: &Trajectory) -> Result<()> {
        if !self.basis.compatible(&other.basis) {
            return Err(Error::GridMismatch(format!(
                "trajectories on bases of dimension {} and {}",
                self.basis.dim(),
                other.basis.dim()
            )));
        }
        if self.grid != other.grid {
            return Err(Error::GridMismatch("trajectories on different time grids".into()));
        }
        if self.orbitals() != other.orbitals() {
            return Err(Error::GridMismatch("trajectories with different orbital counts".into()));
        }
        Ok(())
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, a: f64, other: &Trajectory) -> Result<Trajectory> {
        self.same_space(other)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(x, y)| x + y * Complex64::new(a, 0.0))
            .collect();
        Ok(Trajectory {
            basis: self.basis.clone(),
            grid: self.grid,
            samples,
        })
    }

    pub fn sub(&self, other: &Trajectory) -> Result<Trajectory> {
        self.add_scaled(-1.0, other)
    }

    pub fn scaled(&self, a: Complex64) -> Trajectory {
        Trajectory {
            basis: self.basis.clone(),
            grid: self.grid,
            samples: self.samples.iter().map(|x| x * a).collect(),
        }
    }

    pub fn map_samples<F: FnMut(usize, &CMatrix) -> CMatrix>(&self, mut f: F) -> Trajectory {
        Trajectory {
            basis: self.basis.clone(),
            grid: self.grid,
            samples: self.samples.iter().enumerate().map(|(j, s)| f(j, s)).collect(),
        }
    }

    /// `H¹₀` norm at sample `j` (orbitals combined).
    pub fn sample_norm(&self, j: usize) -> f64 {
        gram_norm_sq(self.basis.h10_gram(), &self.samples[j]).sqrt()
    }

    /// Flattens to interleaved real coordinates, ordered by sample, orbital,
    /// basis index, then (re, im).
    pub fn to_real(&self) -> Vec<f64> {
        let k = self.basis.dim();
        let n = self.orbitals();
        let mut out = Vec::with_capacity(self.real_dim());
        for s in &self.samples {
            for orb in 0..n {
                for i in 0..k {
                    let z = s[(i, orb)];
                    out.push(z.re);
                    out.push(z.im);
                }
            }
        }
        out
    }

    /// Inverse of [`Trajectory::to_real`].
    pub fn from_real(basis: Arc<GalerkinBasis>, grid: TimeGrid, orbitals: usize, coords: &[f64]) -> Result<Self> {
        let k = basis.dim();
        let expected = 2 * orbitals * k * grid.samples();
        if coords.len() != expected {
            return Err(Error::GridMismatch(format!(
                "{} real coordinates, expected {expected}",
                coords.len()
            )));
        }
        let mut samples = Vec::with_capacity(grid.samples());
        let mut it = coords.chunks_exact(2);
        for _ in 0..grid.samples() {
            let mut s = CMatrix::zeros(k, orbitals);
            for orb in 0..orbitals {
                for i in 0..k {
                    let c = it.next().expect("length checked");
                    s[(i, orb)] = Complex64::new(c[0], c[1]);
                }
            }
            samples.push(s);
        }
        Self::new(basis, grid, samples)
    }
}

/// `P_n`: applies `Q_n` at every sample time and orbital. The source may live
/// on any basis over the same domain (coarser, finer, or the same).
pub fn project_pn(basis: &Arc<GalerkinBasis>, source: &Trajectory) -> Result<Trajectory> {
    let t = basis.transfer_from(source.basis())?;
    let samples = source.samples().iter().map(|s| real_times_complex(&t, s)).collect();
    Trajectory::new(basis.clone(), *source.grid(), samples)
}

/// `P_n` applied to grid fields: `fields[j][orbital]` at sample `j`.
pub fn project_pn_fields(basis: &Arc<GalerkinBasis>, grid: TimeGrid, fields: &[Vec<H1Field>]) -> Result<Trajectory> {
    if fields.len() != grid.samples() {
        return Err(Error::GridMismatch(format!(
            "{} field samples for a time grid with {} samples",
            fields.len(),
            grid.samples()
        )));
    }
    let samples = fields
        .iter()
        .map(|orbs| {
            let mut s = CMatrix::zeros(basis.dim(), orbs.len());
            for (o, f) in orbs.iter().enumerate() {
                s.set_column(o, &basis.project(f)?);
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(basis.clone(), grid, samples)
}

/// The computational `C(J; H¹₀)` norm: maximum over the sample times of the
/// `H¹₀` norm of `a - b` (or of `a`).
pub fn traj_norm(a: &Trajectory, b: Option<&Trajectory>) -> Result<f64> {
    let gram = a.basis().h10_gram();
    match b {
        None => Ok((0..a.grid().samples()).map(|j| a.sample_norm(j)).fold(0.0, f64::max)),
        Some(b) => {
            a.same_space(b)?;
            Ok(a
                .samples()
                .iter()
                .zip(b.samples())
                .map(|(x, y)| gram_norm_sq(gram, &(x - y)).sqrt())
                .fold(0.0, f64::max))
        }
    }
}
