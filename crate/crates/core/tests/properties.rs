//! Randomized invariants of propagation, projection and the derivative.

use std::sync::Arc;

use faedo_core::derivative::{random_unit_trajectory, Linearization};
use faedo_core::fixed_point::{apply_kn, free_evolution, solve_fixed_point, FixedPointConfig};
use faedo_core::function_space::{build_basis, project_pn, traj_norm, SpatialDomain, TimeGrid, Trajectory};
use faedo_core::linalg::CMatrix;
use faedo_core::potentials::{hartree_convolve, ExternalPotential, HartreeKernel};
use faedo_core::{GalerkinSystem, Model, Physics, PropagatorConfig};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn system(n: usize, v0: f64, alpha: f64, lambda: f64) -> GalerkinSystem {
    let domain = Arc::new(SpatialDomain::new(1.0, 32).unwrap());
    let hartree = HartreeKernel::new(0.1, 1.0, lambda).unwrap().operator(domain.clone()).unwrap();
    let model = Arc::new(Model {
        domain: domain.clone(),
        external: ExternalPotential::driven_well(1.0, v0, alpha, 4.0 * std::f64::consts::PI),
        hartree: Arc::new(hartree),
        physics: Physics::new(1.0, 1.0).unwrap(),
        grid: TimeGrid::new(0.25, 6).unwrap(),
        propagator: PropagatorConfig::new(2).unwrap(),
    });
    GalerkinSystem::new(model, build_basis(&domain, n).unwrap()).unwrap()
}

fn state(n: usize, orbitals: usize, entries: &[(f64, f64)]) -> CMatrix {
    CMatrix::from_fn(n, orbitals, |i, o| {
        let (re, im) = entries[(i + o * n) % entries.len()];
        Complex64::new(re, im)
    })
}

fn entries() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8..16)
        .prop_filter("nonzero state", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn l2_norm_is_conserved(v0 in 0.0f64..20.0, alpha in 0.0f64..1.0, lambda in 0.0f64..0.5, e in entries()) {
        let sys = system(5, v0, alpha, lambda);
        let psi0 = state(5, 2, &e);
        let traj = apply_kn(&sys, &free_evolution(&sys, &psi0).unwrap(), &psi0).unwrap();
        let n0 = sys.l2_norm_sq(&psi0);
        for s in traj.samples() {
            prop_assert!((sys.l2_norm_sq(s) - n0).abs() <= 1e-10 * n0.max(1.0));
        }
    }

    #[test]
    fn derivative_is_real_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, seed in 0u64..1_000) {
        let sys = system(4, 10.0, 0.5, 0.2);
        let psi0 = state(4, 2, &[(1.0, 0.0), (0.3, -0.2), (0.0, 0.1), (-0.1, 0.05)]);
        let (psi, _) = solve_fixed_point(&sys, &psi0, &FixedPointConfig::default()).unwrap();
        let lin = Linearization::new(&sys, &psi, &psi0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_unit_trajectory(sys.basis(), &psi, &mut rng).unwrap();
        let v = random_unit_trajectory(sys.basis(), &psi, &mut rng).unwrap();
        let combo = u.scaled(Complex64::new(a, 0.0)).add_scaled(b, &v).unwrap();
        let lhs = lin.apply(&combo).unwrap();
        let rhs = lin.apply(&u).unwrap().scaled(Complex64::new(a, 0.0)).add_scaled(b, &lin.apply(&v).unwrap()).unwrap();
        prop_assert!(traj_norm(&lhs, Some(&rhs)).unwrap() <= 1e-10 * (1.0 + traj_norm(&rhs, None).unwrap()));
    }

    #[test]
    fn nested_projections_compose(seed in 0u64..1_000) {
        let domain = Arc::new(SpatialDomain::new(1.0, 64).unwrap());
        let grid = TimeGrid::new(1.0, 3).unwrap();
        let big = build_basis(&domain, 12).unwrap();
        let mid = build_basis(&domain, 7).unwrap();
        let small = build_basis(&domain, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let like = Trajectory::zeros(big.clone(), grid, 2);
        let x = random_unit_trajectory(&big, &like, &mut rng).unwrap();
        let via_mid = project_pn(&small, &project_pn(&mid, &x).unwrap()).unwrap();
        let direct = project_pn(&small, &x).unwrap();
        prop_assert!(traj_norm(&via_mid, Some(&direct)).unwrap() <= 1e-12);
        let p = project_pn(&mid, &x).unwrap();
        prop_assert!(traj_norm(&project_pn(&mid, &p).unwrap(), Some(&p)).unwrap() <= 1e-12);
        // a projection never increases the norm
        prop_assert!(traj_norm(&p, None).unwrap() <= traj_norm(&x, None).unwrap() + 1e-12);
    }

    #[test]
    fn hartree_is_linear_and_positive(a in 0.0f64..3.0, b in 0.0f64..3.0, r1 in prop::collection::vec(0.0f64..1.0, 32), r2 in prop::collection::vec(0.0f64..1.0, 32)) {
        let domain = Arc::new(SpatialDomain::new(1.0, 32).unwrap());
        let op = HartreeKernel::new(0.1, 1.0, 0.7).unwrap().operator(domain).unwrap();
        let mix: Vec<f64> = r1.iter().zip(&r2).map(|(x, y)| a * x + b * y).collect();
        let w1 = hartree_convolve(&op, &r1).unwrap();
        let w2 = hartree_convolve(&op, &r2).unwrap();
        let wm = hartree_convolve(&op, &mix).unwrap();
        for i in 0..wm.len() {
            prop_assert!(wm[i] >= 0.0);
            prop_assert!((wm[i] - (a * w1[i] + b * w2[i])).abs() <= 1e-12 * (1.0 + wm[i].abs()));
        }
    }
}
