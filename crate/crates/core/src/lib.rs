//! Faedo-Galerkin solver for a one-dimensional nonlinear Schrödinger system
//! with external and Hartree potentials, plus the numerical harness used to
//! check its convergence hypotheses.

pub mod derivative;
pub mod error;
pub mod evolution;
pub mod fixed_point;
pub mod function_space;
pub mod harness;
pub mod linalg;
pub mod potentials;

pub use error::{Error, Result};
pub use evolution::{
    assemble, evolution_identity_residual, evolution_identity_residuals, Flow, GalerkinHamiltonian, GalerkinSystem,
    Model, Physics, PropagatorConfig,
};
pub use function_space::{
    build_basis, h10_inner, h10_norm, l2_inner, project_pn, traj_norm, GalerkinBasis, H1Field, SpatialDomain, TimeGrid,
    Trajectory,
};
pub use linalg::CMatrix;
pub use potentials::{
    density_from_trajectory, effective_potential, hartree_convolve, lipschitz_ratio, DensityTrajectory,
    ExternalPotential, ExternalPreset, HartreeKernel, HartreeOperator,
};
pub use fixed_point::{
    apply_k_ref, apply_kn, reference_solution, solve_fixed_point, FixedPointConfig, InitialState, IterationLog,
    ReferenceSolution,
};
pub use derivative::{
    apply_kn_prime, build_operator, dispersion_estimate, invertibility_margin, operator_norm, Linearization,
    RealLinearOperator,
};
