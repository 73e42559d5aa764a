//! Kemmer-Duffin-Petiau form of the Maxwell field.

pub mod algebra;
pub mod field;
pub mod spectral;

pub use algebra::{
    build_matrices, gauge_shift, pack_psi, unpack_psi, FieldVector, Fields, KdpMatrixSet,
};
pub use field::{
    apply_gauge, constraint_residual, current, dalembert_residual, evolve, init_plane_wave,
    mass_independence_check, maxwell_residual, step, CurrentDiagnostic, EvolutionConfig, Evolver,
    Integrator, LatticeState, PlaneWave, PotentialCoupling, Representation,
};
pub use spectral::Grid;
