//! Interacting particle systems with nonlocal aggregation, kernel-smoothed
//! densities and a degrading environmental field, together with the
//! limiting advection–diffusion PDE and convergence diagnostics.

pub mod clusters;
pub mod config;
pub mod convergence;
pub mod error;
pub mod grid;
pub mod interaction;
pub mod matrix;
pub mod output;
pub mod particles;
pub mod pde;
pub mod presets;
pub mod rng;
pub mod simulate;
pub mod smoothing;
pub mod spectral;

pub use clusters::{cluster_count, mean_pairwise_distance};
pub use config::SimConfig;
pub use convergence::{convergence_study, d_l2loc, l2_ball, weak_residual, ConvergenceReport, TestFunction};
pub use error::{Error, Result};
pub use grid::{DensityField, GridGeometry, ScalarField, VectorField};
pub use interaction::{drift_field, DriftOperator, InteractionKernel, KernelKind};
pub use matrix::{f_zeta, update_m, MatrixFieldState};
pub use particles::{sample_initial, step_em, InitialLaw, ParticleState};
pub use pde::{heat_propagate, pde_step, solve_pde, PdeRecord, PdeState};
pub use presets::ScenarioPreset;
pub use simulate::{simulate, simulate_with, ParticleRecord};
pub use smoothing::{build_scaled_kernel, deposit_density, MollifierSpec};
