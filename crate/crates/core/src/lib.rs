//! Guaranteed maximum-norm a posteriori error bounds for one-dimensional
//! linear parabolic problems discretised by P1 finite elements in space and
//! one of six implicit time-stepping schemes.
//!
//! The bound at the final time combines per-level elliptic error estimates
//! (through the reconstruction defects `psi^j`), kernel bounds of the
//! evolution operator, and closed-form time weights. All constants are
//! explicit; no unknown stability factors enter. The `study` module
//! reproduces error/estimator convergence tables against a
//! Richardson-extrapolated reference solution.
//!
//! The numerical core is generic over the floating-point scalar via
//! [`scalar::Real`]; the `*64` aliases below fix `f64`, the type used by the
//! command-line tables.

pub mod elliptic;
pub mod error;
pub mod estimator;
pub mod fem1d;
pub mod integrators;
pub mod problem;
pub mod reconstruction;
pub mod scalar;
pub mod study;
pub mod tables;

pub use error::{Error, Result};
pub use scalar::Real;

pub use elliptic::{estimate_elliptic, solve_elliptic, EllipticEstimator, IntervalBoundEstimator};
pub use estimator::{estimate_final_time, scan_split_index, weights};
pub use fem1d::{
    assemble_load, assemble_mass, assemble_stiffness, supnorm_sampled, MassMode,
    DEFAULT_SUP_SAMPLES,
};
pub use integrators::{initial_state, run_scheme, sweep_scheme, SchemeId, SchemeOptions};
pub use problem::{builtin_test_problem, problem_by_name};
pub use reconstruction::{build_reconstruction, psi_closed_form, psi_general};
pub use study::{
    convergence_study, convergence_study_against, measure_error, reference_solution, run_estimate,
    ConvergenceRow, SplitChoice, StudyConfig,
};

/// `f64` instantiations of the core types.
pub type Problem64 = problem::Problem<f64>;
pub type GreenBounds64 = problem::GreenBounds<f64>;
pub type TimeMesh64 = problem::TimeMesh<f64>;
pub type SpatialMesh64 = fem1d::SpatialMesh<f64>;
pub type NodalVector64 = fem1d::NodalVector<f64>;
pub type TriDiagMatrix64 = fem1d::TriDiagMatrix<f64>;
pub type Trajectory64 = integrators::Trajectory<f64>;
pub type ReconstructionData64 = reconstruction::ReconstructionData<f64>;
pub type EstimatorReport64 = estimator::EstimatorReport<f64>;
pub type EstimatorWeights64 = estimator::EstimatorWeights<f64>;
pub type ConvergenceRow64 = study::ConvergenceRow<f64>;
pub type Reference64 = study::Reference<f64>;
