//! Gradient engine, Adam, the restart protocol and the brute-force oracle.

pub mod adam;
pub mod gradcheck;
pub mod gradient;
pub mod oracle;
pub mod restart;

pub use adam::{adam_run, AdamConfig, AdamRun, AdamState};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use gradient::{
    central_difference_gradient, central_difference_gradient_in, dual_gradient, loss_gradient, Problem,
};
pub use oracle::{brute_force_2mag, OracleResult};
pub use restart::{
    canonical_angles, mirror_angles, multi_restart, multi_restart_problem, tune_force_target,
    tune_force_target_problem, OptimizationReport, RestartOutcome, RestartPolicy, TuneReport,
};
