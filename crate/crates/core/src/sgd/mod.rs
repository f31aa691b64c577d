//! Desk-scale SGD testbed for stochastic batch sizes: problems with known
//! constants, batch schedules with drops, weighted iterate statistics,
//! convergence-bound verification and compensation for dropped samples.

mod compensation;
mod problem;
mod schedule;
mod train;
mod verify;

pub use compensation::{apply_compensation, compensation_ratio, CompensationStrategy, EpochSampler, TrainingPlan};
pub use problem::{ProblemKind, SgdProblem};
pub use schedule::{BatchSchedule, DropModel};
pub use train::{
    distance, lr_correction, run_stochastic_sgd, theorem_eta, EtaMode, LrCorrection, Normalization, TrajectoryStats,
};
pub use verify::{
    convex_bound, final_losses, nonconvex_bound, verify_convex_bound, verify_nonconvex_bound, welch_t_test,
    BoundCheck, MarginReport, WelchTest,
};
