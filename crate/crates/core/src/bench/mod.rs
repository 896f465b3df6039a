//! Experiment harness: the two-pipeline task suite, perception accuracy
//! over a noise grid, and emergency-stop latency.

mod latency;
mod perception;
mod stats;
mod suite;
mod suite_run;

pub use latency::{run_stop_latency, LatencyConfig, LatencyReport, LatencySample};
pub use perception::{
    perception_trial, run_perception_eval, Confusion, LevelMetrics, ObjectRecovery, PerceptionConfig,
    PerceptionReport, PerceptionTrial, REFERENCE_ACCURACY, REFERENCE_RMSE_M,
};
pub use stats::{binomial_bounds, bootstrap_ci, mean_std, mix, pm, welch, Welch};
pub use suite::{parse_atom, Suite, SuiteError, Task};
pub use suite_run::{
    column_title, run_suite, run_trial, summarize, ModeSummary, SuiteConfig, SuiteReport, TrialOutcome, TrialRecord,
};
