//! Experiment harness for the diverse-planning solvers: the PGA-vs-FW
//! comparison and the lambda / k / alpha sweeps over randomized grid-world
//! trials, with CSV tables and occupancy heatmaps as outputs.

pub mod plan;
pub mod runner;

pub use plan::{ExperimentKind, ExperimentPlan, SolverChoice, SummaryRow, TrialRecord};
pub use runner::{run_plan, write_outputs, PlanResult};
