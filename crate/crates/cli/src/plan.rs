//! Experiment plans, per-trial records, and summary rows.

use std::path::PathBuf;

use diverse_planning::gridworld::Layout;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Compare,
    SweepLambda,
    SweepK,
    SweepAlpha,
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Fw,
    Pga,
    Both,
}

impl SolverChoice {
    pub fn runs_fw(self) -> bool {
        matches!(self, SolverChoice::Fw | SolverChoice::Both)
    }

    pub fn runs_pga(self) -> bool {
        matches!(self, SolverChoice::Pga | SolverChoice::Both)
    }
}

/// A fully-resolved experiment configuration; echoed to `plan.json` so every
/// output directory records exactly what produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub experiment: ExperimentKind,
    pub layout: Layout,
    pub trials: usize,
    /// Swept values: lambda, k, or alpha depending on the experiment; empty
    /// for compare and single.
    pub grid: Vec<f64>,
    pub k: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub seed: u64,
    pub max_iterations: usize,
    pub fw_gap_tolerance: f64,
    pub pga_step_tolerance: f64,
    pub solver: SolverChoice,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub emit_heatmaps: bool,
    pub emit_monitor: bool,
}

impl ExperimentPlan {
    /// Paper-matched defaults per experiment: the compare table runs the
    /// four-room world with k=2, lambda=8, alpha=.95 over ten trials; the
    /// sweeps run the nine-room world (lambda, k) or the four-room world
    /// (alpha, twenty trials) around the reported inflection points.
    pub fn defaults_for(kind: ExperimentKind) -> Self {
        let base = Self {
            experiment: kind,
            layout: Layout::FourRoom,
            trials: 10,
            grid: Vec::new(),
            k: 2,
            lambda: 8.0,
            alpha: 0.95,
            seed: 0,
            max_iterations: 30,
            fw_gap_tolerance: 1e-3,
            pga_step_tolerance: 1e-2,
            solver: SolverChoice::Both,
            out_dir: PathBuf::from("out"),
            workers: 1,
            emit_heatmaps: true,
            emit_monitor: false,
        };
        match kind {
            ExperimentKind::Compare => base,
            ExperimentKind::SweepLambda => Self {
                layout: Layout::NineRoom,
                k: 6,
                grid: vec![0.0, 2.0, 4.0, 8.0, 12.0],
                solver: SolverChoice::Fw,
                ..base
            },
            ExperimentKind::SweepK => Self {
                layout: Layout::NineRoom,
                grid: vec![2.0, 4.0, 6.0, 8.0],
                solver: SolverChoice::Fw,
                ..base
            },
            ExperimentKind::SweepAlpha => Self {
                trials: 20,
                grid: vec![0.5, 0.65, 0.8, 0.95],
                solver: SolverChoice::Fw,
                ..base
            },
            ExperimentKind::Single => Self {
                layout: Layout::NineRoom,
                trials: 1,
                k: 6,
                solver: SolverChoice::Fw,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.trials == 0 {
            return Err("trials must be at least 1".into());
        }
        let needs_grid = matches!(
            self.experiment,
            ExperimentKind::SweepLambda | ExperimentKind::SweepK | ExperimentKind::SweepAlpha
        );
        if needs_grid {
            if self.grid.is_empty() {
                return Err("sweep experiments need a non-empty grid".into());
            }
            if self.grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err("grid values must be strictly increasing".into());
            }
        }
        if self.workers == 0 {
            return Err("workers must be at least 1".into());
        }
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// World seed for (base, trial, swept value): a deterministic hash chain, so
/// sweeps are independent but reproducible.
pub fn trial_world_seed(base: u64, trial: usize, value: f64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ trial as u64) ^ value.to_bits())
}

/// Solver initialization seed for the same coordinates, on a separate stream.
pub fn trial_solver_seed(base: u64, trial: usize, value: f64) -> u64 {
    splitmix64(trial_world_seed(base, trial, value) ^ 0x5eed_5eed_5eed_5eed)
}

/// One (trial, swept value, solver) outcome.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub swept_value: f64,
    pub trial: usize,
    pub solver: String,
    pub world_seed: u64,
    pub solver_seed: u64,
    /// Mean over the k policies of their long-run average reward.
    pub reward_per_policy: f64,
    /// Average pairwise JSD of the returned set.
    pub pairwise_jsd: f64,
    /// Deterministic work-based runtime estimate in nominal seconds (simplex
    /// pivots and LP calls at fixed unit costs); reproducible across runs.
    pub runtime_s: f64,
    /// Measured wall clock for the solver call, excluding world generation.
    pub wall_clock_s: f64,
    pub termination: String,
    /// Reward of the single-policy LP optimum on this trial's world.
    pub optimal_reward: f64,
    pub heatmaps: Vec<String>,
}

/// Aggregate over trials for one (swept value, solver) cell.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub swept_value: f64,
    pub solver: String,
    pub mean_reward_per_policy: f64,
    pub sd_reward: f64,
    pub mean_pairwise_jsd: f64,
    pub sd_jsd: f64,
    pub mean_runtime_s: f64,
    pub optimal_reward_ref: f64,
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased (n-1) standard deviation; zero for fewer than two samples.
pub(crate) fn sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}
