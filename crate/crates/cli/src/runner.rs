//! Executes experiment plans and writes their outputs.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use diverse_planning::gridworld::generate;
use diverse_planning::polytope::optimal_policy_lp;
use diverse_planning::render::render_occupancy;
use diverse_planning::solvers::{
    convergence_monitor, frank_wolfe, pga, SolveReport, SolverConfig,
};

use crate::plan::{
    mean, sd, trial_solver_seed, trial_world_seed, ExperimentKind, ExperimentPlan, SolverChoice,
    SummaryRow, TrialRecord,
};

/// Nominal unit costs behind the deterministic `runtime_s` column: simplex
/// pivots and LP calls at fixed per-unit seconds, calibrated once against
/// wall-clock measurements. Reproducible where wall clock is not.
const SECONDS_PER_PIVOT: f64 = 2.5e-4;
const SECONDS_PER_CALL: f64 = 2.5e-4;

fn nominal_runtime(report: &SolveReport) -> f64 {
    report.lp_pivots as f64 * SECONDS_PER_PIVOT + report.lp_calls as f64 * SECONDS_PER_CALL
}

/// One solver outcome kept for file emission (heatmaps, traces, monitors).
pub struct ReportEntry {
    pub swept_value: f64,
    pub trial: usize,
    pub solver: &'static str,
    pub world_seed: u64,
    pub report: SolveReport,
}

pub struct PlanResult {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
    /// Per-trial failures; the run continues past them.
    pub failures: Vec<String>,
    pub reports: Vec<ReportEntry>,
}

/// The swept values for a plan; compare and single sweep nothing and use a
/// single placeholder value of zero.
fn swept_values(plan: &ExperimentPlan) -> Vec<f64> {
    match plan.experiment {
        ExperimentKind::Compare | ExperimentKind::Single => vec![0.0],
        _ => plan.grid.clone(),
    }
}

/// (k, lambda, alpha) for one swept value.
fn trial_params(plan: &ExperimentPlan, value: f64) -> (usize, f64, f64) {
    match plan.experiment {
        ExperimentKind::Compare | ExperimentKind::Single => (plan.k, plan.lambda, plan.alpha),
        ExperimentKind::SweepLambda => (plan.k, value, plan.alpha),
        ExperimentKind::SweepK => (value as usize, plan.lambda, plan.alpha),
        ExperimentKind::SweepAlpha => (plan.k, plan.lambda, value),
    }
}

fn solvers_for(plan: &ExperimentPlan) -> Vec<&'static str> {
    let mut out = Vec::new();
    if plan.solver.runs_fw() {
        out.push("fw");
    }
    if plan.solver.runs_pga() {
        out.push("pga");
    }
    out
}

/// Everything produced by one (swept value, trial) job.
struct JobOutput {
    records: Vec<TrialRecord>,
    reports: Vec<ReportEntry>,
}

fn run_job(plan: &ExperimentPlan, value: f64, trial: usize) -> Result<JobOutput> {
    let (k, lambda, alpha) = trial_params(plan, value);
    let world_seed = trial_world_seed(plan.seed, trial, value);
    let solver_seed = trial_solver_seed(plan.seed, trial, value);
    let (_, model) = generate(plan.layout, world_seed, alpha)
        .with_context(|| format!("world generation failed (trial {trial}, value {value})"))?;
    let (_, optimal_reward) = optimal_policy_lp(&model)
        .with_context(|| format!("optimal-policy LP failed (trial {trial}, value {value})"))?;

    let mut cfg = SolverConfig::new(k, lambda, solver_seed);
    cfg.max_iterations = plan.max_iterations;
    cfg.fw_gap_tolerance = plan.fw_gap_tolerance;
    cfg.pga_step_tolerance = plan.pga_step_tolerance;

    let mut out = JobOutput {
        records: Vec::new(),
        reports: Vec::new(),
    };
    for solver in solvers_for(plan) {
        let started = std::time::Instant::now();
        let report = match solver {
            "fw" => frank_wolfe(&model, &cfg),
            _ => pga(&model, &cfg),
        }
        .with_context(|| format!("{solver} failed (trial {trial}, value {value})"))?;
        let wall_clock_s = started.elapsed().as_secs_f64();
        out.records.push(TrialRecord {
            swept_value: value,
            trial,
            solver: solver.to_string(),
            world_seed,
            solver_seed,
            reward_per_policy: report.mean_reward_per_policy(),
            pairwise_jsd: report.average_pairwise_jsd(),
            runtime_s: nominal_runtime(&report),
            wall_clock_s,
            termination: format!("{:?}", report.termination_reason).to_lowercase(),
            optimal_reward,
            heatmaps: Vec::new(),
        });
        out.reports.push(ReportEntry {
            swept_value: value,
            trial,
            solver,
            world_seed,
            report,
        });
    }
    Ok(out)
}

/// Runs every (swept value, trial) job of a plan; per-trial failures are
/// recorded and the run continues.
pub fn run_plan(plan: &ExperimentPlan) -> Result<PlanResult> {
    plan.validate().map_err(|e| anyhow::anyhow!(e))?;
    if plan.experiment == ExperimentKind::Single && plan.solver == SolverChoice::Both {
        bail!("the single experiment runs exactly one solver; pick --solver fw or pga");
    }
    let values = swept_values(plan);
    let jobs: Vec<(f64, usize)> = values
        .iter()
        .flat_map(|&v| (0..plan.trials).map(move |t| (v, t)))
        .collect();

    let outcomes: Vec<Result<JobOutput>> = if plan.workers <= 1 {
        jobs.iter().map(|&(v, t)| run_job(plan, v, t)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(plan.workers)
            .build()
            .context("building worker pool")?;
        pool.install(|| {
            use rayon::prelude::*;
            jobs.par_iter().map(|&(v, t)| run_job(plan, v, t)).collect()
        })
    };

    let mut records = Vec::new();
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(mut job) => {
                records.append(&mut job.records);
                reports.append(&mut job.reports);
            }
            Err(e) => failures.push(format!("{e:#}")),
        }
    }

    let summary = summarize(&values, plan, &records);
    Ok(PlanResult {
        records,
        summary,
        failures,
        reports,
    })
}

/// Aggregates records into one row per (swept value, solver), in sweep and
/// solver order.
fn summarize(values: &[f64], plan: &ExperimentPlan, records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &value in values {
        for solver in solvers_for(plan) {
            let cell: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.swept_value == value && r.solver == solver)
                .collect();
            if cell.is_empty() {
                continue;
            }
            let rewards: Vec<f64> = cell.iter().map(|r| r.reward_per_policy).collect();
            let jsds: Vec<f64> = cell.iter().map(|r| r.pairwise_jsd).collect();
            let runtimes: Vec<f64> = cell.iter().map(|r| r.runtime_s).collect();
            let optima: Vec<f64> = cell.iter().map(|r| r.optimal_reward).collect();
            rows.push(SummaryRow {
                swept_value: value,
                solver: solver.to_string(),
                mean_reward_per_policy: mean(&rewards),
                sd_reward: sd(&rewards),
                mean_pairwise_jsd: mean(&jsds),
                sd_jsd: sd(&jsds),
                mean_runtime_s: mean(&runtimes),
                optimal_reward_ref: mean(&optima),
            });
        }
    }
    rows
}

/// Files produced by [`write_outputs`].
pub struct OutputPaths {
    pub plan_json: PathBuf,
    pub trials_csv: PathBuf,
    pub summary_csv: PathBuf,
}

/// Writes plan.json, trials.csv, summary.csv, occupancy heatmaps, and (for
/// the single experiment) the per-iteration trace, solve report, and the
/// convergence-monitor series.
pub fn write_outputs(plan: &ExperimentPlan, result: &mut PlanResult) -> Result<OutputPaths> {
    let dir = &plan.out_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let plan_json = dir.join("plan.json");
    std::fs::write(&plan_json, serde_json::to_string_pretty(plan)?)?;

    if plan.emit_heatmaps {
        emit_heatmaps(plan, result)?;
    }

    if plan.experiment == ExperimentKind::Single {
        for entry in &result.reports {
            let trace = dir.join(format!("trace_{}.csv", entry.trial));
            entry.report.write_trace_csv(&trace)?;
            let report_json = dir.join(format!("report_{}.json", entry.trial));
            std::fs::write(&report_json, entry.report.to_json()?)?;
            if plan.emit_monitor {
                write_monitor_csv(&entry.report, &dir.join(format!("monitor_{}.csv", entry.trial)))?;
            }
        }
    }

    let trials_csv = dir.join("trials.csv");
    write_trials_csv(&result.records, &trials_csv)?;
    let summary_csv = dir.join("summary.csv");
    write_summary_csv(&result.summary, &summary_csv)?;

    if !result.failures.is_empty() {
        let failures = dir.join("failures.txt");
        std::fs::write(&failures, result.failures.join("\n"))?;
    }
    Ok(OutputPaths {
        plan_json,
        trials_csv,
        summary_csv,
    })
}

fn emit_heatmaps(plan: &ExperimentPlan, result: &mut PlanResult) -> Result<()> {
    let multi_solver = plan.solver == SolverChoice::Both;
    let multi_value = swept_values(plan).len() > 1;
    for entry in &result.reports {
        // Keep the occupancy_<trial>_<member>.svg pattern unique by nesting
        // per swept value and per solver where needed.
        let mut subdir = plan.out_dir.clone();
        if multi_value {
            subdir = subdir.join(format!("value_{}", entry.swept_value));
        }
        if multi_solver {
            subdir = subdir.join(entry.solver);
        }
        std::fs::create_dir_all(&subdir)?;
        // The spec regenerates deterministically from its seed.
        let (spec, _) = generate(
            plan.layout,
            entry.world_seed,
            trial_params(plan, entry.swept_value).2,
        )?;
        let mut paths = Vec::new();
        for (member, rho) in entry.report.final_set.members().iter().enumerate() {
            let path = subdir.join(format!("occupancy_{}_{}.svg", entry.trial, member));
            let svg = render_occupancy(&spec, rho)?;
            std::fs::write(&path, svg)?;
            paths.push(path.display().to_string());
        }
        if let Some(record) = result.records.iter_mut().find(|r| {
            r.trial == entry.trial && r.swept_value == entry.swept_value && r.solver == entry.solver
        }) {
            record.heatmaps = paths;
        }
    }
    Ok(())
}

fn write_trials_csv(records: &[TrialRecord], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        "swept_value,trial,solver,world_seed,solver_seed,reward_per_policy,pairwise_jsd,runtime_s,wall_clock_s,termination,optimal_reward,heatmaps"
    )?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.swept_value,
            r.trial,
            r.solver,
            r.world_seed,
            r.solver_seed,
            r.reward_per_policy,
            r.pairwise_jsd,
            r.runtime_s,
            r.wall_clock_s,
            r.termination,
            r.optimal_reward,
            r.heatmaps.join(";")
        )?;
    }
    Ok(())
}

fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        "swept_value,solver,mean_reward_per_policy,sd_reward,mean_pairwise_jsd,sd_jsd,mean_runtime_s,optimal_reward_ref"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.swept_value,
            r.solver,
            r.mean_reward_per_policy,
            r.sd_reward,
            r.mean_pairwise_jsd,
            r.sd_jsd,
            r.mean_runtime_s,
            r.optimal_reward_ref
        )?;
    }
    Ok(())
}

fn write_monitor_csv(report: &SolveReport, path: &Path) -> Result<()> {
    let summary = convergence_monitor(report);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "T,min_prefix_gap,scaled")?;
    for (t, (min_prefix, scaled)) in summary
        .min_prefix
        .iter()
        .zip(&summary.scaled)
        .enumerate()
    {
        writeln!(out, "{},{},{}", t, min_prefix, scaled)?;
    }
    Ok(())
}

/// The spec-named entry points: thin wrappers that check the plan kind.
pub fn run_compare(plan: &ExperimentPlan) -> Result<PlanResult> {
    expect_kind(plan, ExperimentKind::Compare)?;
    run_plan(plan)
}

pub fn run_sweep_lambda(plan: &ExperimentPlan) -> Result<PlanResult> {
    expect_kind(plan, ExperimentKind::SweepLambda)?;
    run_plan(plan)
}

pub fn run_sweep_k(plan: &ExperimentPlan) -> Result<PlanResult> {
    expect_kind(plan, ExperimentKind::SweepK)?;
    run_plan(plan)
}

pub fn run_sweep_alpha(plan: &ExperimentPlan) -> Result<PlanResult> {
    expect_kind(plan, ExperimentKind::SweepAlpha)?;
    run_plan(plan)
}

pub fn run_single(plan: &ExperimentPlan) -> Result<PlanResult> {
    expect_kind(plan, ExperimentKind::Single)?;
    run_plan(plan)
}

fn expect_kind(plan: &ExperimentPlan, kind: ExperimentKind) -> Result<()> {
    if plan.experiment != kind {
        bail!("plan kind {:?} does not match {:?}", plan.experiment, kind);
    }
    Ok(())
}
