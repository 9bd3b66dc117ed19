use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use diverse_planning::gridworld::{generate, Layout};
use diverse_planning::mdp::save_mdp;
use diverse_planning::render::render_spec_to_file;
use diverse_planning_cli::plan::{ExperimentKind, ExperimentPlan, SolverChoice};
use diverse_planning_cli::runner::{run_plan, write_outputs};

/// Computes small sets of diverse, near-optimal policies for average-reward
/// MDPs and reproduces the grid-world experiment suite.
#[derive(Parser)]
#[command(name = "diverse-planning", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// FW-vs-PGA comparison on fresh four-room worlds.
    Compare(RunArgs),
    /// Reward/diversity as a function of the tradeoff weight (nine-room).
    SweepLambda(RunArgs),
    /// Reward/diversity as a function of the return-set size (nine-room).
    SweepK(RunArgs),
    /// Reward/diversity as a function of the correct-transition probability.
    SweepAlpha(RunArgs),
    /// One world, one solver, full trace and heatmaps.
    Single(RunArgs),
    /// Render a generated world to SVG and export its model.
    Render(RenderArgs),
}

#[derive(Args)]
struct RunArgs {
    /// World layout: four or nine rooms.
    #[arg(long, value_parser = parse_layout)]
    layout: Option<Layout>,
    #[arg(long)]
    trials: Option<usize>,
    /// Number of policies in the return set.
    #[arg(long)]
    k: Option<usize>,
    /// Reward/diversity tradeoff weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Correct-transition probability.
    #[arg(long)]
    alpha: Option<f64>,
    /// Swept values, comma separated (sweep experiments only).
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    /// Frank-Wolfe gap tolerance.
    #[arg(long = "fw-tol")]
    fw_tol: Option<f64>,
    /// PGA stopping tolerance.
    #[arg(long = "pga-tol")]
    pga_tol: Option<f64>,
    #[arg(long, value_parser = parse_solver)]
    solver: Option<SolverChoice>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for trial-level parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Skip occupancy heatmap emission.
    #[arg(long = "no-heatmaps")]
    no_heatmaps: bool,
    /// Emit the min-prefix-gap convergence monitor series (single).
    #[arg(long = "emit-monitor")]
    emit_monitor: bool,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long, value_parser = parse_layout, default_value = "four")]
    layout: Layout,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.95)]
    alpha: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_layout(s: &str) -> Result<Layout, String> {
    match s {
        "four" | "four_room" | "four-room" => Ok(Layout::FourRoom),
        "nine" | "nine_room" | "nine-room" => Ok(Layout::NineRoom),
        other => Err(format!("unknown layout '{other}' (expected four|nine)")),
    }
}

fn parse_solver(s: &str) -> Result<SolverChoice, String> {
    match s {
        "fw" => Ok(SolverChoice::Fw),
        "pga" => Ok(SolverChoice::Pga),
        "both" => Ok(SolverChoice::Both),
        other => Err(format!("unknown solver '{other}' (expected fw|pga|both)")),
    }
}

fn resolve(kind: ExperimentKind, args: RunArgs) -> ExperimentPlan {
    let mut plan = ExperimentPlan::defaults_for(kind);
    if let Some(v) = args.layout {
        plan.layout = v;
    }
    if let Some(v) = args.trials {
        plan.trials = v;
    }
    if let Some(v) = args.k {
        plan.k = v;
    }
    if let Some(v) = args.lambda {
        plan.lambda = v;
    }
    if let Some(v) = args.alpha {
        plan.alpha = v;
    }
    if let Some(v) = args.grid {
        plan.grid = v;
    }
    if let Some(v) = args.seed {
        plan.seed = v;
    }
    if let Some(v) = args.max_iters {
        plan.max_iterations = v;
    }
    if let Some(v) = args.fw_tol {
        plan.fw_gap_tolerance = v;
    }
    if let Some(v) = args.pga_tol {
        plan.pga_step_tolerance = v;
    }
    if let Some(v) = args.solver {
        plan.solver = v;
    }
    if let Some(v) = args.out {
        plan.out_dir = v;
    }
    if let Some(v) = args.workers {
        plan.workers = v;
    }
    if args.no_heatmaps {
        plan.emit_heatmaps = false;
    }
    if args.emit_monitor {
        plan.emit_monitor = true;
    }
    plan
}

fn run(kind: ExperimentKind, args: RunArgs) -> Result<()> {
    let plan = resolve(kind, args);
    let mut result = run_plan(&plan)?;
    let paths = write_outputs(&plan, &mut result)?;
    for row in &result.summary {
        println!(
            "value {:>7}: {:<3} reward/policy {:>9.3} (sd {:>7.3})  pairwise jsd {:>6.3} (sd {:>6.3})  runtime {:>8.2}s  optimal {:>9.3}",
            row.swept_value,
            row.solver,
            row.mean_reward_per_policy,
            row.sd_reward,
            row.mean_pairwise_jsd,
            row.sd_jsd,
            row.mean_runtime_s,
            row.optimal_reward_ref
        );
    }
    let walls: f64 = result.records.iter().map(|r| r.wall_clock_s).sum();
    eprintln!(
        "{} trial records ({} failures), measured wall clock {:.1}s; outputs in {}",
        result.records.len(),
        result.failures.len(),
        walls,
        paths.summary_csv.parent().unwrap_or(&plan.out_dir).display()
    );
    if !result.failures.is_empty() {
        for failure in &result.failures {
            eprintln!("trial failure: {failure}");
        }
    }
    Ok(())
}

fn render(args: RenderArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let (spec, model) = generate(args.layout, args.seed, args.alpha)?;
    let svg_path = args.out.join("world.svg");
    render_spec_to_file(&spec, &svg_path)?;
    let spec_path = args.out.join("world_spec.json");
    std::fs::write(&spec_path, serde_json::to_string_pretty(&spec)?)?;
    let mdp_path = args.out.join("mdp.json");
    save_mdp(&model, &mdp_path).context("writing mdp.json")?;
    println!(
        "wrote {}, {}, {}",
        svg_path.display(),
        spec_path.display(),
        mdp_path.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Compare(args) => run(ExperimentKind::Compare, args),
        Command::SweepLambda(args) => run(ExperimentKind::SweepLambda, args),
        Command::SweepK(args) => run(ExperimentKind::SweepK, args),
        Command::SweepAlpha(args) => run(ExperimentKind::SweepAlpha, args),
        Command::Single(args) => run(ExperimentKind::Single, args),
        Command::Render(args) => render(args),
    }
}
