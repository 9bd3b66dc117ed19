//! Scratch probe: FW metrics across four-room trials.

use diverse_planning::gridworld::{generate, Layout};
use diverse_planning::polytope::optimal_policy_lp;
use diverse_planning::solvers::{frank_wolfe, SolverConfig};

fn main() {
    let mut jsds = Vec::new();
    let mut rewards = Vec::new();
    for trial in 0..10u64 {
        let world_seed = 1000 + trial;
        let (_, model) = generate(Layout::FourRoom, world_seed, 0.95).unwrap();
        let (_, optimal) = optimal_policy_lp(&model).unwrap();
        let cfg = SolverConfig::new(2, 8.0, 777 + trial);
        let t0 = std::time::Instant::now();
        let report = frank_wolfe(&model, &cfg).unwrap();
        eprintln!(
            "trial {trial}: {:.2}s reward/policy {:.2} (opt {:.2}) jsd {:.3} iters {} term {:?}",
            t0.elapsed().as_secs_f64(),
            report.mean_reward_per_policy(),
            optimal,
            report.average_pairwise_jsd(),
            report.per_iteration.len(),
            report.termination_reason,
        );
        jsds.push(report.average_pairwise_jsd());
        rewards.push(report.mean_reward_per_policy());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    eprintln!("mean reward/policy {:.2}, mean jsd {:.3}", mean(&rewards), mean(&jsds));
}
