//! Scratch probe for LP behavior on gridworld polytopes.

use diverse_planning::gridworld::{generate, Layout};
use diverse_planning::polytope::{build_polytope, LpOracle};

fn main() {
    let (_, model) = generate(Layout::FourRoom, 0, 0.95).unwrap();
    let spec = build_polytope(&model, 0.0).unwrap();
    let t0 = std::time::Instant::now();
    let mut oracle = LpOracle::new(&spec).unwrap();
    eprintln!("oracle setup: {:?}", t0.elapsed());
    let t0 = std::time::Instant::now();
    let sol = oracle.maximize(model.reward_vector());
    eprintln!(
        "solve: {:?}, status {:?}, iterations {}, value {}",
        t0.elapsed(),
        sol.status,
        sol.iterations,
        sol.objective_value
    );
    let mass: f64 = sol.point.iter().sum();
    eprintln!("mass error {:.3e}", (mass - 1.0).abs());
    let res = diverse_planning::mdp::occupancy_residuals(&model, &sol.point);
    eprintln!(
        "min entry {:.3e}, flow err {:.3e}",
        res.min_entry, res.max_flow_error
    );
    // warm second solve with a slightly different objective
    let mut c = model.reward_vector().to_vec();
    for (i, v) in c.iter_mut().enumerate() {
        *v += (i % 7) as f64 * 0.01;
    }
    let t0 = std::time::Instant::now();
    let sol2 = oracle.maximize(&c);
    eprintln!(
        "warm solve: {:?}, status {:?}, iterations {}",
        t0.elapsed(),
        sol2.status,
        sol2.iterations
    );
}
