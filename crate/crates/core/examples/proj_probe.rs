//! Scratch probe for projection behavior on the four-room polytope.

use diverse_planning::gridworld::{generate, Layout};
use diverse_planning::objective::ObjectiveConfig;
use diverse_planning::polytope::{build_polytope, sample_feasible, LpOracle};
use diverse_planning::simplex::LpStatus;

fn main() {
    let (_, model) = generate(Layout::FourRoom, 0, 0.95).unwrap();
    let spec = build_polytope(&model, 0.0).unwrap();
    let x0 = sample_feasible(&model, 7).unwrap().as_slice().to_vec();
    let x1 = sample_feasible(&model, 7 + 10007).unwrap().as_slice().to_vec();

    let cfg = ObjectiveConfig::new(8.0, 2).unwrap();
    let members = vec![x0.clone(), x1];
    let grads =
        diverse_planning::objective::compound_gradient(&members, model.reward_vector(), &cfg);
    let eta = 1e-6;
    let tilde: Vec<f64> = x0.iter().zip(&grads[0]).map(|(x, g)| x + eta * g).collect();

    let t_proj = std::time::Instant::now();
    let outcome = diverse_planning::solvers::project(&tilde, &model).unwrap();
    eprintln!(
        "project(): {:.3}s, inner iters {}, gap {:.3e}, polished {}",
        t_proj.elapsed().as_secs_f64(),
        outcome.inner_iterations,
        outcome.inner_gap,
        outcome.polished
    );

    let mut oracle = LpOracle::new(&spec).unwrap();
    let mut x = x0.clone();
    let n = x.len();
    let t_total = std::time::Instant::now();
    for it in 0..60 {
        let neg_grad: Vec<f64> = (0..n).map(|j| tilde[j] - x[j]).collect();
        let t0 = std::time::Instant::now();
        let sol = oracle.maximize(&neg_grad);
        let dt = t0.elapsed().as_secs_f64();
        let mut g = 0.0;
        let mut dd = 0.0;
        for j in 0..n {
            let d = sol.point[j] - x[j];
            g += neg_grad[j] * d;
            dd += d * d;
        }
        eprintln!(
            "it {it}: lp {dt:.4}s status {:?} pivots {} gap {g:.3e}",
            sol.status, sol.iterations
        );
        if sol.status != LpStatus::Optimal || g <= 1e-8 || dd == 0.0 {
            break;
        }
        let gamma = (g / dd).min(1.0);
        for j in 0..n {
            x[j] += gamma * (sol.point[j] - x[j]);
        }
    }
    eprintln!("total {:.3}s, pivots {}", t_total.elapsed().as_secs_f64(), oracle.pivots_total());
}
