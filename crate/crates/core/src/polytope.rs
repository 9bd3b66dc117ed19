//! The occupancy-measure polytope in standard form and linear programs
//! over it.
//!
//! `Delta_M` is the set of vectors rho >= 0 over state-action pairs with
//! unit total mass and per-state flow balance. One balance row is always
//! structurally redundant (the |S| balance rows sum to zero), so the row of
//! the highest-index state is dropped before solving. A strictly positive
//! per-variable floor yields the restricted polytope `Delta_{M,delta}` used
//! by the Lipschitz validation suite.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mdp::{policy_to_occupancy, MdpError, MdpModel, OccupancyMeasure, StationaryPolicy};
use crate::simplex::{Basis, LpSolution, LpStatus, SimplexEngine, SimplexError};

#[derive(Debug, Error)]
pub enum PolytopeError {
    #[error("floor {floor} is infeasible: floor * |S||A| = {total} exceeds unit mass")]
    FloorInfeasible { floor: f64, total: f64 },
    #[error("lp solve ended with status {0:?}")]
    NotOptimal(LpStatus),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Optimization sense for [`solve_lp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// The polytope in standard equality form: `E rho = rhs`, `rho >= lower`.
///
/// Rows are the |S| - 1 retained flow-balance constraints followed by the
/// normalization row; columns are state-action pairs in `s * |A| + a` order.
#[derive(Debug, Clone)]
pub struct PolytopeSpec {
    pub num_rows: usize,
    pub num_cols: usize,
    /// Dense row-major equality matrix.
    pub equality_matrix: Vec<f64>,
    /// All zeros except a one on the final (normalization) row.
    pub equality_rhs: Vec<f64>,
    /// Per-variable lower bound: 0 for `Delta_M`, delta for `Delta_{M,delta}`.
    pub lower_bounds: Vec<f64>,
    /// The same matrix as sparse columns, for the simplex engine.
    sparse_cols: Vec<Vec<(usize, f64)>>,
}

impl PolytopeSpec {
    pub fn sparse_columns(&self) -> &[Vec<(usize, f64)>] {
        &self.sparse_cols
    }
}

/// Builds the standard-form polytope for a model, with a uniform lower
/// bound `floor` on every coordinate.
pub fn build_polytope(m: &MdpModel, floor: f64) -> Result<PolytopeSpec, PolytopeError> {
    let ns = m.num_states();
    let na = m.num_actions();
    let n = ns * na;
    let total = floor * n as f64;
    if !(0.0..=1.0).contains(&floor) || total > 1.0 {
        return Err(PolytopeError::FloorInfeasible { floor, total });
    }
    let rows = ns; // ns - 1 balance rows plus normalization
    let mut sparse_cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for s in 0..ns {
        for a in 0..na {
            let mut col: Vec<(usize, f64)> = Vec::new();
            for s2 in 0..ns - 1 {
                let mut coeff = -m.prob(s, a, s2);
                if s2 == s {
                    coeff += 1.0;
                }
                if coeff != 0.0 {
                    col.push((s2, coeff));
                }
            }
            col.push((ns - 1, 1.0));
            sparse_cols.push(col);
        }
    }
    let mut equality_matrix = vec![0.0; rows * n];
    for (j, col) in sparse_cols.iter().enumerate() {
        for &(r, v) in col {
            equality_matrix[r * n + j] = v;
        }
    }
    let mut equality_rhs = vec![0.0; rows];
    equality_rhs[rows - 1] = 1.0;
    Ok(PolytopeSpec {
        num_rows: rows,
        num_cols: n,
        equality_matrix,
        equality_rhs,
        lower_bounds: vec![floor; n],
        sparse_cols,
    })
}

/// A reusable LP solver over one polytope that carries its optimal basis
/// between calls, so a sequence of related objectives (the Frank-Wolfe
/// oracle) resolves in few pivots.
pub struct LpOracle {
    engine: SimplexEngine,
    basis: Option<Basis>,
    crash: Option<Basis>,
    calls: u64,
}

impl LpOracle {
    pub fn new(spec: &PolytopeSpec) -> Result<Self, PolytopeError> {
        let mut engine = SimplexEngine::new(
            spec.num_rows,
            spec.sparse_cols.clone(),
            &spec.equality_rhs,
            spec.lower_bounds.clone(),
        )?;
        // Crash start: the columns of a unichain deterministic policy form a
        // feasible basis of the occupancy polytope (its basic values are the
        // policy's stationary distribution), skipping Phase I entirely. Try
        // a few fixed candidates; heavily degenerate models fall back to the
        // two-phase path.
        let ns = spec.num_rows;
        let na = spec.num_cols / ns;
        let mut crash = None;
        if ns * na == spec.num_cols {
            for candidate in crash_candidates(ns, na) {
                let b = Basis::from_vars(candidate);
                if engine.validate_basis(&b) {
                    crash = Some(b);
                    break;
                }
            }
        }
        Ok(Self {
            engine,
            basis: None,
            crash,
            calls: 0,
        })
    }

    /// Maximizes `c' rho` over the polytope, warm-starting from the previous
    /// optimal basis (or the crash basis on the first call), and falling
    /// back to the crash basis once more if a solve goes astray.
    pub fn maximize(&mut self, c: &[f64]) -> LpSolution {
        self.calls += 1;
        let warm = self.basis.as_ref().or(self.crash.as_ref());
        let (sol, basis) = self.engine.maximize(c, warm);
        if sol.status == LpStatus::Optimal {
            self.basis = Some(basis);
            return sol;
        }
        self.basis = None;
        if self.crash.is_some() {
            let (sol2, basis2) = self.engine.maximize(c, self.crash.as_ref());
            if sol2.status == LpStatus::Optimal {
                self.basis = Some(basis2);
            }
            return sol2;
        }
        sol
    }

    /// Deterministic LP work performed so far, in simplex pivots.
    pub fn pivots_total(&self) -> u64 {
        self.engine.pivots_total()
    }

    /// Number of LP solves requested from this oracle.
    pub fn calls_total(&self) -> u64 {
        self.calls
    }
}

/// Deterministic-policy bases to try as crash starts: one per constant
/// action, a striped assignment, and two seeded random assignments.
fn crash_candidates(ns: usize, na: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for a in 0..na {
        out.push((0..ns).map(|s| s * na + a).collect());
    }
    out.push((0..ns).map(|s| s * na + s % na).collect());
    for seed in [1u64, 2] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        out.push((0..ns).map(|s| s * na + rng.gen_range(0..na)).collect());
    }
    out
}

/// One-shot LP over a polytope; deterministic for identical inputs.
pub fn solve_lp(spec: &PolytopeSpec, objective: &[f64], sense: Sense) -> Result<LpSolution, PolytopeError> {
    let mut oracle = LpOracle::new(spec)?;
    let sol = match sense {
        Sense::Maximize => oracle.maximize(objective),
        Sense::Minimize => {
            let neg: Vec<f64> = objective.iter().map(|v| -v).collect();
            let mut sol = oracle.maximize(&neg);
            sol.objective_value = -sol.objective_value;
            sol
        }
    };
    Ok(sol)
}

/// Solves `max <rho, r>` over `Delta_M`: the optimal occupancy measure and
/// its long-run average reward. Assumes the model passes the
/// weak-accessibility check.
pub fn optimal_policy_lp(m: &MdpModel) -> Result<(OccupancyMeasure, f64), PolytopeError> {
    let spec = build_polytope(m, 0.0)?;
    let sol = solve_lp(&spec, m.reward_vector(), Sense::Maximize)?;
    if sol.status != LpStatus::Optimal {
        return Err(PolytopeError::NotOptimal(sol.status));
    }
    let rho = OccupancyMeasure::from_values(m, sol.point)?;
    Ok((rho, sol.objective_value))
}

/// Draws a random feasible occupancy measure by sampling a random stationary
/// policy (each state's action distribution uniform on the simplex, i.e.
/// symmetric Dirichlet with concentration one) and mapping it through
/// [`policy_to_occupancy`]. Reproducible per seed.
pub fn sample_feasible(m: &MdpModel, seed: u64) -> Result<OccupancyMeasure, PolytopeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ns = m.num_states();
    let na = m.num_actions();
    let mut probs = vec![0.0; ns * na];
    for s in 0..ns {
        let mut row: Vec<f64> = (0..na)
            .map(|_| -f64::ln(rng.gen_range(f64::MIN_POSITIVE..1.0)))
            .collect();
        let sum: f64 = row.iter().sum();
        for v in row.iter_mut() {
            *v /= sum;
        }
        probs[s * na..(s + 1) * na].copy_from_slice(&row);
    }
    let pi = StationaryPolicy::new(ns, na, probs).map_err(PolytopeError::Mdp)?;
    Ok(policy_to_occupancy(m, &pi)?)
}

/// Dumps a polytope to a plain-text fixed format for external verification:
/// a `rows cols` header, the row-major equality matrix, the rhs, and the
/// lower bounds, one row per line.
pub fn dump_polytope(spec: &PolytopeSpec, path: &Path) -> Result<(), PolytopeError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{} {}", spec.num_rows, spec.num_cols)?;
    for r in 0..spec.num_rows {
        let row = &spec.equality_matrix[r * spec.num_cols..(r + 1) * spec.num_cols];
        let line: Vec<String> = row.iter().map(|v| format!("{:.17e}", v)).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    let rhs: Vec<String> = spec.equality_rhs.iter().map(|v| format!("{:.17e}", v)).collect();
    writeln!(out, "{}", rhs.join(" "))?;
    let lb: Vec<String> = spec.lower_bounds.iter().map(|v| format!("{:.17e}", v)).collect();
    writeln!(out, "{}", lb.join(" "))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::occupancy_residuals;
    use crate::objective::jsd;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dense_mdp(rng: &mut ChaCha8Rng, ns: usize, na: usize) -> MdpModel {
        let mut t = vec![0.0; ns * na * ns];
        for sa in 0..ns * na {
            let mut row: Vec<f64> = (0..ns).map(|_| rng.gen_range(0.05..1.0)).collect();
            let sum: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v /= sum;
            }
            t[sa * ns..(sa + 1) * ns].copy_from_slice(&row);
        }
        let r: Vec<f64> = (0..ns * na).map(|_| rng.gen_range(-1.0..1.0)).collect();
        MdpModel::new(ns, na, t, r).unwrap()
    }

    /// Exact stationary distribution by Gaussian elimination, independent of
    /// the nalgebra-backed path used in `mdp`.
    fn stationary_by_elimination(p: &[f64], n: usize) -> Vec<f64> {
        // Solve d (P - I) = 0, sum d = 1 as an n x n dense system.
        let mut a = vec![0.0; n * n];
        let mut rhs = vec![0.0; n];
        for col in 0..n {
            for row in 0..n {
                a[row * n + col] = p[col * n + row] - if row == col { 1.0 } else { 0.0 };
            }
        }
        for col in 0..n {
            a[(n - 1) * n + col] = 1.0;
        }
        rhs[n - 1] = 1.0;
        // Partial-pivot elimination.
        for k in 0..n {
            let mut piv = k;
            for r in k + 1..n {
                if a[r * n + k].abs() > a[piv * n + k].abs() {
                    piv = r;
                }
            }
            if piv != k {
                for c in 0..n {
                    a.swap(k * n + c, piv * n + c);
                }
                rhs.swap(k, piv);
            }
            let diag = a[k * n + k];
            for r in k + 1..n {
                let f = a[r * n + k] / diag;
                if f == 0.0 {
                    continue;
                }
                for c in k..n {
                    a[r * n + c] -= f * a[k * n + c];
                }
                rhs[r] -= f * rhs[k];
            }
        }
        let mut d = vec![0.0; n];
        for k in (0..n).rev() {
            let mut acc = rhs[k];
            for c in k + 1..n {
                acc -= a[k * n + c] * d[c];
            }
            d[k] = acc / a[k * n + k];
        }
        d
    }

    /// Max long-run average reward over all deterministic policies,
    /// evaluated by exact stationary solves.
    pub(crate) fn enumerate_deterministic_optimum(m: &MdpModel) -> f64 {
        let ns = m.num_states();
        let na = m.num_actions();
        let combos = na.pow(ns as u32);
        let mut best = f64::NEG_INFINITY;
        for code in 0..combos {
            let mut c = code;
            let mut actions = vec![0usize; ns];
            for item in actions.iter_mut() {
                *item = c % na;
                c /= na;
            }
            let mut p = vec![0.0; ns * ns];
            for s in 0..ns {
                for s2 in 0..ns {
                    p[s * ns + s2] = m.prob(s, actions[s], s2);
                }
            }
            let d = stationary_by_elimination(&p, ns);
            let value: f64 = (0..ns).map(|s| d[s] * m.reward(s, actions[s])).sum();
            best = best.max(value);
        }
        best
    }

    #[test]
    fn single_cycle_polytope_is_one_point() {
        // 2 states, 1 action, deterministic swap: rho = (1/2, 1/2).
        let t = vec![0.0, 1.0, 1.0, 0.0];
        let m = MdpModel::new(2, 1, t, vec![1.0, 0.0]).unwrap();
        let spec = build_polytope(&m, 0.0).unwrap();
        for objective in [[0.0, 0.0], [1.0, -1.0], [-3.0, 5.0]] {
            let sol = solve_lp(&spec, &objective, Sense::Maximize).unwrap();
            assert_eq!(sol.status, LpStatus::Optimal);
            assert_abs_diff_eq!(sol.point[0], 0.5, epsilon = 1e-9);
            assert_abs_diff_eq!(sol.point[1], 0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn floor_above_capacity_is_rejected() {
        let t = vec![0.0, 1.0, 1.0, 0.0];
        let m = MdpModel::new(2, 1, t, vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            build_polytope(&m, 0.6),
            Err(PolytopeError::FloorInfeasible { .. })
        ));
    }

    #[test]
    fn balance_rows_sum_to_zero_before_drop() {
        // Structural redundancy: the full set of |S| balance rows sums to the
        // zero row; verify on the retained rows plus the reconstructed
        // dropped row.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_dense_mdp(&mut rng, 4, 2);
        let spec = build_polytope(&m, 0.0).unwrap();
        let ns = m.num_states();
        for j in 0..spec.num_cols {
            let (s, a) = (j / m.num_actions(), j % m.num_actions());
            let mut dropped = 1.0 - m.prob(s, a, ns - 1);
            if s != ns - 1 {
                dropped = -m.prob(s, a, ns - 1);
            }
            let retained: f64 = (0..ns - 1).map(|r| spec.equality_matrix[r * spec.num_cols + j]).sum();
            assert_abs_diff_eq!(retained + dropped, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_objective_returns_feasible_vertex() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_dense_mdp(&mut rng, 3, 2);
        let spec = build_polytope(&m, 0.0).unwrap();
        let sol = solve_lp(&spec, &[0.0; 6], Sense::Maximize).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.objective_value, 0.0);
        let res = occupancy_residuals(&m, &sol.point);
        assert!(res.within(1e-9, 1e-8, 1e-7), "residuals {:?}", res);
    }

    #[test]
    fn lp_matches_vertex_enumeration_on_tiny_polytope() {
        use nalgebra::{DMatrix, DVector};
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_dense_mdp(&mut rng, 3, 2);
        let spec = build_polytope(&m, 0.0).unwrap();
        let n = spec.num_cols;
        let rows = spec.num_rows;
        let objective: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();

        // Enumerate all basic feasible solutions.
        let mut best = f64::NEG_INFINITY;
        let mut subset = vec![0usize; rows];
        fn visit(
            start: usize,
            depth: usize,
            rows: usize,
            n: usize,
            subset: &mut Vec<usize>,
            spec: &PolytopeSpec,
            objective: &[f64],
            best: &mut f64,
        ) {
            if depth == rows {
                let mut bmat = DMatrix::<f64>::zeros(rows, rows);
                for (k, &j) in subset.iter().enumerate() {
                    for r in 0..rows {
                        bmat[(r, k)] = spec.equality_matrix[r * n + j];
                    }
                }
                let rhs = DVector::from_column_slice(&spec.equality_rhs);
                if let Some(x) = bmat.lu().solve(&rhs) {
                    if x.iter().all(|&v| v >= -1e-9) {
                        let value: f64 = subset
                            .iter()
                            .enumerate()
                            .map(|(k, &j)| objective[j] * x[k])
                            .collect::<Vec<f64>>()
                            .iter()
                            .sum();
                        *best = best.max(value);
                    }
                }
                return;
            }
            for j in start..n {
                subset[depth] = j;
                visit(j + 1, depth + 1, rows, n, subset, spec, objective, best);
            }
        }
        visit(0, 0, rows, n, &mut subset, &spec, &objective, &mut best);

        let sol = solve_lp(&spec, &objective, Sense::Maximize).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.objective_value, best, epsilon = 1e-9);
    }

    #[test]
    fn optimal_policy_matches_deterministic_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let ns = rng.gen_range(2..=4);
            let na = rng.gen_range(2..=3);
            let m = random_dense_mdp(&mut rng, ns, na);
            let (rho, value) = optimal_policy_lp(&m).unwrap();
            let brute = enumerate_deterministic_optimum(&m);
            assert_abs_diff_eq!(value, brute, epsilon = 1e-6);
            let res = rho.residuals(&m);
            assert!(res.within(1e-9, 1e-8, 1e-7));
        }
    }

    #[test]
    fn single_action_mdp_has_unique_occupancy() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = random_dense_mdp(&mut rng, 4, 1);
        let (rho, value) = optimal_policy_lp(&m).unwrap();
        let pi = StationaryPolicy::uniform(4, 1);
        let expected = policy_to_occupancy(&m, &pi).unwrap();
        for sa in 0..4 {
            assert_abs_diff_eq!(rho.as_slice()[sa], expected.as_slice()[sa], epsilon = 1e-8);
        }
        assert_abs_diff_eq!(
            value,
            crate::mdp::average_reward(&expected, &m),
            epsilon = 1e-10
        );
    }

    #[test]
    fn sample_feasible_is_seed_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let m = random_dense_mdp(&mut rng, 4, 3);
        let a = sample_feasible(&m, 42).unwrap();
        let b = sample_feasible(&m, 42).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        let c = sample_feasible(&m, 43).unwrap();
        let divergence = jsd(a.as_slice(), c.as_slice()).unwrap();
        assert!(divergence > 0.0, "distinct seeds should differ, jsd {}", divergence);
        let res = c.residuals(&m);
        assert!(res.within(1e-9, 1e-8, 1e-7));
    }

    #[test]
    fn restriction_cannot_improve_maximum() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let m = random_dense_mdp(&mut rng, 3, 2);
        let unrestricted = build_polytope(&m, 0.0).unwrap();
        let floored = build_polytope(&m, 0.02).unwrap();
        for _ in 0..5 {
            let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = solve_lp(&unrestricted, &c, Sense::Maximize).unwrap();
            let b = solve_lp(&floored, &c, Sense::Maximize).unwrap();
            assert_eq!(a.status, LpStatus::Optimal);
            assert_eq!(b.status, LpStatus::Optimal);
            assert!(b.objective_value <= a.objective_value + 1e-9);
        }
    }

    #[test]
    fn never_unbounded_on_occupancy_polytope() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let m = random_dense_mdp(&mut rng, 4, 2);
        let spec = build_polytope(&m, 0.0).unwrap();
        for _ in 0..20 {
            let c: Vec<f64> = (0..8).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let sol = solve_lp(&spec, &c, Sense::Maximize).unwrap();
            assert_eq!(sol.status, LpStatus::Optimal);
        }
    }

    #[test]
    fn identical_inputs_bitwise_identical_solutions() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let m = random_dense_mdp(&mut rng, 4, 2);
        let spec = build_polytope(&m, 0.0).unwrap();
        let c: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = solve_lp(&spec, &c, Sense::Maximize).unwrap();
        let b = solve_lp(&spec, &c, Sense::Maximize).unwrap();
        assert_eq!(a.point, b.point);
        assert_eq!(a.objective_value.to_bits(), b.objective_value.to_bits());
    }

    #[test]
    fn dump_writes_fixed_format() {
        let t = vec![0.0, 1.0, 1.0, 0.0];
        let m = MdpModel::new(2, 1, t, vec![0.0, 0.0]).unwrap();
        let spec = build_polytope(&m, 0.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("polytope.txt");
        dump_polytope(&spec, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "2 2");
        assert_eq!(text.lines().count(), 1 + spec.num_rows + 2);
    }
}
