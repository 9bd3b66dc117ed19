//! Dense two-phase revised simplex over equality constraints with
//! per-variable lower bounds.
//!
//! The engine keeps an explicit basis inverse, prices with Dantzig's rule,
//! and switches to Bland's rule as the anti-cycling safeguard whenever a run
//! of degenerate pivots stalls progress. All tie-breaking is by lowest
//! variable index, so identical inputs produce bitwise-identical solutions.
//! A basis can be carried between solves with the same constraints, which is
//! how the Frank-Wolfe oracle reuses its previous vertex.

use thiserror::Error;

const RC_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
/// Degenerate-pivot run length that triggers the rhs perturbation.
const PERTURB_AT: usize = 100;
/// Degenerate-pivot run length (after perturbing) that locks in Bland's rule.
const BLAND_AT: usize = 400;
const PERTURB_SCALE: f64 = 1e-11;
const REFACTOR_INTERVAL: usize = 500;

/// SplitMix64, for the deterministic perturbation pattern.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[derive(Debug, Error)]
pub enum SimplexError {
    #[error("constraint system has {rows} rows but rhs has {rhs} entries")]
    Shape { rows: usize, rhs: usize },
    #[error("singular basis during (re)factorization")]
    SingularBasis,
}

/// Terminal status of an LP solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Result of a solve; `point` is in the original (unshifted) variables.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub point: Vec<f64>,
    pub objective_value: f64,
    pub status: LpStatus,
    /// Simplex pivots spent on this solve (both phases).
    pub iterations: usize,
}

/// An optimal basis, reusable as a warm start for a later solve over the
/// same constraint system.
#[derive(Debug, Clone)]
pub struct Basis {
    vars: Vec<usize>,
}

impl Basis {
    /// A basis from explicit variable indices (one per constraint row), e.g.
    /// the state-action columns of a deterministic policy on the occupancy
    /// polytope.
    pub fn from_vars(vars: Vec<usize>) -> Self {
        Self { vars }
    }
}

/// Revised simplex engine for
/// `min c'x  s.t.  A x = b,  x >= lower`,
/// with `A` given by sparse columns.
pub struct SimplexEngine {
    m: usize,
    n: usize,
    /// Sign-normalized sparse columns of the shifted system.
    cols: Vec<Vec<(usize, f64)>>,
    /// Sign-normalized shifted rhs, all entries >= 0.
    b: Vec<f64>,
    /// The rhs in effect: `b`, or its perturbation while fighting degeneracy.
    b_active: Vec<f64>,
    lower: Vec<f64>,
    /// Running pivot count across all solves on this engine.
    pivots_total: u64,

    // Solver state, valid between calls when `has_basis` is set.
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    has_basis: bool,
    pivots_since_refactor: usize,
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
    IterationLimit,
    /// A perturbed run ended on a basis that is not feasible for the true
    /// rhs; the solve must restart on the slow, guaranteed path.
    NeedsRestart,
}

enum PhaseOneOutcome {
    Feasible,
    Infeasible,
    Limit,
    NeedsRestart,
}

/// Pivoting strategy for one phase run.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Strategy {
    /// Dantzig pricing, rhs perturbation on stalls, Bland as last resort.
    Fast,
    /// Bland's rule throughout, no perturbation: slow but cannot cycle.
    Sure,
}

impl SimplexEngine {
    /// Builds an engine from sparse columns (row, coefficient), a right-hand
    /// side, and per-variable lower bounds.
    pub fn new(
        num_rows: usize,
        cols: Vec<Vec<(usize, f64)>>,
        rhs: &[f64],
        lower: Vec<f64>,
    ) -> Result<Self, SimplexError> {
        if rhs.len() != num_rows {
            return Err(SimplexError::Shape {
                rows: num_rows,
                rhs: rhs.len(),
            });
        }
        let n = cols.len();
        // Shift x = lower + y: rhs' = rhs - A * lower.
        let mut b: Vec<f64> = rhs.to_vec();
        for (j, col) in cols.iter().enumerate() {
            if lower[j] != 0.0 {
                for &(r, v) in col {
                    b[r] -= v * lower[j];
                }
            }
        }
        // Sign-normalize so Phase-I artificials start feasible.
        let mut cols = cols;
        for r in 0..num_rows {
            if b[r] < 0.0 {
                b[r] = -b[r];
                for col in cols.iter_mut() {
                    for entry in col.iter_mut() {
                        if entry.0 == r {
                            entry.1 = -entry.1;
                        }
                    }
                }
            }
        }
        Ok(Self {
            m: num_rows,
            n,
            cols,
            b_active: b.clone(),
            b,
            lower,
            pivots_total: 0,
            basis: Vec::new(),
            in_basis: Vec::new(),
            binv: Vec::new(),
            xb: Vec::new(),
            has_basis: false,
            pivots_since_refactor: 0,
        })
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    /// Total pivots performed by this engine so far; a deterministic measure
    /// of LP work.
    pub fn pivots_total(&self) -> u64 {
        self.pivots_total
    }

    /// Maximizes `c'x`; pass a basis from a previous solve over the same
    /// constraints to warm-start.
    pub fn maximize(&mut self, c: &[f64], warm: Option<&Basis>) -> (LpSolution, Basis) {
        let neg: Vec<f64> = c.iter().map(|v| -v).collect();
        let (mut sol, basis) = self.minimize(&neg, warm);
        sol.objective_value = -sol.objective_value;
        (sol, basis)
    }

    /// Minimizes `c'x`.
    pub fn minimize(&mut self, c: &[f64], warm: Option<&Basis>) -> (LpSolution, Basis) {
        assert_eq!(c.len(), self.n, "objective length mismatch");
        // Pricing runs on the unit-scaled objective so the tolerances mean
        // the same thing at every objective magnitude; the reported value
        // and the returned point use the caller's vector.
        let cmax = c.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let scaled: Vec<f64>;
        let work_c = if cmax > 0.0 && (cmax < 1e-2 || cmax > 1e2) {
            scaled = c.iter().map(|v| v / cmax).collect();
            &scaled[..]
        } else {
            c
        };
        let mut iterations = 0usize;
        // Retry ladder: warm fast solve, cold fast solve, then Bland's rule
        // throughout (slow but cannot cycle). Later rungs only run when a
        // perturbed phase ends on a basis infeasible for the true rhs.
        let attempts: [(Strategy, bool); 3] = [
            (Strategy::Fast, true),
            (Strategy::Fast, false),
            (Strategy::Sure, false),
        ];
        for (strategy, use_warm) in attempts {
            if use_warm && warm.is_none() {
                continue;
            }
            let warm_ref = if use_warm { warm } else { None };
            if let Some(result) = self.solve_attempt(c, work_c, warm_ref, strategy, &mut iterations)
            {
                return result;
            }
        }
        self.finish(c, LpStatus::IterationLimit, iterations)
    }

    /// One full two-phase attempt; None means the attempt must be redone on
    /// the next rung of the retry ladder.
    fn solve_attempt(
        &mut self,
        c: &[f64],
        work_c: &[f64],
        warm: Option<&Basis>,
        strategy: Strategy,
        iterations: &mut usize,
    ) -> Option<(LpSolution, Basis)> {
        let warmed = warm.map_or(false, |basis| self.try_install_basis(basis));
        if !warmed {
            match self.phase_one(strategy, iterations) {
                PhaseOneOutcome::Feasible => {}
                PhaseOneOutcome::Infeasible => {
                    return Some(self.finish(c, LpStatus::Infeasible, *iterations))
                }
                PhaseOneOutcome::Limit => {
                    return Some(self.finish(c, LpStatus::IterationLimit, *iterations))
                }
                PhaseOneOutcome::NeedsRestart => return None,
            }
        }

        // Phase II on the unit-scaled cost; artificials are never priced.
        let mut cost = vec![0.0; self.n + self.m];
        cost[..self.n].copy_from_slice(work_c);
        let status = match self.run_phase(&cost, strategy, iterations) {
            PhaseOutcome::Optimal => LpStatus::Optimal,
            PhaseOutcome::Unbounded => LpStatus::Unbounded,
            PhaseOutcome::IterationLimit => LpStatus::IterationLimit,
            PhaseOutcome::NeedsRestart => return None,
        };
        Some(self.finish(c, status, *iterations))
    }

    /// Checks that a caller-supplied basis is nonsingular and feasible, and
    /// installs it for the next solve when it is. Used to crash-start from a
    /// known vertex (e.g. a unichain deterministic policy).
    pub fn validate_basis(&mut self, basis: &Basis) -> bool {
        let ok = self.try_install_basis(basis);
        self.has_basis = ok;
        ok
    }

    fn finish(&mut self, c: &[f64], status: LpStatus, iterations: usize) -> (LpSolution, Basis) {
        let mut point = self.lower.clone();
        if status != LpStatus::Infeasible {
            self.refine_xb();
            for (r, &j) in self.basis.iter().enumerate() {
                if j < self.n {
                    point[j] = self.lower[j] + self.xb[r].max(0.0);
                }
            }
        }
        let objective_value = point.iter().zip(c).map(|(x, cj)| x * cj).sum();
        let basis = Basis {
            vars: self.basis.clone(),
        };
        self.has_basis = status == LpStatus::Optimal;
        (
            LpSolution {
                point,
                objective_value,
                status,
                iterations,
            },
            basis,
        )
    }

    /// Rebuilds the factorization for a caller-provided basis; returns false
    /// when the basis is unusable (wrong shape, singular, or infeasible).
    /// When the engine already sits on exactly this basis, its state is
    /// reused without refactorizing.
    fn try_install_basis(&mut self, basis: &Basis) -> bool {
        if basis.vars.len() != self.m || basis.vars.iter().any(|&j| j >= self.n + self.m) {
            return false;
        }
        if self.has_basis && self.basis == basis.vars {
            return true;
        }
        self.basis = basis.vars.clone();
        if self.refactorize().is_err() {
            self.has_basis = false;
            return false;
        }
        if self.xb.iter().any(|&v| v < -FEAS_TOL) {
            self.has_basis = false;
            return false;
        }
        self.rebuild_in_basis();
        self.has_basis = true;
        true
    }

    fn rebuild_in_basis(&mut self) {
        self.in_basis = vec![false; self.n + self.m];
        for &j in &self.basis {
            self.in_basis[j] = true;
        }
    }

    /// Recomputes the basis inverse and basic values from scratch.
    fn refactorize(&mut self) -> Result<(), SimplexError> {
        use nalgebra::DMatrix;
        let m = self.m;
        let mut bmat = DMatrix::<f64>::zeros(m, m);
        for (k, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                for &(r, v) in &self.cols[j] {
                    bmat[(r, k)] = v;
                }
            } else {
                bmat[(j - self.n, k)] = 1.0;
            }
        }
        let inv = bmat.try_inverse().ok_or(SimplexError::SingularBasis)?;
        self.binv = vec![0.0; m * m];
        for r in 0..m {
            for cidx in 0..m {
                self.binv[r * m + cidx] = inv[(r, cidx)];
            }
        }
        self.recompute_xb();
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn recompute_xb(&mut self) {
        let m = self.m;
        self.xb = vec![0.0; m];
        for r in 0..m {
            let mut acc = 0.0;
            for cidx in 0..m {
                acc += self.binv[r * m + cidx] * self.b_active[cidx];
            }
            self.xb[r] = acc;
        }
    }

    /// Two rounds of iterative refinement on `B x_B = b_active`, which pulls
    /// the drift accumulated by product-form updates back to solve accuracy.
    fn refine_xb(&mut self) {
        let m = self.m;
        for _ in 0..2 {
            let mut residual = self.b_active.clone();
            for (k, &j) in self.basis.iter().enumerate() {
                let xk = self.xb[k];
                if xk == 0.0 {
                    continue;
                }
                if j < self.n {
                    for &(row, v) in &self.cols[j] {
                        residual[row] -= v * xk;
                    }
                } else {
                    residual[j - self.n] -= xk;
                }
            }
            for row in 0..m {
                let mut acc = 0.0;
                for cidx in 0..m {
                    acc += self.binv[row * m + cidx] * residual[cidx];
                }
                self.xb[row] += acc;
            }
        }
    }

    /// Phase I: minimize the sum of artificials from the all-artificial
    /// basis.
    fn phase_one(&mut self, strategy: Strategy, iterations: &mut usize) -> PhaseOneOutcome {
        let m = self.m;
        self.basis = (self.n..self.n + m).collect();
        self.binv = vec![0.0; m * m];
        for r in 0..m {
            self.binv[r * m + r] = 1.0;
        }
        self.xb = self.b.clone();
        self.rebuild_in_basis();

        let mut cost = vec![0.0; self.n + m];
        for j in self.n..self.n + m {
            cost[j] = 1.0;
        }
        match self.run_phase(&cost, strategy, iterations) {
            PhaseOutcome::Optimal => {}
            // The Phase-I objective is bounded below by zero; unbounded
            // cannot genuinely happen.
            PhaseOutcome::Unbounded | PhaseOutcome::IterationLimit => {
                return PhaseOneOutcome::Limit
            }
            PhaseOutcome::NeedsRestart => return PhaseOneOutcome::NeedsRestart,
        }
        let artificial_mass: f64 = self
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &j)| j >= self.n)
            .map(|(r, _)| self.xb[r].max(0.0))
            .sum();
        if artificial_mass > FEAS_TOL {
            return PhaseOneOutcome::Infeasible;
        }
        self.drive_out_artificials();
        PhaseOneOutcome::Feasible
    }

    /// Pivots zero-level artificials out of the basis where possible;
    /// rows admitting no pivot are redundant and keep their artificial at
    /// level zero (it can never re-enter).
    fn drive_out_artificials(&mut self) {
        let m = self.m;
        for r in 0..m {
            if self.basis[r] < self.n {
                continue;
            }
            let mut entering = None;
            for j in 0..self.n {
                if self.in_basis[j] {
                    continue;
                }
                let mut w_r = 0.0;
                for &(row, v) in &self.cols[j] {
                    w_r += self.binv[r * m + row] * v;
                }
                // A comfortably-sized pivot; tiny ones would poison the
                // inverse for no benefit (the row is then redundant anyway).
                if w_r.abs() > 1e-5 {
                    entering = Some(j);
                    break;
                }
            }
            if let Some(j) = entering {
                let w = self.ftran(j);
                self.pivot(j, r, &w);
            }
        }
    }

    /// w = B^-1 A_j.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        if j < self.n {
            for &(row, v) in &self.cols[j] {
                for r in 0..m {
                    w[r] += self.binv[r * m + row] * v;
                }
            }
        } else {
            let row = j - self.n;
            for r in 0..m {
                w[r] = self.binv[r * m + row];
            }
        }
        w
    }

    fn pivot(&mut self, entering: usize, r_out: usize, w: &[f64]) {
        let m = self.m;
        let piv = w[r_out];
        let inv_piv = 1.0 / piv;
        for cidx in 0..m {
            self.binv[r_out * m + cidx] *= inv_piv;
        }
        let theta = self.xb[r_out] * inv_piv;
        self.xb[r_out] = theta;
        for r in 0..m {
            if r == r_out {
                continue;
            }
            let factor = w[r];
            if factor == 0.0 {
                continue;
            }
            for cidx in 0..m {
                self.binv[r * m + cidx] -= factor * self.binv[r_out * m + cidx];
            }
            self.xb[r] -= factor * theta;
        }
        let leaving = self.basis[r_out];
        self.in_basis[leaving] = false;
        self.in_basis[entering] = true;
        self.basis[r_out] = entering;
        self.pivots_total += 1;
        self.pivots_since_refactor += 1;
    }

    /// Applies a deterministic positive perturbation to the working rhs,
    /// which spreads the degenerate basic values apart so ratio tests make
    /// progress again.
    fn perturb_rhs(&mut self) {
        for (r, v) in self.b_active.iter_mut().enumerate() {
            let unit = splitmix64(r as u64) as f64 / u64::MAX as f64;
            *v += PERTURB_SCALE * (1.0 + unit);
        }
        self.recompute_xb();
    }

    /// Drops the perturbation and re-derives the basic values from the true
    /// rhs, repairing residual infeasibility with dual-simplex pivots;
    /// false when the basis cannot be made feasible for the true rhs.
    fn restore_rhs(&mut self, cost: &[f64], iterations: &mut usize) -> bool {
        self.b_active = self.b.clone();
        if self.refactorize().is_err() {
            return false;
        }
        self.dual_repair(cost, iterations)
    }

    /// Dual-simplex cleanup: while a basic value is meaningfully negative,
    /// pivot it out against an entering column chosen by the dual ratio
    /// test, which preserves dual feasibility. Ends optimal when it ends
    /// primal-feasible.
    fn dual_repair(&mut self, cost: &[f64], iterations: &mut usize) -> bool {
        let m = self.m;
        for _ in 0..200 {
            let mut r_out = None;
            let mut most_negative = -1e-10;
            for r in 0..m {
                if self.xb[r] < most_negative {
                    most_negative = self.xb[r];
                    r_out = Some(r);
                }
            }
            let Some(r_out) = r_out else {
                for v in self.xb.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                return true;
            };
            // y for reduced costs, and the r_out row of B^-1 for the pivot row.
            let mut y = vec![0.0; m];
            for r in 0..m {
                let cb = cost[self.basis[r]];
                if cb == 0.0 {
                    continue;
                }
                for cidx in 0..m {
                    y[cidx] += cb * self.binv[r * m + cidx];
                }
            }
            let brow = &self.binv[r_out * m..(r_out + 1) * m];
            let mut alphas = vec![0.0; self.n];
            let mut best_ratio = f64::INFINITY;
            for j in 0..self.n {
                if self.in_basis[j] {
                    continue;
                }
                let mut alpha = 0.0;
                let mut ya = 0.0;
                for &(row, v) in &self.cols[j] {
                    alpha += brow[row] * v;
                    ya += y[row] * v;
                }
                alphas[j] = alpha;
                if alpha < -PIVOT_TOL {
                    let rc = (cost[j] - ya).max(0.0);
                    best_ratio = best_ratio.min(rc / -alpha);
                }
            }
            if best_ratio.is_infinite() {
                return false;
            }
            // Among dual-ratio ties prefer comfortably-sized pivots, then
            // the lowest column index.
            let tie_cut = best_ratio + 1e-12 * (1.0 + best_ratio);
            let mut alpha_best = 0.0f64;
            for j in 0..self.n {
                if self.in_basis[j] || alphas[j] >= -PIVOT_TOL {
                    continue;
                }
                let mut ya = 0.0;
                for &(row, v) in &self.cols[j] {
                    ya += y[row] * v;
                }
                let rc = (cost[j] - ya).max(0.0);
                if rc / -alphas[j] <= tie_cut {
                    alpha_best = alpha_best.max(-alphas[j]);
                }
            }
            let mut j_in = None;
            for j in 0..self.n {
                if self.in_basis[j] || alphas[j] >= -PIVOT_TOL || -alphas[j] < 0.01 * alpha_best
                {
                    continue;
                }
                let mut ya = 0.0;
                for &(row, v) in &self.cols[j] {
                    ya += y[row] * v;
                }
                let rc = (cost[j] - ya).max(0.0);
                if rc / -alphas[j] <= tie_cut {
                    j_in = Some(j);
                    break;
                }
            }
            let Some(j_in) = j_in else {
                return false;
            };
            let w = self.ftran(j_in);
            self.pivot(j_in, r_out, &w);
            *iterations += 1;
        }
        false
    }

    fn run_phase(&mut self, cost: &[f64], strategy: Strategy, iterations: &mut usize) -> PhaseOutcome {
        let m = self.m;
        let limit = *iterations + 100 * (self.n + m) + 10_000;
        let mut stall = 0usize;
        let mut bland = strategy == Strategy::Sure;
        let mut perturbed = false;
        // Pricing tolerance relative to the objective scale, so near-zero
        // objectives (late projection subproblems) do not pivot on noise.
        let cmax = cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
        let rc_cut = -RC_TOL * cmax.max(1.0);

        let outcome = loop {
            if *iterations >= limit {
                break PhaseOutcome::IterationLimit;
            }
            // BTRAN: y = c_B' B^-1.
            let mut y = vec![0.0; m];
            for r in 0..m {
                let cb = cost[self.basis[r]];
                if cb == 0.0 {
                    continue;
                }
                for cidx in 0..m {
                    y[cidx] += cb * self.binv[r * m + cidx];
                }
            }
            // Pricing over structural columns (artificials never re-enter).
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.n {
                if self.in_basis[j] {
                    continue;
                }
                let mut ya = 0.0;
                for &(row, v) in &self.cols[j] {
                    ya += y[row] * v;
                }
                let rc = cost[j] - ya;
                if rc < rc_cut {
                    if bland {
                        entering = Some((j, rc));
                        break;
                    }
                    match entering {
                        Some((_, best)) if rc >= best => {}
                        _ => entering = Some((j, rc)),
                    }
                }
            }
            let Some((j_in, rc_in)) = entering else {
                break PhaseOutcome::Optimal;
            };
            let w = self.ftran(j_in);
            // Harris-style two-pass ratio test. Basic artificials must stay
            // at level zero, so they block in both directions.
            let blocks = |r: usize, w_r: f64| -> bool {
                w_r > PIVOT_TOL || (self.basis[r] >= self.n && w_r < -PIVOT_TOL)
            };
            // Pass 1: the loosest step that keeps every row within a small
            // feasibility slack.
            let mut theta_max = f64::INFINITY;
            for r in 0..m {
                if blocks(r, w[r]) {
                    theta_max = theta_max.min((self.xb[r].max(0.0) + 1e-9) / w[r].abs());
                }
            }
            if theta_max.is_infinite() {
                // A column whose reduced cost is barely past the tolerance
                // and whose update direction vanishes numerically cannot
                // certify an unbounded ray; the solve is done to tolerance.
                if rc_in > -1e-6 {
                    break PhaseOutcome::Optimal;
                }
                if std::env::var_os("SIMPLEX_DEBUG").is_some() {
                    let wmax = w.iter().fold(0.0f64, |a, v| a.max(*v));
                    let artificials = self.basis.iter().filter(|&&j| j >= self.n).count();
                    eprintln!(
                        "simplex: unbounded ray claim: j={j_in} rc={rc_in:.3e} wmax={wmax:.3e} artificials={artificials} iter={iterations}"
                    );
                }
                break PhaseOutcome::Unbounded;
            }
            // Pass 2: among rows whose own ratio fits under the slackened
            // step, prefer the largest pivot element for stability (strict
            // lowest-index Bland order on the sure path), ties by lowest
            // basic-variable index.
            let mut r_out: Option<usize> = None;
            for r in 0..m {
                if !blocks(r, w[r]) || self.xb[r].max(0.0) / w[r].abs() > theta_max {
                    continue;
                }
                let better = match r_out {
                    None => true,
                    Some(cur) => {
                        if bland {
                            self.basis[r] < self.basis[cur]
                        } else {
                            w[r].abs() > w[cur].abs() * (1.0 + 1e-12)
                                || (w[r].abs() >= w[cur].abs() * (1.0 - 1e-12)
                                    && self.basis[r] < self.basis[cur])
                        }
                    }
                };
                if better {
                    r_out = Some(r);
                }
            }
            let r_out = r_out.expect("pass 2 finds at least the pass-1 argmin row");
            let degenerate = self.xb[r_out].max(0.0) / w[r_out].abs() <= 1e-12;
            self.pivot(j_in, r_out, &w);
            *iterations += 1;
            if degenerate {
                stall += 1;
                if strategy == Strategy::Fast {
                    if !perturbed && stall > PERTURB_AT {
                        self.perturb_rhs();
                        perturbed = true;
                        stall = 0;
                    } else if perturbed && stall > BLAND_AT {
                        bland = true;
                    }
                }
            } else {
                stall = 0;
            }
            if self.pivots_since_refactor >= REFACTOR_INTERVAL && self.refactorize().is_err() {
                // The basis went numerically singular: nothing this phase
                // produces can be trusted, restart on the next ladder rung.
                break PhaseOutcome::NeedsRestart;
            }
        };

        if perturbed && !self.restore_rhs(cost, iterations) {
            return PhaseOutcome::NeedsRestart;
        }
        outcome
    }
}
