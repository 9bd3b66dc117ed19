//! MDP data model, occupancy measures, stationary policies, and the
//! conversions between them.
//!
//! All types are immutable after construction and all operations are pure
//! functions, so everything here is safe to share across threads.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for transition-row sums and policy-row sums.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Tolerance for the total mass of an occupancy measure.
pub const MASS_TOL: f64 = 1e-8;
/// Tolerance for per-state flow-balance residuals of an occupancy measure.
pub const FLOW_TOL: f64 = 1e-7;
/// Entries of an occupancy measure may undershoot zero by at most this much;
/// they are clamped to zero on construction.
pub const NEG_TOL: f64 = 1e-9;
/// State marginals below this threshold are treated as transient when
/// extracting a policy from an occupancy measure.
pub const TRANSIENT_THRESHOLD: f64 = 1e-12;
/// Largest state count for which the stationary distribution is obtained by
/// a direct linear solve; larger chains fall back to damped power iteration.
pub const DIRECT_SOLVE_MAX_STATES: usize = 2000;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("model failed validation: {0}")]
    InvalidModel(ValidationReport),
    #[error("induced Markov chain has {num_recurrent_classes} recurrent classes; occupancy measure is not unique")]
    Multichain { num_recurrent_classes: usize },
    #[error("stationary distribution solve failed: {0}")]
    StationarySolve(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),
}

/// A single violated invariant found by [`MdpModel::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    /// Transition row (s, a) does not sum to one.
    RowSum { state: usize, action: usize, sum: f64 },
    /// A transition probability lies outside [0, 1].
    ProbRange {
        state: usize,
        action: usize,
        next_state: usize,
        value: f64,
    },
    /// reward(s, a) disagrees with the P-expectation of the raw per-transition rewards.
    RewardMismatch {
        state: usize,
        action: usize,
        expected: f64,
        actual: f64,
    },
    /// A non-finite entry somewhere in the model.
    NonFinite { what: String },
}

/// Report-style validation output: empty iff the model is valid.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        write!(f, "{} violation(s):", self.violations.len())?;
        for v in &self.violations {
            write!(f, " {:?};", v)?;
        }
        Ok(())
    }
}

/// A finite MDP with expected one-step rewards r(s, a).
///
/// Transitions are stored dense as `transition[(s*A + a)*S + s']`. When the
/// model is built from per-transition rewards R(s, a, s'), those are kept in
/// `raw_reward` and `reward` holds their P-expectation; the planning
/// machinery only ever consumes `reward`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpModel {
    num_states: usize,
    num_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    raw_reward: Option<Vec<f64>>,
    labels: Option<Vec<String>>,
}

impl MdpModel {
    /// Builds a model from dense transitions and expected rewards r(s, a).
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
    ) -> Result<Self, MdpError> {
        let m = Self::assemble(num_states, num_actions, transition, reward, None, None)?;
        let report = m.validate();
        if !report.is_valid() {
            return Err(MdpError::InvalidModel(report));
        }
        Ok(m)
    }

    /// Builds a model from per-transition rewards R(s, a, s'); r(s, a) is the
    /// P-expectation of the triple rewards.
    pub fn from_raw_rewards(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        raw_reward: Vec<f64>,
    ) -> Result<Self, MdpError> {
        if raw_reward.len() != num_states * num_actions * num_states {
            return Err(MdpError::Dimension(format!(
                "raw_reward has {} entries, expected {}",
                raw_reward.len(),
                num_states * num_actions * num_states
            )));
        }
        let mut reward = vec![0.0; num_states * num_actions];
        for sa in 0..num_states * num_actions {
            let mut acc = 0.0;
            for s2 in 0..num_states {
                acc += transition[sa * num_states + s2] * raw_reward[sa * num_states + s2];
            }
            reward[sa] = acc;
        }
        let m = Self::assemble(
            num_states,
            num_actions,
            transition,
            reward,
            Some(raw_reward),
            None,
        )?;
        let report = m.validate();
        if !report.is_valid() {
            return Err(MdpError::InvalidModel(report));
        }
        Ok(m)
    }

    fn assemble(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        raw_reward: Option<Vec<f64>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self, MdpError> {
        if num_states == 0 || num_actions == 0 {
            return Err(MdpError::Dimension(
                "num_states and num_actions must be positive".into(),
            ));
        }
        if transition.len() != num_states * num_actions * num_states {
            return Err(MdpError::Dimension(format!(
                "transition has {} entries, expected {}",
                transition.len(),
                num_states * num_actions * num_states
            )));
        }
        if reward.len() != num_states * num_actions {
            return Err(MdpError::Dimension(format!(
                "reward has {} entries, expected {}",
                reward.len(),
                num_states * num_actions
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
            transition,
            reward,
            raw_reward,
            labels,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Number of state-action pairs |S| * |A|.
    pub fn num_state_actions(&self) -> usize {
        self.num_states * self.num_actions
    }

    /// Flat index of the pair (s, a).
    #[inline]
    pub fn sa_index(&self, state: usize, action: usize) -> usize {
        state * self.num_actions + action
    }

    /// P(s' | s, a).
    #[inline]
    pub fn prob(&self, state: usize, action: usize, next_state: usize) -> f64 {
        self.transition[(state * self.num_actions + action) * self.num_states + next_state]
    }

    /// r(s, a).
    #[inline]
    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.reward[state * self.num_actions + action]
    }

    /// The dense reward vector indexed by sa_index.
    pub fn reward_vector(&self) -> &[f64] {
        &self.reward
    }

    pub fn raw_reward(&self) -> Option<&[f64]> {
        self.raw_reward.as_deref()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Checks every structural invariant and reports all violations with
    /// their indices; the report is empty iff the model is valid.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let sa = self.sa_index(s, a);
                let mut sum = 0.0;
                for s2 in 0..self.num_states {
                    let p = self.transition[sa * self.num_states + s2];
                    if !p.is_finite() {
                        violations.push(Violation::NonFinite {
                            what: format!("P({}|{},{})", s2, s, a),
                        });
                    } else if !(0.0..=1.0).contains(&p) {
                        violations.push(Violation::ProbRange {
                            state: s,
                            action: a,
                            next_state: s2,
                            value: p,
                        });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    violations.push(Violation::RowSum {
                        state: s,
                        action: a,
                        sum,
                    });
                }
                if !self.reward[sa].is_finite() {
                    violations.push(Violation::NonFinite {
                        what: format!("r({},{})", s, a),
                    });
                }
                if let Some(raw) = &self.raw_reward {
                    let mut expected = 0.0;
                    for s2 in 0..self.num_states {
                        expected += self.transition[sa * self.num_states + s2]
                            * raw[sa * self.num_states + s2];
                    }
                    if (expected - self.reward[sa]).abs() > ROW_SUM_TOL {
                        violations.push(Violation::RewardMismatch {
                            state: s,
                            action: a,
                            expected,
                            actual: self.reward[sa],
                        });
                    }
                }
            }
        }
        ValidationReport { violations }
    }

    /// Adjacency of the support digraph: edge s -> s' iff max_a P(s'|s,a) > 0.
    fn support_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_states];
        for s in 0..self.num_states {
            for s2 in 0..self.num_states {
                let reachable = (0..self.num_actions).any(|a| self.prob(s, a, s2) > 0.0);
                if reachable {
                    adj[s].push(s2);
                }
            }
        }
        adj
    }
}

/// Outcome of the weak-accessibility check.
#[derive(Debug, Clone)]
pub struct WaReport {
    /// True when the sufficient condition holds: all states lying on a cycle
    /// of the support digraph form a single strongly connected component that
    /// is reachable from every state.
    pub satisfied: bool,
    /// States not in the recurrent candidate component.
    pub transient_candidates: Vec<usize>,
}

/// Sufficient weak-accessibility check on the support digraph
/// (edge s -> s' iff some action reaches s' from s with positive probability).
pub fn check_weak_accessibility(m: &MdpModel) -> WaReport {
    let adj = m.support_adjacency();
    let n = m.num_states();
    let mut graph = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for (s, outs) in adj.iter().enumerate() {
        for &s2 in outs {
            graph.add_edge(nodes[s], nodes[s2], ());
        }
    }
    let sccs = tarjan_scc(&graph);
    // A state lies on a cycle iff its SCC has size >= 2 or it has a self-loop.
    let mut cycle_sccs = Vec::new();
    for comp in &sccs {
        let on_cycle = comp.len() >= 2
            || adj[comp[0].index()].contains(&comp[0].index());
        if on_cycle {
            cycle_sccs.push(comp);
        }
    }
    if cycle_sccs.len() != 1 {
        // Zero cycle components cannot happen in a finite stochastic model,
        // more than one means several closed classes are possible.
        let transient = (0..n).collect();
        return WaReport {
            satisfied: false,
            transient_candidates: transient,
        };
    }
    let core: Vec<usize> = cycle_sccs[0].iter().map(|ix| ix.index()).collect();
    let mut in_core = vec![false; n];
    for &s in &core {
        in_core[s] = true;
    }
    // Reverse reachability: every state must reach the core.
    let mut radj = vec![Vec::new(); n];
    for (s, outs) in adj.iter().enumerate() {
        for &s2 in outs {
            radj[s2].push(s);
        }
    }
    let mut reaches = vec![false; n];
    let mut queue: VecDeque<usize> = core.iter().copied().collect();
    for &s in &core {
        reaches[s] = true;
    }
    while let Some(s) = queue.pop_front() {
        for &prev in &radj[s] {
            if !reaches[prev] {
                reaches[prev] = true;
                queue.push_back(prev);
            }
        }
    }
    let satisfied = reaches.iter().all(|&r| r);
    let transient_candidates = (0..n).filter(|&s| !in_core[s]).collect();
    WaReport {
        satisfied,
        transient_candidates,
    }
}

/// A stationary stochastic policy: one action distribution per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryPolicy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl StationaryPolicy {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self, MdpError> {
        if probs.len() != num_states * num_actions {
            return Err(MdpError::Dimension(format!(
                "policy has {} entries, expected {}",
                probs.len(),
                num_states * num_actions
            )));
        }
        for s in 0..num_states {
            let row = &probs[s * num_actions..(s + 1) * num_actions];
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL || row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(MdpError::Dimension(format!(
                    "policy row {} is not a probability distribution (sum {})",
                    s, sum
                )));
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            probs,
        })
    }

    /// The uniform policy over actions in every state.
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    /// The deterministic policy taking `actions[s]` in state s.
    pub fn deterministic(num_states: usize, num_actions: usize, actions: &[usize]) -> Self {
        let mut probs = vec![0.0; num_states * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[s * num_actions + a] = 1.0;
        }
        Self {
            num_states,
            num_actions,
            probs,
        }
    }

    #[inline]
    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.probs[state * self.num_actions + action]
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

/// Residuals of the occupancy-measure invariants, for diagnostics and tests.
#[derive(Debug, Clone, Copy)]
pub struct FeasibilityResiduals {
    pub min_entry: f64,
    pub mass_error: f64,
    pub max_flow_error: f64,
}

impl FeasibilityResiduals {
    pub fn within(&self, neg_tol: f64, mass_tol: f64, flow_tol: f64) -> bool {
        self.min_entry >= -neg_tol && self.mass_error <= mass_tol && self.max_flow_error <= flow_tol
    }
}

/// A state-action occupancy measure: nonnegative, sums to one, and satisfies
/// per-state flow balance for its MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyMeasure {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

/// Flow residuals of an arbitrary vector against a model, without
/// constructing an `OccupancyMeasure`.
pub fn occupancy_residuals(m: &MdpModel, values: &[f64]) -> FeasibilityResiduals {
    let ns = m.num_states();
    let na = m.num_actions();
    let min_entry = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mass: f64 = values.iter().sum();
    let mut inflow = vec![0.0; ns];
    for s in 0..ns {
        for a in 0..na {
            let v = values[s * na + a];
            if v == 0.0 {
                continue;
            }
            let base = (s * na + a) * ns;
            for s2 in 0..ns {
                inflow[s2] += m.transition[base + s2] * v;
            }
        }
    }
    let mut max_flow_error: f64 = 0.0;
    for s in 0..ns {
        let out: f64 = values[s * na..(s + 1) * na].iter().sum();
        max_flow_error = max_flow_error.max((out - inflow[s]).abs());
    }
    FeasibilityResiduals {
        min_entry,
        mass_error: (mass - 1.0).abs(),
        max_flow_error,
    }
}

impl OccupancyMeasure {
    /// Validates the vector against the model's invariants; entries in
    /// [-1e-9, 0) are clamped to zero.
    pub fn from_values(m: &MdpModel, mut values: Vec<f64>) -> Result<Self, MdpError> {
        if values.len() != m.num_state_actions() {
            return Err(MdpError::Dimension(format!(
                "occupancy has {} entries, expected {}",
                values.len(),
                m.num_state_actions()
            )));
        }
        let res = occupancy_residuals(m, &values);
        if !res.within(NEG_TOL, MASS_TOL, FLOW_TOL) {
            return Err(MdpError::Dimension(format!(
                "occupancy violates invariants: min entry {:.3e}, mass error {:.3e}, flow error {:.3e}",
                res.min_entry, res.mass_error, res.max_flow_error
            )));
        }
        for v in values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(Self {
            num_states: m.num_states(),
            num_actions: m.num_actions(),
            values,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn value(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.num_actions + action]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// State marginal rho(s) = sum_a rho(s, a).
    pub fn state_occupancy(&self) -> Vec<f64> {
        let mut marginal = vec![0.0; self.num_states];
        for s in 0..self.num_states {
            marginal[s] = self.values[s * self.num_actions..(s + 1) * self.num_actions]
                .iter()
                .sum();
        }
        marginal
    }

    pub fn residuals(&self, m: &MdpModel) -> FeasibilityResiduals {
        occupancy_residuals(m, &self.values)
    }
}

/// An ordered set of k occupancy measures over the same model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OccupancySet {
    members: Vec<OccupancyMeasure>,
}

impl OccupancySet {
    pub fn new(members: Vec<OccupancyMeasure>) -> Result<Self, MdpError> {
        if members.is_empty() {
            return Err(MdpError::Dimension("occupancy set may not be empty".into()));
        }
        let (ns, na) = (members[0].num_states(), members[0].num_actions());
        if members
            .iter()
            .any(|r| r.num_states() != ns || r.num_actions() != na)
        {
            return Err(MdpError::Dimension(
                "all members must share the same state/action dimensions".into(),
            ));
        }
        Ok(Self { members })
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[OccupancyMeasure] {
        &self.members
    }

    pub fn member(&self, i: usize) -> &OccupancyMeasure {
        &self.members[i]
    }
}

/// Long-run average reward <rho, r>.
pub fn average_reward(rho: &OccupancyMeasure, m: &MdpModel) -> f64 {
    debug_assert_eq!(rho.as_slice().len(), m.num_state_actions());
    rho.as_slice()
        .iter()
        .zip(m.reward_vector())
        .map(|(x, r)| x * r)
        .sum()
}

/// Recurrent-class structure of the chain induced by a policy.
fn induced_recurrent_classes(m: &MdpModel, pi: &StationaryPolicy) -> Vec<Vec<usize>> {
    let n = m.num_states();
    let mut adj = vec![Vec::new(); n];
    for s in 0..n {
        for s2 in 0..n {
            let p: f64 = (0..m.num_actions())
                .map(|a| pi.prob(s, a) * m.prob(s, a, s2))
                .sum();
            if p > 0.0 {
                adj[s].push(s2);
            }
        }
    }
    let mut graph = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for (s, outs) in adj.iter().enumerate() {
        for &s2 in outs {
            graph.add_edge(nodes[s], nodes[s2], ());
        }
    }
    let sccs = tarjan_scc(&graph);
    let mut comp_of = vec![0usize; n];
    for (ci, comp) in sccs.iter().enumerate() {
        for ix in comp {
            comp_of[ix.index()] = ci;
        }
    }
    // Recurrent classes are SCCs with no edge leaving the component.
    let mut closed = vec![true; sccs.len()];
    for (s, outs) in adj.iter().enumerate() {
        for &s2 in outs {
            if comp_of[s] != comp_of[s2] {
                closed[comp_of[s]] = false;
            }
        }
    }
    sccs.iter()
        .enumerate()
        .filter(|(ci, _)| closed[*ci])
        .map(|(_, comp)| comp.iter().map(|ix| ix.index()).collect())
        .collect()
}

/// Row-stochastic transition matrix of the chain induced by `pi`,
/// stored as `p[s * n + s2]`.
fn induced_chain(m: &MdpModel, pi: &StationaryPolicy) -> Vec<f64> {
    let n = m.num_states();
    let na = m.num_actions();
    let mut p = vec![0.0; n * n];
    for s in 0..n {
        for a in 0..na {
            let w = pi.prob(s, a);
            if w == 0.0 {
                continue;
            }
            let base = (s * na + a) * n;
            for s2 in 0..n {
                p[s * n + s2] += w * m.transition[base + s2];
            }
        }
    }
    p
}

/// Stationary distribution of a row-stochastic matrix by direct linear solve:
/// d (P - I) = 0 with the last equation replaced by sum(d) = 1.
fn stationary_direct(p: &[f64], n: usize) -> Result<Vec<f64>, MdpError> {
    use nalgebra::{DMatrix, DVector};
    // Columns of (P^T - I), last row overwritten with ones.
    let mut mat = DMatrix::<f64>::zeros(n, n);
    for s in 0..n {
        for s2 in 0..n {
            mat[(s2, s)] = p[s * n + s2];
        }
        mat[(s, s)] -= 1.0;
    }
    for s in 0..n {
        mat[(n - 1, s)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let lu = mat.lu();
    let d = lu
        .solve(&rhs)
        .ok_or_else(|| MdpError::StationarySolve("singular stationary system".into()))?;
    let mut out: Vec<f64> = d.iter().copied().collect();
    // Numerical zeros on transient states may come out slightly negative.
    for v in out.iter_mut() {
        if *v < 0.0 {
            if *v < -1e-9 {
                return Err(MdpError::StationarySolve(format!(
                    "negative stationary mass {:.3e}",
                    *v
                )));
            }
            *v = 0.0;
        }
    }
    let total: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= total;
    }
    Ok(out)
}

/// Damped power iteration d <- (d + dP) / 2, which converges for periodic
/// chains as well; used above [`DIRECT_SOLVE_MAX_STATES`] states.
fn stationary_power(p: &[f64], n: usize, tol: f64) -> Result<Vec<f64>, MdpError> {
    let mut d = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..2_000_000 {
        for v in next.iter_mut() {
            *v = 0.0;
        }
        for s in 0..n {
            let w = d[s];
            if w == 0.0 {
                continue;
            }
            for s2 in 0..n {
                next[s2] += w * p[s * n + s2];
            }
        }
        let mut diff: f64 = 0.0;
        for s in 0..n {
            let blended = 0.5 * (d[s] + next[s]);
            diff = diff.max((blended - d[s]).abs());
            d[s] = blended;
        }
        if diff <= tol {
            let total: f64 = d.iter().sum();
            for v in d.iter_mut() {
                *v /= total;
            }
            return Ok(d);
        }
    }
    Err(MdpError::StationarySolve(
        "power iteration did not converge".into(),
    ))
}

/// Maps a policy to its occupancy measure rho(s, a) = d(s) pi(s, a), where d
/// is the stationary state distribution of the induced chain.
///
/// Fails with [`MdpError::Multichain`] when the induced chain has more than
/// one recurrent class, in which case the occupancy measure is not unique.
pub fn policy_to_occupancy(m: &MdpModel, pi: &StationaryPolicy) -> Result<OccupancyMeasure, MdpError> {
    if pi.num_states() != m.num_states() || pi.num_actions() != m.num_actions() {
        return Err(MdpError::Dimension(
            "policy dimensions do not match the model".into(),
        ));
    }
    let classes = induced_recurrent_classes(m, pi);
    if classes.len() != 1 {
        return Err(MdpError::Multichain {
            num_recurrent_classes: classes.len(),
        });
    }
    let n = m.num_states();
    let chain = induced_chain(m, pi);
    let d = if n <= DIRECT_SOLVE_MAX_STATES {
        stationary_direct(&chain, n)?
    } else {
        stationary_power(&chain, n, 1e-12)?
    };
    let na = m.num_actions();
    let mut values = vec![0.0; n * na];
    for s in 0..n {
        for a in 0..na {
            values[s * na + a] = d[s] * pi.prob(s, a);
        }
    }
    OccupancyMeasure::from_values(m, values)
}

/// Extracts the stationary policy pi(s, a) = rho(s, a) / rho(s) on states
/// with positive marginal; on (transient) states with marginal below
/// [`TRANSIENT_THRESHOLD`] the policy is uniform over actions, which does not
/// affect long-run behavior.
pub fn occupancy_to_policy(rho: &OccupancyMeasure) -> StationaryPolicy {
    let ns = rho.num_states();
    let na = rho.num_actions();
    let marginal = rho.state_occupancy();
    let mut probs = vec![0.0; ns * na];
    for s in 0..ns {
        if marginal[s] > TRANSIENT_THRESHOLD {
            for a in 0..na {
                probs[s * na + a] = rho.value(s, a) / marginal[s];
            }
        } else {
            for a in 0..na {
                probs[s * na + a] = 1.0 / na as f64;
            }
        }
    }
    StationaryPolicy {
        num_states: ns,
        num_actions: na,
        probs,
    }
}

// --- JSON interchange -------------------------------------------------------

/// Reward payload of the interchange format: either expected rewards
/// `[s][a]` or per-transition rewards `[s][a][s']`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RewardField {
    Expected(Vec<Vec<f64>>),
    PerTransition(Vec<Vec<Vec<f64>>>),
}

#[derive(Debug, Serialize, Deserialize)]
struct MdpFile {
    num_states: usize,
    num_actions: usize,
    transition: Vec<Vec<Vec<f64>>>,
    reward: RewardField,
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

/// Loads a model from the JSON interchange format, enforcing all invariants.
pub fn load_mdp(path: &Path) -> Result<MdpModel, MdpError> {
    let text = std::fs::read_to_string(path)?;
    parse_mdp(&text)
}

/// Parses the JSON interchange format from a string.
pub fn parse_mdp(text: &str) -> Result<MdpModel, MdpError> {
    let file: MdpFile = serde_json::from_str(text)?;
    let ns = file.num_states;
    let na = file.num_actions;
    let mut transition = Vec::with_capacity(ns * na * ns);
    if file.transition.len() != ns {
        return Err(MdpError::Dimension("transition outer length != num_states".into()));
    }
    for row_s in &file.transition {
        if row_s.len() != na {
            return Err(MdpError::Dimension("transition action length != num_actions".into()));
        }
        for row_a in row_s {
            if row_a.len() != ns {
                return Err(MdpError::Dimension("transition inner length != num_states".into()));
            }
            transition.extend_from_slice(row_a);
        }
    }
    let model = match file.reward {
        RewardField::Expected(rows) => {
            let mut reward = Vec::with_capacity(ns * na);
            for row in &rows {
                reward.extend_from_slice(row);
            }
            MdpModel::new(ns, na, transition, reward)?
        }
        RewardField::PerTransition(rows) => {
            let mut raw = Vec::with_capacity(ns * na * ns);
            for row_s in &rows {
                for row_a in row_s {
                    raw.extend_from_slice(row_a);
                }
            }
            MdpModel::from_raw_rewards(ns, na, transition, raw)?
        }
    };
    let mut model = model;
    model.labels = file.labels;
    Ok(model)
}

/// Writes a model in the JSON interchange format.
pub fn save_mdp(m: &MdpModel, path: &Path) -> Result<(), MdpError> {
    let ns = m.num_states();
    let na = m.num_actions();
    let transition: Vec<Vec<Vec<f64>>> = (0..ns)
        .map(|s| {
            (0..na)
                .map(|a| (0..ns).map(|s2| m.prob(s, a, s2)).collect())
                .collect()
        })
        .collect();
    let reward = match m.raw_reward() {
        Some(raw) => RewardField::PerTransition(
            (0..ns)
                .map(|s| {
                    (0..na)
                        .map(|a| raw[(s * na + a) * ns..(s * na + a + 1) * ns].to_vec())
                        .collect()
                })
                .collect(),
        ),
        None => RewardField::Expected(
            (0..ns)
                .map(|s| (0..na).map(|a| m.reward(s, a)).collect())
                .collect(),
        ),
    };
    let file = MdpFile {
        num_states: ns,
        num_actions: na,
        transition,
        reward,
        labels: m.labels().map(|l| l.to_vec()),
    };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Two-state, two-action model: action 0 moves to the other state,
    /// action 1 stays put.
    fn two_state_mdp() -> MdpModel {
        let mut t = vec![0.0; 2 * 2 * 2];
        let mut set = |s: usize, a: usize, s2: usize, p: f64| t[(s * 2 + a) * 2 + s2] = p;
        set(0, 0, 1, 1.0);
        set(0, 1, 0, 1.0);
        set(1, 0, 0, 1.0);
        set(1, 1, 1, 1.0);
        let r = vec![1.0, 0.0, 2.0, -1.0];
        MdpModel::new(2, 2, t, r).unwrap()
    }

    pub(crate) fn random_dense_mdp(rng: &mut ChaCha8Rng, ns: usize, na: usize) -> MdpModel {
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

    pub(crate) fn random_policy(rng: &mut ChaCha8Rng, ns: usize, na: usize) -> StationaryPolicy {
        let mut probs = vec![0.0; ns * na];
        for s in 0..ns {
            let mut row: Vec<f64> = (0..na).map(|_| -f64::ln(rng.gen_range(1e-12..1.0f64))).collect();
            let sum: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v /= sum;
            }
            probs[s * na..(s + 1) * na].copy_from_slice(&row);
        }
        StationaryPolicy::new(ns, na, probs).unwrap()
    }

    #[test]
    fn validate_accepts_proper_model() {
        assert!(two_state_mdp().validate().is_valid());
    }

    #[test]
    fn validate_reports_bad_row_sum_with_indices() {
        let mut t = vec![0.0; 2 * 1 * 2];
        t[0] = 0.4;
        t[1] = 0.5; // sums to 0.9
        t[2] = 0.0;
        t[3] = 1.0;
        let m = MdpModel::assemble(2, 1, t, vec![0.0, 0.0], None, None).unwrap();
        let report = m.validate();
        assert!(!report.is_valid());
        assert!(report.violations.iter().any(|v| matches!(
            v,
            Violation::RowSum { state: 0, action: 0, .. }
        )));
    }

    #[test]
    fn validate_reports_out_of_range_probability() {
        let mut t = vec![0.0; 1 * 1 * 1];
        t[0] = 1.5;
        let m = MdpModel::assemble(1, 1, t, vec![0.0], None, None).unwrap();
        let report = m.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::ProbRange { value, .. } if *value == 1.5)));
    }

    #[test]
    fn expected_reward_matches_raw_expectation() {
        let t = vec![0.3, 0.7, 1.0, 0.0];
        let raw = vec![10.0, -10.0, 1.0, 2.0];
        let m = MdpModel::from_raw_rewards(2, 1, t, raw).unwrap();
        assert_abs_diff_eq!(m.reward(0, 0), 0.3 * 10.0 + 0.7 * (-10.0), epsilon = 1e-12);
        assert_abs_diff_eq!(m.reward(1, 0), 1.0, epsilon = 1e-12);
        assert!(m.validate().is_valid());
    }

    #[test]
    fn wa_holds_for_two_state_cycle() {
        let t = vec![0.0, 1.0, 1.0, 0.0]; // 2 states, 1 action, deterministic swap
        let m = MdpModel::new(2, 1, t, vec![0.0, 0.0]).unwrap();
        let report = check_weak_accessibility(&m);
        assert!(report.satisfied);
        assert!(report.transient_candidates.is_empty());
    }

    #[test]
    fn wa_fails_for_two_absorbing_states() {
        let t = vec![1.0, 0.0, 0.0, 1.0];
        let m = MdpModel::new(2, 1, t, vec![0.0, 0.0]).unwrap();
        let report = check_weak_accessibility(&m);
        assert!(!report.satisfied);
    }

    #[test]
    fn occupancy_of_alternating_chain_is_uniform_on_chosen_pairs() {
        let m = two_state_mdp();
        // Always pick action 0: deterministic alternation between the states.
        let pi = StationaryPolicy::deterministic(2, 2, &[0, 0]);
        let rho = policy_to_occupancy(&m, &pi).unwrap();
        assert_abs_diff_eq!(rho.value(0, 0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.value(1, 0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.value(0, 1), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn occupancy_concentrates_on_absorbing_self_loop() {
        let m = two_state_mdp();
        // State 1 self-loops under action 1; state 0 routes into state 1.
        let pi = StationaryPolicy::deterministic(2, 2, &[0, 1]);
        let rho = policy_to_occupancy(&m, &pi).unwrap();
        assert_abs_diff_eq!(rho.value(1, 1), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.value(0, 0), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn multichain_policy_is_rejected() {
        let m = two_state_mdp();
        // Action 1 in both states: two absorbing self-loops.
        let pi = StationaryPolicy::deterministic(2, 2, &[1, 1]);
        match policy_to_occupancy(&m, &pi) {
            Err(MdpError::Multichain {
                num_recurrent_classes,
            }) => assert_eq!(num_recurrent_classes, 2),
            other => panic!("expected Multichain, got {:?}", other),
        }
    }

    #[test]
    fn occupancy_matches_monte_carlo_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_dense_mdp(&mut rng, 4, 2);
        let pi = random_policy(&mut rng, 4, 2);
        let rho = policy_to_occupancy(&m, &pi).unwrap();

        // Independent oracle: simulate a long trajectory and count visits.
        let mut sim = ChaCha8Rng::seed_from_u64(1234);
        let mut counts = vec![0u64; 4 * 2];
        let mut s = 0usize;
        let steps = 1_000_000u64;
        for _ in 0..steps {
            let mut u: f64 = sim.gen();
            let mut a = 0;
            for cand in 0..2 {
                u -= pi.prob(s, cand);
                if u <= 0.0 {
                    a = cand;
                    break;
                }
                a = cand;
            }
            counts[s * 2 + a] += 1;
            let mut v: f64 = sim.gen();
            let mut s2 = 0;
            for cand in 0..4 {
                v -= m.prob(s, a, cand);
                if v <= 0.0 {
                    s2 = cand;
                    break;
                }
                s2 = cand;
            }
            s = s2;
        }
        for sa in 0..8 {
            let freq = counts[sa] as f64 / steps as f64;
            assert!(
                (freq - rho.as_slice()[sa]).abs() < 1e-2,
                "pair {} empirical {} vs analytic {}",
                sa,
                freq,
                rho.as_slice()[sa]
            );
        }
    }

    #[test]
    fn policy_extraction_from_uniform_occupancy_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_dense_mdp(&mut rng, 3, 2);
        let pi = random_policy(&mut rng, 3, 2);
        let rho = policy_to_occupancy(&m, &pi).unwrap();
        let recovered = occupancy_to_policy(&rho);
        for s in 0..3 {
            for a in 0..2 {
                assert_abs_diff_eq!(recovered.prob(s, a), pi.prob(s, a), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn zero_mass_state_gets_uniform_policy() {
        let m = two_state_mdp();
        let pi = StationaryPolicy::deterministic(2, 2, &[0, 1]);
        let rho = policy_to_occupancy(&m, &pi).unwrap();
        // State 0 is transient (all mass in state 1).
        let extracted = occupancy_to_policy(&rho);
        assert_abs_diff_eq!(extracted.prob(0, 0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(extracted.prob(0, 1), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn occupancy_roundtrip_on_random_unichain() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let m = random_dense_mdp(&mut rng, 4, 3);
            let pi = random_policy(&mut rng, 4, 3);
            let rho = policy_to_occupancy(&m, &pi).unwrap();
            let rho2 = policy_to_occupancy(&m, &occupancy_to_policy(&rho)).unwrap();
            for sa in 0..12 {
                assert_abs_diff_eq!(rho.as_slice()[sa], rho2.as_slice()[sa], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn average_reward_zero_and_point_mass() {
        let m = two_state_mdp();
        let zero_r = MdpModel::new(
            2,
            2,
            (0..8).map(|i| m.transition[i]).collect(),
            vec![0.0; 4],
        )
        .unwrap();
        let pi = StationaryPolicy::deterministic(2, 2, &[0, 0]);
        let rho = policy_to_occupancy(&zero_r, &pi).unwrap();
        assert_eq!(average_reward(&rho, &zero_r), 0.0);

        // Point mass on (1, 1) via the absorbing policy.
        let pi = StationaryPolicy::deterministic(2, 2, &[0, 1]);
        let rho = policy_to_occupancy(&m, &pi).unwrap();
        assert_abs_diff_eq!(average_reward(&rho, &m), m.reward(1, 1), epsilon = 1e-12);
    }

    #[test]
    fn average_reward_is_linear_in_rho() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let m = random_dense_mdp(&mut rng, 4, 2);
        let r1 = policy_to_occupancy(&m, &random_policy(&mut rng, 4, 2)).unwrap();
        let r2 = policy_to_occupancy(&m, &random_policy(&mut rng, 4, 2)).unwrap();
        let alpha = 0.37;
        let mixed: Vec<f64> = r1
            .as_slice()
            .iter()
            .zip(r2.as_slice())
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect();
        let mix = OccupancyMeasure::from_values(&m, mixed).unwrap();
        let lhs = average_reward(&mix, &m);
        let rhs = alpha * average_reward(&r1, &m) + (1.0 - alpha) * average_reward(&r2, &m);
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
    }

    #[test]
    fn state_occupancy_marginal_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let m = random_dense_mdp(&mut rng, 5, 2);
        let rho = policy_to_occupancy(&m, &random_policy(&mut rng, 5, 2)).unwrap();
        let marginal = rho.state_occupancy();
        let total: f64 = marginal.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn power_iteration_agrees_with_direct_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let m = random_dense_mdp(&mut rng, 5, 2);
        let pi = random_policy(&mut rng, 5, 2);
        let chain = induced_chain(&m, &pi);
        let direct = stationary_direct(&chain, 5).unwrap();
        let power = stationary_power(&chain, 5, 1e-13).unwrap();
        for s in 0..5 {
            assert_abs_diff_eq!(direct[s], power[s], epsilon = 1e-9);
        }
    }

    #[test]
    fn json_roundtrip_both_reward_forms() {
        let dir = tempfile::tempdir().unwrap();
        let m = two_state_mdp();
        let path = dir.path().join("mdp.json");
        save_mdp(&m, &path).unwrap();
        let loaded = load_mdp(&path).unwrap();
        assert_eq!(loaded.num_states(), 2);
        assert_eq!(loaded.reward(1, 0), 2.0);

        let t = vec![0.3, 0.7, 1.0, 0.0];
        let raw = vec![10.0, -10.0, 1.0, 2.0];
        let m2 = MdpModel::from_raw_rewards(2, 1, t, raw).unwrap();
        let path2 = dir.path().join("mdp_raw.json");
        save_mdp(&m2, &path2).unwrap();
        let loaded2 = load_mdp(&path2).unwrap();
        assert!(loaded2.raw_reward().is_some());
        assert_abs_diff_eq!(loaded2.reward(0, 0), -4.0, epsilon = 1e-12);
    }

    #[test]
    fn loader_rejects_invalid_rows() {
        let text = r#"{
            "num_states": 2, "num_actions": 1,
            "transition": [[[0.4, 0.5]], [[0.0, 1.0]]],
            "reward": [[0.0], [1.0]]
        }"#;
        assert!(matches!(parse_mdp(text), Err(MdpError::InvalidModel(_))));
    }
}
