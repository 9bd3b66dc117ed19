//! The compound reward-plus-diversity objective, its analytic gradient, and
//! the KL / Jensen-Shannon primitives.
//!
//! All logarithms are base 2, so the Jensen-Shannon divergence of two
//! distributions lies in [0, 1]. Every log argument is floored at
//! `log_epsilon`: the divergence value itself never needs the floor on the
//! occupancy polytope (midpoint mixtures keep the argument at least 1/2),
//! but the gradient at zero entries would otherwise diverge.

use serde::Serialize;
use thiserror::Error;

use crate::mdp::{MdpModel, OccupancySet};

/// Default floor inside logarithms.
pub const DEFAULT_LOG_EPSILON: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("occupancy set has {actual} members but the config expects {expected}")]
    CardinalityMismatch { expected: usize, actual: usize },
    #[error("parameter out of domain: {0}")]
    Domain(String),
}

/// Configuration of the compound objective f(rho_1..k).
///
/// `lambda` trades reward against diversity; the diversity term of the
/// objective is scaled by `2 lambda / (k (k - 1))` so the objective is
/// independent of the set cardinality. Logarithms are base 2.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ObjectiveConfig {
    pub lambda: f64,
    pub k: usize,
    pub log_epsilon: f64,
}

impl ObjectiveConfig {
    /// `k = 1` is allowed only with `lambda = 0` (no pairs to diversify).
    pub fn new(lambda: f64, k: usize) -> Result<Self, ObjectiveError> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(ObjectiveError::Domain(format!(
                "lambda must be finite and nonnegative, got {}",
                lambda
            )));
        }
        if k < 2 && !(k == 1 && lambda == 0.0) {
            return Err(ObjectiveError::Domain(format!(
                "k must be at least 2 for a diversity term (got k = {}, lambda = {})",
                k, lambda
            )));
        }
        Ok(Self {
            lambda,
            k,
            log_epsilon: DEFAULT_LOG_EPSILON,
        })
    }

    pub fn with_log_epsilon(mut self, log_epsilon: f64) -> Result<Self, ObjectiveError> {
        if !(0.0 < log_epsilon && log_epsilon < 1e-6) {
            return Err(ObjectiveError::Domain(format!(
                "log_epsilon must lie in (0, 1e-6), got {}",
                log_epsilon
            )));
        }
        self.log_epsilon = log_epsilon;
        Ok(self)
    }

    /// Weight applied to each pairwise JSD term: `2 lambda / (k (k - 1))`.
    pub fn pair_weight(&self) -> f64 {
        if self.k < 2 {
            0.0
        } else {
            2.0 * self.lambda / (self.k as f64 * (self.k as f64 - 1.0))
        }
    }
}

/// Kullback-Leibler divergence `-sum_x p(x) log2(m(x)/p(x))` with the
/// convention `0 log 0 = 0` and the log argument floored below.
pub fn kl(p: &[f64], m: &[f64]) -> Result<f64, ObjectiveError> {
    kl_eps(p, m, DEFAULT_LOG_EPSILON)
}

fn kl_eps(p: &[f64], m: &[f64], eps: f64) -> Result<f64, ObjectiveError> {
    if p.len() != m.len() {
        return Err(ObjectiveError::DimensionMismatch(format!(
            "p has {} entries, m has {}",
            p.len(),
            m.len()
        )));
    }
    let mut acc = 0.0;
    for (&px, &mx) in p.iter().zip(m) {
        if px > 0.0 {
            acc -= px * (mx.max(eps) / px).log2();
        }
    }
    Ok(acc)
}

/// Jensen-Shannon divergence with base-2 logarithms: symmetric and in
/// [0, 1], with 1 attained on disjoint supports.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64, ObjectiveError> {
    jsd_eps(p, q, DEFAULT_LOG_EPSILON)
}

fn jsd_eps(p: &[f64], q: &[f64], eps: f64) -> Result<f64, ObjectiveError> {
    if p.len() != q.len() {
        return Err(ObjectiveError::DimensionMismatch(format!(
            "p has {} entries, q has {}",
            p.len(),
            q.len()
        )));
    }
    let mut acc_p = 0.0;
    let mut acc_q = 0.0;
    for (&px, &qx) in p.iter().zip(q) {
        let mx = 0.5 * (px + qx);
        if px > 0.0 {
            acc_p -= px * (mx.max(eps) / px).log2();
        }
        if qx > 0.0 {
            acc_q -= qx * (mx.max(eps) / qx).log2();
        }
    }
    Ok(0.5 * acc_p + 0.5 * acc_q)
}

/// Sum of the members' average rewards.
pub fn cumulative_reward(set: &OccupancySet, m: &MdpModel) -> f64 {
    set.members()
        .iter()
        .map(|rho| crate::mdp::average_reward(rho, m))
        .sum()
}

/// Sum of pairwise Jensen-Shannon divergences over all unordered pairs.
pub fn cumulative_diversity(set: &OccupancySet) -> f64 {
    let k = set.k();
    let mut acc = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            acc += jsd(set.member(i).as_slice(), set.member(j).as_slice())
                .expect("members share dimensions");
        }
    }
    acc
}

/// Cumulative diversity scaled by `2 / (k (k - 1))`: the quantity the
/// experiment figures plot.
pub fn average_pairwise_diversity(set: &OccupancySet) -> f64 {
    let k = set.k();
    if k < 2 {
        return 0.0;
    }
    cumulative_diversity(set) * 2.0 / (k as f64 * (k as f64 - 1.0))
}

/// A full objective evaluation: value, its two terms, and the per-member
/// analytic gradient.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub value: f64,
    /// `(1/k) sum_i <rho_i, r>`.
    pub reward_term: f64,
    /// Unweighted cumulative pairwise JSD; the value weights it by
    /// [`ObjectiveConfig::pair_weight`].
    pub diversity_term: f64,
    pub gradient: Vec<Vec<f64>>,
}

/// Objective value on raw member vectors; extends off the simplex, which the
/// finite-difference checks rely on.
pub fn compound_value(members: &[Vec<f64>], reward: &[f64], cfg: &ObjectiveConfig) -> f64 {
    let k = members.len();
    let inv_k = 1.0 / k as f64;
    let mut reward_term = 0.0;
    for rho in members {
        let dot: f64 = rho.iter().zip(reward).map(|(x, r)| x * r).sum();
        reward_term += dot;
    }
    reward_term *= inv_k;
    let weight = cfg.pair_weight();
    let mut diversity = 0.0;
    if weight != 0.0 {
        for i in 0..k {
            for j in i + 1..k {
                diversity += jsd_eps(&members[i], &members[j], cfg.log_epsilon)
                    .expect("members share dimensions");
            }
        }
    }
    reward_term + weight * diversity
}

/// Analytic gradient on raw member vectors:
/// `grad_i = r/k + w * sum_{j != i} (1/2) log2(2 rho_i / (rho_i + rho_j))`
/// with both log arguments floored at `log_epsilon`.
pub fn compound_gradient(
    members: &[Vec<f64>],
    reward: &[f64],
    cfg: &ObjectiveConfig,
) -> Vec<Vec<f64>> {
    let k = members.len();
    let n = reward.len();
    let inv_k = 1.0 / k as f64;
    let mut gradient: Vec<Vec<f64>> =
        vec![reward.iter().map(|r| r * inv_k).collect::<Vec<f64>>(); k];
    let weight = cfg.pair_weight();
    if weight == 0.0 {
        return gradient;
    }
    let eps = cfg.log_epsilon;
    for i in 0..k {
        for j in i + 1..k {
            // One pass per pair fills both sides: the j-gradient mirrors the
            // i-formula with roles swapped.
            let (left, right) = gradient.split_at_mut(j);
            let gi = &mut left[i];
            let gj = &mut right[0];
            let (pi, pj) = (&members[i], &members[j]);
            for x in 0..n {
                let den = (pi[x] + pj[x]).max(eps);
                gi[x] += weight * 0.5 * ((2.0 * pi[x]).max(eps) / den).log2();
                gj[x] += weight * 0.5 * ((2.0 * pj[x]).max(eps) / den).log2();
            }
        }
    }
    gradient
}

/// Evaluates the compound objective and its gradient on an occupancy set.
pub fn eval_f(
    set: &OccupancySet,
    m: &MdpModel,
    cfg: &ObjectiveConfig,
) -> Result<ObjectiveEval, ObjectiveError> {
    if set.k() != cfg.k {
        return Err(ObjectiveError::CardinalityMismatch {
            expected: cfg.k,
            actual: set.k(),
        });
    }
    if set.member(0).as_slice().len() != m.num_state_actions() {
        return Err(ObjectiveError::DimensionMismatch(
            "occupancy set does not match the model".into(),
        ));
    }
    let members: Vec<Vec<f64>> = set.members().iter().map(|r| r.as_slice().to_vec()).collect();
    let reward = m.reward_vector();
    let inv_k = 1.0 / cfg.k as f64;
    let mut reward_term = 0.0;
    for rho in &members {
        reward_term += rho.iter().zip(reward).map(|(x, r)| x * r).sum::<f64>();
    }
    reward_term *= inv_k;
    let mut diversity_term = 0.0;
    for i in 0..cfg.k {
        for j in i + 1..cfg.k {
            diversity_term += jsd_eps(&members[i], &members[j], cfg.log_epsilon)?;
        }
    }
    let value = reward_term + cfg.pair_weight() * diversity_term;
    let gradient = compound_gradient(&members, reward, cfg);
    Ok(ObjectiveEval {
        value,
        reward_term,
        diversity_term,
        gradient,
    })
}

/// Lemma-style Lipschitz bound `lambda (1 + delta) / (4 delta^2)` for the
/// gradient of f over the delta-restricted polytope.
pub fn lipschitz_bound(lambda: f64, delta: f64) -> Result<f64, ObjectiveError> {
    if !(0.0 < delta && delta < 1.0) {
        return Err(ObjectiveError::Domain(format!(
            "delta must lie in (0, 1), got {}",
            delta
        )));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(ObjectiveError::Domain(format!(
            "lambda must be finite and nonnegative, got {}",
            lambda
        )));
    }
    Ok(lambda * (1.0 + delta) / (4.0 * delta * delta))
}
