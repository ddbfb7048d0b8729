//! Finite Markov decision processes with state-based rewards, and the tabular
//! solvers everything else in the crate is built on.
//!
//! Rewards attach to states rather than transitions: acting in `s` earns
//! `R(s)` no matter which action is taken, and values satisfy
//! `v(s) = R(s) + gamma * sum_s' T(s, pi(s), s') v(s')`. Action sets may
//! differ per state; transition rows are stored sparsely.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse transition row: `(successor, probability)` pairs, ascending by successor.
pub type TransitionRow = Vec<(usize, f64)>;

const ROW_SUM_TOL: f64 = 1e-9;
const MAX_SWEEPS: usize = 200_000;
const MAX_PI_ROUNDS: usize = 10_000;

/// A finite MDP. Construct through [`Mdp::builder`] or [`Mdp::from_json_str`];
/// both validate row stochasticity, action sets, and the reward bound.
#[derive(Debug, Clone)]
pub struct Mdp {
    n_states: usize,
    gamma: f64,
    r_max: f64,
    rewards: Vec<f64>,
    /// Valid action ids per state, strictly ascending.
    actions: Vec<Vec<usize>>,
    /// `rows[s][i]` is the transition row for `actions[s][i]`.
    rows: Vec<Vec<TransitionRow>>,
}

impl Mdp {
    pub fn builder(n_states: usize, gamma: f64) -> MdpBuilder {
        MdpBuilder {
            n_states,
            gamma,
            r_max: None,
            rewards: None,
            actions: vec![Vec::new(); n_states],
            triples: BTreeMap::new(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn reward(&self, s: usize) -> f64 {
        self.rewards[s]
    }

    /// Valid action ids for `s`, strictly ascending.
    pub fn actions(&self, s: usize) -> &[usize] {
        &self.actions[s]
    }

    /// Index of `action` within `actions(s)`, if valid there.
    pub fn action_index(&self, s: usize, action: usize) -> Option<usize> {
        self.actions[s].binary_search(&action).ok()
    }

    /// Sparse row for a valid `(s, action)` pair.
    pub fn transition_row(&self, s: usize, action: usize) -> Option<&[(usize, f64)]> {
        let i = self.action_index(s, action)?;
        Some(&self.rows[s][i])
    }

    /// `T(s, action, to)`, zero for pairs not stored.
    pub fn transition(&self, s: usize, action: usize, to: usize) -> f64 {
        self.transition_row(s, action)
            .and_then(|row| row.iter().find(|(sp, _)| *sp == to).map(|(_, p)| *p))
            .unwrap_or(0.0)
    }

    /// Replace the reward vector in place. Length and the `r_max` bound are
    /// re-checked; the transition structure is untouched, which keeps repeated
    /// re-solves with varying rewards allocation-free.
    pub fn set_rewards(&mut self, rewards: &[f64]) -> Result<()> {
        if rewards.len() != self.n_states {
            return Err(Error::invalid(format!(
                "reward vector has length {}, expected {}",
                rewards.len(),
                self.n_states
            )));
        }
        if let Some(r) = rewards.iter().find(|r| !r.is_finite() || r.abs() > self.r_max) {
            return Err(Error::invalid(format!(
                "reward {r} outside [-{m}, {m}]",
                m = self.r_max
            )));
        }
        self.rewards.copy_from_slice(rewards);
        Ok(())
    }

    /// Copy of this MDP with a different reward vector.
    pub fn with_rewards(&self, rewards: &[f64]) -> Result<Mdp> {
        let mut out = self.clone();
        out.set_rewards(rewards)?;
        Ok(out)
    }

    /// Raise the reward bound to at least `r_max`; never lowers it.
    pub fn ensure_r_max(&mut self, r_max: f64) {
        if r_max > self.r_max {
            self.r_max = r_max;
        }
    }

    pub fn from_json_str(text: &str) -> Result<Mdp> {
        let file: MdpFile = serde_json::from_str(text)?;
        file.build()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Mdp> {
        let text = fs::read_to_string(path)?;
        Mdp::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        let mut transitions = Vec::new();
        for s in 0..self.n_states {
            for (i, &a) in self.actions[s].iter().enumerate() {
                for &(sp, p) in &self.rows[s][i] {
                    transitions.push((s, a, sp, p));
                }
            }
        }
        let file = MdpFile {
            n_states: self.n_states,
            gamma: self.gamma,
            actions: self.actions.clone(),
            rewards: Some(self.rewards.clone()),
            transitions,
            r_max: Some(self.r_max),
        };
        serde_json::to_string_pretty(&file).expect("mdp serialization cannot fail")
    }
}

/// JSON schema: sparse `[s, a, s', p]` quadruples; omitted entries are zero.
/// `rewards` and `r_max` are optional (zeros and `max(1, max|R|)` by default).
#[derive(Serialize, Deserialize)]
struct MdpFile {
    n_states: usize,
    gamma: f64,
    actions: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rewards: Option<Vec<f64>>,
    transitions: Vec<(usize, usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r_max: Option<f64>,
}

impl MdpFile {
    fn build(self) -> Result<Mdp> {
        if self.actions.len() != self.n_states {
            return Err(Error::invalid(format!(
                "actions lists {} states, header says {}",
                self.actions.len(),
                self.n_states
            )));
        }
        let mut b = Mdp::builder(self.n_states, self.gamma);
        for (s, ids) in self.actions.iter().enumerate() {
            b = b.state_actions(s, ids.clone());
        }
        if let Some(r) = self.rewards {
            b = b.rewards(r);
        }
        if let Some(m) = self.r_max {
            b = b.r_max(m);
        }
        for (s, a, sp, p) in self.transitions {
            b = b.transition(s, a, sp, p);
        }
        b.build()
    }
}

pub struct MdpBuilder {
    n_states: usize,
    gamma: f64,
    r_max: Option<f64>,
    rewards: Option<Vec<f64>>,
    actions: Vec<Vec<usize>>,
    triples: BTreeMap<(usize, usize, usize), f64>,
}

impl MdpBuilder {
    /// Declare the valid action ids for one state.
    pub fn state_actions(mut self, s: usize, ids: Vec<usize>) -> Self {
        if s < self.n_states {
            self.actions[s] = ids;
        } else {
            // Deferred to build() so the error path is uniform.
            self.actions.push(vec![usize::MAX]);
        }
        self
    }

    /// Give every state the same action ids `0..n_actions`.
    pub fn uniform_actions(mut self, n_actions: usize) -> Self {
        for slot in &mut self.actions {
            *slot = (0..n_actions).collect();
        }
        self
    }

    pub fn rewards(mut self, rewards: Vec<f64>) -> Self {
        self.rewards = Some(rewards);
        self
    }

    pub fn r_max(mut self, r_max: f64) -> Self {
        self.r_max = Some(r_max);
        self
    }

    pub fn transition(mut self, s: usize, a: usize, to: usize, p: f64) -> Self {
        // Duplicate triples are rejected in build(); poison with NaN here.
        self.triples
            .entry((s, a, to))
            .and_modify(|v| *v = f64::NAN)
            .or_insert(p);
        self
    }

    pub fn build(self) -> Result<Mdp> {
        let n = self.n_states;
        if n == 0 {
            return Err(Error::invalid("an MDP needs at least one state"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::invalid(format!(
                "gamma must lie in [0, 1), got {}",
                self.gamma
            )));
        }
        let mut actions = self.actions;
        if actions.len() != n {
            return Err(Error::invalid("action list references a state out of range"));
        }
        for (s, ids) in actions.iter_mut().enumerate() {
            if ids.is_empty() {
                return Err(Error::invalid(format!("state {s} has no valid action")));
            }
            ids.sort_unstable();
            if ids.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::invalid(format!("state {s} lists a duplicate action id")));
            }
        }

        let rewards = self.rewards.unwrap_or_else(|| vec![0.0; n]);
        if rewards.len() != n {
            return Err(Error::invalid(format!(
                "reward vector has length {}, expected {n}",
                rewards.len()
            )));
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::invalid("rewards must be finite"));
        }
        let max_abs = rewards.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        let r_max = self.r_max.unwrap_or_else(|| max_abs.max(1.0));
        if !(r_max.is_finite() && r_max >= 0.0) {
            return Err(Error::invalid(format!("r_max must be finite and >= 0, got {r_max}")));
        }
        if max_abs > r_max {
            return Err(Error::invalid(format!(
                "reward magnitude {max_abs} exceeds r_max {r_max}"
            )));
        }

        let mut rows: Vec<Vec<TransitionRow>> =
            (0..n).map(|s| vec![Vec::new(); actions[s].len()]).collect();
        for ((s, a, to), p) in self.triples {
            if s >= n || to >= n {
                return Err(Error::invalid(format!(
                    "transition ({s}, {a}, {to}) references a state out of range"
                )));
            }
            let Some(i) = actions[s].binary_search(&a).ok() else {
                return Err(Error::invalid(format!(
                    "transition ({s}, {a}, {to}) uses an action not valid in state {s}"
                )));
            };
            if p.is_nan() {
                return Err(Error::invalid(format!(
                    "duplicate transition entry for ({s}, {a}, {to})"
                )));
            }
            if !(0.0..=1.0 + ROW_SUM_TOL).contains(&p) {
                return Err(Error::invalid(format!(
                    "transition probability {p} for ({s}, {a}, {to}) outside [0, 1]"
                )));
            }
            rows[s][i].push((to, p));
        }
        for s in 0..n {
            for (i, row) in rows[s].iter().enumerate() {
                let sum: f64 = row.iter().map(|(_, p)| p).sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::invalid(format!(
                        "transition row for state {s}, action {} sums to {sum}, expected 1",
                        actions[s][i]
                    )));
                }
            }
        }

        Ok(Mdp {
            n_states: n,
            gamma: self.gamma,
            r_max,
            rewards,
            actions,
            rows,
        })
    }
}

/// Deterministic policy: one action id per state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    pub actions: Vec<usize>,
}

impl Policy {
    pub fn action(&self, s: usize) -> usize {
        self.actions[s]
    }

    fn validate(&self, mdp: &Mdp) -> Result<()> {
        if self.actions.len() != mdp.n_states {
            return Err(Error::invalid(format!(
                "policy covers {} states, MDP has {}",
                self.actions.len(),
                mdp.n_states
            )));
        }
        for (s, &a) in self.actions.iter().enumerate() {
            if mdp.action_index(s, a).is_none() {
                return Err(Error::invalid(format!(
                    "policy picks action {a} in state {s}, which is not valid there"
                )));
            }
        }
        Ok(())
    }
}

/// State values. For any evaluation of a policy on a valid MDP,
/// `|v(s)| <= r_max / (1 - gamma)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFn {
    pub values: Vec<f64>,
}

impl ValueFn {
    pub fn get(&self, s: usize) -> f64 {
        self.values[s]
    }
}

/// Action values on valid pairs only: `rows[s][i]` belongs to `actions[s][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QFn {
    pub rows: Vec<Vec<f64>>,
    pub actions: Vec<Vec<usize>>,
}

impl QFn {
    pub fn get(&self, s: usize, action: usize) -> Option<f64> {
        let i = self.actions[s].binary_search(&action).ok()?;
        Some(self.rows[s][i])
    }
}

/// What a solver hands back: the greedy policy, its value, the action values
/// the policy was extracted from, and how many outer iterations it took.
#[derive(Debug, Clone)]
pub struct Solution {
    pub policy: Policy,
    pub value: ValueFn,
    pub q: QFn,
    pub iterations: usize,
}

fn dot(row: &[(usize, f64)], v: &[f64]) -> f64 {
    row.iter().map(|&(sp, p)| p * v[sp]).sum()
}

/// Iterative evaluation of `policy`, stopping once the sup-norm Bellman
/// residual of the returned values is at most `tol`.
pub fn policy_evaluation(mdp: &Mdp, policy: &Policy, tol: f64) -> Result<ValueFn> {
    policy.validate(mdp)?;
    let v0 = vec![0.0; mdp.n_states];
    evaluate_from(mdp, policy, v0, tol)
}

/// Same as [`policy_evaluation`] but starting the sweeps from `v0`, which pays
/// off when the rewards moved only slightly since the last solve.
pub fn policy_evaluation_from(mdp: &Mdp, policy: &Policy, v0: Vec<f64>, tol: f64) -> Result<ValueFn> {
    policy.validate(mdp)?;
    if v0.len() != mdp.n_states {
        return Err(Error::invalid("warm-start value vector has the wrong length"));
    }
    evaluate_from(mdp, policy, v0, tol)
}

fn evaluate_from(mdp: &Mdp, policy: &Policy, v0: Vec<f64>, tol: f64) -> Result<ValueFn> {
    let n = mdp.n_states;
    let rows: Vec<&TransitionRow> = (0..n)
        .map(|s| {
            let i = mdp.action_index(s, policy.actions[s]).expect("validated above");
            &mdp.rows[s][i]
        })
        .collect();
    let mut v = v0;
    let mut next = vec![0.0; n];
    for _ in 1..=MAX_SWEEPS {
        let mut gap = 0.0_f64;
        for s in 0..n {
            next[s] = mdp.rewards[s] + mdp.gamma * dot(rows[s], &v);
            gap = gap.max((next[s] - v[s]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        if gap <= tol {
            return Ok(ValueFn { values: v });
        }
    }
    Err(Error::NonConvergent {
        what: "policy evaluation",
        iterations: MAX_SWEEPS,
    })
}

/// One-step lookahead: `q(s, a) = R(s) + gamma * sum_s' T(s, a, s') v(s')`.
pub fn q_from_v(mdp: &Mdp, v: &ValueFn) -> QFn {
    let rows = (0..mdp.n_states)
        .map(|s| {
            mdp.rows[s]
                .iter()
                .map(|row| mdp.rewards[s] + mdp.gamma * dot(row, &v.values))
                .collect()
        })
        .collect();
    QFn {
        rows,
        actions: mdp.actions.clone(),
    }
}

/// Argmax over each state's action values; ties go to the lowest action id.
///
/// Panics if some state has an empty row, which cannot happen for a `QFn`
/// produced from a validated MDP.
pub fn greedy_policy(q: &QFn) -> Policy {
    let actions = q
        .rows
        .iter()
        .zip(&q.actions)
        .enumerate()
        .map(|(s, (row, ids))| {
            assert!(!row.is_empty(), "state {s} has no action values");
            let mut best = 0;
            for i in 1..row.len() {
                if row[i] > row[best] {
                    best = i;
                }
            }
            ids[best]
        })
        .collect();
    Policy { actions }
}

/// Howard policy iteration from the all-lowest-ids policy.
pub fn policy_iteration(mdp: &Mdp, tol: f64) -> Result<Solution> {
    policy_iteration_from(mdp, None, tol)
}

/// Policy iteration warm-started from a previous solution. `start` carries the
/// initial policy and value guess; `None` starts from lowest ids and zeros.
pub fn policy_iteration_from(
    mdp: &Mdp,
    start: Option<(Policy, Vec<f64>)>,
    tol: f64,
) -> Result<Solution> {
    let (mut policy, mut v) = match start {
        Some((p, v)) => {
            p.validate(mdp)?;
            if v.len() != mdp.n_states {
                return Err(Error::invalid("warm-start value vector has the wrong length"));
            }
            (p, v)
        }
        None => (
            Policy {
                actions: (0..mdp.n_states).map(|s| mdp.actions[s][0]).collect(),
            },
            vec![0.0; mdp.n_states],
        ),
    };
    for round in 1..=MAX_PI_ROUNDS {
        let value = evaluate_from(mdp, &policy, v, tol)?;
        let q = q_from_v(mdp, &value);
        let improved = greedy_policy(&q);
        if improved == policy {
            return Ok(Solution {
                policy,
                value,
                q,
                iterations: round,
            });
        }
        policy = improved;
        v = value.values;
    }
    Err(Error::NonConvergent {
        what: "policy iteration",
        iterations: MAX_PI_ROUNDS,
    })
}

/// Value iteration from zeros, stopping once successive iterates are within
/// `tol`; the result then lies within `tol * (1 + gamma) / (1 - gamma)` of the
/// policy-iteration fixed point. With `gamma = 0` the first sweep is exact.
pub fn value_iteration(mdp: &Mdp, tol: f64) -> Result<Solution> {
    let n = mdp.n_states;
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    for sweep in 1..=MAX_SWEEPS {
        let mut gap = 0.0_f64;
        for s in 0..n {
            let best = mdp.rows[s]
                .iter()
                .map(|row| dot(row, &v))
                .fold(f64::NEG_INFINITY, f64::max);
            next[s] = mdp.rewards[s] + mdp.gamma * best;
            gap = gap.max((next[s] - v[s]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        if gap <= tol {
            let value = ValueFn { values: v };
            let q = q_from_v(mdp, &value);
            let policy = greedy_policy(&q);
            return Ok(Solution {
                policy,
                value,
                q,
                iterations: sweep,
            });
        }
    }
    Err(Error::NonConvergent {
        what: "value iteration",
        iterations: MAX_SWEEPS,
    })
}

/// Random dense MDP: every state shares actions `0..n_actions`, each row is an
/// independent normalized uniform draw, rewards are zero with `r_max = 1`.
pub fn random_mdp(n_states: usize, n_actions: usize, gamma: f64, rng: &mut impl Rng) -> Mdp {
    sparse_random_mdp(n_states, n_actions, n_states, gamma, rng)
}

/// Random MDP where each `(s, a)` reaches at most `n_successors` distinct
/// states. Small successor sets make actions genuinely different from one
/// another, which keeps optimal policies stable under small reward
/// perturbations; dense rows (`n_successors = n_states`) instead wash the
/// differences out and the optimal policy turns on hairline value gaps.
pub fn sparse_random_mdp(
    n_states: usize,
    n_actions: usize,
    n_successors: usize,
    gamma: f64,
    rng: &mut impl Rng,
) -> Mdp {
    let k = n_successors.clamp(1, n_states);
    let mut b = Mdp::builder(n_states, gamma).uniform_actions(n_actions).r_max(1.0);
    let mut pool: Vec<usize> = (0..n_states).collect();
    for s in 0..n_states {
        for a in 0..n_actions {
            for i in 0..k {
                let j = rng.gen_range(i..n_states);
                pool.swap(i, j);
            }
            let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let mut acc = 0.0;
            for (i, w) in raw.iter().enumerate() {
                let p = if i + 1 == k {
                    // Pin the trailing entry so the row sums to one exactly.
                    1.0 - acc
                } else {
                    w / total
                };
                acc += p;
                b = b.transition(s, a, pool[i], p);
            }
        }
    }
    b.build().expect("generated rows are stochastic by construction")
}
