//! Bayesian inverse reinforcement learning: infer a state reward vector from
//! expert state-action pairs.
//!
//! The posterior over rewards is `Pr(R | O) ∝ exp(alpha * sum_i Q*(s_i, a_i; R)) * Pr(R)`,
//! so each posterior evaluation prices one MDP solve. Sampling walks a
//! delta-grid: propose one coordinate moved by `±delta`, re-solve, accept with
//! probability `min(1, ratio)`. The annealed variant ([`mbirl`]) sharpens the
//! same ratio to `ratio^(1/T_i)` under a decreasing temperature and restricts
//! proposals to a relevance set of states near the observations, which is
//! what makes the larger dialogue spaces tractable.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ExpertObservations, StateSpace, StateVars};
use crate::error::{Error, Result};
use crate::mdp::{self, Mdp, Policy, Solution};

/// Prior over reward vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prior {
    /// Uniform over the box `[-r_max, r_max]^n`. The box is enforced by
    /// proposal rejection, so the log-density contribution here is zero.
    UniformBox,
    /// Independent normal on every coordinate.
    Gaussian { mean: f64, sd: f64 },
}

impl Prior {
    fn log_density(&self, r: &[f64]) -> f64 {
        match *self {
            Prior::UniformBox => 0.0,
            Prior::Gaussian { mean, sd } => {
                let two_var = 2.0 * sd * sd;
                -r.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / two_var
            }
        }
    }
}

/// Annealing temperature `T_i = t0 / (1 + i * c)`: constant at `t0` when
/// `c = 0`, decreasing toward zero otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoolingSchedule {
    pub t0: f64,
    pub c: f64,
}

impl CoolingSchedule {
    pub fn temperature(&self, iteration: usize) -> f64 {
        self.t0 / (1.0 + iteration as f64 * self.c)
    }
}

impl Default for CoolingSchedule {
    fn default() -> Self {
        CoolingSchedule { t0: 5.0, c: 0.01 }
    }
}

/// Gaussian kernel parameters for [`relevance_set`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelevanceConfig {
    pub bandwidth: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BirlConfig {
    /// Expert confidence: sharpness of the likelihood. Zero gives the flat
    /// posterior, useful as a sampler diagnostic.
    pub alpha_conf: f64,
    /// Grid step of the reward walk.
    pub delta: f64,
    pub iterations: usize,
    /// Iterations discarded before averaging.
    pub burn_in: usize,
    pub prior: Prior,
    /// Half-width of the reward box.
    pub r_max: f64,
    /// Tolerance handed to the inner MDP solver.
    pub solver_tol: f64,
    /// Annealing schedule for [`mbirl`]; `None` falls back to the default.
    pub cooling: Option<CoolingSchedule>,
    /// Kernel for building relevance sets on dialogue spaces.
    pub relevance: Option<RelevanceConfig>,
}

impl Default for BirlConfig {
    fn default() -> Self {
        BirlConfig {
            alpha_conf: 1.0,
            delta: 0.1,
            iterations: 5000,
            burn_in: 1000,
            prior: Prior::UniformBox,
            r_max: 1.0,
            solver_tol: 1e-6,
            cooling: None,
            relevance: None,
        }
    }
}

impl BirlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_conf >= 0.0 && self.alpha_conf.is_finite()) {
            return Err(Error::config("alpha_conf must be finite and >= 0"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::config("delta must be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations must be positive"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::config("burn_in must be smaller than iterations"));
        }
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return Err(Error::config("r_max must be positive"));
        }
        if !(self.solver_tol > 0.0) {
            return Err(Error::config("solver_tol must be positive"));
        }
        if let Prior::Gaussian { sd, .. } = self.prior {
            if !(sd > 0.0) {
                return Err(Error::config("gaussian prior sd must be positive"));
            }
        }
        if let Some(c) = self.cooling {
            if !(c.t0 > 0.0 && c.c >= 0.0) {
                return Err(Error::config("cooling needs t0 > 0 and c >= 0"));
            }
        }
        if let Some(r) = self.relevance {
            if !(r.bandwidth > 0.0) {
                return Err(Error::config("relevance bandwidth must be positive"));
            }
            if !(r.threshold > 0.0 && r.threshold <= 1.0) {
                return Err(Error::config("relevance threshold must lie in (0, 1]"));
            }
        }
        Ok(())
    }
}

/// Posterior summary of one sampling run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEstimate {
    pub mean_reward: Vec<f64>,
    pub acceptance_rate: f64,
    pub n_samples: usize,
    pub elapsed_ms: u64,
}

/// One chain iteration. `step` is the signed grid move that was proposed;
/// `log_posterior` is the chain's value after the accept/reject decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainStep {
    pub iteration: usize,
    pub coordinate: usize,
    pub step: f64,
    pub accepted: bool,
    pub log_posterior: f64,
}

#[derive(Debug, Clone)]
pub struct BirlRun {
    pub estimate: PosteriorEstimate,
    /// Reward vector the chain ended on. Every visited sample lies on the
    /// delta-grid around the all-zeros start, inside the box.
    pub final_reward: Vec<f64>,
    pub trace: Vec<ChainStep>,
}

/// Metropolis acceptance probability `min(1, ratio^(1/temperature))`, taking
/// the log of the posterior ratio (proposed over current).
pub fn acceptance_probability(log_ratio: f64, temperature: f64) -> f64 {
    (log_ratio / temperature).exp().min(1.0)
}

fn check_obs(obs: &ExpertObservations, mdp: &Mdp) -> Result<()> {
    for &(s, a) in &obs.pairs {
        if s >= mdp.n_states() || mdp.action_index(s, a).is_none() {
            return Err(Error::invalid(format!(
                "observation pair ({s}, {a}) is not a valid state-action pair"
            )));
        }
    }
    Ok(())
}

fn q_sum(obs: &ExpertObservations, sol: &Solution) -> f64 {
    obs.pairs
        .iter()
        .map(|&(s, a)| sol.q.get(s, a).expect("pairs validated against the MDP"))
        .sum()
}

/// Log posterior of `r` up to the normalizing constant: prior log-density
/// plus `alpha_conf` times the optimal-Q sum over the expert pairs.
pub fn log_posterior(r: &[f64], obs: &ExpertObservations, skeleton: &Mdp, cfg: &BirlConfig) -> Result<f64> {
    cfg.validate()?;
    check_obs(obs, skeleton)?;
    let mut mdp = skeleton.clone();
    mdp.ensure_r_max(cfg.r_max.max(r.iter().fold(0.0, |m: f64, x| m.max(x.abs()))));
    mdp.set_rewards(r)?;
    let sol = mdp::policy_iteration(&mdp, cfg.solver_tol)?;
    Ok(cfg.prior.log_density(r) + cfg.alpha_conf * q_sum(obs, &sol))
}

fn run_chain(
    skeleton: &Mdp,
    obs: &ExpertObservations,
    coordinates: &[usize],
    cfg: &BirlConfig,
    annealed: bool,
    seed: u64,
) -> Result<BirlRun> {
    cfg.validate()?;
    check_obs(obs, skeleton)?;
    if coordinates.is_empty() {
        return Err(Error::config("relevance set is empty"));
    }
    if coordinates.iter().any(|&s| s >= skeleton.n_states()) {
        return Err(Error::invalid("relevance set references a state out of range"));
    }

    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mdp = skeleton.clone();
    mdp.ensure_r_max(cfg.r_max);
    let n = mdp.n_states();
    let cooling = cfg.cooling.unwrap_or_default();

    let mut current = vec![0.0; n];
    mdp.set_rewards(&current)?;
    let mut sol = mdp::policy_iteration(&mdp, cfg.solver_tol)?;
    let mut lp = cfg.prior.log_density(&current) + cfg.alpha_conf * q_sum(obs, &sol);

    let mut proposed = current.clone();
    let mut mean = vec![0.0; n];
    let mut accepted_total = 0usize;
    let mut trace = Vec::with_capacity(cfg.iterations);

    for i in 0..cfg.iterations {
        let coordinate = coordinates[rng.gen_range(0..coordinates.len())];
        let step = if rng.gen_range(0..2u8) == 0 { cfg.delta } else { -cfg.delta };
        let candidate = current[coordinate] + step;
        let mut accepted = false;
        if candidate.abs() <= cfg.r_max + 1e-12 {
            proposed.copy_from_slice(&current);
            proposed[coordinate] = candidate;
            mdp.set_rewards(&proposed)?;
            // One solve per iteration, warm-started from the current optimum:
            // only one reward coordinate moved, so the old policy and values
            // are an excellent initial guess.
            let warm = Some((sol.policy.clone(), sol.value.values.clone()));
            let cand_sol = mdp::policy_iteration_from(&mdp, warm, cfg.solver_tol)?;
            let cand_lp = cfg.prior.log_density(&proposed) + cfg.alpha_conf * q_sum(obs, &cand_sol);
            let temperature = if annealed { cooling.temperature(i) } else { 1.0 };
            let log_ratio = cand_lp - lp;
            accepted = log_ratio >= 0.0
                || rng.gen::<f64>() < acceptance_probability(log_ratio, temperature);
            if accepted {
                std::mem::swap(&mut current, &mut proposed);
                sol = cand_sol;
                lp = cand_lp;
                accepted_total += 1;
            }
        }
        if i >= cfg.burn_in {
            for (m, r) in mean.iter_mut().zip(&current) {
                *m += r;
            }
        }
        trace.push(ChainStep {
            iteration: i,
            coordinate,
            step,
            accepted,
            log_posterior: lp,
        });
    }

    let n_samples = cfg.iterations - cfg.burn_in;
    for m in &mut mean {
        *m /= n_samples as f64;
    }
    Ok(BirlRun {
        estimate: PosteriorEstimate {
            mean_reward: mean,
            acceptance_rate: accepted_total as f64 / cfg.iterations as f64,
            n_samples,
            elapsed_ms: started.elapsed().as_millis() as u64,
        },
        final_reward: current,
        trace,
    })
}

/// Plain grid walk over every state's reward coordinate at temperature one.
pub fn policy_walk(skeleton: &Mdp, obs: &ExpertObservations, cfg: &BirlConfig, seed: u64) -> Result<BirlRun> {
    let all: Vec<usize> = (0..skeleton.n_states()).collect();
    run_chain(skeleton, obs, &all, cfg, false, seed)
}

/// Annealed walk restricted to the relevance set. With a constant temperature
/// of one and the full state set this reproduces [`policy_walk`] draw for
/// draw under the same seed.
pub fn mbirl(
    skeleton: &Mdp,
    obs: &ExpertObservations,
    relevance: &BTreeSet<usize>,
    cfg: &BirlConfig,
    seed: u64,
) -> Result<BirlRun> {
    let coordinates: Vec<usize> = relevance.iter().copied().collect();
    run_chain(skeleton, obs, &coordinates, cfg, true, seed)
}

/// States observed at least once in the pairs.
pub fn observed_states(obs: &ExpertObservations) -> BTreeSet<usize> {
    obs.pairs.iter().map(|&(s, _)| s).collect()
}

/// Generic relevance set: state `s` is relevant iff
/// `max over observed s_o of exp(-distance(s, s_o)^2 / (2 bandwidth^2)) >= threshold`.
pub fn relevance_set_with(
    obs: &ExpertObservations,
    n_states: usize,
    bandwidth: f64,
    threshold: f64,
    mut distance: impl FnMut(usize, usize) -> f64,
) -> Result<BTreeSet<usize>> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::config("relevance bandwidth must be positive"));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::config("relevance threshold must lie in (0, 1]"));
    }
    let observed = observed_states(obs);
    let denom = 2.0 * bandwidth * bandwidth;
    let mut set = BTreeSet::new();
    for s in 0..n_states {
        let reached = observed.iter().any(|&o| {
            let d = distance(s, o);
            (-d * d / denom).exp() >= threshold
        });
        if reached {
            set.insert(s);
        }
    }
    Ok(set)
}

/// Hamming distance between two dialogue states: how many of the five state
/// variables differ.
pub fn state_hamming(a: &StateVars, b: &StateVars) -> f64 {
    let mut d = 0;
    d += usize::from(a.terminal != b.terminal);
    d += usize::from(a.sys_goal != b.sys_goal);
    d += usize::from(a.user_goal != b.user_goal);
    d += usize::from(a.gen_act != b.gen_act);
    d += usize::from(a.user_help != b.user_help);
    d as f64
}

/// Relevance set on a dialogue space, with the kernel over the Hamming
/// distance of decoded variable tuples.
pub fn relevance_set(
    obs: &ExpertObservations,
    space: &StateSpace,
    bandwidth: f64,
    threshold: f64,
) -> Result<BTreeSet<usize>> {
    let decoded: Vec<StateVars> = (0..space.size())
        .map(|s| space.decode(s))
        .collect::<Result<_>>()?;
    if let Some(&(s, _)) = obs.pairs.iter().find(|&&(s, _)| s >= space.size()) {
        return Err(Error::invalid(format!(
            "observation references state {s} outside the space"
        )));
    }
    relevance_set_with(obs, space.size(), bandwidth, threshold, |a, b| {
        state_hamming(&decoded[a], &decoded[b])
    })
}

/// Visit-frequency reward: `r(s) = n_s / N` with `n_s` the number of observed
/// pairs at state `s`. The induced policy is what a frequency-chasing agent
/// would do, a cheap baseline for the samplers.
pub fn locally_optimal_reward(obs: &ExpertObservations, n_states: usize) -> Result<Vec<f64>> {
    if obs.pairs.is_empty() {
        return Err(Error::invalid("cannot build a frequency reward from zero pairs"));
    }
    let mut r = vec![0.0; n_states];
    for &(s, _) in &obs.pairs {
        if s >= n_states {
            return Err(Error::invalid(format!("observed state {s} outside 0..{n_states}")));
        }
        r[s] += 1.0;
    }
    let n = obs.pairs.len() as f64;
    for x in &mut r {
        *x /= n;
    }
    Ok(r)
}

/// Independent uniform draw from the box, the other baseline.
pub fn random_reward(n_states: usize, r_max: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_states).map(|_| rng.gen_range(-r_max..=r_max)).collect()
}

/// Fraction of observed pairs where `policy` disagrees with the expert.
pub fn policy_loss(policy: &Policy, obs: &ExpertObservations) -> Result<f64> {
    if obs.pairs.is_empty() {
        return Err(Error::invalid("policy loss is undefined on zero pairs"));
    }
    let mut mismatched = 0usize;
    for &(s, a) in &obs.pairs {
        if s >= policy.actions.len() {
            return Err(Error::invalid(format!("observed state {s} outside the policy")));
        }
        if policy.actions[s] != a {
            mismatched += 1;
        }
    }
    Ok(mismatched as f64 / obs.pairs.len() as f64)
}

/// Optimal policy of the skeleton under the given rewards.
pub fn induced_policy(skeleton: &Mdp, rewards: &[f64], solver_tol: f64) -> Result<Policy> {
    let mut mdp = skeleton.clone();
    mdp.ensure_r_max(rewards.iter().fold(0.0, |m: f64, r| m.max(r.abs())));
    mdp.set_rewards(rewards)?;
    Ok(mdp::policy_iteration(&mdp, solver_tol)?.policy)
}

/// A reward-recovery exercise with a known answer: a ring-shaped progression
/// task, the optimal policy for its planted reward, and episodic expert
/// rollouts (restart every 25 steps at a uniform random state).
///
/// States sit on a ring and actions jump forward by fixed strides. One state
/// is a success hub worth +1 whose first action holds position instead of
/// advancing, so the expert parks there once it arrives; one other state is a
/// -1 penalty. The hub placement and the rollout starts vary with the seed.
#[derive(Debug, Clone)]
pub struct SyntheticRecovery {
    pub skeleton: Mdp,
    pub true_reward: Vec<f64>,
    pub expert: Policy,
    pub obs: ExpertObservations,
}

/// Stride of each jump action around the ring.
fn ring_stride(action: usize) -> usize {
    match action {
        0 => 1,
        1 => 2,
        2 => 3,
        3 => 5,
        j => 2 * j - 1,
    }
}

pub fn synthetic_recovery(
    n_states: usize,
    n_actions: usize,
    n_pairs: usize,
    gamma: f64,
    seed: u64,
) -> Result<SyntheticRecovery> {
    if n_states < 4 {
        return Err(Error::config("synthetic recovery needs at least four states"));
    }
    if n_actions == 0 || n_pairs == 0 {
        return Err(Error::config("synthetic recovery needs actions and pairs"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hub = rng.gen_range(0..n_states);
    let trap = (hub + 1 + rng.gen_range(0..n_states - 1)) % n_states;

    let mut builder = Mdp::builder(n_states, gamma).uniform_actions(n_actions);
    for s in 0..n_states {
        for a in 0..n_actions {
            let to = if s == hub && a == 0 { hub } else { (s + ring_stride(a)) % n_states };
            builder = builder.transition(s, a, to, 1.0);
        }
    }
    let skeleton = builder.r_max(1.0).build()?;

    let mut true_reward = vec![0.0; n_states];
    true_reward[hub] = 1.0;
    true_reward[trap] = -1.0;

    let truth = skeleton.with_rewards(&true_reward)?;
    let expert = mdp::policy_iteration(&truth, 1e-9)?.policy;

    let mut pairs = Vec::with_capacity(n_pairs);
    let mut s = 0usize;
    for t in 0..n_pairs {
        if t % 25 == 0 {
            s = rng.gen_range(0..n_states);
        }
        let a = expert.actions[s];
        pairs.push((s, a));
        s = sample_row(skeleton.transition_row(s, a).expect("expert action is valid"), &mut rng);
    }

    Ok(SyntheticRecovery {
        skeleton,
        true_reward,
        expert,
        obs: ExpertObservations { pairs },
    })
}

fn sample_row(row: &[(usize, f64)], rng: &mut impl Rng) -> usize {
    let mut u: f64 = rng.gen();
    for &(to, p) in row {
        u -= p;
        if u <= 0.0 {
            return to;
        }
    }
    row.last().expect("rows are never empty").0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acceptance_probability_worked_examples() {
        assert!((acceptance_probability(-2.0, 1.0) - (-2.0f64).exp()).abs() < 1e-15);
        // ratio 0.5 at temperature 2: sqrt(0.5).
        assert!((acceptance_probability(0.5f64.ln(), 2.0) - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(acceptance_probability(0.3, 1.0), 1.0);
    }

    #[test]
    fn cooling_schedule_shape() {
        let c = CoolingSchedule { t0: 5.0, c: 0.01 };
        assert_eq!(c.temperature(0), 5.0);
        assert!(c.temperature(100) < c.temperature(10));
        let flat = CoolingSchedule { t0: 1.0, c: 0.0 };
        assert_eq!(flat.temperature(12345), 1.0);
    }

    #[test]
    fn config_validation_catches_bad_fields() {
        let mut cfg = BirlConfig::default();
        cfg.burn_in = cfg.iterations;
        assert!(cfg.validate().is_err());
        let cfg = BirlConfig { delta: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = BirlConfig {
            prior: Prior::Gaussian { mean: 0.0, sd: 0.0 },
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn frequency_reward_counts_states() {
        let obs = ExpertObservations {
            pairs: vec![(0, 0), (0, 1), (1, 0), (2, 0)],
        };
        assert_eq!(locally_optimal_reward(&obs, 3).unwrap(), vec![0.5, 0.25, 0.25]);
        assert!(locally_optimal_reward(&ExpertObservations::default(), 3).is_err());
    }

    #[test]
    fn random_reward_is_bounded_and_seeded() {
        let a = random_reward(50, 0.7, 9);
        let b = random_reward(50, 0.7, 9);
        let c = random_reward(50, 0.7, 10);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|r| r.abs() <= 0.7));
    }

    #[test]
    fn policy_loss_counts_mismatches() {
        let policy = Policy { actions: vec![0, 1, 2] };
        let obs = ExpertObservations {
            pairs: vec![(0, 0), (1, 1), (2, 2), (2, 0)],
        };
        assert_eq!(policy_loss(&policy, &obs).unwrap(), 0.25);
        let all_wrong = ExpertObservations { pairs: vec![(0, 1), (1, 0)] };
        assert_eq!(policy_loss(&policy, &all_wrong).unwrap(), 1.0);
        assert!(policy_loss(&policy, &ExpertObservations::default()).is_err());
    }

    #[test]
    fn relevance_set_extremes() {
        let obs = ExpertObservations { pairs: vec![(3, 0)] };
        // Vanishing threshold keeps every state.
        let all = relevance_set_with(&obs, 6, 1.0, 1e-12, |a, b| (a as f64 - b as f64).abs()).unwrap();
        assert_eq!(all.len(), 6);
        // Tiny bandwidth with threshold 1 keeps exactly the observed states.
        let tight = relevance_set_with(&obs, 6, 1e-6, 1.0, |a, b| (a as f64 - b as f64).abs()).unwrap();
        assert_eq!(tight.into_iter().collect::<Vec<_>>(), vec![3]);
    }

    #[test]
    fn dialogue_relevance_uses_hamming_kernel() {
        let space = StateSpace { n_goals: 1, has_ask_task: false };
        let obs = ExpertObservations { pairs: vec![(0, 0)] };
        // Bandwidth chosen so distance 1 passes a 0.5 threshold but distance 2
        // does not: exp(-1/2) = 0.607, exp(-4/2) = 0.135.
        let set = relevance_set(&obs, &space, 1.0, 0.5).unwrap();
        for &s in &set {
            let d = state_hamming(
                &space.decode(0).unwrap(),
                &space.decode(s).unwrap(),
            );
            assert!(d <= 1.0, "state {s} at distance {d} should be excluded");
        }
        assert!(set.contains(&0));
        assert!(set.len() > 1);
    }

    fn tiny_skeleton(gamma: f64) -> Mdp {
        let mut b = Mdp::builder(4, gamma).uniform_actions(2).r_max(1.0);
        for s in 0..4 {
            b = b
                .transition(s, 0, (s + 1) % 4, 1.0)
                .transition(s, 1, (s + 3) % 4, 1.0);
        }
        b.build().unwrap()
    }

    #[test]
    fn flat_posterior_accepts_everything() {
        let skeleton = tiny_skeleton(0.5);
        let obs = ExpertObservations { pairs: vec![(0, 0), (1, 1)] };
        let cfg = BirlConfig {
            alpha_conf: 0.0,
            delta: 0.01,
            iterations: 200,
            burn_in: 20,
            ..Default::default()
        };
        let run = policy_walk(&skeleton, &obs, &cfg, 11).unwrap();
        assert_eq!(run.estimate.acceptance_rate, 1.0);
        assert_eq!(run.estimate.n_samples, 180);
    }

    #[test]
    fn chain_samples_stay_on_the_grid_inside_the_box() {
        let skeleton = tiny_skeleton(0.5);
        let obs = ExpertObservations { pairs: vec![(0, 0)] };
        let cfg = BirlConfig {
            alpha_conf: 0.0,
            delta: 0.1,
            iterations: 2000,
            burn_in: 0,
            r_max: 0.3,
            ..Default::default()
        };
        let run = policy_walk(&skeleton, &obs, &cfg, 3).unwrap();
        for &r in &run.final_reward {
            assert!(r.abs() <= 0.3 + 1e-12);
            let steps = r / 0.1;
            assert!((steps - steps.round()).abs() < 1e-9, "{r} is off-grid");
        }
        // The box bound forces some rejections in a 2000-step walk.
        assert!(run.estimate.acceptance_rate < 1.0);
    }

    #[test]
    fn zero_gamma_posterior_is_translation_invariant() {
        // With gamma = 0 the optimal Q equals the state reward, so adding a
        // constant to every reward shifts all log posteriors equally and
        // leaves every acceptance ratio unchanged.
        let skeleton = tiny_skeleton(0.0);
        let obs = ExpertObservations { pairs: vec![(0, 0), (2, 1), (3, 0)] };
        let cfg = BirlConfig { r_max: 10.0, ..Default::default() };
        let r1 = vec![0.1, -0.2, 0.3, 0.0];
        let r2 = vec![0.2, -0.1, 0.3, -0.4];
        let shift = |r: &[f64], c: f64| -> Vec<f64> { r.iter().map(|x| x + c).collect() };
        let lp = |r: &[f64]| log_posterior(r, &obs, &skeleton, &cfg).unwrap();
        let d0 = lp(&r1) - lp(&r2);
        let dc = lp(&shift(&r1, 2.5)) - lp(&shift(&r2, 2.5));
        assert!((d0 - dc).abs() < 1e-9);
    }

    #[test]
    fn mbirl_with_unit_temperature_matches_policy_walk() {
        let skeleton = tiny_skeleton(0.9);
        let obs = ExpertObservations { pairs: vec![(0, 1), (1, 1), (2, 0)] };
        let cfg = BirlConfig {
            iterations: 400,
            burn_in: 100,
            cooling: Some(CoolingSchedule { t0: 1.0, c: 0.0 }),
            ..Default::default()
        };
        let all: BTreeSet<usize> = (0..4).collect();
        let a = policy_walk(&skeleton, &obs, &cfg, 77).unwrap();
        let b = mbirl(&skeleton, &obs, &all, &cfg, 77).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.estimate.mean_reward, b.estimate.mean_reward);
        assert_eq!(a.final_reward, b.final_reward);
    }

    #[test]
    fn mbirl_leaves_non_relevant_coordinates_untouched() {
        let skeleton = tiny_skeleton(0.9);
        let obs = ExpertObservations { pairs: vec![(0, 1), (0, 0)] };
        let relevance: BTreeSet<usize> = [0].into_iter().collect();
        let cfg = BirlConfig {
            iterations: 300,
            burn_in: 50,
            ..Default::default()
        };
        let run = mbirl(&skeleton, &obs, &relevance, &cfg, 5).unwrap();
        for s in 1..4 {
            assert_eq!(run.final_reward[s], 0.0);
            assert_eq!(run.estimate.mean_reward[s], 0.0);
        }
        let empty: BTreeSet<usize> = BTreeSet::new();
        assert!(matches!(
            mbirl(&skeleton, &obs, &empty, &cfg, 5),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn synthetic_recovery_is_reproducible_and_consistent() {
        let a = synthetic_recovery(12, 3, 60, 0.9, 4).unwrap();
        let b = synthetic_recovery(12, 3, 60, 0.9, 4).unwrap();
        assert_eq!(a.true_reward, b.true_reward);
        assert_eq!(a.obs, b.obs);
        assert_eq!(a.expert, b.expert);
        assert_eq!(a.obs.n_pairs(), 60);
        // Observed actions are the expert's.
        for &(s, act) in &a.obs.pairs {
            assert_eq!(act, a.expert.actions[s]);
        }
        let plus: usize = a.true_reward.iter().filter(|&&r| r == 1.0).count();
        let minus: usize = a.true_reward.iter().filter(|&&r| r == -1.0).count();
        assert_eq!((plus, minus), (1, 1));
        // The hub can be held and holding it is what the expert does.
        let hub = a.true_reward.iter().position(|&r| r == 1.0).unwrap();
        assert_eq!(a.skeleton.transition(hub, 0, hub), 1.0);
        assert_eq!(a.expert.actions[hub], 0);
        assert!(synthetic_recovery(3, 2, 10, 0.9, 0).is_err());
    }
}
