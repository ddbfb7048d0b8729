//! Tabular Q-learning on the slot-filling environment with Boltzmann and
//! epsilon-Boltzmann exploration, plus two ways of folding in an expert:
//! whole demonstrated episodes, or per-action feedbacks. The share of
//! autonomous play is `beta`; at `beta = 1` the expert is never consulted
//! and training is bitwise identical to running without one.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, RngCore};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rewards::{EpisodeFeatures, RewardModel};
use crate::sim::{
    handcrafted_policy, obs_id, run_episode, Episode, SlotFillingEnv, SlotMark, SystemAction,
};

/// Sparse action-value table with its own update parameters. Unvisited
/// pairs read as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: BTreeMap<(usize, usize), f64>,
    n_actions: usize,
    learning_rate: f64,
    gamma: f64,
}

#[derive(Serialize, Deserialize)]
struct QTableFile {
    n_actions: usize,
    learning_rate: f64,
    gamma: f64,
    entries: Vec<(usize, usize, f64)>,
}

impl QTable {
    pub fn new(n_actions: usize, learning_rate: f64, gamma: f64) -> Result<QTable> {
        if n_actions == 0 {
            return Err(Error::config("q-table needs at least one action"));
        }
        if !(learning_rate > 0.0 && learning_rate <= 1.0) {
            return Err(Error::config(format!("learning rate {learning_rate} outside (0, 1]")));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::config(format!("discount {gamma} outside [0, 1)")));
        }
        Ok(QTable { values: BTreeMap::new(), n_actions, learning_rate, gamma })
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values.get(&(state, action)).copied().unwrap_or(0.0)
    }

    /// All action values at a state, defaults included.
    pub fn row(&self, state: usize) -> Vec<f64> {
        (0..self.n_actions).map(|a| self.get(state, a)).collect()
    }

    /// Highest-valued action, lowest id on ties.
    pub fn greedy(&self, state: usize) -> usize {
        let mut best = 0;
        let mut best_q = self.get(state, 0);
        for a in 1..self.n_actions {
            let q = self.get(state, a);
            if q > best_q {
                best = a;
                best_q = q;
            }
        }
        best
    }

    fn max_value(&self, state: usize) -> f64 {
        (0..self.n_actions).map(|a| self.get(state, a)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// One temporal-difference step toward `r + gamma * max_a' q(next_s, a')`,
    /// or plain `r` when the episode ended.
    pub fn update(&mut self, state: usize, action: usize, reward: f64, next_state: usize, done: bool) {
        let target = if done { reward } else { reward + self.gamma * self.max_value(next_state) };
        let q = self.values.entry((state, action)).or_insert(0.0);
        *q += self.learning_rate * (target - *q);
    }

    /// Number of (state, action) pairs ever updated.
    pub fn n_entries(&self) -> usize {
        self.values.len()
    }

    pub fn to_json_string(&self) -> String {
        let file = QTableFile {
            n_actions: self.n_actions,
            learning_rate: self.learning_rate,
            gamma: self.gamma,
            entries: self.values.iter().map(|(&(s, a), &q)| (s, a, q)).collect(),
        };
        serde_json::to_string_pretty(&file).expect("q-table serialization cannot fail")
    }

    pub fn from_json_str(text: &str) -> Result<QTable> {
        let file: QTableFile = serde_json::from_str(text)?;
        let mut table = QTable::new(file.n_actions, file.learning_rate, file.gamma)?;
        for (s, a, q) in file.entries {
            if a >= file.n_actions {
                return Err(Error::invalid(format!("entry action {a} out of range")));
            }
            if !q.is_finite() {
                return Err(Error::invalid("non-finite q value"));
            }
            table.values.insert((s, a), q);
        }
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(fs::write(path, self.to_json_string())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<QTable> {
        QTable::from_json_str(&fs::read_to_string(path)?)
    }
}

/// Softmax over a q-row at temperature `tau`, computed with
/// max-subtraction so large values cannot overflow.
pub fn boltzmann_probs(q_row: &[f64], tau: f64) -> Vec<f64> {
    assert!(tau > 0.0, "temperature must be positive");
    assert!(!q_row.is_empty(), "empty action row");
    let top = q_row.iter().fold(f64::NEG_INFINITY, |m, q| m.max(*q));
    let weights: Vec<f64> = q_row.iter().map(|q| ((q - top) / tau).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Draws from `(1 - epsilon) * probs + epsilon * uniform`.
pub fn eps_boltzmann_sample(probs: &[f64], epsilon: f64, rng: &mut impl Rng) -> usize {
    debug_assert!((0.0..=1.0).contains(&epsilon));
    if rng.gen::<f64>() < epsilon {
        return rng.gen_range(0..probs.len());
    }
    sample_index(probs, rng)
}

fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Exploration parameters: temperature and the per-episode epsilon decay
/// schedule `max(floor, start * decay^episode)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub tau: f64,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
}

impl Default for SamplerConfig {
    fn default() -> SamplerConfig {
        SamplerConfig { tau: 1.0, epsilon_start: 0.3, epsilon_decay: 0.995, epsilon_floor: 0.01 }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::config(format!("temperature {} must be positive", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) {
            return Err(Error::config("epsilon_start outside [0, 1]"));
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return Err(Error::config("epsilon_decay outside (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_floor) {
            return Err(Error::config("epsilon_floor outside [0, 1]"));
        }
        Ok(())
    }

    pub fn epsilon(&self, episode: usize) -> f64 {
        let decayed = self.epsilon_start * self.epsilon_decay.powi(episode as i32);
        decayed.max(self.epsilon_floor)
    }
}

/// How the expert participates in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImitationMode {
    /// The agent plays every episode itself.
    None,
    /// With probability `1 - beta` an episode is played by the expert and
    /// the learner updates along it as if it had played it.
    Demonstrations,
    /// With probability `1 - beta`, each single action is replaced by the
    /// expert's choice before stepping.
    Feedbacks,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImitationConfig {
    pub mode: ImitationMode,
    /// Probability that the agent acts for itself.
    pub beta: f64,
}

impl Default for ImitationConfig {
    fn default() -> ImitationConfig {
        ImitationConfig { mode: ImitationMode::None, beta: 1.0 }
    }
}

impl ImitationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::config(format!("beta {} outside [0, 1]", self.beta)));
        }
        Ok(())
    }
}

/// A deterministic teacher over environment observations.
pub trait Expert {
    fn act(&self, obs: &[SlotMark]) -> SystemAction;

    /// Plays one full episode in `env`, returning its trace.
    fn rollout(&self, env: &mut SlotFillingEnv, rng: &mut dyn RngCore) -> Result<Episode> {
        run_episode(env, &mut |obs| self.act(obs), rng)
    }
}

/// The scripted request-confirm-bye baseline as an expert.
#[derive(Debug, Clone, Copy, Default)]
pub struct HandcraftedExpert;

impl Expert for HandcraftedExpert {
    fn act(&self, obs: &[SlotMark]) -> SystemAction {
        handcrafted_policy(obs)
    }
}

/// Episode budget, checkpoint cadence, and q-table parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Evaluate the greedy policy after every this many episodes.
    pub eval_every: usize,
    /// Dialogues per evaluation.
    pub eval_n: usize,
    pub learning_rate: f64,
    pub gamma: f64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig { episodes: 2000, eval_every: 100, eval_n: 200, learning_rate: 0.2, gamma: 0.95 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.eval_every == 0 || self.eval_n == 0 {
            return Err(Error::config("episodes, eval_every and eval_n must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::config("learning_rate outside (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("gamma outside [0, 1)"));
        }
        Ok(())
    }
}

/// One checkpoint of the learning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub success_rate: f64,
    pub avg_turns: f64,
    pub avg_reward: f64,
}

/// Aggregate greedy-execution metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalMetrics {
    pub success_rate: f64,
    pub avg_turns: f64,
    pub avg_reward: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub q: QTable,
    pub curve: Vec<CurvePoint>,
}

/// Derives one of the independent named random streams of a run. Keeping
/// environment noise, exploration, and expert coin flips on separate
/// streams makes `beta = 1` bitwise identical to training without an
/// expert: the expert stream is simply never read by the others.
fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const STREAM_ENV: u64 = 0;
const STREAM_AGENT: u64 = 1;
const STREAM_EXPERT: u64 = 2;

fn step_reward(env: &SlotFillingEnv, done: bool, success: bool, reward: &RewardModel) -> f64 {
    if !done {
        return -1.0;
    }
    let state = env.state().expect("episode just stepped");
    let features = EpisodeFeatures { progress: env.progress(), turns: state.turns };
    -1.0 + reward.terminal_bonus(success, &features)
}

/// Runs seeded Q-learning and returns the final table plus its learning
/// curve. Checkpoints use their own derived seeds, so adding or removing
/// evaluations never disturbs the training trajectory.
pub fn train(
    env: &mut SlotFillingEnv,
    expert: &impl Expert,
    imitation: &ImitationConfig,
    sampler: &SamplerConfig,
    cfg: &TrainConfig,
    reward: &RewardModel,
    seed: u64,
) -> Result<TrainResult> {
    imitation.validate()?;
    sampler.validate()?;
    cfg.validate()?;
    let d = env.domain().n_slots();
    let n_actions = env.domain().n_actions();
    let mut q = QTable::new(n_actions, cfg.learning_rate, cfg.gamma)?;
    let mut env_rng = stream_rng(seed, STREAM_ENV);
    let mut agent_rng = stream_rng(seed, STREAM_AGENT);
    let mut expert_rng = stream_rng(seed, STREAM_EXPERT);
    let mut curve = Vec::new();

    for episode in 0..cfg.episodes {
        let epsilon = sampler.epsilon(episode);
        let demonstration = imitation.mode == ImitationMode::Demonstrations
            && expert_rng.gen::<f64>() < 1.0 - imitation.beta;
        let mut obs = env.reset(&mut env_rng);
        loop {
            let s = obs_id(&obs);
            let action = if demonstration {
                expert.act(&obs)
            } else if imitation.mode == ImitationMode::Feedbacks
                && expert_rng.gen::<f64>() < 1.0 - imitation.beta
            {
                expert.act(&obs)
            } else {
                let probs = boltzmann_probs(&q.row(s), sampler.tau);
                let id = eps_boltzmann_sample(&probs, epsilon, &mut agent_rng);
                SystemAction::from_id(id, d)?
            };
            let a = action.to_id(d);
            let step = env.step(action, &mut env_rng)?;
            let r = step_reward(env, step.done, step.success, reward);
            q.update(s, a, r, obs_id(&step.obs), step.done);
            obs = step.obs;
            if step.done {
                break;
            }
        }
        let completed = episode + 1;
        if completed % cfg.eval_every == 0 || completed == cfg.episodes {
            let eval_seed = seed.wrapping_add((completed as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let metrics = evaluate(env, &q, cfg.eval_n, reward, eval_seed)?;
            curve.push(CurvePoint {
                episode: completed,
                success_rate: metrics.success_rate,
                avg_turns: metrics.avg_turns,
                avg_reward: metrics.avg_reward,
            });
        }
    }
    Ok(TrainResult { q, curve })
}

/// Greedy execution of a q-table for `n_dialogues` seeded episodes.
pub fn evaluate(
    env: &mut SlotFillingEnv,
    q: &QTable,
    n_dialogues: usize,
    reward: &RewardModel,
    seed: u64,
) -> Result<EvalMetrics> {
    if n_dialogues == 0 {
        return Err(Error::config("evaluation needs at least one dialogue"));
    }
    let d = env.domain().n_slots();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut successes = 0usize;
    let mut turns_sum = 0.0;
    let mut reward_sum = 0.0;
    for _ in 0..n_dialogues {
        let ep = run_episode(
            env,
            &mut |obs| {
                SystemAction::from_id(q.greedy(obs_id(obs)), d).expect("greedy id is in range")
            },
            &mut rng,
        )?;
        successes += usize::from(ep.success);
        turns_sum += f64::from(ep.turns);
        let features = EpisodeFeatures { progress: ep.progress, turns: ep.turns };
        reward_sum += reward.episode_return(ep.turns, ep.success, &features);
    }
    let n = n_dialogues as f64;
    Ok(EvalMetrics {
        success_rate: successes as f64 / n,
        avg_turns: turns_sum / n,
        avg_reward: reward_sum / n,
    })
}
