//! Slot-filling dialogue simulator with a configurable semantic error rate.
//!
//! The system must fill and confirm every slot of a hidden user goal. It
//! observes only per-slot marks (unknown / filled / confirmed), never the
//! values themselves, so a corrupted answer is invisible until a
//! confirmation comes back negative. Errors strike both directions: a
//! requested value may arrive corrupted, and a confirmation answer may be
//! flipped.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rewards::{EpisodeFeatures, RewardModel};

/// One slot of the task: a name and how many values it can take.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub name: String,
    pub cardinality: usize,
}

/// The task domain: the slots to fill and the turn budget per episode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotDomain {
    pub slots: Vec<SlotSpec>,
    pub max_turns: u32,
}

impl SlotDomain {
    /// Three slots of four values each, twenty turns. Enough room for the
    /// scripted baseline (seven turns) plus recovery from errors.
    pub fn default_domain() -> SlotDomain {
        let slots = ["origin", "destination", "time"]
            .iter()
            .map(|name| SlotSpec { name: (*name).to_string(), cardinality: 4 })
            .collect();
        SlotDomain { slots, max_turns: 20 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots.is_empty() {
            return Err(Error::config("domain needs at least one slot"));
        }
        for slot in &self.slots {
            if slot.cardinality < 2 {
                return Err(Error::config(format!(
                    "slot {} needs at least two values",
                    slot.name
                )));
            }
        }
        if self.max_turns == 0 {
            return Err(Error::config("max_turns must be positive"));
        }
        Ok(())
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    /// Request and confirm per slot, plus inform-results and bye.
    pub fn n_actions(&self) -> usize {
        2 * self.slots.len() + 2
    }

    pub fn from_json_str(text: &str) -> Result<SlotDomain> {
        let domain: SlotDomain = serde_json::from_str(text)?;
        domain.validate()?;
        Ok(domain)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<SlotDomain> {
        SlotDomain::from_json_str(&fs::read_to_string(path)?)
    }
}

/// What the system can do on its turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemAction {
    /// Ask the user for slot `i`'s value.
    Request(usize),
    /// Read slot `i`'s current value back to the user.
    Confirm(usize),
    /// Present results; consumes a turn but changes nothing.
    InformResults,
    /// End the dialogue.
    Bye,
}

impl SystemAction {
    /// Dense id: requests first, then confirms, then inform-results, then
    /// bye. `d` is the number of slots.
    pub fn to_id(self, d: usize) -> usize {
        match self {
            SystemAction::Request(i) => i,
            SystemAction::Confirm(i) => d + i,
            SystemAction::InformResults => 2 * d,
            SystemAction::Bye => 2 * d + 1,
        }
    }

    pub fn from_id(id: usize, d: usize) -> Result<SystemAction> {
        if id < d {
            Ok(SystemAction::Request(id))
        } else if id < 2 * d {
            Ok(SystemAction::Confirm(id - d))
        } else if id == 2 * d {
            Ok(SystemAction::InformResults)
        } else if id == 2 * d + 1 {
            Ok(SystemAction::Bye)
        } else {
            Err(Error::invalid(format!("action id {id} out of range for {d} slots")))
        }
    }
}

/// What the system sees of one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SlotMark {
    Unknown,
    Filled,
    Confirmed,
}

impl SlotMark {
    fn digit(self) -> usize {
        match self {
            SlotMark::Unknown => 0,
            SlotMark::Filled => 1,
            SlotMark::Confirmed => 2,
        }
    }
}

/// System-side observation: one mark per slot.
pub type Observation = Vec<SlotMark>;

/// Packs an observation into a base-3 integer, first slot least
/// significant. Distinct observations get distinct ids in
/// `0..3^{n_slots}`.
pub fn obs_id(marks: &[SlotMark]) -> usize {
    marks.iter().rev().fold(0, |acc, m| acc * 3 + m.digit())
}

/// A slot's true standing, including the value the system holds for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotStatus {
    Unknown,
    Filled(usize),
    Confirmed(usize),
}

impl SlotStatus {
    fn mark(self) -> SlotMark {
        match self {
            SlotStatus::Unknown => SlotMark::Unknown,
            SlotStatus::Filled(_) => SlotMark::Filled,
            SlotStatus::Confirmed(_) => SlotMark::Confirmed,
        }
    }
}

/// Full environment state; the goal and slot values are hidden from the
/// acting policy but visible to tests and analysis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvState {
    pub statuses: Vec<SlotStatus>,
    pub goal: Vec<usize>,
    pub turns: u32,
    pub done: bool,
    pub success: bool,
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub obs: Observation,
    pub done: bool,
    pub success: bool,
}

/// The simulator itself. `ser` is the semantic error rate: the probability
/// that a requested value arrives corrupted, and independently that a
/// confirmation answer is flipped.
#[derive(Debug, Clone)]
pub struct SlotFillingEnv {
    domain: SlotDomain,
    ser: f64,
    state: Option<EnvState>,
}

impl SlotFillingEnv {
    pub fn new(domain: SlotDomain, ser: f64) -> Result<SlotFillingEnv> {
        domain.validate()?;
        if !(0.0..=1.0).contains(&ser) || !ser.is_finite() {
            return Err(Error::config(format!("error rate {ser} outside [0, 1]")));
        }
        Ok(SlotFillingEnv { domain, ser, state: None })
    }

    pub fn domain(&self) -> &SlotDomain {
        &self.domain
    }

    pub fn ser(&self) -> f64 {
        self.ser
    }

    /// Current state, if an episode is in progress.
    pub fn state(&self) -> Option<&EnvState> {
        self.state.as_ref()
    }

    #[cfg(test)]
    fn state_mut_for_tests(&mut self) -> &mut EnvState {
        self.state.as_mut().unwrap()
    }

    /// Starts a fresh episode with a uniformly drawn goal.
    pub fn reset(&mut self, rng: &mut (impl Rng + ?Sized)) -> Observation {
        let goal = self
            .domain
            .slots
            .iter()
            .map(|s| rng.gen_range(0..s.cardinality))
            .collect();
        self.install(goal)
    }

    /// Starts a fresh episode with the given goal; useful for exhaustive
    /// tests and scripted demonstrations.
    pub fn reset_with_goal(&mut self, goal: Vec<usize>) -> Result<Observation> {
        if goal.len() != self.domain.n_slots() {
            return Err(Error::invalid(format!(
                "goal has {} values, domain has {} slots",
                goal.len(),
                self.domain.n_slots()
            )));
        }
        for (value, slot) in goal.iter().zip(&self.domain.slots) {
            if *value >= slot.cardinality {
                return Err(Error::invalid(format!(
                    "goal value {value} out of range for slot {}",
                    slot.name
                )));
            }
        }
        Ok(self.install(goal))
    }

    fn install(&mut self, goal: Vec<usize>) -> Observation {
        let statuses = vec![SlotStatus::Unknown; self.domain.n_slots()];
        self.state = Some(EnvState { statuses, goal, turns: 0, done: false, success: false });
        self.observation().unwrap()
    }

    /// The current observation, if an episode is in progress.
    pub fn observation(&self) -> Option<Observation> {
        self.state.as_ref().map(|s| s.statuses.iter().map(|st| st.mark()).collect())
    }

    /// Fraction of slots confirmed at their true value; the task progress
    /// measure quality estimators consume.
    pub fn progress(&self) -> f64 {
        let Some(state) = &self.state else { return 0.0 };
        let correct = state
            .statuses
            .iter()
            .zip(&state.goal)
            .filter(|(st, g)| matches!(st, SlotStatus::Confirmed(v) if v == *g))
            .count();
        correct as f64 / state.statuses.len() as f64
    }

    /// Advances one system turn. Errors on steps after the episode ended or
    /// before any reset.
    pub fn step(&mut self, action: SystemAction, rng: &mut (impl Rng + ?Sized)) -> Result<Step> {
        let ser = self.ser;
        let d = self.domain.n_slots();
        let max_turns = self.domain.max_turns;
        let state = self
            .state
            .as_mut()
            .ok_or_else(|| Error::contract("step before reset"))?;
        if state.done {
            return Err(Error::contract("step on a finished episode"));
        }
        state.turns += 1;
        match action {
            SystemAction::Request(i) => {
                if i >= d {
                    return Err(Error::invalid(format!("no slot {i} to request")));
                }
                let cardinality = self.domain.slots[i].cardinality;
                let truth = state.goal[i];
                let heard = if rng.gen::<f64>() < ser {
                    // Corrupted: uniform over the other values.
                    let k = rng.gen_range(0..cardinality - 1);
                    if k >= truth {
                        k + 1
                    } else {
                        k
                    }
                } else {
                    truth
                };
                state.statuses[i] = SlotStatus::Filled(heard);
            }
            SystemAction::Confirm(i) => {
                if i >= d {
                    return Err(Error::invalid(format!("no slot {i} to confirm")));
                }
                match state.statuses[i] {
                    SlotStatus::Filled(v) | SlotStatus::Confirmed(v) => {
                        let truthful_yes = v == state.goal[i];
                        let flipped = rng.gen::<f64>() < ser;
                        let heard_yes = truthful_yes != flipped;
                        state.statuses[i] = if heard_yes {
                            SlotStatus::Confirmed(v)
                        } else {
                            SlotStatus::Unknown
                        };
                    }
                    // Nothing to read back; the user can only decline.
                    SlotStatus::Unknown => {}
                }
            }
            SystemAction::InformResults => {}
            SystemAction::Bye => {
                state.done = true;
                state.success = state
                    .statuses
                    .iter()
                    .zip(&state.goal)
                    .all(|(st, g)| matches!(st, SlotStatus::Confirmed(v) if v == g));
            }
        }
        if !state.done && state.turns >= max_turns {
            state.done = true;
            state.success = false;
        }
        let done = state.done;
        let success = state.success;
        Ok(Step { obs: self.observation().unwrap(), done, success })
    }
}

/// Scripted baseline: request the first unknown slot, else confirm the
/// first filled one, else say bye. Completes a clean episode in
/// `2 * n_slots + 1` turns.
pub fn handcrafted_policy(obs: &[SlotMark]) -> SystemAction {
    if let Some(i) = obs.iter().position(|m| *m == SlotMark::Unknown) {
        return SystemAction::Request(i);
    }
    if let Some(i) = obs.iter().position(|m| *m == SlotMark::Filled) {
        return SystemAction::Confirm(i);
    }
    SystemAction::Bye
}

/// One finished episode, as recorded by [`run_episode`].
#[derive(Debug, Clone)]
pub struct Episode {
    pub turns: u32,
    pub success: bool,
    pub progress: f64,
    /// (observation id, action id) per system turn.
    pub trajectory: Vec<(usize, usize)>,
}

/// Runs one episode under `policy`, which maps observations to actions.
pub fn run_episode(
    env: &mut SlotFillingEnv,
    policy: &mut dyn FnMut(&[SlotMark]) -> SystemAction,
    rng: &mut (impl Rng + ?Sized),
) -> Result<Episode> {
    let d = env.domain().n_slots();
    let mut obs = env.reset(rng);
    let mut trajectory = Vec::new();
    loop {
        let action = policy(&obs);
        trajectory.push((obs_id(&obs), action.to_id(d)));
        let step = env.step(action, rng)?;
        obs = step.obs;
        if step.done {
            let state = env.state().unwrap();
            return Ok(Episode {
                turns: state.turns,
                success: step.success,
                progress: env.progress(),
                trajectory,
            });
        }
    }
}

/// Aggregate results for one error-rate level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub ser: f64,
    pub success_rate: f64,
    pub avg_turns: f64,
    pub avg_reward: f64,
}

/// Evaluates a fixed policy across error-rate levels, `n_episodes` per
/// level, each level on its own deterministic stream.
pub fn run_benchmark(
    policy: &mut dyn FnMut(&[SlotMark]) -> SystemAction,
    domain: &SlotDomain,
    ser_levels: &[f64],
    n_episodes: usize,
    reward: &RewardModel,
    seed: u64,
) -> Result<Vec<BenchmarkRow>> {
    if ser_levels.is_empty() {
        return Err(Error::config("benchmark needs at least one error-rate level"));
    }
    if n_episodes == 0 {
        return Err(Error::config("benchmark needs at least one episode per level"));
    }
    let mut rows = Vec::with_capacity(ser_levels.len());
    for (idx, &ser) in ser_levels.iter().enumerate() {
        let mut env = SlotFillingEnv::new(domain.clone(), ser)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(idx as u64));
        let mut successes = 0usize;
        let mut turns_sum = 0.0;
        let mut reward_sum = 0.0;
        for _ in 0..n_episodes {
            let ep = run_episode(&mut env, policy, &mut rng)?;
            successes += usize::from(ep.success);
            turns_sum += f64::from(ep.turns);
            let features = EpisodeFeatures { progress: ep.progress, turns: ep.turns };
            reward_sum += reward.episode_return(ep.turns, ep.success, &features);
        }
        let n = n_episodes as f64;
        rows.push(BenchmarkRow {
            ser,
            success_rate: successes as f64 / n,
            avg_turns: turns_sum / n,
            avg_reward: reward_sum / n,
        });
    }
    Ok(rows)
}
