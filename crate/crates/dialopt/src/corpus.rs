//! Annotated dialogue logs and their reduction to expert observations.
//!
//! A log is a turn sequence alternating freely between the system and the
//! player. The dialogue state tracks five variables:
//!
//! 1. `terminal`: someone said farewell,
//! 2. `sys_goal`: last goal the system informed about (0 = none, else 1..=G),
//! 3. `user_goal`: last goal the player asked about (same range),
//! 4. `gen_act`: class of the last generic system act (0 = content, 1 = help
//!    offer, 2 = task query; the last only exists in domains with `ask_task`),
//! 5. `user_help`: the player has an unanswered help request.
//!
//! States are packed into a single id mixed-radix style, so a domain with G
//! goals and `ask_task` available has `2 * (G+1)^2 * 3 * 2` states.
//! Every system act except `wait` moves the state deterministically; `wait`
//! hands the floor to the player, and what comes back is estimated from
//! counts with additive smoothing.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Mdp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    System,
    Player,
}

/// Dialogue act. `quit` is available to both speakers; the `user_*` acts
/// belong to the player and the rest to the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Act {
    Quit,
    InformDo(usize),
    InformHelp,
    AskTask,
    Wait,
    Ack,
    Other,
    UserGoal(usize),
    UserHelp,
    UserOther,
}

impl Act {
    fn from_parts(name: &str, goal: Option<usize>) -> Result<Act> {
        let needs_goal = matches!(name, "inform_do" | "user_goal");
        match (needs_goal, goal) {
            (true, None) => {
                return Err(Error::invalid(format!("act {name:?} requires a goal id")))
            }
            (false, Some(_)) => {
                return Err(Error::invalid(format!("act {name:?} does not take a goal id")))
            }
            _ => {}
        }
        Ok(match name {
            "quit" => Act::Quit,
            "inform_do" => Act::InformDo(goal.unwrap()),
            "inform_help" => Act::InformHelp,
            "ask_task" => Act::AskTask,
            "wait" => Act::Wait,
            "ack" => Act::Ack,
            "other" => Act::Other,
            "user_goal" => Act::UserGoal(goal.unwrap()),
            "user_help" => Act::UserHelp,
            "user_other" => Act::UserOther,
            _ => return Err(Error::invalid(format!("unknown act {name:?}"))),
        })
    }

    fn to_parts(self) -> (&'static str, Option<usize>) {
        match self {
            Act::Quit => ("quit", None),
            Act::InformDo(g) => ("inform_do", Some(g)),
            Act::InformHelp => ("inform_help", None),
            Act::AskTask => ("ask_task", None),
            Act::Wait => ("wait", None),
            Act::Ack => ("ack", None),
            Act::Other => ("other", None),
            Act::UserGoal(g) => ("user_goal", Some(g)),
            Act::UserHelp => ("user_help", None),
            Act::UserOther => ("user_other", None),
        }
    }

    fn allowed_for(self, speaker: Speaker) -> bool {
        match self {
            Act::Quit => true,
            Act::UserGoal(_) | Act::UserHelp | Act::UserOther => speaker == Speaker::Player,
            _ => speaker == Speaker::System,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DialogueTurn {
    pub speaker: Speaker,
    pub act: Act,
}

#[derive(Serialize, Deserialize)]
struct RawTurn {
    speaker: Speaker,
    act: String,
    #[serde(default)]
    goal: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawLog {
    id: String,
    n_goals: usize,
    has_ask_task: bool,
    turns: Vec<RawTurn>,
}

/// One annotated dialogue, validated on construction: turns non-empty, acts
/// matching their speaker, goal ids within `1..=n_goals`, `ask_task` only in
/// domains that have it, and at most one farewell with nothing after it.
#[derive(Debug, Clone)]
pub struct DialogueLog {
    pub id: String,
    pub n_goals: usize,
    pub has_ask_task: bool,
    pub turns: Vec<DialogueTurn>,
}

impl DialogueLog {
    pub fn new(
        id: impl Into<String>,
        n_goals: usize,
        has_ask_task: bool,
        turns: Vec<DialogueTurn>,
    ) -> Result<DialogueLog> {
        let log = DialogueLog {
            id: id.into(),
            n_goals,
            has_ask_task,
            turns,
        };
        log.validate()?;
        Ok(log)
    }

    pub fn space(&self) -> StateSpace {
        StateSpace {
            n_goals: self.n_goals,
            has_ask_task: self.has_ask_task,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_goals == 0 {
            return Err(Error::invalid(format!("log {:?} declares zero goals", self.id)));
        }
        if self.turns.is_empty() {
            return Err(Error::invalid(format!("log {:?} has no turns", self.id)));
        }
        let mut ended = false;
        for (i, turn) in self.turns.iter().enumerate() {
            let place = || format!("log {:?}, turn {}", self.id, i + 1);
            if ended {
                return Err(Error::invalid(format!("{}: turn after the farewell", place())));
            }
            if !turn.act.allowed_for(turn.speaker) {
                return Err(Error::invalid(format!(
                    "{}: act not available to {:?}",
                    place(),
                    turn.speaker
                )));
            }
            match turn.act {
                Act::InformDo(g) | Act::UserGoal(g) => {
                    if g == 0 || g > self.n_goals {
                        return Err(Error::invalid(format!(
                            "{}: goal {g} outside 1..={}",
                            place(),
                            self.n_goals
                        )));
                    }
                }
                Act::AskTask if !self.has_ask_task => {
                    return Err(Error::invalid(format!(
                        "{}: ask_task in a domain without it",
                        place()
                    )));
                }
                Act::Quit => ended = true,
                _ => {}
            }
        }
        Ok(())
    }

    fn from_raw(raw: RawLog) -> Result<DialogueLog> {
        let turns = raw
            .turns
            .into_iter()
            .map(|t| {
                Ok(DialogueTurn {
                    speaker: t.speaker,
                    act: Act::from_parts(&t.act, t.goal)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        DialogueLog::new(raw.id, raw.n_goals, raw.has_ask_task, turns)
    }

    fn to_raw(&self) -> RawLog {
        RawLog {
            id: self.id.clone(),
            n_goals: self.n_goals,
            has_ask_task: self.has_ask_task,
            turns: self
                .turns
                .iter()
                .map(|t| {
                    let (act, goal) = t.act.to_parts();
                    RawTurn {
                        speaker: t.speaker,
                        act: act.to_string(),
                        goal,
                    }
                })
                .collect(),
        }
    }
}

/// Read one dialogue per line; blank lines are skipped, errors carry the
/// 1-based line number.
pub fn read_logs_jsonl(path: impl AsRef<Path>) -> Result<Vec<DialogueLog>> {
    let file = fs::File::open(path)?;
    let mut logs = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawLog = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        let log = DialogueLog::from_raw(raw).map_err(|e| Error::Parse {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        logs.push(log);
    }
    Ok(logs)
}

pub fn write_logs_jsonl(path: impl AsRef<Path>, logs: &[DialogueLog]) -> Result<()> {
    let mut out = String::new();
    for log in logs {
        out.push_str(&serde_json::to_string(&log.to_raw())?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// The five state variables, unpacked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StateVars {
    pub terminal: bool,
    pub sys_goal: usize,
    pub user_goal: usize,
    pub gen_act: usize,
    pub user_help: bool,
}

/// Geometry of one dialogue domain's state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    pub n_goals: usize,
    pub has_ask_task: bool,
}

impl StateSpace {
    /// Radix of the `gen_act` variable.
    pub fn k(&self) -> usize {
        if self.has_ask_task {
            3
        } else {
            2
        }
    }

    pub fn size(&self) -> usize {
        let g1 = self.n_goals + 1;
        2 * g1 * g1 * self.k() * 2
    }

    /// All-zeros starting state.
    pub fn initial(&self) -> StateVars {
        StateVars::default()
    }

    /// Pack the five variables, least-significant first:
    /// `terminal + 2*(sys_goal + (G+1)*(user_goal + (G+1)*(gen_act + K*user_help)))`.
    pub fn encode(&self, vars: &StateVars) -> Result<usize> {
        let g1 = self.n_goals + 1;
        if vars.sys_goal >= g1 || vars.user_goal >= g1 {
            return Err(Error::invalid(format!(
                "goal variable outside 0..={}",
                self.n_goals
            )));
        }
        if vars.gen_act >= self.k() {
            return Err(Error::invalid(format!(
                "gen_act {} outside 0..{}",
                vars.gen_act,
                self.k()
            )));
        }
        let mut id = vars.gen_act + self.k() * usize::from(vars.user_help);
        id = vars.user_goal + g1 * id;
        id = vars.sys_goal + g1 * id;
        Ok(usize::from(vars.terminal) + 2 * id)
    }

    pub fn decode(&self, id: usize) -> Result<StateVars> {
        if id >= self.size() {
            return Err(Error::invalid(format!(
                "state id {id} outside 0..{}",
                self.size()
            )));
        }
        let g1 = self.n_goals + 1;
        let terminal = id % 2 == 1;
        let rest = id / 2;
        let sys_goal = rest % g1;
        let rest = rest / g1;
        let user_goal = rest % g1;
        let rest = rest / g1;
        let gen_act = rest % self.k();
        let user_help = rest / self.k() == 1;
        Ok(StateVars {
            terminal,
            sys_goal,
            user_goal,
            gen_act,
            user_help,
        })
    }

    /// Fixed numeric ids for system acts: `quit = 0`, `inform_do(g) = g`,
    /// then help, task query, wait, ack, other. The task-query slot is
    /// reserved even in domains without it, so ids are stable across domains.
    pub fn action_id(&self, act: Act) -> Result<usize> {
        let g = self.n_goals;
        Ok(match act {
            Act::Quit => 0,
            Act::InformDo(goal) => {
                if goal == 0 || goal > g {
                    return Err(Error::invalid(format!("goal {goal} outside 1..={g}")));
                }
                goal
            }
            Act::InformHelp => g + 1,
            Act::AskTask => {
                if !self.has_ask_task {
                    return Err(Error::invalid("ask_task is not available in this domain"));
                }
                g + 2
            }
            Act::Wait => g + 3,
            Act::Ack => g + 4,
            Act::Other => g + 5,
            Act::UserGoal(_) | Act::UserHelp | Act::UserOther => {
                return Err(Error::invalid("player acts have no system action id"))
            }
        })
    }

    pub fn action_from_id(&self, id: usize) -> Result<Act> {
        let g = self.n_goals;
        let act = match id {
            0 => Act::Quit,
            goal if goal <= g => Act::InformDo(goal),
            x if x == g + 1 => Act::InformHelp,
            x if x == g + 2 => Act::AskTask,
            x if x == g + 3 => Act::Wait,
            x if x == g + 4 => Act::Ack,
            x if x == g + 5 => Act::Other,
            _ => return Err(Error::invalid(format!("action id {id} outside 0..{}", g + 6))),
        };
        if act == Act::AskTask && !self.has_ask_task {
            return Err(Error::invalid("ask_task is not available in this domain"));
        }
        Ok(act)
    }

    /// System action ids usable in this domain, ascending.
    pub fn valid_action_ids(&self) -> Vec<usize> {
        (0..self.n_goals + 6)
            .filter(|&id| self.has_ask_task || id != self.n_goals + 2)
            .collect()
    }

    pub fn wait_id(&self) -> usize {
        self.n_goals + 3
    }
}

/// Deterministic successor for a system act. `wait` is refused here because
/// its successors are stochastic; terminal states absorb every other act.
pub fn next_s(space: &StateSpace, s: usize, action_id: usize) -> Result<usize> {
    let act = space.action_from_id(action_id)?;
    if act == Act::Wait {
        return Err(Error::contract(
            "wait has stochastic successors; use the estimated transition rows",
        ));
    }
    let mut vars = space.decode(s)?;
    if vars.terminal {
        return Ok(s);
    }
    apply_system_act(&mut vars, act);
    space.encode(&vars)
}

fn apply_system_act(vars: &mut StateVars, act: Act) {
    match act {
        Act::Quit => vars.terminal = true,
        Act::InformDo(g) => {
            vars.sys_goal = g;
            vars.gen_act = 0;
            vars.user_help = false;
        }
        Act::InformHelp => {
            vars.gen_act = 1;
            vars.user_help = false;
        }
        Act::AskTask => vars.gen_act = 2,
        Act::Ack | Act::Other => vars.gen_act = 0,
        Act::Wait => {}
        Act::UserGoal(_) | Act::UserHelp | Act::UserOther => {
            unreachable!("player acts are not system acts")
        }
    }
}

fn apply_player_act(vars: &mut StateVars, act: Act) {
    match act {
        Act::UserGoal(g) => vars.user_goal = g,
        Act::UserHelp => vars.user_help = true,
        Act::UserOther => {}
        Act::Quit => vars.terminal = true,
        _ => unreachable!("system acts are not player acts"),
    }
}

/// Expert state-action pairs in the order they occurred.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExpertObservations {
    pub pairs: Vec<(usize, usize)>,
}

impl ExpertObservations {
    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// Concatenation that forgets dialogue boundaries; fine for likelihoods
    /// and counting, not for successor statistics.
    pub fn concat(per_log: &[ExpertObservations]) -> ExpertObservations {
        ExpertObservations {
            pairs: per_log.iter().flat_map(|o| o.pairs.iter().copied()).collect(),
        }
    }
}

/// Replay a log from the initial state: each system turn contributes the pair
/// (state before the turn, system action id), then moves the state; player
/// turns only update the player-side variables.
pub fn extract_observations(log: &DialogueLog) -> Result<ExpertObservations> {
    let space = log.space();
    let mut vars = space.initial();
    let mut pairs = Vec::new();
    for turn in &log.turns {
        match turn.speaker {
            Speaker::System => {
                let s = space.encode(&vars)?;
                pairs.push((s, space.action_id(turn.act)?));
                apply_system_act(&mut vars, turn.act);
            }
            Speaker::Player => apply_player_act(&mut vars, turn.act),
        }
    }
    Ok(ExpertObservations { pairs })
}

/// Per-dialogue observation record, the line format of observations JSONL.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub id: String,
    pub n_goals: usize,
    pub has_ask_task: bool,
    pub pairs: Vec<(usize, usize)>,
}

pub fn write_observations_jsonl(path: impl AsRef<Path>, records: &[ObservationRecord]) -> Result<()> {
    let mut out = String::new();
    for rec in records {
        out.push_str(&serde_json::to_string(rec)?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_observations_jsonl(path: impl AsRef<Path>) -> Result<Vec<ObservationRecord>> {
    let file = fs::File::open(path)?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ObservationRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}

/// Additively smoothed transition estimate:
/// `(count + alpha) / (total + z * alpha)` for a row over `z` successors.
pub fn smoothed_probability(count: usize, total: usize, z: usize, alpha: f64) -> f64 {
    (count as f64 + alpha) / (total as f64 + z as f64 * alpha)
}

#[derive(Debug, Clone, Default)]
struct RowCounts {
    total: usize,
    by_successor: BTreeMap<usize, usize>,
}

/// Estimated post-`wait` transition rows. States never observed with `wait`
/// fall back to the uniform row the smoothing implies.
#[derive(Debug, Clone)]
pub struct WaitTransitions {
    n_states: usize,
    alpha: f64,
    counts: BTreeMap<usize, RowCounts>,
}

impl WaitTransitions {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn probability(&self, s: usize, to: usize) -> f64 {
        let (count, total) = match self.counts.get(&s) {
            Some(row) => (row.by_successor.get(&to).copied().unwrap_or(0), row.total),
            None => (0, 0),
        };
        smoothed_probability(count, total, self.n_states, self.alpha)
    }

    /// Dense probability row for `s`; always sums to one.
    pub fn row(&self, s: usize) -> Vec<f64> {
        (0..self.n_states).map(|to| self.probability(s, to)).collect()
    }

    /// States with at least one observed `wait` transition, ascending.
    pub fn observed_states(&self) -> Vec<usize> {
        self.counts.keys().copied().collect()
    }

    pub fn count(&self, s: usize, to: usize) -> usize {
        self.counts
            .get(&s)
            .and_then(|row| row.by_successor.get(&to).copied())
            .unwrap_or(0)
    }

    pub fn total(&self, s: usize) -> usize {
        self.counts.get(&s).map(|row| row.total).unwrap_or(0)
    }
}

/// Count `(state, wait, next state)` triples within each dialogue's pair
/// sequence and smooth them. A trailing `wait` with no following system turn
/// contributes nothing, so every counted occurrence has a successor.
pub fn estimate_transitions(
    per_log: &[ExpertObservations],
    space: &StateSpace,
    alpha: f64,
) -> Result<WaitTransitions> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::config(format!("smoothing alpha must be positive, got {alpha}")));
    }
    let n_states = space.size();
    let wait = space.wait_id();
    let mut counts: BTreeMap<usize, RowCounts> = BTreeMap::new();
    for obs in per_log {
        for window in obs.pairs.windows(2) {
            let (s, a) = window[0];
            let (to, _) = window[1];
            if a != wait {
                continue;
            }
            if s >= n_states || to >= n_states {
                return Err(Error::invalid(format!(
                    "observation pair references state outside 0..{n_states}"
                )));
            }
            let row = counts.entry(s).or_default();
            row.total += 1;
            *row.by_successor.entry(to).or_default() += 1;
        }
    }
    Ok(WaitTransitions {
        n_states,
        alpha,
        counts,
    })
}

/// Assemble the full dialogue MDP skeleton: deterministic rows for every
/// system act, estimated rows for `wait`, self-loops in terminal states.
/// Rewards start at zero with the given bound.
pub fn build_dialogue_mdp(
    space: &StateSpace,
    wait: &WaitTransitions,
    gamma: f64,
    r_max: f64,
) -> Result<Mdp> {
    if wait.n_states() != space.size() {
        return Err(Error::invalid(format!(
            "wait rows cover {} states, space has {}",
            wait.n_states(),
            space.size()
        )));
    }
    let n = space.size();
    let ids = space.valid_action_ids();
    let wait_id = space.wait_id();
    let mut b = Mdp::builder(n, gamma).r_max(r_max);
    for s in 0..n {
        b = b.state_actions(s, ids.clone());
        let terminal = space.decode(s)?.terminal;
        for &a in &ids {
            if terminal {
                b = b.transition(s, a, s, 1.0);
            } else if a == wait_id {
                for (to, p) in wait.row(s).into_iter().enumerate() {
                    b = b.transition(s, a, to, p);
                }
            } else {
                b = b.transition(s, a, next_s(space, s, a)?, 1.0);
            }
        }
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(g: usize, ask: bool) -> StateSpace {
        StateSpace {
            n_goals: g,
            has_ask_task: ask,
        }
    }

    #[test]
    fn space_sizes_match_the_two_reference_domains() {
        assert_eq!(space(1, false).size(), 32);
        assert_eq!(space(5, true).size(), 432);
    }

    #[test]
    fn encode_decode_roundtrip_everywhere() {
        for g in 1..=5 {
            for ask in [false, true] {
                let sp = space(g, ask);
                for id in 0..sp.size() {
                    let vars = sp.decode(id).unwrap();
                    assert_eq!(sp.encode(&vars).unwrap(), id);
                }
            }
        }
    }

    #[test]
    fn encode_rejects_out_of_range_variables() {
        let sp = space(2, false);
        let bad_goal = StateVars {
            user_goal: 3,
            ..Default::default()
        };
        assert!(sp.encode(&bad_goal).is_err());
        let bad_gen = StateVars {
            gen_act: 2,
            ..Default::default()
        };
        assert!(sp.encode(&bad_gen).is_err());
        assert!(sp.decode(sp.size()).is_err());
    }

    #[test]
    fn action_ids_roundtrip_and_respect_the_domain() {
        let sp = space(3, true);
        for id in sp.valid_action_ids() {
            assert_eq!(sp.action_id(sp.action_from_id(id).unwrap()).unwrap(), id);
        }
        let no_ask = space(3, false);
        assert!(no_ask.action_id(Act::AskTask).is_err());
        assert!(no_ask.action_from_id(5).is_err());
        assert_eq!(no_ask.valid_action_ids(), vec![0, 1, 2, 3, 4, 6, 7, 8]);
        assert!(sp.action_id(Act::UserHelp).is_err());
    }

    #[test]
    fn next_s_applies_the_documented_effects() {
        let sp = space(2, true);
        let s0 = sp.encode(&sp.initial()).unwrap();
        let after = sp
            .decode(next_s(&sp, s0, sp.action_id(Act::InformDo(1)).unwrap()).unwrap())
            .unwrap();
        assert_eq!(
            after,
            StateVars {
                sys_goal: 1,
                ..Default::default()
            }
        );
        let after_quit = sp.decode(next_s(&sp, s0, 0).unwrap()).unwrap();
        assert!(after_quit.terminal);
        // Terminal states absorb.
        let t = sp.encode(&after_quit).unwrap();
        assert_eq!(next_s(&sp, t, sp.action_id(Act::Ack).unwrap()).unwrap(), t);
        // Wait is explicitly refused.
        assert!(matches!(
            next_s(&sp, s0, sp.wait_id()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn next_s_stays_inside_the_space() {
        let sp = space(2, true);
        for s in 0..sp.size() {
            for a in sp.valid_action_ids() {
                if a == sp.wait_id() {
                    continue;
                }
                assert!(next_s(&sp, s, a).unwrap() < sp.size());
            }
        }
    }

    fn turn(speaker: Speaker, act: Act) -> DialogueTurn {
        DialogueTurn { speaker, act }
    }

    #[test]
    fn single_quit_log_yields_one_pair() {
        let log = DialogueLog::new("q", 1, false, vec![turn(Speaker::System, Act::Quit)]).unwrap();
        let obs = extract_observations(&log).unwrap();
        assert_eq!(obs.pairs, vec![(0, 0)]);
    }

    #[test]
    fn player_turns_update_only_their_variables() {
        let log = DialogueLog::new(
            "p",
            2,
            false,
            vec![
                turn(Speaker::Player, Act::UserGoal(2)),
                turn(Speaker::Player, Act::UserHelp),
                turn(Speaker::System, Act::Ack),
            ],
        )
        .unwrap();
        let obs = extract_observations(&log).unwrap();
        let sp = log.space();
        let expected = sp
            .encode(&StateVars {
                user_goal: 2,
                user_help: true,
                ..Default::default()
            })
            .unwrap();
        assert_eq!(obs.pairs, vec![(expected, sp.action_id(Act::Ack).unwrap())]);
    }

    #[test]
    fn validation_rejects_malformed_logs() {
        // Turn after the farewell.
        assert!(DialogueLog::new(
            "a",
            1,
            false,
            vec![turn(Speaker::System, Act::Quit), turn(Speaker::System, Act::Ack)],
        )
        .is_err());
        // Player borrowing a system act.
        assert!(DialogueLog::new("b", 1, false, vec![turn(Speaker::Player, Act::Ack)]).is_err());
        // Goal out of range.
        assert!(DialogueLog::new(
            "c",
            1,
            false,
            vec![turn(Speaker::System, Act::InformDo(2))]
        )
        .is_err());
        // ask_task without the capability.
        assert!(DialogueLog::new("d", 1, false, vec![turn(Speaker::System, Act::AskTask)]).is_err());
        // Empty.
        assert!(DialogueLog::new("e", 1, false, vec![]).is_err());
        // Player farewell is fine.
        assert!(DialogueLog::new("f", 1, false, vec![turn(Speaker::Player, Act::Quit)]).is_ok());
    }

    #[test]
    fn smoothing_matches_the_worked_example() {
        assert!((smoothed_probability(3, 5, 10, 0.1) - 3.1 / 6.0).abs() < 1e-15);
        // No observations at all: the uniform row.
        assert!((smoothed_probability(0, 0, 10, 0.1) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn estimated_rows_are_stochastic_and_flatten_with_alpha() {
        let sp = space(1, false);
        let obs = vec![ExpertObservations {
            pairs: vec![(0, sp.wait_id()), (4, sp.wait_id()), (4, 0), (0, sp.wait_id()), (6, 0)],
        }];
        let est = estimate_transitions(&obs, &sp, 0.1).unwrap();
        assert_eq!(est.total(0), 2);
        assert_eq!(est.count(0, 4), 1);
        assert_eq!(est.count(0, 6), 1);
        assert_eq!(est.total(4), 1);
        for s in [0, 4, 17] {
            let sum: f64 = est.row(s).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "row {s} sums to {sum}");
        }
        // More smoothing moves rows toward uniform.
        let flat = estimate_transitions(&obs, &sp, 10.0).unwrap();
        let uniform = 1.0 / sp.size() as f64;
        let tv = |r: &[f64]| -> f64 { r.iter().map(|p| (p - uniform).abs()).sum::<f64>() / 2.0 };
        assert!(tv(&flat.row(0)) < tv(&est.row(0)));
        assert!(estimate_transitions(&obs, &sp, 0.0).is_err());
    }

    #[test]
    fn dialogue_mdp_rows_validate_and_wire_the_right_successors() {
        let sp = space(1, false);
        let obs = vec![ExpertObservations {
            pairs: vec![(0, sp.wait_id()), (4, 0)],
        }];
        let est = estimate_transitions(&obs, &sp, 0.1).unwrap();
        let mdp = build_dialogue_mdp(&sp, &est, 0.9, 1.0).unwrap();
        assert_eq!(mdp.n_states(), 32);
        // Deterministic act: inform_do(1) from the start state.
        let to = next_s(&sp, 0, 1).unwrap();
        assert_eq!(mdp.transition(0, 1, to), 1.0);
        // Estimated wait row from state 0.
        let p = mdp.transition(0, sp.wait_id(), 4);
        assert!((p - smoothed_probability(1, 1, 32, 0.1)).abs() < 1e-12);
        // Terminal self-loop: state 1 is terminal (id 0 with terminal bit set).
        assert_eq!(mdp.transition(1, sp.wait_id(), 1), 1.0);
    }
}
