//! Episode-level dialogue returns. Every system turn costs one; the ending
//! adds a bonus, either for task success or for judged interaction quality.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How one dialogue episode ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOutcome {
    /// System turns taken.
    pub turns: u32,
    pub success: bool,
    /// Interaction quality on the 1..=5 scale, when judged.
    pub iq: Option<u8>,
}

/// Task-success return: `-turns`, plus 20 when the task was completed.
pub fn reward_ts(outcome: &EpisodeOutcome) -> f64 {
    let bonus = if outcome.success { 20.0 } else { 0.0 };
    -f64::from(outcome.turns) + bonus
}

/// Interaction-quality return: `-turns + (iq - 1) * 5`. The worst judgment
/// leaves the bare turn penalty; the best is worth the success bonus.
pub fn reward_iq(outcome: &EpisodeOutcome) -> Result<f64> {
    let Some(iq) = outcome.iq else {
        return Err(Error::invalid("outcome carries no quality judgment"));
    };
    if !(1..=5).contains(&iq) {
        return Err(Error::invalid(format!("interaction quality {iq} outside 1..=5")));
    }
    Ok(-f64::from(outcome.turns) + f64::from(iq - 1) * 5.0)
}

/// End-of-episode features a quality estimator may look at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeFeatures {
    /// Fraction of the task completed correctly, in [0, 1].
    pub progress: f64,
    pub turns: u32,
}

/// Judges an episode on the 1..=5 quality scale.
pub trait IqEstimator {
    fn estimate(&self, features: &EpisodeFeatures) -> u8;
}

/// Table lookup over five equal progress bins: bucket `i` covers progress
/// `[i/5, (i+1)/5)`, with full progress landing in the last bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct TableIqEstimator {
    buckets: [u8; 5],
}

#[derive(Serialize, Deserialize)]
struct TableIqFile {
    buckets: Vec<u8>,
}

impl TableIqEstimator {
    pub fn new(buckets: [u8; 5]) -> Result<TableIqEstimator> {
        if let Some(b) = buckets.iter().find(|b| !(1..=5).contains(*b)) {
            return Err(Error::invalid(format!("bucket value {b} outside 1..=5")));
        }
        Ok(TableIqEstimator { buckets })
    }

    pub fn from_json_str(text: &str) -> Result<TableIqEstimator> {
        let file: TableIqFile = serde_json::from_str(text)?;
        let buckets: [u8; 5] = file.buckets.try_into().map_err(|v: Vec<u8>| {
            Error::invalid(format!("estimator needs exactly 5 buckets, got {}", v.len()))
        })?;
        TableIqEstimator::new(buckets)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<TableIqEstimator> {
        TableIqEstimator::from_json_str(&fs::read_to_string(path)?)
    }
}

impl IqEstimator for TableIqEstimator {
    fn estimate(&self, features: &EpisodeFeatures) -> u8 {
        let p = features.progress.clamp(0.0, 1.0);
        let idx = ((p * 5.0) as usize).min(4);
        self.buckets[idx].clamp(1, 5)
    }
}

/// Which return learning optimizes and evaluation reports.
pub enum RewardModel {
    TaskSuccess,
    InteractionQuality(Box<dyn IqEstimator>),
}

impl RewardModel {
    /// Bonus granted on the terminal step, on top of that step's turn
    /// penalty. Summing `-1` per step plus this bonus reproduces
    /// [`reward_ts`] / [`reward_iq`] exactly.
    pub fn terminal_bonus(&self, success: bool, features: &EpisodeFeatures) -> f64 {
        match self {
            RewardModel::TaskSuccess => {
                if success {
                    20.0
                } else {
                    0.0
                }
            }
            RewardModel::InteractionQuality(est) => {
                let iq = est.estimate(features).clamp(1, 5);
                f64::from(iq - 1) * 5.0
            }
        }
    }

    /// Whole-episode return for an outcome with the given features.
    pub fn episode_return(&self, turns: u32, success: bool, features: &EpisodeFeatures) -> f64 {
        -f64::from(turns) + self.terminal_bonus(success, features)
    }
}

impl std::fmt::Debug for RewardModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RewardModel::TaskSuccess => write!(f, "TaskSuccess"),
            RewardModel::InteractionQuality(_) => write!(f, "InteractionQuality(..)"),
        }
    }
}
