//! The two episode returns side by side.
//!
//! Task success pays a flat 20 on completion; interaction quality grades the
//! ending on a five-point scale worth 0 to 20. Both charge one per system
//! turn, so a long successful dialogue can still score worse than a short
//! mediocre one.
//!
//! ```text
//! cargo run --example dialogue_rewards
//! ```

use dialopt::rewards::{
    reward_iq, reward_ts, EpisodeFeatures, EpisodeOutcome, IqEstimator, RewardModel,
    TableIqEstimator,
};
use dialopt::Result;

fn main() -> Result<()> {
    println!("turns  success  iq   r_ts    r_iq");
    let cases = [
        (5u32, true, Some(5u8)),
        (5, true, Some(3)),
        (10, true, Some(4)),
        (10, false, Some(1)),
        (25, true, Some(5)),
    ];
    for (turns, success, iq) in cases {
        let outcome = EpisodeOutcome { turns, success, iq };
        println!(
            "{turns:>5}  {success:>7}  {:>2}  {:>6.1}  {:>6.1}",
            iq.unwrap(),
            reward_ts(&outcome),
            reward_iq(&outcome)?,
        );
    }

    // A judged return needs a judge; the bucket table maps task progress to
    // the 1..=5 scale. This one is optimistic about half-finished tasks.
    let judge = TableIqEstimator::new([1, 2, 4, 4, 5])?;
    println!("\nprogress -> judged quality:");
    for p in [0.0, 0.3, 0.5, 0.8, 1.0] {
        let f = EpisodeFeatures { progress: p, turns: 8 };
        println!("  {p:.1} -> {}", judge.estimate(&f));
    }

    let model = RewardModel::InteractionQuality(Box::new(judge));
    let f = EpisodeFeatures { progress: 1.0, turns: 7 };
    println!("\nfull-progress 7-turn episode under the judged model: {}", model.episode_return(7, true, &f));
    Ok(())
}
