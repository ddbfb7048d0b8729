//! How much expert help speeds up Q-learning.
//!
//! Trains on the noise-free three-slot task at several values of beta, the
//! probability that the agent acts for itself, under both imitation schemes.
//! Beta 1.0 is plain Q-learning; lower beta hands more episodes (or single
//! actions) to the scripted expert. Reported: first curve checkpoint whose
//! greedy success rate reaches 90%.
//!
//! ```text
//! cargo run --release --example imitation_sweep
//! ```

use dialopt::imitation::{
    train, HandcraftedExpert, ImitationConfig, ImitationMode, SamplerConfig, TrainConfig,
};
use dialopt::rewards::RewardModel;
use dialopt::sim::{SlotDomain, SlotFillingEnv};
use dialopt::Result;

fn episodes_to_90(env: &mut SlotFillingEnv, imitation: &ImitationConfig, seed: u64) -> Result<Option<usize>> {
    let cfg = TrainConfig { eval_every: 25, ..TrainConfig::default() };
    let result = train(
        env,
        &HandcraftedExpert,
        imitation,
        &SamplerConfig::default(),
        &cfg,
        &RewardModel::TaskSuccess,
        seed,
    )?;
    Ok(result.curve.iter().find(|p| p.success_rate >= 0.9).map(|p| p.episode))
}

fn main() -> Result<()> {
    let domain = SlotDomain::default_domain();
    let seed = 7;

    println!("mode            beta  episodes-to-90%");
    let baseline = episodes_to_90(
        &mut SlotFillingEnv::new(domain.clone(), 0.0)?,
        &ImitationConfig { mode: ImitationMode::None, beta: 1.0 },
        seed,
    )?;
    println!("none             1.0  {}", fmt(baseline));

    for mode in [ImitationMode::Demonstrations, ImitationMode::Feedbacks] {
        for beta in [0.75, 0.5, 0.25] {
            let hit = episodes_to_90(
                &mut SlotFillingEnv::new(domain.clone(), 0.0)?,
                &ImitationConfig { mode, beta },
                seed,
            )?;
            println!("{:<15} {beta:>4}  {}", format!("{mode:?}").to_lowercase(), fmt(hit));
        }
    }
    println!("\n(curves checkpoint every 25 episodes; lower is better)");
    Ok(())
}

fn fmt(hit: Option<usize>) -> String {
    match hit {
        Some(ep) => ep.to_string(),
        None => "not reached".into(),
    }
}
