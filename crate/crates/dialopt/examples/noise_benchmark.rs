//! Policies under a rising semantic error rate.
//!
//! The simulator corrupts each user response with probability `ser`. The
//! scripted policy and a freshly trained q-table are swept over the same
//! error levels; success degrades, turns stretch.
//!
//! ```text
//! cargo run --release --example noise_benchmark
//! ```

use dialopt::imitation::{train, HandcraftedExpert, ImitationConfig, SamplerConfig, TrainConfig};
use dialopt::rewards::RewardModel;
use dialopt::sim::{handcrafted_policy, run_benchmark, SlotDomain, SlotFillingEnv, SystemAction};
use dialopt::sim::{obs_id, SlotMark};
use dialopt::Result;

fn main() -> Result<()> {
    let domain = SlotDomain::default_domain();
    let levels = [0.0, 0.15, 0.30];
    let reward = RewardModel::TaskSuccess;
    let seed = 11;

    println!("training a q-table on the noise-free task...");
    let trained = train(
        &mut SlotFillingEnv::new(domain.clone(), 0.0)?,
        &HandcraftedExpert,
        &ImitationConfig::default(),
        &SamplerConfig::default(),
        &TrainConfig::default(),
        &reward,
        seed,
    )?;

    let d = domain.n_slots();
    let q = trained.q;
    let mut greedy = |obs: &[SlotMark]| {
        SystemAction::from_id(q.greedy(obs_id(obs)), d).expect("greedy id is valid")
    };

    println!("\n              ser   success  avg_turns  avg_reward");
    for (name, rows) in [
        ("handcrafted", run_benchmark(&mut |o: &[SlotMark]| handcrafted_policy(o), &domain, &levels, 500, &reward, seed)?),
        ("trained", run_benchmark(&mut greedy, &domain, &levels, 500, &reward, seed)?),
    ] {
        for row in rows {
            println!(
                "{name:>11}  {:.2}  {:>8.3}  {:>9.2}  {:>10.2}",
                row.ser, row.success_rate, row.avg_turns, row.avg_reward
            );
        }
    }
    Ok(())
}
