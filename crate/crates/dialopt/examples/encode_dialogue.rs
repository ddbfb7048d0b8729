//! From annotated logs to expert observations and estimated wait rows.
//!
//! Loads the bundled demo corpus, walks one dialogue through the factored
//! state encoding, then aggregates the whole corpus into smoothed transition
//! estimates for the `wait` action.
//!
//! ```text
//! cargo run --example encode_dialogue
//! ```

use dialopt::corpus::{
    estimate_transitions, extract_observations, read_logs_jsonl, StateSpace,
};
use dialopt::Result;

fn main() -> Result<()> {
    let logs = read_logs_jsonl(concat!(env!("CARGO_MANIFEST_DIR"), "/data/demo_logs.jsonl"))?;
    println!("loaded {} dialogues", logs.len());

    let space = logs[0].space();
    println!(
        "domain: {} goals, task query {}, {} states, wait action id {}",
        space.n_goals,
        if space.has_ask_task { "available" } else { "absent" },
        space.size(),
        space.wait_id(),
    );

    // Replay the first dialogue turn by turn.
    let first = &logs[0];
    let obs = extract_observations(first)?;
    println!("dialogue {:?} produced {} expert pairs:", first.id, obs.n_pairs());
    for &(s, a) in &obs.pairs {
        let vars = space.decode(s)?;
        println!(
            "  state {s:3} (sys_goal {}, user_goal {}, gen_act {}, help {}) -> action {a}",
            vars.sys_goal, vars.user_goal, vars.gen_act, vars.user_help as u8
        );
    }

    // Wait rows over the full corpus.
    let per_log: Vec<_> = logs.iter().map(extract_observations).collect::<Result<_>>()?;
    let space: StateSpace = logs[0].space();
    let wait = estimate_transitions(&per_log, &space, 0.1)?;
    println!("states with observed wait outcomes: {:?}", wait.observed_states());
    for s in wait.observed_states() {
        let row = wait.row(s);
        let top: Vec<_> = row
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.01)
            .map(|(to, p)| format!("{to}:{p:.3}"))
            .collect();
        println!("  wait from {s} ({} counted) -> {}", wait.total(s), top.join(" "));
    }
    Ok(())
}
