//! Solvers on a tiny three-state chain, end to end: build, solve with both
//! algorithms, compare, round-trip through JSON.
//!
//! The chain pays +1 for sitting at the right end and a -0.1 toll in the
//! middle, so the interesting question is whether crossing the toll is worth
//! it from the left end. At gamma 0.9 it is.
//!
//! ```text
//! cargo run --example solve_mdp
//! ```

use dialopt::mdp::{policy_iteration, value_iteration, Mdp};
use dialopt::Result;

fn main() -> Result<()> {
    // Action 0 drifts left, action 1 pushes right with some slip.
    let mdp = Mdp::builder(3, 0.9)
        .uniform_actions(2)
        .rewards(vec![0.0, -0.1, 1.0])
        .transition(0, 0, 0, 1.0)
        .transition(0, 1, 1, 0.9)
        .transition(0, 1, 0, 0.1)
        .transition(1, 0, 0, 1.0)
        .transition(1, 1, 2, 0.9)
        .transition(1, 1, 1, 0.1)
        .transition(2, 0, 1, 1.0)
        .transition(2, 1, 2, 1.0)
        .build()?;

    let pi = policy_iteration(&mdp, 1e-10)?;
    let vi = value_iteration(&mdp, 1e-10)?;

    println!("policy iteration ({} rounds):", pi.iterations);
    for s in 0..mdp.n_states() {
        println!("  state {s}: action {}  v = {:+.6}", pi.policy.action(s), pi.value.get(s));
    }
    println!("value iteration ({} sweeps): same policy = {}", vi.iterations, vi.policy == pi.policy);

    // The JSON form is what the `dialopt solve` subcommand consumes.
    let text = mdp.to_json_string();
    let back = Mdp::from_json_str(&text)?;
    let again = policy_iteration(&back, 1e-10)?;
    println!("json round-trip preserves the solution = {}", again.policy == pi.policy);
    Ok(())
}
