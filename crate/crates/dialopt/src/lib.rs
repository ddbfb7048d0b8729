//! Dialogue policy optimization toolkit.
//!
//! What's here, bottom up:
//!
//! - [`mdp`]: finite MDPs with state-based rewards; policy evaluation, policy
//!   iteration, value iteration, greedy extraction.
//! - [`corpus`]: annotated dialogue logs, the factored dialogue state encoding,
//!   expert observation extraction, and smoothed transition estimation.
//! - [`birl`]: Bayesian inverse reinforcement learning over a reward grid:
//!   a coordinate-walk posterior sampler, its annealed and restricted variant,
//!   and the counting/random baselines they are compared against.
//! - [`rewards`]: turn-penalty dialogue returns (task success, interaction
//!   quality) and the bucketed quality estimator.
//! - [`sim`]: a slot-filling user simulator with a controllable error rate,
//!   plus the handcrafted reference policy and a noise benchmark runner.
//! - [`imitation`]: tabular Q-learning with Boltzmann exploration and two
//!   expert-imitation schemes (episode demonstrations, per-action feedbacks).
//! - [`riskmin`]: unsupervised risk estimation for binary linear scorers via a
//!   two-component score-margin mixture, with coordinate-descent weight tuning.
//! - [`cli`]: the `dialopt` command-line front end gluing the above together.
//!
//! Each capability has a runnable walkthrough under `examples/`:
//!
//! ```text
//! cargo run --example solve_mdp          # solvers on a tiny two-state chain
//! cargo run --example encode_dialogue    # state encoding + observation extraction
//! cargo run --example birl_recovery      # reward recovery from a synthetic expert
//! cargo run --example dialogue_rewards   # task-success and quality returns
//! cargo run --example imitation_sweep    # demonstration/feedback learning curves
//! cargo run --example noise_benchmark    # success under rising error rates
//! cargo run --example risk_tuning        # unsupervised scorer calibration
//! ```

pub mod birl;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod imitation;
pub mod mdp;
pub mod rewards;
pub mod riskmin;
pub mod sim;

pub use error::{Error, Result};
