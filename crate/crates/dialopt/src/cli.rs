//! Command-line front end. Every subcommand writes into a run directory:
//! its own artifacts, a `metrics.csv` of named values, and a
//! `manifest.json` declaring every file the run produced. All commands are
//! seeded and deterministic; `elapsed_ms` in the metrics and posterior
//! files is the one field that varies between otherwise identical runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::birl::{
    self, locally_optimal_reward, mbirl, observed_states, policy_loss, policy_walk, random_reward,
    relevance_set, BirlConfig, BirlRun,
};
use crate::corpus::{
    estimate_transitions, extract_observations, read_logs_jsonl, write_observations_jsonl,
    DialogueLog, ExpertObservations, ObservationRecord, StateSpace,
};
use crate::error::{Error, Result};
use crate::imitation::{
    evaluate, train, HandcraftedExpert, ImitationConfig, ImitationMode, QTable, SamplerConfig,
    TrainConfig,
};
use crate::mdp::Mdp;
use crate::rewards::{RewardModel, TableIqEstimator};
use crate::riskmin::{
    margins, sample_skewness, tune_weights, LinearScorer, RiskConfig,
};
use crate::sim::{handcrafted_policy, obs_id, run_benchmark, SlotDomain, SystemAction};

/// Parses the command line and runs it, translating failures into the
/// documented exit codes: 0 success, 2 usage or validation, 3 numeric.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dialopt", version, about = "Dialogue policy optimization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve an MDP from a JSON file and write its policy and value.
    Solve(SolveArgs),
    /// Encode dialogue logs into expert (state, action) observations.
    Encode(EncodeArgs),
    /// Estimate smoothed wait-turn transition rows from dialogue logs.
    EstimateTransitions(EstimateTransitionsArgs),
    /// Infer rewards from expert observations and compare against
    /// baselines.
    Birl(BirlArgs),
    /// Train a tabular dialogue policy, optionally guided by the expert.
    Train(TrainArgs),
    /// Evaluate a saved q-table greedily on the simulator.
    Eval(EvalArgs),
    /// Benchmark a policy across semantic error rates.
    Benchmark(BenchmarkArgs),
    /// Tune linear classifier weights by unsupervised risk minimization.
    Riskmin(RiskminArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Random seed; runs are deterministic given it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory for this run.
    #[arg(long)]
    out: PathBuf,
    /// Config file, TOML or JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Allow writing into a directory that already holds a run.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    Pi,
    Vi,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// MDP description file.
    #[arg(long)]
    mdp: PathBuf,
    #[arg(long, value_enum, default_value_t = Algo::Pi)]
    algo: Algo,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    /// Dialogue logs, one JSON object per line.
    #[arg(long)]
    logs: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct EstimateTransitionsArgs {
    #[arg(long)]
    logs: PathBuf,
    /// Smoothing constant added to every successor count.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct BirlArgs {
    /// Dialogue logs to infer rewards from.
    #[arg(long, conflicts_with = "preset")]
    logs: Option<PathBuf>,
    /// Built-in experiment instead of logs; `synthetic` builds a random
    /// 20-state skeleton with a known reward and an optimal expert.
    #[arg(long)]
    preset: Option<String>,
    /// Also write the full chains as CSV.
    #[arg(long)]
    chain_csv: bool,
    /// Discount for the dialogue MDP built from logs.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    alpha_conf: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RewardKind {
    Ts,
    Iq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    None,
    Demonstrations,
    Feedbacks,
}

impl From<ModeArg> for ImitationMode {
    fn from(mode: ModeArg) -> ImitationMode {
        match mode {
            ModeArg::None => ImitationMode::None,
            ModeArg::Demonstrations => ImitationMode::Demonstrations,
            ModeArg::Feedbacks => ImitationMode::Feedbacks,
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Slot domain JSON; defaults to the built-in 3-slot domain.
    #[arg(long)]
    domain: Option<PathBuf>,
    /// Semantic error rate of the training environment.
    #[arg(long)]
    ser: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Share of autonomous play; a comma list sweeps several values and
    /// writes one curve per entry.
    #[arg(long, value_delimiter = ',')]
    beta: Vec<f64>,
    #[arg(long, value_enum, default_value_t = RewardKind::Ts)]
    reward: RewardKind,
    /// Interaction-quality estimator spec, required with --reward iq.
    #[arg(long)]
    iq_spec: Option<PathBuf>,
    #[arg(long)]
    episodes: Option<usize>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    domain: Option<PathBuf>,
    /// Saved q-table to execute greedily.
    #[arg(long)]
    qtable: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    ser: f64,
    /// Number of evaluation dialogues.
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, value_enum, default_value_t = RewardKind::Ts)]
    reward: RewardKind,
    #[arg(long)]
    iq_spec: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    #[arg(long)]
    domain: Option<PathBuf>,
    /// Greedy q-table policy; without it the handcrafted baseline runs.
    #[arg(long)]
    qtable: Option<PathBuf>,
    /// Error-rate levels to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.15, 0.30])]
    levels: Vec<f64>,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, value_enum, default_value_t = RewardKind::Ts)]
    reward: RewardKind,
    #[arg(long)]
    iq_spec: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct RiskminArgs {
    /// Unlabeled feature rows, CSV.
    #[arg(long)]
    features: PathBuf,
    /// Initial scorer weights JSON.
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[command(flatten)]
    common: CommonArgs,
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Encode(args) => cmd_encode(args),
        Command::EstimateTransitions(args) => cmd_estimate_transitions(args),
        Command::Birl(args) => cmd_birl(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::Riskmin(args) => cmd_riskmin(args),
    }
}

/// Formats a float with 17 significant digits, enough to reparse the
/// exact same value.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Collects a run's outputs and metrics, then seals the directory with
/// `metrics.csv` and `manifest.json`.
struct RunWriter {
    dir: PathBuf,
    run_id: String,
    seed: u64,
    started: Instant,
    outputs: Vec<String>,
    metrics: Vec<(String, f64)>,
}

impl RunWriter {
    fn create(command: &str, common: &CommonArgs) -> Result<RunWriter> {
        let manifest = common.out.join("manifest.json");
        if manifest.exists() && !common.force {
            return Err(Error::config(format!(
                "{} already holds a run; pass --force to overwrite",
                common.out.display()
            )));
        }
        fs::create_dir_all(&common.out)?;
        Ok(RunWriter {
            dir: common.out.clone(),
            run_id: format!("{command}-seed{}", common.seed),
            seed: common.seed,
            started: Instant::now(),
            outputs: Vec::new(),
            metrics: Vec::new(),
        })
    }

    fn write_file(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Full path for an output a library writer will produce itself;
    /// pair with [`RunWriter::declare`].
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn declare(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_file(name, &text)
    }

    fn metric(&mut self, name: &str, value: f64) {
        self.metrics.push((name.to_string(), value));
    }

    fn finish(mut self) -> Result<()> {
        let elapsed_ms = self.started.elapsed().as_millis();
        let mut csv = String::from("run_id,seed,metric,value,elapsed_ms\n");
        for (name, value) in &self.metrics {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                self.run_id,
                self.seed,
                name,
                fmt_f64(*value),
                elapsed_ms
            );
        }
        self.write_file("metrics.csv", &csv)?;

        self.outputs.push("manifest.json".to_string());
        self.outputs.sort();
        let manifest = serde_json::json!({
            "run_id": self.run_id,
            "seed": self.seed,
            "outputs": self.outputs,
        });
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(())
    }
}

/// Loads a config file as TOML, falling back to JSON; `.json` files parse
/// as JSON directly. A missing path yields the type's defaults.
fn load_config<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        return Ok(serde_json::from_str(&text)?);
    }
    match toml::from_str(&text) {
        Ok(value) => Ok(value),
        Err(toml_err) => serde_json::from_str(&text).map_err(|_| {
            Error::config(format!("cannot parse {}: {toml_err}", path.display()))
        }),
    }
}

fn load_domain(path: &Option<PathBuf>) -> Result<SlotDomain> {
    match path {
        Some(p) => SlotDomain::from_json_file(p),
        None => Ok(SlotDomain::default_domain()),
    }
}

fn load_reward_model(kind: RewardKind, iq_spec: &Option<PathBuf>) -> Result<RewardModel> {
    match kind {
        RewardKind::Ts => Ok(RewardModel::TaskSuccess),
        RewardKind::Iq => {
            let Some(path) = iq_spec else {
                return Err(Error::config(
                    "--reward iq needs an estimator spec via --iq-spec",
                ));
            };
            Ok(RewardModel::InteractionQuality(Box::new(TableIqEstimator::from_json_file(path)?)))
        }
    }
}

fn shared_space(logs: &[DialogueLog]) -> Result<StateSpace> {
    let Some(first) = logs.first() else {
        return Err(Error::invalid("no dialogues in the log file"));
    };
    let space = first.space();
    for log in logs {
        if log.space() != space {
            return Err(Error::invalid(format!(
                "dialogue {} uses a different state space than {}",
                log.id, first.id
            )));
        }
    }
    Ok(space)
}

// ---------------------------------------------------------------------------
// solve

#[derive(Serialize)]
struct SolutionFile<'a> {
    algo: &'a str,
    tol: f64,
    iterations: usize,
    policy: &'a [usize],
    value: &'a [f64],
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let mut writer = RunWriter::create("solve", &args.common)?;
    let mdp = Mdp::from_json_file(&args.mdp)?;
    let solution = match args.algo {
        Algo::Pi => crate::mdp::policy_iteration(&mdp, args.tol)?,
        Algo::Vi => crate::mdp::value_iteration(&mdp, args.tol)?,
    };
    let file = SolutionFile {
        algo: match args.algo {
            Algo::Pi => "pi",
            Algo::Vi => "vi",
        },
        tol: args.tol,
        iterations: solution.iterations,
        policy: &solution.policy.actions,
        value: &solution.value.values,
    };
    writer.write_json("solution.json", &file)?;
    writer.metric("iterations", solution.iterations as f64);
    writer.metric("n_states", mdp.n_states() as f64);
    writer.finish()
}

// ---------------------------------------------------------------------------
// encode

fn cmd_encode(args: EncodeArgs) -> Result<()> {
    let mut writer = RunWriter::create("encode", &args.common)?;
    let logs = read_logs_jsonl(&args.logs)?;
    if logs.is_empty() {
        return Err(Error::invalid("no dialogues in the log file"));
    }
    let mut records = Vec::with_capacity(logs.len());
    let mut total_pairs = 0usize;
    for log in &logs {
        let obs = extract_observations(log)?;
        total_pairs += obs.n_pairs();
        records.push(ObservationRecord {
            id: log.id.clone(),
            n_goals: log.n_goals,
            has_ask_task: log.has_ask_task,
            pairs: obs.pairs,
        });
    }
    write_observations_jsonl(writer.path("observations.jsonl"), &records)?;
    writer.declare("observations.jsonl");
    writer.metric("n_dialogues", logs.len() as f64);
    writer.metric("n_pairs", total_pairs as f64);
    writer.finish()
}

// ---------------------------------------------------------------------------
// estimate-transitions

#[derive(Serialize)]
struct TransitionsFile {
    n_states: usize,
    wait_action_id: usize,
    alpha: f64,
    /// Probability shared by every successor of a state never seen
    /// waiting.
    unobserved_probability: f64,
    rows: Vec<TransitionRowFile>,
}

#[derive(Serialize)]
struct TransitionRowFile {
    state: usize,
    n_pairs: usize,
    probs: Vec<f64>,
}

fn cmd_estimate_transitions(args: EstimateTransitionsArgs) -> Result<()> {
    let mut writer = RunWriter::create("estimate-transitions", &args.common)?;
    let logs = read_logs_jsonl(&args.logs)?;
    let space = shared_space(&logs)?;
    let per_log: Vec<ExpertObservations> =
        logs.iter().map(extract_observations).collect::<Result<_>>()?;
    let wait = estimate_transitions(&per_log, &space, args.alpha)?;
    let rows: Vec<TransitionRowFile> = wait
        .observed_states()
        .into_iter()
        .map(|state| TransitionRowFile {
            state,
            n_pairs: wait.total(state),
            probs: wait.row(state),
        })
        .collect();
    let file = TransitionsFile {
        n_states: space.size(),
        wait_action_id: space.wait_id(),
        alpha: args.alpha,
        unobserved_probability: 1.0 / space.size() as f64,
        rows,
    };
    writer.write_json("transitions.json", &file)?;
    writer.metric("n_states", space.size() as f64);
    writer.metric("n_observed_states", file.rows.len() as f64);
    writer.finish()
}

// ---------------------------------------------------------------------------
// birl

/// Config-file shape for the birl command: the sampler settings plus the
/// two knobs of the log-to-MDP pipeline.
#[derive(Debug, serde::Deserialize)]
#[serde(default)]
struct BirlCommandConfig {
    #[serde(flatten)]
    birl: BirlConfig,
    gamma: f64,
    smoothing_alpha: f64,
}

impl Default for BirlCommandConfig {
    fn default() -> BirlCommandConfig {
        BirlCommandConfig { birl: BirlConfig::default(), gamma: 0.95, smoothing_alpha: 0.1 }
    }
}

fn chain_csv(run: &BirlRun) -> String {
    let mut csv = String::from("iteration,coordinate,accepted,log_posterior\n");
    for step in &run.trace {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            step.iteration,
            step.coordinate,
            u8::from(step.accepted),
            fmt_f64(step.log_posterior)
        );
    }
    csv
}

fn posterior_json(estimate: &birl::PosteriorEstimate) -> serde_json::Value {
    serde_json::json!({
        "mean_reward": estimate.mean_reward,
        "acceptance_rate": estimate.acceptance_rate,
        "n_samples": estimate.n_samples,
    })
}

fn cmd_birl(args: BirlArgs) -> Result<()> {
    let mut cfg: BirlCommandConfig = load_config(&args.common.config)?;
    if let Some(v) = args.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = args.iterations {
        cfg.birl.iterations = v;
    }
    if let Some(v) = args.burn_in {
        cfg.birl.burn_in = v;
    }
    if let Some(v) = args.alpha_conf {
        cfg.birl.alpha_conf = v;
    }
    if let Some(v) = args.delta {
        cfg.birl.delta = v;
    }
    cfg.birl.validate()?;

    let mut writer = RunWriter::create("birl", &args.common)?;
    let seed = args.common.seed;

    // Assemble skeleton, observations, relevance set, and optionally the
    // ground truth to score against.
    let (skeleton, obs, relevant, truth) = match (&args.logs, args.preset.as_deref()) {
        (Some(logs_path), None) => {
            let logs = read_logs_jsonl(logs_path)?;
            let space = shared_space(&logs)?;
            let per_log: Vec<ExpertObservations> =
                logs.iter().map(extract_observations).collect::<Result<_>>()?;
            let wait = estimate_transitions(&per_log, &space, cfg.smoothing_alpha)?;
            let skeleton =
                crate::corpus::build_dialogue_mdp(&space, &wait, cfg.gamma, cfg.birl.r_max)?;
            let obs = ExpertObservations::concat(&per_log);
            let relevant = match &cfg.birl.relevance {
                Some(rel) => relevance_set(&obs, &space, rel.bandwidth, rel.threshold)?,
                None => observed_states(&obs),
            };
            (skeleton, obs, relevant, None)
        }
        (None, Some("synthetic")) => {
            let setup = birl::synthetic_recovery(20, 4, 200, 0.9, seed)?;
            let relevant = observed_states(&setup.obs);
            (setup.skeleton, setup.obs, relevant, Some((setup.true_reward, setup.expert)))
        }
        (None, Some(other)) => {
            return Err(Error::config(format!("unknown preset {other}; try synthetic")));
        }
        (Some(_), Some(_)) => unreachable!("clap forbids --logs with --preset"),
        (None, None) => {
            return Err(Error::config("either --logs or --preset is required"));
        }
    };

    let annealed = mbirl(&skeleton, &obs, &relevant, &cfg.birl, seed)?;
    let walk = policy_walk(&skeleton, &obs, &cfg.birl, seed)?;

    // Policy losses of the two samplers and the two baselines, all against
    // the same observations.
    let tol = cfg.birl.solver_tol;
    let losses = [
        ("mbirl", birl::induced_policy(&skeleton, &annealed.estimate.mean_reward, tol)?),
        ("policy_walk", birl::induced_policy(&skeleton, &walk.estimate.mean_reward, tol)?),
        (
            "locally_optimal",
            birl::induced_policy(
                &skeleton,
                &locally_optimal_reward(&obs, skeleton.n_states())?,
                tol,
            )?,
        ),
        (
            "random",
            birl::induced_policy(
                &skeleton,
                &random_reward(skeleton.n_states(), cfg.birl.r_max, seed),
                tol,
            )?,
        ),
    ];
    let mut report = String::from("method,policy_loss\n");
    for (name, policy) in &losses {
        let loss = policy_loss(policy, &obs)?;
        let _ = writeln!(report, "{},{}", name, fmt_f64(loss));
        writer.metric(&format!("policy_loss_{name}"), loss);
    }

    // Wall-clock stays out of the JSON artifacts; metrics.csv carries it.
    writer.write_json("posterior.json", &posterior_json(&annealed.estimate))?;
    writer.write_json("posterior_policy_walk.json", &posterior_json(&walk.estimate))?;
    writer.write_file("report.csv", &report)?;
    if args.chain_csv {
        writer.write_file("chain_mbirl.csv", &chain_csv(&annealed))?;
        writer.write_file("chain_policy_walk.csv", &chain_csv(&walk))?;
    }
    if let Some((true_reward, expert)) = truth {
        writer.write_json(
            "synthetic_truth.json",
            &serde_json::json!({
                "true_reward": true_reward,
                "expert_policy": expert.actions,
            }),
        )?;
    }
    writer.metric("acceptance_rate_mbirl", annealed.estimate.acceptance_rate);
    writer.metric("acceptance_rate_policy_walk", walk.estimate.acceptance_rate);
    writer.metric("n_relevant_states", relevant.len() as f64);
    writer.finish()
}

// ---------------------------------------------------------------------------
// train

/// Flat config-file shape for training; mirrors the documented keys.
#[derive(Debug, serde::Deserialize)]
#[serde(default)]
struct TrainCommandConfig {
    tau: f64,
    epsilon_start: f64,
    epsilon_decay: f64,
    epsilon_floor: f64,
    mode: ImitationMode,
    beta: f64,
    episodes: usize,
    eval_every: usize,
    eval_n: usize,
    learning_rate: f64,
    gamma: f64,
    ser: f64,
}

impl Default for TrainCommandConfig {
    fn default() -> TrainCommandConfig {
        let sampler = SamplerConfig::default();
        let train = TrainConfig::default();
        let imitation = ImitationConfig::default();
        TrainCommandConfig {
            tau: sampler.tau,
            epsilon_start: sampler.epsilon_start,
            epsilon_decay: sampler.epsilon_decay,
            epsilon_floor: sampler.epsilon_floor,
            mode: imitation.mode,
            beta: imitation.beta,
            episodes: train.episodes,
            eval_every: train.eval_every,
            eval_n: train.eval_n,
            learning_rate: train.learning_rate,
            gamma: train.gamma,
            ser: 0.0,
        }
    }
}

fn curve_csv(curve: &[crate::imitation::CurvePoint]) -> String {
    let mut csv = String::from("episode,success_rate,avg_turns,avg_reward\n");
    for p in curve {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            p.episode,
            fmt_f64(p.success_rate),
            fmt_f64(p.avg_turns),
            fmt_f64(p.avg_reward)
        );
    }
    csv
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut cfg: TrainCommandConfig = load_config(&args.common.config)?;
    if let Some(v) = args.ser {
        cfg.ser = v;
    }
    if let Some(v) = args.mode {
        cfg.mode = v.into();
    }
    if let Some(v) = args.episodes {
        cfg.episodes = v;
    }
    let betas = if args.beta.is_empty() { vec![cfg.beta] } else { args.beta.clone() };
    let reward = load_reward_model(args.reward, &args.iq_spec)?;
    let domain = load_domain(&args.domain)?;
    let sampler = SamplerConfig {
        tau: cfg.tau,
        epsilon_start: cfg.epsilon_start,
        epsilon_decay: cfg.epsilon_decay,
        epsilon_floor: cfg.epsilon_floor,
    };
    let train_cfg = TrainConfig {
        episodes: cfg.episodes,
        eval_every: cfg.eval_every,
        eval_n: cfg.eval_n,
        learning_rate: cfg.learning_rate,
        gamma: cfg.gamma,
    };

    let mut writer = RunWriter::create("train", &args.common)?;
    let sweep = betas.len() > 1;
    for &beta in &betas {
        let imitation = ImitationConfig { mode: cfg.mode, beta };
        let mut env = crate::sim::SlotFillingEnv::new(domain.clone(), cfg.ser)?;
        let result = train(
            &mut env,
            &HandcraftedExpert,
            &imitation,
            &sampler,
            &train_cfg,
            &reward,
            args.common.seed,
        )?;
        let suffix = if sweep { format!("_beta{beta}") } else { String::new() };
        writer.write_file(&format!("curve{suffix}.csv"), &curve_csv(&result.curve))?;
        writer.write_file(&format!("qtable{suffix}.json"), &result.q.to_json_string())?;
        if let Some(last) = result.curve.last() {
            writer.metric(&format!("final_success_rate{suffix}"), last.success_rate);
            writer.metric(&format!("final_avg_turns{suffix}"), last.avg_turns);
            writer.metric(&format!("final_avg_reward{suffix}"), last.avg_reward);
        }
    }
    writer.metric("episodes", cfg.episodes as f64);
    writer.finish()
}

// ---------------------------------------------------------------------------
// eval

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let reward = load_reward_model(args.reward, &args.iq_spec)?;
    let domain = load_domain(&args.domain)?;
    let q = QTable::load(&args.qtable)?;
    if q.n_actions() != domain.n_actions() {
        return Err(Error::invalid(format!(
            "q-table has {} actions, domain needs {}",
            q.n_actions(),
            domain.n_actions()
        )));
    }
    let mut writer = RunWriter::create("eval", &args.common)?;
    let mut env = crate::sim::SlotFillingEnv::new(domain, args.ser)?;
    let metrics = evaluate(&mut env, &q, args.n, &reward, args.common.seed)?;
    writer.write_json("eval.json", &metrics)?;
    writer.metric("success_rate", metrics.success_rate);
    writer.metric("avg_turns", metrics.avg_turns);
    writer.metric("avg_reward", metrics.avg_reward);
    writer.finish()
}

// ---------------------------------------------------------------------------
// benchmark

fn cmd_benchmark(args: BenchmarkArgs) -> Result<()> {
    let reward = load_reward_model(args.reward, &args.iq_spec)?;
    let domain = load_domain(&args.domain)?;
    let table = args.qtable.as_ref().map(QTable::load).transpose()?;
    if let Some(q) = &table {
        if q.n_actions() != domain.n_actions() {
            return Err(Error::invalid(format!(
                "q-table has {} actions, domain needs {}",
                q.n_actions(),
                domain.n_actions()
            )));
        }
    }
    let mut writer = RunWriter::create("benchmark", &args.common)?;
    let d = domain.n_slots();
    let mut policy: Box<dyn FnMut(&[crate::sim::SlotMark]) -> SystemAction> = match &table {
        Some(q) => {
            let q = q.clone();
            Box::new(move |obs| {
                SystemAction::from_id(q.greedy(obs_id(obs)), d).expect("greedy id is in range")
            })
        }
        None => Box::new(handcrafted_policy),
    };
    let rows = run_benchmark(&mut policy, &domain, &args.levels, args.n, &reward, args.common.seed)?;
    let mut csv = String::from("ser,success_rate,avg_turns,avg_reward\n");
    for row in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            fmt_f64(row.ser),
            fmt_f64(row.success_rate),
            fmt_f64(row.avg_turns),
            fmt_f64(row.avg_reward)
        );
        writer.metric(&format!("success_rate_ser{}", row.ser), row.success_rate);
    }
    writer.write_file("benchmark.csv", &csv)?;
    writer.finish()
}

// ---------------------------------------------------------------------------
// riskmin

/// Reads one feature vector per CSV line; a leading non-numeric line is
/// treated as a header.
fn read_features_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|cell| cell.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => {
                if let Some(first) = rows.first() {
                    if row.len() != first.len() {
                        return Err(Error::Parse {
                            line: idx + 1,
                            msg: format!(
                                "row has {} columns, expected {}",
                                row.len(),
                                first.len()
                            ),
                        });
                    }
                }
                rows.push(row);
            }
            Err(err) => {
                if idx == 0 {
                    continue; // header row
                }
                return Err(Error::Parse { line: idx + 1, msg: err.to_string() });
            }
        }
    }
    Ok(rows)
}

fn cmd_riskmin(args: RiskminArgs) -> Result<()> {
    let mut cfg: RiskConfig = load_config(&args.common.config)?;
    if let Some(v) = args.delta {
        cfg.delta = v;
    }
    if let Some(v) = args.iterations {
        cfg.iterations = v;
    }
    cfg.validate()?;
    let features = read_features_csv(&args.features)?;
    let scorer = LinearScorer::load(&args.weights)?;
    let mut writer = RunWriter::create("riskmin", &args.common)?;

    let initial_margins = margins(&scorer, &features)?;
    let result = tune_weights(&scorer, &features, &cfg, args.common.seed)?;

    let mut trace = String::from("iteration,coordinate,risk\n");
    for step in &result.trace {
        let _ = writeln!(trace, "{},{},{}", step.iteration, step.coordinate, fmt_f64(step.risk));
    }
    writer.write_file("trace.csv", &trace)?;
    writer.write_file("weights_tuned.json", &(result.scorer.to_json_string() + "\n"))?;
    writer.metric("initial_risk", result.initial_risk);
    writer.metric("final_risk", result.final_risk);
    writer.metric("margin_skewness", sample_skewness(&initial_margins));
    writer.metric("n_instances", features.len() as f64);
    writer.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_roundtrips_17_digits() {
        for x in [0.1, 1.0 / 3.0, -2.5e-17, 123456.789, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn config_parses_toml_and_json() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("cfg.toml");
        fs::write(&toml_path, "iterations = 42\nburn_in = 7\n").unwrap();
        let cfg: BirlCommandConfig = load_config(&Some(toml_path)).unwrap();
        assert_eq!(cfg.birl.iterations, 42);
        assert_eq!(cfg.birl.burn_in, 7);
        assert_eq!(cfg.gamma, 0.95);

        let json_path = dir.path().join("cfg.json");
        fs::write(&json_path, r#"{"iterations": 10, "gamma": 0.5}"#).unwrap();
        let cfg: BirlCommandConfig = load_config(&Some(json_path)).unwrap();
        assert_eq!(cfg.birl.iterations, 10);
        assert_eq!(cfg.gamma, 0.5);

        // JSON content under a .toml name still parses via the fallback.
        let sneaky = dir.path().join("cfg2.toml");
        fs::write(&sneaky, r#"{"iterations": 3}"#).unwrap();
        let cfg: BirlCommandConfig = load_config(&Some(sneaky)).unwrap();
        assert_eq!(cfg.birl.iterations, 3);

        let none: BirlCommandConfig = load_config(&None).unwrap();
        assert_eq!(none.birl.iterations, BirlConfig::default().iterations);
    }

    #[test]
    fn features_csv_accepts_an_optional_header() {
        let dir = tempfile::tempdir().unwrap();
        let with_header = dir.path().join("a.csv");
        fs::write(&with_header, "f0,f1\n1.0,2.0\n3.0,4.0\n").unwrap();
        let rows = read_features_csv(&with_header).unwrap();
        assert_eq!(rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);

        let bare = dir.path().join("b.csv");
        fs::write(&bare, "1.0,2.0\n").unwrap();
        assert_eq!(read_features_csv(&bare).unwrap(), vec![vec![1.0, 2.0]]);

        let ragged = dir.path().join("c.csv");
        fs::write(&ragged, "1.0,2.0\n3.0\n").unwrap();
        let err = read_features_csv(&ragged).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");

        let junk = dir.path().join("d.csv");
        fs::write(&junk, "1.0,2.0\nx,y\n").unwrap();
        assert!(read_features_csv(&junk).is_err());
    }

    #[test]
    fn train_config_defaults_match_the_library() {
        let cfg = TrainCommandConfig::default();
        assert_eq!(cfg.tau, 1.0);
        assert_eq!(cfg.epsilon_start, 0.3);
        assert_eq!(cfg.epsilon_decay, 0.995);
        assert_eq!(cfg.epsilon_floor, 0.01);
        assert_eq!(cfg.beta, 1.0);
        assert_eq!(cfg.mode, ImitationMode::None);
    }
}
