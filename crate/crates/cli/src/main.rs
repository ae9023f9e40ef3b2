//! `alignpot`: score preference data, select subsets, and run the bandit
//! simulator and the self-evolving pipeline from the command line.
//!
//! Exit codes: 0 success, 1 check failed, 2 data error, 64 usage error.

mod settings;

use std::collections::HashSet;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use alignpot::bandit::{
    run, theorem_check, BanditInstance, LrMode, RunConfig, Sampler, TheoremConfig,
};
use alignpot::io::{fmt_f64, read_scores_csv, scores_to_csv, traces_to_csv, write_atomic};
use alignpot::metrics::{dataset_stats, score_dataset};
use alignpot::numeric::mean_std_population;
use alignpot::pipeline::{
    bandit_world, file_world, run_pipeline, BanditWorldConfig, IterationReport, Mode,
    PipelineConfig, SelectionSize,
};
use alignpot::record::{read_jsonl, write_jsonl};
use alignpot::selection::{select_fraction, select_top_k, select_uniform};
use alignpot::{Error, ImplicitKind, LoadOptions, Metric, MetricConfig, PreferenceRecord};
use clap::error::ErrorKind;
use clap::{ArgAction, ArgGroup, Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use settings::FileSettings;

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Engine(Error),
    CheckFailed(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Engine(e)
    }
}

fn engine_exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Argument(_) => EXIT_USAGE,
        Error::LatticeOverflow { .. } | Error::AuditMismatch { .. } => EXIT_CHECK_FAILED,
        Error::Stage { source, .. } => engine_exit_code(source),
        _ => EXIT_DATA,
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::CheckFailed(_) => EXIT_CHECK_FAILED,
            CliError::Engine(e) => engine_exit_code(e),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Engine(e) => write!(f, "{e}"),
            CliError::CheckFailed(m) => write!(f, "check failed: {m}"),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "alignpot",
    version,
    about = "Preference-data metrics, selection and bandit simulation"
)]
struct Cli {
    /// More log output (-v info, -vv debug)
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score every record of a JSONL file and write `id,score` CSV
    Score(ScoreArgs),
    /// Pick a top-k, top-fraction or seeded uniform subset from a score CSV
    Select(SelectArgs),
    /// Print corpus spreads used by the normalized alignment potential
    Stats(StatsArgs),
    /// Run bandit trials and write the Dist/V trace as CSV
    Simulate(SimulateArgs),
    /// Compare uniform and adversarial sampling under the optimal learning rate
    Theorem(TheoremArgs),
    /// Run the evolve/select/train loop
    Pipeline(PipelineArgs),
}

#[derive(Args, Debug, Clone)]
struct MetricArgs {
    /// Implicit reward scale (ignored by m_r)
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Weight of the implicit term in m_ap_normalized (ignored by other metrics)
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// simpo (length-normalized) or dpo (reference log-probs)
    #[arg(long, default_value = "simpo", value_parser = parse_implicit_kind)]
    implicit_kind: ImplicitKind,
    /// Score m_ap_raw requests with the z-score normalized variant
    #[arg(long)]
    normalize: bool,
}

impl MetricArgs {
    fn config(&self) -> MetricConfig {
        MetricConfig {
            beta: self.beta,
            alpha: self.alpha,
            implicit_kind: self.implicit_kind,
            normalize: self.normalize,
        }
    }
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// Preference records, one JSON object per line
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short, value_parser = parse_metric)]
    metric: Metric,
    #[command(flatten)]
    metric_args: MetricArgs,
    /// Accept records with reward_w < reward_l
    #[arg(long)]
    allow_unordered: bool,
    /// Output CSV
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("mode").required(true).args(["top_fraction", "top_k", "uniform_fraction"])))]
struct SelectArgs {
    /// `id,score` CSV as written by `score`
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    top_fraction: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
    /// Seeded uniform baseline
    #[arg(long)]
    uniform_fraction: Option<f64>,
    /// Baseline seed (default: $ALIGNPOT_SEED, else 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Metric name recorded in the manifest
    #[arg(long, default_value = "score")]
    metric_name: String,
    /// Manifest JSON
    #[arg(long, short)]
    out: PathBuf,
    /// Records to filter down to the chosen ids
    #[arg(long, requires = "records_out")]
    records: Option<PathBuf>,
    #[arg(long, requires = "records")]
    records_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[command(flatten)]
    metric_args: MetricArgs,
    #[arg(long)]
    allow_unordered: bool,
    /// Also write the JSON here
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum SamplerArg {
    /// uniform over ordered pairs with y != y'
    Uniform,
    /// uniform over all |Y|² ordered pairs
    UniformDiagonal,
    Adversarial,
}

impl std::str::FromStr for SamplerArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

impl From<SamplerArg> for Sampler {
    fn from(s: SamplerArg) -> Self {
        match s {
            SamplerArg::Uniform => Sampler::Uniform {
                include_diagonal: false,
            },
            SamplerArg::UniformDiagonal => Sampler::Uniform {
                include_diagonal: true,
            },
            SamplerArg::Adversarial => Sampler::Adversarial,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum LrModeArg {
    Fixed,
    Optimal,
}

impl std::str::FromStr for LrModeArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

const SIMULATE_KEYS: &[&str] = &[
    "contexts",
    "arms",
    "beta",
    "sampler",
    "lr_mode",
    "eta",
    "epsilon",
    "max_steps",
    "trials",
    "seed",
    "record_every",
    "run_past_target",
];

/// Flags override `--config`; unset values fall back to the config file, then the defaults shown.
#[derive(Args, Debug)]
struct SimulateArgs {
    /// Number of contexts [default: 1]
    #[arg(long)]
    contexts: Option<usize>,
    /// Number of arms [default: 10]
    #[arg(long)]
    arms: Option<usize>,
    /// [default: 0.1]
    #[arg(long)]
    beta: Option<f64>,
    /// [default: uniform]
    #[arg(long, value_enum)]
    sampler: Option<SamplerArg>,
    /// [default: optimal]
    #[arg(long, value_enum)]
    lr_mode: Option<LrModeArg>,
    /// Fixed learning rate [default: 4/β²]
    #[arg(long)]
    eta: Option<f64>,
    /// Stop once Dist <= epsilon · Dist⁰ [default: 1e-3]
    #[arg(long)]
    epsilon: Option<f64>,
    /// [default: 100000]
    #[arg(long)]
    max_steps: Option<u64>,
    /// [default: 1]
    #[arg(long)]
    trials: Option<usize>,
    /// [default: $ALIGNPOT_SEED, else 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Trace sampling interval [default: 1]
    #[arg(long)]
    record_every: Option<u64>,
    /// Keep stepping after the target until max-steps
    #[arg(long)]
    run_past_target: bool,
    /// Flat key=value file with any of the keys above (underscored)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trace CSV (stdout if omitted)
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TheoremArgs {
    #[arg(long, default_value_t = 1)]
    contexts: usize,
    #[arg(long, default_value_t = 10)]
    arms: usize,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// [default: $ALIGNPOT_SEED, else 0]
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1_000_000)]
    max_steps: u64,
    /// Also write the JSON report here
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Backend {
    Bandit,
    File,
}

impl std::str::FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

const PIPELINE_KEYS: &[&str] = &[
    "mode",
    "backend",
    "iterations",
    "fraction",
    "top_k",
    "metric",
    "alpha",
    "beta",
    "implicit_kind",
    "seed",
    "input",
    "contexts",
    "arms",
    "bandit_beta",
    "pairs_per_context",
    "evolve_noise",
    "train_steps",
    "eta",
];

/// Flags override `--config`; unset values fall back to the config file, then the defaults shown.
#[derive(Args, Debug)]
#[command(group(ArgGroup::new("size").args(["fraction", "top_k"])))]
struct PipelineArgs {
    /// evolve_then_select or select_then_evolve [default: evolve_then_select]
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// [default: bandit]
    #[arg(long, value_enum)]
    backend: Option<Backend>,
    /// [default: 3]
    #[arg(long)]
    iterations: Option<usize>,
    /// Fraction of the candidate pool to keep [default: 0.4]
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
    /// [default: m_one]
    #[arg(long, value_parser = parse_metric)]
    metric: Option<Metric>,
    /// [default: 1.0]
    #[arg(long)]
    alpha: Option<f64>,
    /// File backend implicit reward scale [default: 1.0]
    #[arg(long)]
    beta: Option<f64>,
    /// File backend implicit reward kind [default: simpo]
    #[arg(long, value_parser = parse_implicit_kind)]
    implicit_kind: Option<ImplicitKind>,
    /// [default: $ALIGNPOT_SEED, else 0]
    #[arg(long)]
    seed: Option<u64>,
    /// File backend input directory
    #[arg(long)]
    input: Option<PathBuf>,
    /// Flat key=value file; bandit-only keys: contexts, arms, bandit_beta,
    /// pairs_per_context, evolve_noise, train_steps, eta
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory receiving iter_<t>/ artifacts
    #[arg(long, short)]
    out: PathBuf,
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse::<Metric>().map_err(|_| {
        let names: Vec<&str> = Metric::ALL.iter().map(|m| m.name()).collect();
        format!("unknown metric {s:?}; expected one of {}", names.join(", "))
    })
}

fn parse_implicit_kind(s: &str) -> Result<ImplicitKind, String> {
    s.parse::<ImplicitKind>().map_err(|e| e.to_string())
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse::<Mode>().map_err(|e| e.to_string())
}

fn require_file(path: &Path, what: &str) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "{what} {} does not exist or is not a file",
            path.display()
        )))
    }
}

fn load_records(path: &Path, allow_unordered: bool) -> CliResult<Vec<PreferenceRecord>> {
    let file = File::open(path).map_err(Error::from)?;
    let records = read_jsonl(BufReader::new(file), LoadOptions { allow_unordered })?;
    if records.is_empty() {
        return Err(Error::EmptyDataset.into());
    }
    Ok(records)
}

fn cmd_score(args: &ScoreArgs) -> CliResult {
    require_file(&args.input, "input")?;
    let cfg = args.metric_args.config();
    cfg.validate()?;
    let records = load_records(&args.input, args.allow_unordered)?;
    let scored = score_dataset(&records, args.metric, &cfg)?;
    for w in &scored.warnings {
        warn!("{w}");
    }
    write_atomic(&args.out, &scores_to_csv(&scored.scores)?)?;
    let (mean, std) = mean_std_population(&scored.values()).expect("non-empty");
    println!(
        "metric={} n={} mean={} std={}",
        scored.metric,
        scored.scores.len(),
        fmt_f64(mean),
        fmt_f64(std)
    );
    Ok(())
}

fn cmd_select(args: &SelectArgs) -> CliResult {
    require_file(&args.scores, "scores")?;
    if let Some(r) = &args.records {
        require_file(r, "records")?;
    }
    let scores = read_scores_csv(File::open(&args.scores).map_err(Error::from)?)?;
    if scores.is_empty() {
        return Err(Error::EmptyDataset.into());
    }
    let result = match (args.top_fraction, args.top_k, args.uniform_fraction) {
        (Some(f), None, None) => select_fraction(&scores, f)?.with_metric(&args.metric_name),
        (None, Some(k), None) => select_top_k(&scores, k)?.with_metric(&args.metric_name),
        (None, None, Some(f)) => {
            let seed = match args.seed {
                Some(s) => s,
                None => settings::env_seed()?,
            };
            let ids: Vec<String> = scores.iter().map(|(id, _)| id.clone()).collect();
            select_uniform(&ids, f, seed)?.with_metric("uniform")
        }
        _ => unreachable!("clap enforces exactly one selection mode"),
    };
    write_atomic(&args.out, result.to_manifest_json()?.as_bytes())?;
    if let (Some(input), Some(out)) = (&args.records, &args.records_out) {
        let records = load_records(input, true)?;
        let keep: HashSet<&str> = result.chosen_ids.iter().map(String::as_str).collect();
        let chosen: Vec<PreferenceRecord> = records
            .into_iter()
            .filter(|r| keep.contains(r.id.as_str()))
            .collect();
        if chosen.len() != keep.len() {
            warn!(
                "{} of {} chosen ids have no record in {}",
                keep.len() - chosen.len(),
                keep.len(),
                input.display()
            );
        }
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &chosen)?;
        write_atomic(out, &buf)?;
    }
    println!(
        "k={} tau_k={}",
        result.k,
        result.tau_k.map_or_else(|| "none".to_string(), fmt_f64)
    );
    Ok(())
}

fn cmd_stats(args: &StatsArgs) -> CliResult {
    require_file(&args.input, "input")?;
    let cfg = args.metric_args.config();
    cfg.validate()?;
    let records = load_records(&args.input, args.allow_unordered)?;
    let stats = dataset_stats(&records, &cfg)?;
    let warnings: Vec<String> = stats.warnings().iter().map(|w| w.to_string()).collect();
    let mut json = serde_json::to_value(stats).map_err(Error::from)?;
    json["warnings"] = serde_json::json!(warnings);
    let text = serde_json::to_string_pretty(&json).map_err(Error::from)? + "\n";
    if let Some(out) = &args.out {
        write_atomic(out, text.as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult {
    let file = FileSettings::load(args.config.as_deref(), SIMULATE_KEYS)?;
    let beta = file.pick("beta", args.beta, 0.1)?;
    let lr_mode = match file.pick("lr_mode", args.lr_mode, LrModeArg::Optimal)? {
        LrModeArg::Optimal => LrMode::Optimal,
        LrModeArg::Fixed => LrMode::Fixed(file.pick("eta", args.eta, 4.0 / (beta * beta))?),
    };
    let seed = file.seed(args.seed)?;
    let instance = BanditInstance::random(
        file.pick("contexts", args.contexts, 1)?,
        file.pick("arms", args.arms, 10)?,
        beta,
        seed,
    )?;
    let config = RunConfig {
        sampler: file
            .pick("sampler", args.sampler, SamplerArg::Uniform)?
            .into(),
        lr_mode,
        max_steps: file.pick("max_steps", args.max_steps, 100_000)?,
        target_ratio: file.pick("epsilon", args.epsilon, 1e-3)?,
        trials: file.pick("trials", args.trials, 1)?,
        record_every: file.pick("record_every", args.record_every, 1)?,
        run_past_target: args.run_past_target || file.pick("run_past_target", None, false)?,
        fresh_rewards: true,
        audit: true,
    };
    config.validate()?;
    info!("simulate: {config:?}, seed {seed}");
    let traces = run(&instance, &config)?;
    let csv = traces_to_csv(&traces);
    match &args.out {
        Some(out) => {
            write_atomic(out, csv.as_bytes())?;
            for t in &traces {
                println!(
                    "trial={} iterations_to_target={} final_dist={}",
                    t.trial,
                    t.iterations_to_target
                        .map_or_else(|| "none".to_string(), |n| n.to_string()),
                    fmt_f64(t.last().dist)
                );
            }
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_theorem(args: &TheoremArgs) -> CliResult {
    let seed = match args.seed {
        Some(s) => s,
        None => settings::env_seed()?,
    };
    let report = theorem_check(&TheoremConfig {
        n_contexts: args.contexts,
        n_arms: args.arms,
        beta: args.beta,
        epsilon: args.epsilon,
        trials: args.trials,
        seed,
        max_steps: args.max_steps,
    })?;
    let text = serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n";
    if let Some(out) = &args.out {
        write_atomic(out, text.as_bytes())?;
    }
    print!("{text}");
    if report.pass {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "measured T_adv = {} is not below half of mean T_u = {} ({} unconverged trials)",
            report.measured_t_adv, report.measured_mean_t_u, report.unconverged_trials
        )))
    }
}

fn print_reports(reports: &[IterationReport]) {
    for r in reports {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), fmt_f64);
        println!(
            "t={} mode={} k={} tau_k={} mean_pool={} mean_selected={} quality_before={} quality_after={}",
            r.t,
            r.mode,
            r.k,
            opt(r.tau_k),
            opt(r.mean_score_pool),
            opt(r.mean_score_selected),
            opt(r.quality_before),
            opt(r.quality_after)
        );
    }
}

fn cmd_pipeline(args: &PipelineArgs) -> CliResult {
    let file = FileSettings::load(args.config.as_deref(), PIPELINE_KEYS)?;
    let top_k = file.pick_opt("top_k", args.top_k)?;
    let fraction = file.pick_opt("fraction", args.fraction)?;
    let selection = match (top_k, fraction) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "give either fraction or top_k, not both".into(),
            ))
        }
        (Some(k), None) => SelectionSize::TopK(k),
        (None, f) => SelectionSize::Fraction(f.unwrap_or(0.4)),
    };
    let seed = file.seed(args.seed)?;
    let backend = file.pick("backend", args.backend, Backend::Bandit)?;
    let alpha = file.pick("alpha", args.alpha, 1.0)?;
    let mut config = PipelineConfig {
        iterations: file.pick("iterations", args.iterations, 3)?,
        selection,
        metric: match args.metric {
            Some(m) => m,
            None => match file.pick_opt::<String>("metric", None)? {
                Some(name) => parse_metric(&name).map_err(CliError::Usage)?,
                None => Metric::MOne,
            },
        },
        metric_cfg: MetricConfig::default(),
        mode: match args.mode {
            Some(m) => m,
            None => {
                file.pick_opt::<String>("mode", None)?
                    .map_or(Ok(Mode::EvolveThenSelect), |s| {
                        s.parse::<Mode>()
                            .map_err(|e| CliError::Usage(e.to_string()))
                    })?
            }
        },
        seed,
        artifact_dir: Some(args.out.clone()),
    };

    let (reports, summary) = match backend {
        Backend::Bandit => {
            let bandit_beta = file.pick("bandit_beta", None, 0.1)?;
            let instance = BanditInstance::random(
                file.pick("contexts", None, 20)?,
                file.pick("arms", None, 8)?,
                bandit_beta,
                seed,
            )?;
            let defaults = BanditWorldConfig::default();
            let world_cfg = BanditWorldConfig {
                pairs_per_context: file.pick(
                    "pairs_per_context",
                    None,
                    defaults.pairs_per_context,
                )?,
                evolve_noise: file.pick("evolve_noise", None, defaults.evolve_noise)?,
                train_steps: file.pick("train_steps", None, defaults.train_steps)?,
                eta: file.pick_opt("eta", None)?,
                seed,
            };
            let mut world = bandit_world(&instance, world_cfg)?;
            // records carry DPO-style log-probs at the world's β
            config.metric_cfg = world.metric_config(alpha);
            let prompts = world.prompts();
            let (_, reports) = run_pipeline(&mut world, &prompts, &config)?;
            (reports, "bandit")
        }
        Backend::File => {
            let input: PathBuf = file
                .pick_opt("input", args.input.clone())?
                .ok_or_else(|| CliError::Usage("the file backend needs --input".into()))?;
            if !input.is_dir() {
                return Err(CliError::Usage(format!(
                    "input {} is not a directory",
                    input.display()
                )));
            }
            if args.out.exists() && args.out.canonicalize().ok() == input.canonicalize().ok() {
                return Err(CliError::Usage("--out must differ from --input".into()));
            }
            config.metric_cfg = MetricConfig {
                beta: file.pick("beta", args.beta, 1.0)?,
                alpha,
                implicit_kind: file.pick_opt::<String>("implicit_kind", None)?.map_or(
                    Ok(args
                        .implicit_kind
                        .unwrap_or(ImplicitKind::SimpoLengthNormalized)),
                    |s| match args.implicit_kind {
                        Some(k) => Ok(k),
                        None => parse_implicit_kind(&s).map_err(CliError::Usage),
                    },
                )?,
                normalize: false,
            };
            let mut world = file_world(&input, LoadOptions::default())?;
            let prompts = world.prompts()?;
            let (_, reports) = run_pipeline(&mut world, &prompts, &config)?;
            (reports, "file")
        }
    };
    info!("{summary} backend finished {} iterations", reports.len());
    print_reports(&reports);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Score(a) => cmd_score(a),
        Command::Select(a) => cmd_select(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Theorem(a) => cmd_theorem(a),
        Command::Pipeline(a) => cmd_pipeline(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("alignpot: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
