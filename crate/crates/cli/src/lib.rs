//! Command implementations behind the `boxsearch` binary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use boxsearch_core::continuum::{self, ContinuumParams};
use boxsearch_core::montecarlo::{self, Crash, SimConfig, SimOutcome, TrialRecord};
use boxsearch_core::verify::{self, Suite, VerifyOptions};
use boxsearch_core::{
    build_l, cord_time, exact_time, parse_prior_spec, trace, BoxPrior, SearcherKind, SearcherSpec,
};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "boxsearch", version, about = "Non-coordinating multi-agent box search")]
pub struct Cli {
    /// Worker threads for parallel work (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the optimal function L and print its water levels.
    Lstar(LstarArgs),
    /// Exact expected discovery times.
    Eval(EvalArgs),
    /// Monte Carlo simulation.
    Sim(SimArgs),
    /// One agent's check sequence as JSON lines.
    Trace(TraceArgs),
    /// Closed forms of the continuous problem.
    Theory {
        #[command(subcommand)]
        command: TheoryCommand,
    },
    /// Run a suite of named checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Subcommand)]
pub enum TheoryCommand {
    /// Limiting pareto/cord ratio, with the exact finite ratio if `--M` is given.
    Ratio(RatioArgs),
}

fn parse_kind(s: &str) -> std::result::Result<SearcherKind, String> {
    s.parse().map_err(|e: boxsearch_core::Error| e.to_string())
}

fn parse_prior(s: &str) -> std::result::Result<BoxPrior, String> {
    parse_prior_spec(s).map_err(|e| e.to_string())
}

fn parse_crash(s: &str) -> std::result::Result<Crash, String> {
    s.parse().map_err(|e: boxsearch_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct SeedArg {
    #[arg(long, env = "BOXSEARCH_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct LstarArgs {
    /// `uniform:M`, `pareto:b,M` or `file:path.json`.
    #[arg(long, value_parser = parse_prior)]
    pub prior: BoxPrior,
    #[arg(short)]
    pub k: usize,
    /// Write the full matrix as CSV here, plus water levels as JSON beside it.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_parser = parse_prior)]
    pub prior: BoxPrior,
    #[arg(short)]
    pub k: usize,
    /// Strategies to evaluate; all applicable ones by default.
    #[arg(long = "alg", value_parser = parse_kind)]
    pub algs: Vec<SearcherKind>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long, value_parser = parse_kind)]
    pub alg: SearcherKind,
    #[arg(long, value_parser = parse_prior)]
    pub prior: BoxPrior,
    /// Agents deployed.
    #[arg(short)]
    pub k: usize,
    /// Agent count the strategy is tuned for (defaults to `k`).
    #[arg(long)]
    pub configured_k: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Crash `agent` from time `time` on; repeatable.
    #[arg(long = "crash", value_parser = parse_crash)]
    pub crashes: Vec<Crash>,
    /// Output path; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long, value_parser = parse_kind)]
    pub alg: SearcherKind,
    #[arg(long, value_parser = parse_prior)]
    pub prior: BoxPrior,
    #[arg(short)]
    pub k: usize,
    #[arg(long, default_value_t = 1)]
    pub agent: usize,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct RatioArgs {
    #[arg(long)]
    pub b: f64,
    #[arg(short, default_value_t = 2)]
    pub k: usize,
    /// Also compute the exact ratio on a Pareto prior with this many boxes.
    #[arg(long = "M")]
    pub m: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(Suite::NAMES))]
    pub suite: String,
    #[arg(long, default_value_t = 0.5)]
    pub b: f64,
    #[arg(short, default_value_t = 2)]
    pub k: usize,
    #[arg(long = "M", default_value_t = 100_000)]
    pub m: usize,
    /// Relative tolerance on the pareto ratio at the largest `M`.
    #[arg(long, default_value_t = 0.05)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
    #[command(flatten)]
    pub seed: SeedArg,
}

/// How a command ended, mapped to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    CheckFailed,
}

/// Whether an error stems from bad user input (exit code 2).
pub fn is_usage_error(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        matches!(
            cause.downcast_ref::<boxsearch_core::Error>(),
            Some(boxsearch_core::Error::InvalidArgument(_) | boxsearch_core::Error::Parse(_))
        )
    })
}

pub fn execute(cli: Cli, out: &mut (dyn Write + Send)) -> Result<Outcome> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build().context("building the worker pool")?;
    let format = cli.format;
    pool.install(|| match cli.command {
        Command::Lstar(args) => lstar(args, format, out),
        Command::Eval(args) => eval(args, format, out),
        Command::Sim(args) => sim(args, format, out),
        Command::Trace(args) => trace_cmd(args, out),
        Command::Theory {
            command: TheoryCommand::Ratio(args),
        } => ratio(args, format, out),
        Command::Verify(args) => verify_cmd(args, format, out),
    })
}

#[derive(Debug, Serialize)]
struct LstarReport {
    k: usize,
    support: usize,
    /// `alpha[t]` for `t = 0..=M`; `null` stands for the infinite level at `t = 0`.
    alpha: Vec<Option<f64>>,
    active: Vec<usize>,
    expected_time: f64,
}

fn lstar(args: LstarArgs, format: Format, out: &mut (dyn Write + Send)) -> Result<Outcome> {
    let schedule = build_l(&args.prior, args.k)?;
    let report = LstarReport {
        k: args.k,
        support: schedule.support(),
        alpha: schedule.alpha().iter().map(|a| a.is_finite().then_some(*a)).collect(),
        active: schedule.active().to_vec(),
        expected_time: schedule.expected_time(),
    };
    if let Some(path) = &args.dump {
        let n = schedule.matrix();
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        let mut header = vec!["box".to_string()];
        header.extend((0..=n.horizon()).map(|t| t.to_string()));
        w.write_record(&header)?;
        for x in 1..=n.boxes() {
            let mut row = vec![x.to_string()];
            row.extend(n.row(x).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        let side = path.with_extension("json");
        std::fs::write(&side, serde_json::to_string_pretty(&report)?)
            .with_context(|| format!("writing {}", side.display()))?;
    }
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(["t", "alpha", "active"])?;
            for (t, (a, ac)) in report.alpha.iter().zip(&report.active).enumerate() {
                let a = a.map_or("inf".to_string(), |v| v.to_string());
                w.write_record([t.to_string(), a, ac.to_string()])?;
            }
            w.flush()?;
        }
    }
    Ok(Outcome::Pass)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub strategy: String,
    pub lower: f64,
    pub upper: f64,
    pub ratio_to_cord: f64,
}

pub fn eval_rows(prior: &BoxPrior, k: usize, algs: &[SearcherKind]) -> Result<Vec<EvalRow>> {
    let algs = if algs.is_empty() {
        verify::strategies_for(prior)
    } else {
        algs.to_vec()
    };
    let cord = cord_time(prior, k)?;
    algs.iter()
        .map(|&kind| {
            let spec = SearcherSpec::new(kind, k, prior)?;
            let t = exact_time(&spec, prior)?;
            Ok(EvalRow {
                strategy: kind.to_string(),
                lower: t.lower,
                upper: t.upper,
                ratio_to_cord: t.midpoint() / cord,
            })
        })
        .collect()
}

fn eval(args: EvalArgs, format: Format, out: &mut (dyn Write + Send)) -> Result<Outcome> {
    let rows = eval_rows(&args.prior, args.k, &args.algs)?;
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&rows)?)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            for row in &rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
    }
    Ok(Outcome::Pass)
}

/// Resolved simulation settings, echoed at the top of every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimHeader {
    pub alg: String,
    pub prior: String,
    pub k: usize,
    pub configured_k: usize,
    pub trials: u64,
    pub seed: u64,
    pub crashes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub trial: u64,
    pub treasure_box: usize,
    /// Empty when every agent crashed before the find.
    pub discovery_time: Option<u64>,
}

impl From<&TrialRecord> for SimRow {
    fn from(r: &TrialRecord) -> Self {
        Self {
            trial: r.trial,
            treasure_box: r.treasure,
            discovery_time: r.discovery,
        }
    }
}

#[derive(Debug, Serialize)]
struct SimReport<'a> {
    config: &'a SimHeader,
    mean: f64,
    stderr: f64,
    no_op_count: u64,
    censored: u64,
    records: Vec<SimRow>,
}

pub fn simulate(args: &SimArgs) -> Result<(SimHeader, SimOutcome)> {
    let configured_k = args.configured_k.unwrap_or(args.k);
    let mut config = SimConfig::new(args.prior.clone(), args.alg, configured_k, args.trials, args.seed.seed)?;
    config.k = args.k;
    config.crashes = args.crashes.clone();
    let outcome = montecarlo::run(&config)?;
    let header = SimHeader {
        alg: args.alg.to_string(),
        prior: args.prior.to_string(),
        k: args.k,
        configured_k,
        trials: args.trials,
        seed: args.seed.seed,
        crashes: args.crashes.iter().map(|c| format!("{}:{}", c.agent, c.time)).collect(),
    };
    Ok((header, outcome))
}

/// Writes the simulation as CSV: `#`-prefixed config lines, then one row per trial.
pub fn write_sim_csv(header: &SimHeader, outcome: &SimOutcome, out: &mut (dyn Write + Send)) -> Result<()> {
    let config = serde_json::to_value(header)?;
    for (key, value) in config.as_object().expect("header is an object") {
        writeln!(out, "# {key}: {value}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    for r in &outcome.records {
        w.serialize(SimRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back what [`write_sim_csv`] wrote.
pub fn read_sim_csv(text: &str) -> Result<(SimHeader, Vec<SimRow>)> {
    let mut config = serde_json::Map::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let (key, value) = line[1..]
            .trim()
            .split_once(": ")
            .with_context(|| format!("bad header line `{line}`"))?;
        config.insert(key.to_string(), serde_json::from_str(value)?);
    }
    let header = serde_json::from_value(serde_json::Value::Object(config))?;
    let rows = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<SimRow>, _>>()?;
    Ok((header, rows))
}

fn sim(args: SimArgs, format: Format, out: &mut (dyn Write + Send)) -> Result<Outcome> {
    let (header, outcome) = simulate(&args)?;
    let mut sink: Box<dyn Write + Send + '_> = match &args.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(out),
    };
    let sink = &mut *sink;
    match format {
        Format::Csv => write_sim_csv(&header, &outcome, sink)?,
        Format::Json => {
            let report = SimReport {
                config: &header,
                mean: outcome.mean,
                stderr: outcome.stderr,
                no_op_count: outcome.no_op_count,
                censored: outcome.censored,
                records: outcome.records.iter().map(SimRow::from).collect(),
            };
            serde_json::to_writer(&mut *sink, &report)?;
            writeln!(sink)?;
        }
    }
    sink.flush()?;
    eprintln!(
        "mean {} stderr {} over {} trials ({} censored)",
        outcome.mean,
        outcome.stderr,
        args.trials - outcome.censored,
        outcome.censored
    );
    Ok(Outcome::Pass)
}

#[derive(Debug, Serialize)]
struct TraceLine<'a> {
    agent: usize,
    step: usize,
    boxes: &'a [usize],
}

fn trace_cmd(args: TraceArgs, out: &mut (dyn Write + Send)) -> Result<Outcome> {
    let spec = SearcherSpec::new(args.alg, args.k, &args.prior)?;
    let seq = trace(spec, &args.prior, args.agent, args.seed.seed, args.steps)?;
    for (i, boxes) in seq.steps.iter().enumerate() {
        let line = TraceLine {
            agent: seq.agent_id,
            step: i + 1,
            boxes,
        };
        writeln!(out, "{}", serde_json::to_string(&line)?)?;
    }
    Ok(Outcome::Pass)
}

#[derive(Debug, Serialize)]
struct RatioReport {
    b: f64,
    k: usize,
    sigma: f64,
    u_opt: f64,
    head: f64,
    tail: f64,
    limit: f64,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    finite_ratio: Option<f64>,
}

fn ratio(args: RatioArgs, format: Format, out: &mut (dyn Write + Send)) -> Result<Outcome> {
    let p = ContinuumParams::new(args.b, args.k)?;
    let s = p.sigma();
    let k = args.k as f64;
    let finite_ratio = args
        .m
        .map(|m| continuum::finite_pareto_ratio(args.b, args.k, m))
        .transpose()?;
    let report = RatioReport {
        b: args.b,
        k: args.k,
        sigma: s,
        u_opt: continuum::u_opt(&p),
        head: k * s * (2.0 - s),
        tail: k * (2.0 - args.b) * (1.0 - s) * (1.0 - s) / (k + 1.0),
        limit: continuum::pareto_ratio_limit(&p),
        m: args.m,
        finite_ratio,
    };
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.serialize(&report)?;
            w.flush()?;
        }
    }
    Ok(Outcome::Pass)
}

fn verify_cmd(args: VerifyArgs, format: Format, out: &mut (dyn Write + Send)) -> Result<Outcome> {
    let suite: Suite = args.suite.parse()?;
    let opts = VerifyOptions {
        b: args.b,
        k: args.k,
        m: args.m,
        ratio_tolerance: args.tolerance,
        trials: args.trials,
        seed: args.seed.seed,
    };
    let checks = verify::run_suite(suite, &opts)?;
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&checks)?)?,
        Format::Csv => {
            for c in &checks {
                writeln!(out, "{c}")?;
            }
        }
    }
    Ok(if checks.iter().all(|c| c.passed) {
        Outcome::Pass
    } else {
        Outcome::CheckFailed
    })
}
