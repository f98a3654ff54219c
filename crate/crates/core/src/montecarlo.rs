//! Lockstep simulation of `k` non-coordinating agents.
//!
//! Trial `i` draws the treasure from stream `(seed, i, 0)` and runs agent `j`
//! on stream `(seed, i, j)`. Trials are simulated in parallel chunks and then
//! folded in trial order, so every statistic is bitwise identical for any
//! worker count.

use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::BoxPrior;
use crate::error::{Error, Result};
use crate::rng::{StreamFactory, StreamRng};
use crate::searchers::{AgentVisitor, Query, SearchPlan, Searcher, SearcherKind, SearcherSpec};

/// Exhaustive strategies that have not found the treasure after this many
/// multiples of `M` steps are reported as runaways.
pub const RUNAWAY_FACTOR: u64 = 10;

const CHUNK: usize = 2048;

/// Agent `agent` makes no queries at or after time `time`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Crash {
    pub agent: usize,
    pub time: u64,
}

impl std::str::FromStr for Crash {
    type Err = Error;

    /// Parses `agent:time`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("crash `{s}` is not of the form agent:time"));
        let (a, t) = s.split_once(':').ok_or_else(bad)?;
        Ok(Crash {
            agent: a.trim().parse().map_err(|_| bad())?,
            time: t.trim().parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub prior: BoxPrior,
    /// Agents actually deployed.
    pub k: usize,
    /// Strategy, including the agent count it is tuned for.
    pub spec: SearcherSpec,
    pub trials: u64,
    pub seed: u64,
    pub crashes: Vec<Crash>,
}

impl SimConfig {
    /// `k` agents running `kind` tuned for `k` agents, no crashes.
    pub fn new(prior: BoxPrior, kind: SearcherKind, k: usize, trials: u64, seed: u64) -> Result<Self> {
        let spec = SearcherSpec::new(kind, k, &prior)?;
        Ok(Self {
            prior,
            k,
            spec,
            trials,
            seed,
            crashes: Vec::new(),
        })
    }

    pub fn with_crashes(mut self, crashes: Vec<Crash>) -> Self {
        self.crashes = crashes;
        self
    }

    /// The agent count the strategy is tuned for.
    pub fn configured_k(&self) -> usize {
        self.spec.k
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("need at least one trial".into()));
        }
        if self.k == 0 || self.k >= 1 << 16 {
            return Err(Error::InvalidArgument(format!("unsupported agent count {}", self.k)));
        }
        if self.spec.k > self.k {
            return Err(Error::InvalidArgument(format!(
                "strategy tuned for {} agents but only {} deployed",
                self.spec.k, self.k
            )));
        }
        let mut seen = vec![false; self.k + 1];
        for c in &self.crashes {
            if c.agent == 0 || c.agent > self.k {
                return Err(Error::InvalidArgument(format!(
                    "crashed agent {} outside 1..={}",
                    c.agent, self.k
                )));
            }
            if c.time == 0 {
                return Err(Error::InvalidArgument("crash times start at 1".into()));
            }
            if std::mem::replace(&mut seen[c.agent], true) {
                return Err(Error::InvalidArgument(format!("agent {} crashes twice", c.agent)));
            }
        }
        Ok(())
    }

    fn crash_times(&self) -> Vec<u64> {
        let mut times = vec![u64::MAX; self.k + 1];
        for c in &self.crashes {
            times[c.agent] = c.time;
        }
        times
    }
}

/// Outcome of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub treasure: usize,
    /// Query time of the first find; `None` when every agent crashed first.
    pub discovery: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutcome {
    pub records: Vec<TrialRecord>,
    /// Mean discovery time over uncensored trials.
    pub mean: f64,
    pub stderr: f64,
    /// Queries spent idle because an agent had nothing left to check.
    pub no_op_count: u64,
    /// Trials in which every agent crashed before finding the treasure.
    pub censored: u64,
}

impl SimOutcome {
    pub fn discovery_times(&self) -> impl Iterator<Item = u64> + '_ {
        self.records.iter().filter_map(|r| r.discovery)
    }
}

/// Streaming mean and variance.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn add(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

/// Inverse-CDF draw of a box from cumulative masses.
fn draw_box<R: Rng + ?Sized>(cumulative: &[f64], rng: &mut R) -> usize {
    let total = *cumulative.last().expect("non-empty prior");
    let u = rng.random::<f64>() * total;
    cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1) + 1
}

/// Simulates trials `start..end` with one batch of agents.
struct ChunkRunner<'a> {
    config: &'a SimConfig,
    cumulative: &'a [f64],
    start: u64,
    end: u64,
}

impl AgentVisitor for ChunkRunner<'_> {
    type Output = Result<(Vec<TrialRecord>, u64)>;

    fn visit<S: Searcher>(self, agents: Vec<S>) -> Self::Output {
        let config = self.config;
        let streams = StreamFactory::new(config.seed);
        let crash_times = config.crash_times();
        let mut slots: Vec<Slot<S>> = agents
            .into_iter()
            .map(|agent| Slot {
                crash: crash_times[agent.id()],
                rng: streams.stream(0, 0),
                agent,
            })
            .collect();
        let all_crashed = slots.iter().map(|s| s.crash).max().unwrap_or(u64::MAX);
        let cap = if config.spec.kind.is_exhaustive() {
            RUNAWAY_FACTOR * config.prior.len() as u64
        } else {
            u64::MAX
        };
        let mut records = Vec::with_capacity((self.end - self.start) as usize);
        let mut idle = 0;
        for trial in self.start..self.end {
            let treasure = draw_box(self.cumulative, &mut streams.placement(trial));
            for slot in &mut slots {
                slot.agent.reset();
                streams.reset(&mut slot.rng, trial, slot.agent.id() as u64);
            }
            let mut discovery = None;
            let mut t = 0u64;
            while discovery.is_none() {
                t += 1;
                if t >= all_crashed {
                    break;
                }
                if t > cap {
                    return Err(Error::Runaway { trial, cap });
                }
                for slot in &mut slots {
                    if t >= slot.crash {
                        continue;
                    }
                    match slot.agent.next_query(&mut slot.rng) {
                        Query::Check(x) if x == treasure => discovery = Some(t),
                        Query::Check(_) => {}
                        Query::Idle => idle += 1,
                    }
                }
            }
            records.push(TrialRecord {
                trial,
                treasure,
                discovery,
            });
        }
        Ok((records, idle))
    }
}

/// An agent with its random stream and crash time.
struct Slot<S> {
    agent: S,
    rng: StreamRng,
    crash: u64,
}

/// Simulates `config.trials` independent trials.
pub fn run(config: &SimConfig) -> Result<SimOutcome> {
    config.validate()?;
    let plan = SearchPlan::new(config.spec, &config.prior)?;
    let cumulative = config.prior.cumulative();
    let chunks: Vec<(u64, u64)> = (0..config.trials)
        .step_by(CHUNK)
        .map(|start| (start, (start + CHUNK as u64).min(config.trials)))
        .collect();

    let results: Vec<Result<(Vec<TrialRecord>, u64)>> = chunks
        .par_iter()
        .map(|&(start, end)| {
            plan.visit_agents(
                1..=config.k,
                ChunkRunner {
                    config,
                    cumulative: &cumulative,
                    start,
                    end,
                },
            )
        })
        .collect();

    let mut records = Vec::with_capacity(config.trials as usize);
    let mut no_op_count = 0;
    for chunk in results {
        let (chunk, idle) = chunk?;
        records.extend(chunk);
        no_op_count += idle;
    }

    let mut stats = Welford::default();
    let mut censored = 0;
    for r in &records {
        match r.discovery {
            Some(t) => stats.add(t as f64),
            None => censored += 1,
        }
    }
    if censored > 0 {
        warn!("{censored} of {} trials censored: every agent crashed first", config.trials);
    }
    Ok(SimOutcome {
        records,
        mean: if stats.n == 0 { f64::NAN } else { stats.mean },
        stderr: stats.stderr(),
        no_op_count,
        censored,
    })
}

/// A crash-faulty run next to a clean run with the surviving agent count.
#[derive(Debug, Clone, Serialize)]
pub struct FaultComparison {
    pub faulty: SimOutcome,
    pub clean: SimOutcome,
    pub pooled_stderr: f64,
    /// `faulty.mean <= clean.mean + 4 pooled_stderr`.
    pub holds: bool,
}

/// Runs `config` with its crash schedule and a crash-free run of `k - f`
/// agents on the same seed.
pub fn run_with_faults(config: &SimConfig) -> Result<FaultComparison> {
    let f = config.crashes.len();
    if f >= config.k {
        return Err(Error::InvalidArgument(format!(
            "{f} crashes leave no agent out of {}",
            config.k
        )));
    }
    let clean_config = SimConfig {
        k: config.k - f,
        crashes: Vec::new(),
        ..config.clone()
    };
    let faulty = run(config)?;
    let clean = run(&clean_config)?;
    let pooled_stderr = faulty.stderr.hypot(clean.stderr);
    let holds = faulty.mean <= clean.mean + 4.0 * pooled_stderr;
    Ok(FaultComparison {
        faulty,
        clean,
        pooled_stderr,
        holds,
    })
}

/// Frequency that box `x` is still unchecked by agent 1 after `t` queries,
/// as `freq[x - 1][t]` for `x <= x_max` and `t <= t_max`.
pub fn empirical_survival(config: &SimConfig, x_max: usize, t_max: usize) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let plan = SearchPlan::new(config.spec, &config.prior)?;
    let chunks: Vec<(u64, u64)> = (0..config.trials)
        .step_by(CHUNK)
        .map(|start| (start, (start + CHUNK as u64).min(config.trials)))
        .collect();
    let streams = StreamFactory::new(config.seed);
    // first[x][t] counts trials in which box x was first checked at query t.
    let counts = chunks
        .par_iter()
        .map(|&(start, end)| {
            let mut agent = plan.agent(1);
            let mut first = vec![vec![0u64; t_max + 1]; x_max + 1];
            let mut seen = vec![false; x_max + 1];
            let mut rng = streams.stream(start, 1);
            for trial in start..end {
                agent.reset();
                seen.iter_mut().for_each(|s| *s = false);
                streams.reset(&mut rng, trial, 1);
                for t in 1..=t_max {
                    if let Query::Check(x) = agent.next_query(&mut rng) {
                        if x <= x_max && !seen[x] {
                            seen[x] = true;
                            first[x][t] += 1;
                        }
                    }
                }
            }
            first
        })
        .reduce(
            || vec![vec![0u64; t_max + 1]; x_max + 1],
            |mut a, b| {
                for (ra, rb) in a.iter_mut().zip(b) {
                    for (ca, cb) in ra.iter_mut().zip(rb) {
                        *ca += cb;
                    }
                }
                a
            },
        );
    let n = config.trials as f64;
    Ok((1..=x_max)
        .map(|x| {
            let mut unchecked = config.trials;
            (0..=t_max)
                .map(|t| {
                    unchecked -= counts[x][t];
                    unchecked as f64 / n
                })
                .collect()
        })
        .collect())
}
