//! Single-agent search strategies.
//!
//! Each strategy is available two ways: as exact survival probabilities
//! (dense [`StrategyMatrix`] generators and per-box expected-time evaluators)
//! and as a seeded sampler that emits the boxes one agent checks.
//!
//! Time is counted in single queries throughout. The two order-only
//! strategies (`universal`, `memory`) check two boxes per phase, so phase `i`
//! covers query times `2i - 1` and `2i`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::BoxPrior;
use crate::error::{Error, Result};
use crate::numeric::{ceil_div, powk, CompensatedSum};
use crate::rng::{self, StreamRng};
use crate::strategy::{build_l, cord_time, LSchedule, StrategyMatrix, TimeBracket};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearcherKind {
    /// Coordinated baseline: agent `i` checks box `(t-1)k + i` at step `t`.
    Cord,
    /// Two fresh boxes per phase from the window `1..=(k+1)t`.
    Universal,
    /// Two boxes per phase, with replacement, from `1..=kt`.
    Memory,
    /// The optimal distribution-aware strategy realizing `L`.
    Astar,
    /// Fresh boxes from the window `1..=min(M, floor(t/sigma))`.
    Pareto,
    /// Uniform over boxes not yet checked.
    Uniform,
    /// Uniform over all boxes, with replacement.
    UniformReplacement,
}

impl SearcherKind {
    pub const ALL: [SearcherKind; 7] = [
        SearcherKind::Cord,
        SearcherKind::Universal,
        SearcherKind::Memory,
        SearcherKind::Astar,
        SearcherKind::Pareto,
        SearcherKind::Uniform,
        SearcherKind::UniformReplacement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SearcherKind::Cord => "cord",
            SearcherKind::Universal => "universal",
            SearcherKind::Memory => "memory",
            SearcherKind::Astar => "astar",
            SearcherKind::Pareto => "pareto",
            SearcherKind::Uniform => "uniform",
            SearcherKind::UniformReplacement => "uniform_replacement",
        }
    }

    /// Strategies guaranteed to have checked every supported box after a
    /// bounded number of steps.
    pub fn is_exhaustive(self) -> bool {
        matches!(
            self,
            SearcherKind::Cord | SearcherKind::Astar | SearcherKind::Pareto | SearcherKind::Uniform
        )
    }

    /// Queries grouped into one logical step of a check sequence.
    pub fn queries_per_step(self) -> usize {
        match self {
            SearcherKind::Universal | SearcherKind::Memory => 2,
            _ => 1,
        }
    }

    /// Whether a sequence of this kind may contain the same box twice.
    pub fn may_repeat(self) -> bool {
        matches!(self, SearcherKind::Memory | SearcherKind::UniformReplacement)
    }
}

impl fmt::Display for SearcherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SearcherKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SearcherKind::ALL
            .into_iter()
            .find(|k| k.name() == s || (s == "uniform-replacement" && *k == SearcherKind::UniformReplacement))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy `{s}`")))
    }
}

/// Pareto window speed `sigma = b / (b + k - 1)`.
pub fn sigma(b: f64, k: usize) -> f64 {
    b / (b + (k - 1) as f64)
}

/// A strategy together with the agent count it is tuned for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearcherSpec {
    pub kind: SearcherKind,
    pub k: usize,
    /// Pareto exponent; present only for the pareto kind.
    pub b: Option<f64>,
}

impl SearcherSpec {
    /// Spec for `kind` tuned for `k` agents. The pareto kind takes its
    /// exponent from the prior, which must be a Pareto prior with `0 < b < 1`.
    pub fn new(kind: SearcherKind, k: usize, prior: &BoxPrior) -> Result<Self> {
        if kind == SearcherKind::Pareto {
            let b = prior.pareto_exponent().ok_or_else(|| {
                Error::InvalidArgument("the pareto strategy needs a pareto prior".into())
            })?;
            return Self::pareto(b, k);
        }
        check_k(k)?;
        Ok(Self { kind, k, b: None })
    }

    /// Pareto strategy with an explicit exponent `0 < b < 1`.
    pub fn pareto(b: f64, k: usize) -> Result<Self> {
        check_k(k)?;
        if !(b > 0.0 && b < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "the pareto strategy needs 0 < b < 1, got {b}"
            )));
        }
        Ok(Self {
            kind: SearcherKind::Pareto,
            k,
            b: Some(b),
        })
    }

    pub fn sigma(&self) -> Option<f64> {
        self.b.map(|b| sigma(b, self.k))
    }
}

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need k >= 2, got {k}")));
    }
    Ok(())
}

/// `min(m, floor(i / sigma))`, computed as `floor(i (b + k - 1) / b)` with
/// near-integers snapped so that e.g. `sigma = 1/3` gives exactly `3i`.
pub fn pareto_window(b: f64, k: usize, m: usize, i: usize) -> usize {
    let w = i as f64 * (b + (k - 1) as f64) / b;
    let r = w.round();
    let w = if (w - r).abs() <= 1e-9 * w.max(1.0) { r } else { w.floor() };
    if w >= m as f64 {
        m
    } else {
        w as usize
    }
}

/// Box `(t - 1) k + agent` checked by agent `agent` at step `t` of the
/// coordinated baseline.
pub fn sample_cord(agent: usize, t: usize, k: usize) -> Result<usize> {
    if agent == 0 || agent > k {
        return Err(Error::InvalidArgument(format!(
            "agent id {agent} outside 1..={k}"
        )));
    }
    if t == 0 {
        return Err(Error::InvalidArgument("steps start at t = 1".into()));
    }
    Ok((t - 1) * k + agent)
}

// ---------------------------------------------------------------------------
// Exact survival: order-only strategies
// ---------------------------------------------------------------------------

/// Per-phase survival factors of the two order-only strategies.
#[derive(Debug, Clone, Copy)]
struct PhaseModel {
    kind: SearcherKind,
    k: usize,
}

impl PhaseModel {
    fn new(kind: SearcherKind, k: usize) -> Self {
        debug_assert!(matches!(kind, SearcherKind::Universal | SearcherKind::Memory));
        Self { kind, k }
    }

    /// First phase in which box `x` can be checked.
    fn start(&self, x: usize) -> usize {
        match self.kind {
            SearcherKind::Universal => ceil_div(x, self.k + 1),
            _ => ceil_div(x, self.k),
        }
    }

    /// Survival of an active, still unchecked box across the first query of
    /// phase `i` and across the whole phase.
    fn factors(&self, i: usize) -> (f64, f64) {
        let k = self.k as f64;
        let i = i as f64;
        match self.kind {
            SearcherKind::Universal => {
                let unchecked = (k - 1.0) * i + 2.0;
                (1.0 - 1.0 / unchecked, 1.0 - 2.0 / unchecked)
            }
            _ => {
                let miss = 1.0 - 1.0 / (k * i);
                (miss, miss * miss)
            }
        }
    }

    /// Bracket on `sum_{tau > 2H} N(tau)^k / N(2H)^k` for a box active by phase `H`.
    ///
    /// After phase `H` the per-phase survival product `P(H, j)` satisfies
    /// `c_lo (H/j)^e <= P(H, j) <= c_hi ((H+1)/(j+1))^e`; summing the `k`-th
    /// powers against `int u^{-a} du` with `a = e k > 1` gives the bracket.
    fn tail_constants(&self, phases: usize) -> TimeBracket {
        let k = self.k as f64;
        let h = phases as f64;
        let (e, c_lo, c_hi) = match self.kind {
            SearcherKind::Universal => {
                let phi = 2.0 / (k - 1.0);
                (phi, 1.0, (phi * phi / (2.0 * h)).exp())
            }
            _ => (2.0 / k, (-2.0 / (k * h)).exp(), 1.0),
        };
        let a = e * k;
        let upper = 1.0 + 2.0 * c_hi.powf(k) * (h + 1.0) / (a - 1.0);
        let lower = 2.0 * c_lo.powf(k) * h.powf(a) * (h + 1.0).powf(1.0 - a) / (a - 1.0);
        TimeBracket { lower, upper }
    }
}

fn order_only_matrix(kind: SearcherKind, x_max: usize, k: usize, horizon: usize) -> Result<StrategyMatrix> {
    check_k(k)?;
    if x_max == 0 {
        return Err(Error::InvalidArgument("need at least one box".into()));
    }
    let model = PhaseModel::new(kind, k);
    // The tail bracket needs every box active before the horizon.
    let phases = ceil_div(horizon.max(1), 2).max(model.start(x_max));
    let mut n = StrategyMatrix::ones(x_max, 2 * phases);
    let tail = model.tail_constants(phases);
    for x in 1..=x_max {
        let s = model.start(x);
        let mut survive = 1.0;
        for i in s..=phases {
            let (first, whole) = model.factors(i);
            n.set(x, 2 * i - 1, survive * first);
            survive *= whole;
            n.set(x, 2 * i, survive);
        }
        n.set_tail(x, tail.scale(powk(survive, k)));
    }
    Ok(n)
}

/// Survival matrix of the universal strategy for boxes `1..=x_max`, in query
/// units up to at least `horizon` queries, with a bracketed tail.
pub fn matrix_universal(x_max: usize, k: usize, horizon: usize) -> Result<StrategyMatrix> {
    order_only_matrix(SearcherKind::Universal, x_max, k, horizon)
}

/// Survival matrix of the memory strategy; see [`matrix_universal`].
pub fn matrix_memory(x_max: usize, k: usize, horizon: usize) -> Result<StrategyMatrix> {
    order_only_matrix(SearcherKind::Memory, x_max, k, horizon)
}

/// Default phase horizon for per-box evaluation of order-only strategies.
fn default_phases(s_max: usize) -> usize {
    (1usize << 20).max(1024 * s_max)
}

/// Exact expected discovery times `T(A, x)` for `x = 1..=x_max` of an
/// order-only strategy (universal or memory), bracketed.
///
/// The time depends on `x` only through its start phase `s`, and
/// `T(x) = (2s - 1) + W(s)` where `W` obeys the backward recursion
/// `W(s) = m_s^k + r_s^k (1 + W(s + 1))` over the per-phase factors.
pub fn order_only_box_times(kind: SearcherKind, k: usize, x_max: usize) -> Result<Vec<TimeBracket>> {
    check_k(k)?;
    if !matches!(kind, SearcherKind::Universal | SearcherKind::Memory) {
        return Err(Error::InvalidArgument(format!("{kind} is not an order-only strategy")));
    }
    let model = PhaseModel::new(kind, k);
    let s_max = model.start(x_max.max(1));
    order_only_box_times_with(model, x_max, default_phases(s_max))
}

fn order_only_box_times_with(model: PhaseModel, x_max: usize, phases: usize) -> Result<Vec<TimeBracket>> {
    let s_max = model.start(x_max.max(1));
    let phases = phases.max(s_max);
    let k = model.k;
    let mut w = model.tail_constants(phases);
    let mut by_start = vec![TimeBracket::exact(0.0); s_max + 1];
    for i in (1..=phases).rev() {
        let (first, whole) = model.factors(i);
        let a = powk(first, k);
        let c = powk(whole, k);
        w = TimeBracket {
            lower: a + c * (1.0 + w.lower),
            upper: a + c * (1.0 + w.upper),
        };
        if i <= s_max {
            by_start[i] = w;
        }
    }
    Ok((1..=x_max)
        .map(|x| {
            let s = model.start(x);
            let head = (2 * s - 1) as f64;
            TimeBracket {
                lower: head + by_start[s].lower,
                upper: head + by_start[s].upper,
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Exact survival: pareto and the uniform strategies
// ---------------------------------------------------------------------------

/// Per-step survival factor `1 - 1/(W(t) - (t - 1))` of the pareto strategy
/// for `t = 1..=m` (index 0 unused).
fn pareto_factors(b: f64, k: usize, m: usize) -> Result<Vec<f64>> {
    let mut f = vec![1.0; m + 1];
    for (t, slot) in f.iter_mut().enumerate().skip(1) {
        let window = pareto_window(b, k, m, t);
        if window < t {
            return Err(Error::Internal(format!(
                "pareto window {window} smaller than step {t}"
            )));
        }
        *slot = 1.0 - 1.0 / (window - (t - 1)) as f64;
    }
    Ok(f)
}

/// First step at which box `x` lies in the pareto window.
fn pareto_entry(b: f64, k: usize, m: usize, x: usize) -> usize {
    // floor(t/sigma) >= x first holds near t = sigma x; walk to the exact step.
    let mut t = ((sigma(b, k) * x as f64).floor() as usize).max(1);
    while t > 1 && pareto_window(b, k, m, t - 1) >= x {
        t -= 1;
    }
    while pareto_window(b, k, m, t) < x {
        t += 1;
    }
    t
}

/// Survival matrix of the pareto strategy on `m` boxes for `t = 0..=m`.
pub fn matrix_pareto_exponent(b: f64, k: usize, m: usize) -> Result<StrategyMatrix> {
    SearcherSpec::pareto(b, k)?;
    let f = pareto_factors(b, k, m)?;
    let mut n = StrategyMatrix::ones(m, m);
    for x in 1..=m {
        let entry = pareto_entry(b, k, m, x);
        let mut survive = 1.0;
        for (t, &factor) in f.iter().enumerate().skip(entry) {
            survive *= factor;
            n.set(x, t, survive);
        }
    }
    Ok(n)
}

/// Survival matrix of the pareto strategy for a Pareto prior with `0 < b < 1`.
pub fn matrix_pareto(prior: &BoxPrior, k: usize) -> Result<StrategyMatrix> {
    let spec = SearcherSpec::new(SearcherKind::Pareto, k, prior)?;
    matrix_pareto_exponent(spec.b.expect("pareto spec has b"), k, prior.len())
}

/// Exact `T(pareto, x)` for `x = 1..=m`, in `O(m)` via the backward
/// recursion `V(t) = f(t)^k (1 + V(t + 1))`.
pub fn pareto_box_times(b: f64, k: usize, m: usize) -> Result<Vec<f64>> {
    SearcherSpec::pareto(b, k)?;
    let f = pareto_factors(b, k, m)?;
    let mut v = vec![0.0; m + 2];
    for t in (1..=m).rev() {
        v[t] = powk(f[t], k) * (1.0 + v[t + 1]);
    }
    Ok((1..=m)
        .map(|x| {
            let entry = pareto_entry(b, k, m, x);
            entry as f64 + v[entry]
        })
        .collect())
}

/// Survival matrix of the optimal strategy: exactly `L`.
pub fn matrix_astar(prior: &BoxPrior, k: usize) -> Result<StrategyMatrix> {
    Ok(build_l(prior, k)?.matrix())
}

/// Uniform without replacement over `1..=m`: `N(x, t) = (m - t)/m`.
pub fn matrix_uniform(m: usize) -> Result<StrategyMatrix> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one box".into()));
    }
    let mut n = StrategyMatrix::ones(m, m);
    for x in 1..=m {
        for t in 0..=m {
            n.set(x, t, (m - t) as f64 / m as f64);
        }
    }
    Ok(n)
}

/// Uniform with replacement over `1..=m`: `N(x, t) = (1 - 1/m)^t`, with the
/// geometric remainder after `horizon` as an exact tail.
pub fn matrix_uniform_replacement(m: usize, k: usize, horizon: usize) -> Result<StrategyMatrix> {
    check_k(k)?;
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one box".into()));
    }
    let miss = 1.0 - 1.0 / m as f64;
    let mut n = StrategyMatrix::ones(m, horizon);
    let mut survive = 1.0;
    for t in 1..=horizon {
        survive *= miss;
        for x in 1..=m {
            n.set(x, t, survive);
        }
    }
    let ratio = powk(miss, k);
    let tail = if ratio == 0.0 {
        0.0
    } else {
        powk(survive, k) * ratio / (1.0 - ratio)
    };
    for x in 1..=m {
        n.set_tail(x, TimeBracket::exact(tail));
    }
    Ok(n)
}

/// Dense survival matrix of `spec` covering the prior's support.
pub fn strategy_matrix(spec: &SearcherSpec, prior: &BoxPrior) -> Result<StrategyMatrix> {
    let m = prior.support();
    match spec.kind {
        SearcherKind::Cord => Err(Error::InvalidArgument(
            "the coordinated baseline has no single-agent survival matrix".into(),
        )),
        SearcherKind::Universal | SearcherKind::Memory => {
            let model = PhaseModel::new(spec.kind, spec.k);
            let phases = (256 * model.start(m)).max(4096);
            order_only_matrix(spec.kind, m, spec.k, 2 * phases)
        }
        SearcherKind::Astar => matrix_astar(prior, spec.k),
        SearcherKind::Pareto => matrix_pareto_exponent(spec.b.expect("pareto spec has b"), spec.k, m),
        SearcherKind::Uniform => matrix_uniform(m),
        SearcherKind::UniformReplacement => {
            matrix_uniform_replacement(m, spec.k, 64 * m)
        }
    }
}

/// Exact expected discovery time `T_{p,k}` of `spec` with `spec.k` agents.
pub fn exact_time(spec: &SearcherSpec, prior: &BoxPrior) -> Result<TimeBracket> {
    let k = spec.k;
    let m = prior.support();
    let weigh = |times: &[f64]| {
        let mut acc = CompensatedSum::new();
        for x in (1..=m).rev() {
            acc.add(prior.mass(x) * times[x - 1]);
        }
        acc.value()
    };
    match spec.kind {
        SearcherKind::Cord => Ok(TimeBracket::exact(cord_time(prior, k)?)),
        SearcherKind::Astar => Ok(TimeBracket::exact(build_l(prior, k)?.expected_time())),
        SearcherKind::Universal | SearcherKind::Memory => {
            let per_box = order_only_box_times(spec.kind, k, m)?;
            let lower: Vec<f64> = per_box.iter().map(|b| b.lower).collect();
            let upper: Vec<f64> = per_box.iter().map(|b| b.upper).collect();
            Ok(TimeBracket {
                lower: weigh(&lower),
                upper: weigh(&upper),
            })
        }
        SearcherKind::Pareto => {
            let b = spec.b.expect("pareto spec has b");
            Ok(TimeBracket::exact(weigh(&pareto_box_times(b, k, m)?)))
        }
        SearcherKind::Uniform => {
            let per_box = numeric_uniform_time(m, k);
            Ok(TimeBracket::exact(per_box))
        }
        SearcherKind::UniformReplacement => {
            // 1 / (1 - (1 - 1/m)^k), with the denominator formed without cancellation.
            let hit = -(k as f64 * (-1.0 / m as f64).ln_1p()).exp_m1();
            Ok(TimeBracket::exact(1.0 / hit))
        }
    }
}

/// `m^{-k} sum_{i=0}^{m} i^k`: uniform without replacement on `m` boxes.
fn numeric_uniform_time(m: usize, k: usize) -> f64 {
    let mf = m as f64;
    (0..=m)
        .rev()
        .map(|i| powk(i as f64 / mf, k))
        .collect::<CompensatedSum>()
        .value()
}

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

/// One query of an agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Query {
    Check(usize),
    /// Nothing left to check; the query slot is spent idle.
    Idle,
}

/// Per-step categorical law of the optimal strategy.
#[derive(Debug, Clone)]
struct AstarStep {
    /// Probability of each still-unchecked previously active box.
    old_each: f64,
    /// Total probability of the previously active boxes.
    old_mass: f64,
    /// First newly active box; the new boxes are `new_first..=active`.
    new_first: usize,
    /// Active prefix after this step.
    active: usize,
    /// Offset of this step's new boxes in [`AstarPlan::cumulative`].
    offset: usize,
}

impl AstarStep {
    fn new_count(&self) -> usize {
        self.active + 1 - self.new_first
    }
}

/// Precomputed step laws of the optimal strategy for `t = 1..=m`.
#[derive(Debug, Clone)]
pub struct AstarPlan {
    schedule: LSchedule,
    steps: Vec<AstarStep>,
    /// Cumulative probabilities of each step's new boxes, concatenated.
    cumulative: Vec<f64>,
}

/// Tolerance on the total step probability before it is treated as drift.
pub const STEP_MASS_TOLERANCE: f64 = 1e-9;

impl AstarPlan {
    pub fn new(schedule: LSchedule) -> Result<Self> {
        let m = schedule.support();
        let mut steps = vec![AstarStep {
            old_each: 0.0,
            old_mass: 0.0,
            new_first: 1,
            active: 0,
            offset: 0,
        }];
        let mut cumulative = Vec::with_capacity(m);
        for t in 1..=m {
            let prev_ac = schedule.active_at(t - 1);
            let ac = schedule.active_at(t);
            let level = schedule.alpha_at(t);
            let old_each = if t == 1 {
                1.0
            } else {
                1.0 - level / schedule.alpha_at(t - 1)
            };
            let old_count = prev_ac + 1 - t;
            let old_mass = old_count as f64 * old_each;
            let offset = cumulative.len();
            let mut acc = CompensatedSum::new();
            for x in prev_ac + 1..=ac {
                acc.add((1.0 - level * schedule.q().get(x)).max(0.0));
                cumulative.push(acc.value());
            }
            let total = old_mass + acc.value();
            if (total - 1.0).abs() > STEP_MASS_TOLERANCE {
                return Err(Error::Internal(format!(
                    "step {t} probabilities sum to {total}"
                )));
            }
            steps.push(AstarStep {
                old_each,
                old_mass,
                new_first: prev_ac + 1,
                active: ac,
                offset,
            });
        }
        Ok(Self {
            schedule,
            steps,
            cumulative,
        })
    }

    pub fn schedule(&self) -> &LSchedule {
        &self.schedule
    }

    fn new_cumulative(&self, step: &AstarStep) -> &[f64] {
        &self.cumulative[step.offset..step.offset + step.new_count()]
    }

    /// The law of the box checked at step `t` given the previously active
    /// boxes still unchecked. Pairs are `(box, probability)`.
    pub fn step_distribution(&self, t: usize, unchecked_old: &[usize]) -> Vec<(usize, f64)> {
        let Some(step) = self.steps.get(t).filter(|_| t > 0) else {
            return Vec::new();
        };
        let mut out: Vec<(usize, f64)> = unchecked_old.iter().map(|&x| (x, step.old_each)).collect();
        let mut prev = 0.0;
        for (j, &c) in self.new_cumulative(step).iter().enumerate() {
            out.push((step.new_first + j, c - prev));
            prev = c;
        }
        out
    }
}

#[derive(Debug)]
enum PlanData {
    Cord,
    Universal,
    Memory,
    Astar(AstarPlan),
    /// Window size at step `t` for `t = 0..=M`.
    Pareto { windows: Vec<usize> },
    Uniform,
    UniformReplacement,
}

/// Read-only data shared by all agents running one strategy on one prior.
#[derive(Debug)]
pub struct SearchPlan {
    spec: SearcherSpec,
    support: usize,
    data: PlanData,
}

/// One agent's sampling state, reusable across trials through [`Searcher::reset`].
pub trait Searcher: Send {
    fn id(&self) -> usize;

    /// Queries issued since the last reset.
    fn time(&self) -> u64;

    fn reset(&mut self);

    fn next_query(&mut self, rng: &mut StreamRng) -> Query;
}

/// Receives a batch of agents of one concrete [`Searcher`] type, so hot
/// loops can be compiled per strategy.
pub trait AgentVisitor {
    type Output;

    fn visit<S: Searcher>(self, agents: Vec<S>) -> Self::Output;
}

impl SearchPlan {
    pub fn new(spec: SearcherSpec, prior: &BoxPrior) -> Result<Self> {
        let m = prior.support();
        let data = match spec.kind {
            SearcherKind::Cord => PlanData::Cord,
            SearcherKind::Universal => PlanData::Universal,
            SearcherKind::Memory => PlanData::Memory,
            SearcherKind::Astar => PlanData::Astar(AstarPlan::new(build_l(prior, spec.k)?)?),
            SearcherKind::Pareto => {
                let b = spec
                    .b
                    .ok_or_else(|| Error::InvalidArgument("pareto spec without b".into()))?;
                PlanData::Pareto {
                    windows: (0..=m).map(|t| pareto_window(b, spec.k, m, t)).collect(),
                }
            }
            SearcherKind::Uniform => PlanData::Uniform,
            SearcherKind::UniformReplacement => PlanData::UniformReplacement,
        };
        Ok(Self {
            spec,
            support: m,
            data,
        })
    }

    pub fn spec(&self) -> &SearcherSpec {
        &self.spec
    }

    pub fn support(&self) -> usize {
        self.support
    }

    pub fn astar(&self) -> Option<&AstarPlan> {
        match &self.data {
            PlanData::Astar(plan) => Some(plan),
            _ => None,
        }
    }

    /// Query count after which an exhaustive strategy has checked everything.
    pub fn exhaustion_time(&self) -> Option<u64> {
        match self.spec.kind {
            SearcherKind::Cord => Some(ceil_div(self.support, self.spec.k) as u64),
            SearcherKind::Astar | SearcherKind::Pareto | SearcherKind::Uniform => {
                Some(self.support as u64)
            }
            _ => None,
        }
    }

    /// A single agent behind dynamic dispatch.
    pub fn agent(&self, id: usize) -> Box<dyn Searcher + '_> {
        let k = self.spec.k;
        let m = self.support;
        match &self.data {
            PlanData::Cord => Box::new(CordAgent::new(id, k)),
            PlanData::Universal => Box::new(UniversalAgent::new(id, k)),
            PlanData::Memory => Box::new(MemoryAgent::new(id, k)),
            PlanData::Astar(plan) => Box::new(AstarAgent::new(id, plan)),
            PlanData::Pareto { windows } => Box::new(WindowAgent::new(id, windows, m)),
            PlanData::Uniform => Box::new(WindowAgent::new(id, &[], m)),
            PlanData::UniformReplacement => Box::new(ReplacementAgent::new(id, m)),
        }
    }

    /// Builds agents `ids` with their concrete type and hands them to `visitor`.
    pub fn visit_agents<V: AgentVisitor>(&self, ids: std::ops::RangeInclusive<usize>, visitor: V) -> V::Output {
        let k = self.spec.k;
        let m = self.support;
        match &self.data {
            PlanData::Cord => visitor.visit(ids.map(|id| CordAgent::new(id, k)).collect()),
            PlanData::Universal => visitor.visit(ids.map(|id| UniversalAgent::new(id, k)).collect()),
            PlanData::Memory => visitor.visit(ids.map(|id| MemoryAgent::new(id, k)).collect()),
            PlanData::Astar(plan) => visitor.visit(ids.map(|id| AstarAgent::new(id, plan)).collect()),
            PlanData::Pareto { windows } => {
                visitor.visit(ids.map(|id| WindowAgent::new(id, windows, m)).collect())
            }
            PlanData::Uniform => visitor.visit(ids.map(|id| WindowAgent::new(id, &[], m)).collect()),
            PlanData::UniformReplacement => {
                visitor.visit(ids.map(|id| ReplacementAgent::new(id, m)).collect())
            }
        }
    }
}

/// Boxes `1..` laid out as a permutation whose first `used` slots hold the
/// boxes checked so far. Drawing a slot from `used..window` and swapping it
/// into place picks uniformly among the unchecked boxes of the window
/// `1..=window`. Swaps are logged so a reset costs only what was used.
#[derive(Debug, Default)]
struct Permutation {
    /// Box numbers, stored narrow to keep long universal runs cache friendly.
    slots: Vec<u32>,
    /// `swaps[i]` is the slot swapped into position `i`.
    swaps: Vec<u32>,
}

impl Permutation {
    #[inline]
    fn pick(&mut self, window: usize, rng: &mut StreamRng) -> Query {
        let used = self.swaps.len();
        if used >= window {
            return Query::Idle;
        }
        while self.slots.len() < window {
            let next = u32::try_from(self.slots.len() + 1).expect("window beyond u32 range");
            self.slots.push(next);
        }
        let j = used + rng::below(rng, window - used);
        self.slots.swap(used, j);
        self.swaps.push(j as u32);
        Query::Check(self.slots[used] as usize)
    }

    fn reset(&mut self) {
        while let Some(j) = self.swaps.pop() {
            self.slots.swap(self.swaps.len(), j as usize);
        }
    }
}

#[derive(Debug)]
struct CordAgent {
    id: usize,
    k: usize,
    time: u64,
}

impl CordAgent {
    fn new(id: usize, k: usize) -> Self {
        Self { id, k, time: 0 }
    }
}

impl Searcher for CordAgent {
    fn id(&self) -> usize {
        self.id
    }

    fn time(&self) -> u64 {
        self.time
    }

    fn reset(&mut self) {
        self.time = 0;
    }

    #[inline]
    fn next_query(&mut self, _rng: &mut StreamRng) -> Query {
        let t = self.time as usize;
        self.time += 1;
        Query::Check(t * self.k + self.id)
    }
}

/// Fresh boxes from the window `1..=(k+1)i` during phase `i`.
#[derive(Debug)]
struct UniversalAgent {
    id: usize,
    k: usize,
    time: u64,
    perm: Permutation,
}

impl UniversalAgent {
    fn new(id: usize, k: usize) -> Self {
        Self {
            id,
            k,
            time: 0,
            perm: Permutation::default(),
        }
    }
}

impl Searcher for UniversalAgent {
    fn id(&self) -> usize {
        self.id
    }

    fn time(&self) -> u64 {
        self.time
    }

    fn reset(&mut self) {
        self.time = 0;
        self.perm.reset();
    }

    #[inline]
    fn next_query(&mut self, rng: &mut StreamRng) -> Query {
        self.time += 1;
        let phase = ceil_div(self.time as usize, 2);
        self.perm.pick((self.k + 1) * phase, rng)
    }
}

/// Boxes drawn with replacement from `1..=ki` during phase `i`.
#[derive(Debug)]
struct MemoryAgent {
    id: usize,
    k: usize,
    time: u64,
}

impl MemoryAgent {
    fn new(id: usize, k: usize) -> Self {
        Self { id, k, time: 0 }
    }
}

impl Searcher for MemoryAgent {
    fn id(&self) -> usize {
        self.id
    }

    fn time(&self) -> u64 {
        self.time
    }

    fn reset(&mut self) {
        self.time = 0;
    }

    #[inline]
    fn next_query(&mut self, rng: &mut StreamRng) -> Query {
        self.time += 1;
        let window = self.k * ceil_div(self.time as usize, 2);
        Query::Check(1 + rng::below(rng, window))
    }
}

/// Fresh boxes from a window given per step (pareto), or from all `m`
/// boxes when no windows are given (uniform).
#[derive(Debug)]
struct WindowAgent<'p> {
    id: usize,
    windows: &'p [usize],
    m: usize,
    time: u64,
    perm: Permutation,
}

impl<'p> WindowAgent<'p> {
    fn new(id: usize, windows: &'p [usize], m: usize) -> Self {
        Self {
            id,
            windows,
            m,
            time: 0,
            perm: Permutation::default(),
        }
    }
}

impl Searcher for WindowAgent<'_> {
    fn id(&self) -> usize {
        self.id
    }

    fn time(&self) -> u64 {
        self.time
    }

    fn reset(&mut self) {
        self.time = 0;
        self.perm.reset();
    }

    #[inline]
    fn next_query(&mut self, rng: &mut StreamRng) -> Query {
        self.time += 1;
        let window = self.windows.get(self.time as usize).copied().unwrap_or(self.m);
        self.perm.pick(window, rng)
    }
}

#[derive(Debug)]
struct ReplacementAgent {
    id: usize,
    m: usize,
    time: u64,
}

impl ReplacementAgent {
    fn new(id: usize, m: usize) -> Self {
        Self { id, m, time: 0 }
    }
}

impl Searcher for ReplacementAgent {
    fn id(&self) -> usize {
        self.id
    }

    fn time(&self) -> u64 {
        self.time
    }

    fn reset(&mut self) {
        self.time = 0;
    }

    #[inline]
    fn next_query(&mut self, rng: &mut StreamRng) -> Query {
        self.time += 1;
        Query::Check(1 + rng::below(rng, self.m))
    }
}

/// Samples the optimal strategy from its precomputed step laws.
#[derive(Debug)]
struct AstarAgent<'p> {
    id: usize,
    plan: &'p AstarPlan,
    time: u64,
    /// Previously active boxes not yet checked.
    pool: Vec<usize>,
    /// Largest box activated so far.
    window: usize,
}

impl<'p> AstarAgent<'p> {
    fn new(id: usize, plan: &'p AstarPlan) -> Self {
        Self {
            id,
            plan,
            time: 0,
            pool: Vec::new(),
            window: 0,
        }
    }
}

impl Searcher for AstarAgent<'_> {
    fn id(&self) -> usize {
        self.id
    }

    fn time(&self) -> u64 {
        self.time
    }

    fn reset(&mut self) {
        self.time = 0;
        self.pool.clear();
        self.window = 0;
    }

    #[inline]
    fn next_query(&mut self, rng: &mut StreamRng) -> Query {
        self.time += 1;
        let t = self.time as usize;
        let Some(step) = self.plan.steps.get(t) else {
            return Query::Idle;
        };
        let u: f64 = rng.random();
        let fresh = self.plan.new_cumulative(step);
        let take_old = !self.pool.is_empty() && (u < step.old_mass || fresh.is_empty());
        let chosen = if take_old {
            let i = rng::below(rng, self.pool.len());
            self.pool.swap_remove(i)
        } else if fresh.is_empty() {
            return Query::Idle;
        } else {
            let v = u - step.old_mass;
            let j = fresh.partition_point(|&c| c <= v).min(fresh.len() - 1);
            step.new_first + j
        };
        let active = step.active;
        while self.window < active {
            self.window += 1;
            if self.window != chosen {
                self.pool.push(self.window);
            }
        }
        Query::Check(chosen)
    }
}

/// One agent's sequence of checks, grouped by step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSequence {
    pub agent_id: usize,
    pub seed: u64,
    /// `steps[t - 1]` lists the boxes checked at step `t` (empty when idle).
    pub steps: Vec<Vec<usize>>,
}

/// Records `steps` steps of agent `agent_id` on the stream `(seed, 0, agent_id)`.
pub fn trace(
    spec: SearcherSpec,
    prior: &BoxPrior,
    agent_id: usize,
    seed: u64,
    steps: usize,
) -> Result<CheckSequence> {
    if agent_id == 0 {
        return Err(Error::InvalidArgument("agent ids start at 1".into()));
    }
    if spec.kind == SearcherKind::Cord && agent_id > spec.k {
        return Err(Error::InvalidArgument(format!(
            "agent id {agent_id} outside 1..={}",
            spec.k
        )));
    }
    let plan = SearchPlan::new(spec, prior)?;
    let mut agent = plan.agent(agent_id);
    let mut rng = rng::stream(seed, 0, agent_id as u64);
    let per_step = spec.kind.queries_per_step();
    let steps = (0..steps)
        .map(|_| {
            (0..per_step)
                .filter_map(|_| match agent.next_query(&mut rng) {
                    Query::Check(x) => Some(x),
                    Query::Idle => None,
                })
                .collect()
        })
        .collect();
    Ok(CheckSequence {
        agent_id,
        seed,
        steps,
    })
}
