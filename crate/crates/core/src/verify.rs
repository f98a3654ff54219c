//! Named numerical checks, grouped into suites.
//!
//! Each check reports what it measured against what it requires, so a
//! failing run says by how much it failed.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::continuum::{
    discrete_waterfill, finite_pareto_ratio, gamma_product_check, pareto_ratio_expanded,
    pareto_ratio_limit, u_opt, u_opt_quadrature, ContinuumParams,
};
use crate::distributions::{make_custom, make_pareto, make_uniform, BoxPrior};
use crate::error::{Error, Result};
use crate::montecarlo::{self, Crash, SimConfig};
use crate::numeric::{ceil_div, powk, CompensatedSum};
use crate::searchers::{
    exact_time, matrix_pareto_exponent, order_only_box_times, strategy_matrix, SearcherKind,
    SearcherSpec,
};
use crate::strategy::{build_l, cord_time, expected_time, validate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Bounds,
    Optimality,
    Pareto,
    Gamma,
    Montecarlo,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 6] = ["bounds", "optimality", "pareto", "gamma", "montecarlo", "all"];
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "bounds" => Suite::Bounds,
            "optimality" => Suite::Optimality,
            "pareto" => Suite::Pareto,
            "gamma" => Suite::Gamma,
            "montecarlo" => Suite::Montecarlo,
            "all" => Suite::All,
            _ => return Err(Error::InvalidArgument(format!("unknown suite `{s}`"))),
        })
    }
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub required: String,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, measured: f64, required: impl Into<String>, passed: bool) -> Self {
        Self {
            name: name.into(),
            measured,
            required: required.into(),
            passed,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: measured {} (required {})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.required
        )
    }
}

/// Knobs shared by the suites.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyOptions {
    /// Pareto exponent for the pareto suite.
    pub b: f64,
    pub k: usize,
    /// Largest prior size for the pareto convergence run.
    pub m: usize,
    /// Relative distance from the limit allowed at the largest `m`.
    pub ratio_tolerance: f64,
    pub trials: u64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            b: 0.5,
            k: 2,
            m: 100_000,
            ratio_tolerance: 0.05,
            trials: 1_000_000,
            seed: 20_240_601,
        }
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<Vec<Check>> {
    match suite {
        Suite::Bounds => bounds(),
        Suite::Optimality => optimality(100, opts.seed),
        Suite::Pareto => {
            let mut checks = pareto_convergence(opts.b, opts.k, opts.m, opts.ratio_tolerance)?;
            checks.extend(continuum_identities()?);
            Ok(checks)
        }
        Suite::Gamma => gamma_grid(),
        Suite::Montecarlo => {
            let mut checks = montecarlo_agreement(opts.trials, opts.seed)?;
            checks.push(robustness(opts.trials.min(100_000), opts.seed)?);
            checks.push(monotone_in_k(opts.trials.min(100_000), opts.seed)?);
            Ok(checks)
        }
        Suite::All => {
            let mut checks = Vec::new();
            for s in [Suite::Bounds, Suite::Optimality, Suite::Pareto, Suite::Gamma, Suite::Montecarlo] {
                checks.extend(run_suite(s, opts)?);
            }
            Ok(checks)
        }
    }
}

/// The prior `(1/2, 1/3, 1/6)` used throughout as the worked example.
pub fn example_prior() -> BoxPrior {
    make_custom(&[0.5, 1.0 / 3.0, 1.0 / 6.0]).expect("valid prior")
}

/// Named priors used by the agreement and bound checks.
pub fn golden_priors() -> Vec<(String, BoxPrior)> {
    let mut out = vec![("example3".to_string(), example_prior())];
    for m in [3, 10, 50] {
        out.push((format!("uniform:{m}"), make_uniform(m).expect("valid prior")));
    }
    out.push(("pareto:0.5,1000".to_string(), make_pareto(0.5, 1000).expect("valid prior")));
    out
}

/// Per-box bounds for the order-only strategies, and the resulting
/// prior-level bound against the coordinated baseline.
pub fn bounds() -> Result<Vec<Check>> {
    const X_MAX: usize = 10_000;
    let mut checks = Vec::new();
    for k in [2, 3, 5, 10] {
        let kf = k as f64;
        let slope = 4.0 * kf / ((kf + 1.0) * (kf + 1.0));
        let universal = order_only_box_times(SearcherKind::Universal, k, X_MAX)?;
        let slack = universal
            .iter()
            .enumerate()
            .map(|(i, t)| 10.0 + slope * (i + 1) as f64 - t.upper)
            .fold(f64::INFINITY, f64::min);
        checks.push(Check::new(
            format!("universal per-box bound k={k}"),
            slack,
            "min slack >= 0",
            slack >= 0.0,
        ));

        let memory = order_only_box_times(SearcherKind::Memory, k, X_MAX)?;
        let slack = memory
            .iter()
            .enumerate()
            .map(|(i, t)| 2.0 + 4.0 * ceil_div(i + 1, k) as f64 - t.upper)
            .fold(f64::INFINITY, f64::min);
        checks.push(Check::new(
            format!("memory per-box bound k={k}"),
            slack,
            "min slack >= 0",
            slack >= 0.0,
        ));

        let factor = 4.0 * powk(kf / (kf + 1.0), 2);
        for (name, prior) in golden_priors() {
            let t = exact_time(&SearcherSpec::new(SearcherKind::Universal, k, &prior)?, &prior)?;
            let bound = 10.0 + factor * cord_time(&prior, k)?;
            checks.push(Check::new(
                format!("universal vs cord k={k} {name}"),
                t.upper,
                format!("<= {bound}"),
                t.upper <= bound,
            ));
        }
    }
    Ok(checks)
}

/// A random non-increasing prior on at most `max_boxes` boxes, occasionally
/// with ties and trailing zeros.
pub fn random_prior<R: Rng>(rng: &mut R, max_boxes: usize) -> BoxPrior {
    let m = rng.random_range(1..=max_boxes);
    let mut w: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    if rng.random_bool(0.2) {
        let i = rng.random_range(0..m);
        let j = rng.random_range(0..m);
        w[i] = w[j];
    }
    w.sort_by(|a, b| b.total_cmp(a));
    if m > 2 && rng.random_bool(0.1) {
        w[m - 1] = 0.0;
    }
    if w[0] == 0.0 {
        w[0] = 1.0;
    }
    make_custom(&w).expect("valid random prior")
}

/// `L` beats every competitor on random priors, and each column of `L`
/// solves the water-filling problem for its budget.
pub fn optimality(priors: usize, seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_fill = 0.0f64;
    let mut invalid = 0usize;
    for _ in 0..priors {
        let prior = random_prior(&mut rng, 20);
        for k in [2, 3] {
            let schedule = build_l(&prior, k)?;
            let best = schedule.expected_time();
            let mut rivals = vec![
                strategy_matrix(&SearcherSpec::new(SearcherKind::Universal, k, &prior)?, &prior)?,
                strategy_matrix(&SearcherSpec::new(SearcherKind::Memory, k, &prior)?, &prior)?,
                strategy_matrix(&SearcherSpec::new(SearcherKind::Uniform, k, &prior)?, &prior)?,
            ];
            // The pareto window rule yields a valid matrix on any prior.
            rivals.push(matrix_pareto_exponent(0.5, k, prior.support())?);
            for n in &rivals {
                invalid += validate(n).len();
                let t = expected_time(n, &prior, k)?;
                worst_gap = worst_gap.max(best - t.lower);
            }
            let l = schedule.matrix();
            for t in 0..=l.horizon() {
                let f = discrete_waterfill(prior.masses(), t as f64, k)?;
                for (x, v) in f.iter().enumerate() {
                    worst_fill = worst_fill.max((v - l.get(x + 1, t)).abs());
                }
            }
        }
    }
    Ok(vec![
        Check::new(
            "competitor matrices valid",
            invalid as f64,
            "0 violations",
            invalid == 0,
        ),
        Check::new(
            format!("L optimal on {priors} random priors"),
            worst_gap,
            "T(L) - T(N) <= 1e-9",
            worst_gap <= 1e-9,
        ),
        Check::new(
            "L columns equal water-filling",
            worst_fill,
            "<= 1e-10",
            worst_fill <= 1e-10,
        ),
    ])
}

/// Exact finite-`M` ratios approach the limit monotonically and end within
/// `tolerance` of it.
pub fn pareto_convergence(b: f64, k: usize, m_max: usize, tolerance: f64) -> Result<Vec<Check>> {
    let limit = pareto_ratio_limit(&ContinuumParams::new(b, k)?);
    let mut sizes: Vec<usize> = [1_000, 10_000, 100_000].into_iter().filter(|&m| m < m_max).collect();
    sizes.push(m_max);
    let ratios = sizes
        .iter()
        .map(|&m| finite_pareto_ratio(b, k, m))
        .collect::<Result<Vec<_>>>()?;
    let gaps: Vec<f64> = ratios.iter().map(|r| (r - limit).abs()).collect();
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    let last = *gaps.last().expect("at least one size") / limit;
    let mut checks: Vec<Check> = sizes
        .iter()
        .zip(&ratios)
        .map(|(m, r)| Check::new(format!("pareto ratio b={b} k={k} M={m}"), *r, format!("-> {limit}"), true))
        .collect();
    checks.push(Check::new(
        format!("pareto ratio approaches limit b={b} k={k}"),
        gaps.last().copied().unwrap_or(0.0),
        "distance to limit decreasing in M",
        monotone,
    ));
    checks.push(Check::new(
        format!("pareto ratio within {tolerance} of limit at M={m_max}"),
        last,
        format!("<= {tolerance}"),
        last <= tolerance,
    ));
    Ok(checks)
}

/// Closed form of `U(OPT)` against quadrature, and the two forms of the
/// limiting ratio against each other, on a grid of `(b, k)`.
pub fn continuum_identities() -> Result<Vec<Check>> {
    let mut worst_quad = 0.0f64;
    let mut worst_identity = 0.0f64;
    for bi in 1..=9 {
        let b = bi as f64 / 10.0;
        for k in [2, 3, 5, 10] {
            let p = ContinuumParams::new(b, k)?;
            let closed = u_opt(&p);
            let quad = u_opt_quadrature(&p, 1e-11);
            worst_quad = worst_quad.max(((quad - closed) / closed).abs());
            worst_identity = worst_identity.max((pareto_ratio_limit(&p) - pareto_ratio_expanded(&p)).abs());
        }
    }
    let five_thirds = pareto_ratio_limit(&ContinuumParams::new(1.0, 2)?);
    Ok(vec![
        Check::new("U(OPT) closed form vs quadrature", worst_quad, "relative <= 1e-6", worst_quad <= 1e-6),
        Check::new("ratio limit identity", worst_identity, "<= 1e-12", worst_identity <= 1e-12),
        Check::new(
            "ratio limit at b=1 k=2",
            five_thirds,
            "5/3 within 1e-12",
            (five_thirds - 5.0 / 3.0).abs() <= 1e-12,
        ),
    ])
}

/// The Gamma product inequality on `1 <= a <= b <= 200`, `phi = 0.1..1.0`.
pub fn gamma_grid() -> Result<Vec<Check>> {
    let mut violations = 0usize;
    let mut worst = f64::NEG_INFINITY;
    let mut cases = 0usize;
    for pi in 1..=10 {
        let phi = pi as f64 / 10.0;
        for a in 1..=200u64 {
            for b in a..=200u64 {
                let g = gamma_product_check(a, b, phi)?;
                cases += 1;
                worst = worst.max(g.lhs / g.rhs);
                if !g.holds {
                    violations += 1;
                }
            }
        }
    }
    Ok(vec![Check::new(
        format!("gamma product inequality over {cases} cases"),
        violations as f64,
        format!("0 violations (max lhs/rhs {worst})"),
        violations == 0,
    )])
}

/// Strategies meaningful on `prior`: pareto only on Pareto priors.
pub fn strategies_for(prior: &BoxPrior) -> Vec<SearcherKind> {
    SearcherKind::ALL
        .into_iter()
        .filter(|&kind| kind != SearcherKind::Pareto || prior.pareto_exponent().is_some_and(|b| b < 1.0))
        .collect()
}

/// Simulated means agree with the exact times within four standard errors.
pub fn montecarlo_agreement(trials: u64, seed: u64) -> Result<Vec<Check>> {
    let k = 2;
    let mut checks = Vec::new();
    for (name, prior) in golden_priors() {
        for kind in strategies_for(&prior) {
            let config = SimConfig::new(prior.clone(), kind, k, trials, seed)?;
            let exact = exact_time(&config.spec, &prior)?.midpoint();
            let out = montecarlo::run(&config)?;
            let z = if out.stderr > 0.0 {
                (out.mean - exact).abs() / out.stderr
            } else if out.mean == exact {
                0.0
            } else {
                f64::INFINITY
            };
            // A deterministic strategy on a deterministic treasure has zero spread.
            let passed = z <= 4.0 || (out.mean - exact).abs() <= 1e-12 * exact;
            checks.push(Check::new(
                format!("{kind} on {name}: mean {} vs exact {exact}", out.mean),
                z,
                "|mean - exact| <= 4 stderr",
                passed,
            ));
        }
    }
    Ok(checks)
}

/// Three agents with one crashed at the start, running `astar` tuned for
/// two, are no slower than two clean agents.
pub fn robustness(trials: u64, seed: u64) -> Result<Check> {
    let prior = make_uniform(50)?;
    let mut config = SimConfig::new(prior.clone(), SearcherKind::Astar, 2, trials, seed)?;
    config.k = 3;
    config.crashes = vec![Crash { agent: 1, time: 1 }];
    let cmp = montecarlo::run_with_faults(&config)?;
    Ok(Check::new(
        format!(
            "crash robustness: faulty mean {} vs clean mean {}",
            cmp.faulty.mean, cmp.clean.mean
        ),
        cmp.faulty.mean - cmp.clean.mean,
        format!("<= 4 pooled stderr = {}", 4.0 * cmp.pooled_stderr),
        cmp.holds,
    ))
}

/// More agents find the treasure sooner.
pub fn monotone_in_k(trials: u64, seed: u64) -> Result<Check> {
    let prior = make_uniform(50)?;
    let two = montecarlo::run(&SimConfig::new(prior.clone(), SearcherKind::Astar, 2, trials, seed)?)?;
    let four = montecarlo::run(&SimConfig::new(prior, SearcherKind::Astar, 4, trials, seed)?)?;
    Ok(Check::new(
        "astar on uniform:50 faster with k=4 than k=2",
        four.mean - two.mean,
        "< 0",
        four.mean < two.mean,
    ))
}

/// `M^{-k} sum_{i=0}^{M} i^k`, the optimal time on a uniform prior.
pub fn uniform_closed_form(m: usize, k: usize) -> f64 {
    let mut acc = CompensatedSum::new();
    for i in 0..=m {
        acc.add(powk(i as f64, k));
    }
    acc.value() / powk(m as f64, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_parse() {
        for name in Suite::NAMES {
            assert!(name.parse::<Suite>().is_ok());
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn uniform_closed_form_small() {
        assert!((uniform_closed_form(3, 2) - 14.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn small_optimality_run() {
        let checks = optimality(5, 1).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
    }
}
