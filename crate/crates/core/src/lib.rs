//! Expected discovery times for k non-communicating agents searching boxes
//! under a known prior.
//!
//! The crate covers prior construction, survival matrices and their expected
//! times, the optimal strategy and its competitors as exact evaluators and
//! as samplers, a seeded Monte Carlo engine with crash faults, and closed
//! forms for the continuous Pareto problem.

pub mod continuum;
pub mod distributions;
pub mod error;
pub mod montecarlo;
pub mod numeric;
pub mod rng;
pub mod searchers;
pub mod strategy;
pub mod verify;

pub use continuum::{
    discrete_waterfill, gamma_product_check, opt_value, pareto_ratio_limit, u_opt, ContinuumParams,
};
pub use distributions::{make_custom, make_pareto, make_uniform, parse_prior_spec, BoxPrior, PriorKind};
pub use error::{Error, Result};
pub use montecarlo::{run, run_with_faults, Crash, SimConfig, SimOutcome, TrialRecord};
pub use searchers::{exact_time, trace, CheckSequence, SearcherKind, SearcherSpec};
pub use strategy::{build_l, cord_time, expected_time, validate, LSchedule, StrategyMatrix, TimeBracket};
