//! The continuous Pareto problem and its finite counterparts.
//!
//! With prior density proportional to `x^{-b}` on `(0, 1]`, the optimal
//! survival function has a closed form `OPT(x, t)` whose cost `U(OPT)`
//! governs the limiting ratio between the pareto strategy and the
//! coordinated baseline.

use serde::Serialize;

use crate::distributions::make_pareto;
use crate::error::{Error, Result};
use crate::numeric::powk;
use crate::searchers::{exact_time, SearcherKind, SearcherSpec};
use crate::strategy::cord_time;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuumParams {
    b: f64,
    k: usize,
    sigma: f64,
}

impl ContinuumParams {
    /// Requires `0 < b <= 1` and `k >= 2`.
    pub fn new(b: f64, k: usize) -> Result<Self> {
        if !(b > 0.0 && b <= 1.0) {
            return Err(Error::InvalidArgument(format!("need 0 < b <= 1, got {b}")));
        }
        if k < 2 {
            return Err(Error::InvalidArgument(format!("need k >= 2, got {k}")));
        }
        Ok(Self {
            b,
            k,
            sigma: b / (b + (k - 1) as f64),
        })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Exponent `b / (k - 1)` of the water level.
    fn beta(&self) -> f64 {
        self.b / (self.k - 1) as f64
    }

    /// Fraction of `(0, 1]` fully explored at time `t`: `min(1, t / sigma)`.
    pub fn gamma(&self, t: f64) -> f64 {
        (t / self.sigma).min(1.0)
    }

    /// Water level: `(sigma/t)^{b/(k-1)}` before `sigma`, `(1-t)/(1-sigma)` after.
    pub fn alpha(&self, t: f64) -> f64 {
        if t < self.sigma {
            (self.sigma / t).powf(self.beta())
        } else {
            ((1.0 - t) / (1.0 - self.sigma)).max(0.0)
        }
    }
}

/// `OPT(x, t)` for `0 < x <= 1` and `t >= 0`.
pub fn opt_value(x: f64, t: f64, params: &ContinuumParams) -> Result<f64> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::InvalidArgument(format!("need 0 < x <= 1, got {x}")));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("need t >= 0, got {t}")));
    }
    Ok(opt_unchecked(x, t, params))
}

fn opt_unchecked(x: f64, t: f64, params: &ContinuumParams) -> f64 {
    let s = params.sigma;
    if t <= s * x {
        1.0
    } else if t <= s {
        (s * x / t).powf(params.beta())
    } else if t <= 1.0 {
        (1.0 - t) / (1.0 - s) * x.powf(params.beta())
    } else {
        0.0
    }
}

/// `U(OPT) = sigma (2 - sigma)/(2 - b) + (1 - sigma)^2/(k + 1)`.
pub fn u_opt(params: &ContinuumParams) -> f64 {
    let s = params.sigma;
    s * (2.0 - s) / (2.0 - params.b) + (1.0 - s) * (1.0 - s) / (params.k as f64 + 1.0)
}

/// `U(OPT)` as `int_0^1 int_0^1 x^{-b} OPT(x, t)^k dx dt`, by nested
/// tanh-sinh quadrature split at the breakpoints `x = t/sigma` and `t = sigma`.
pub fn u_opt_quadrature(params: &ContinuumParams, tolerance: f64) -> f64 {
    let s = params.sigma;
    let b = params.b;
    let k = params.k;
    let cost = move |x: f64, t: f64| x.powf(-b) * powk(opt_unchecked(x, t, params), k);
    let inner = |t: f64| {
        let split = (t / s).min(1.0);
        let mut total = quadrature::integrate(|x| cost(x, t), 0.0, split, tolerance).integral;
        if split < 1.0 {
            total += quadrature::integrate(|x| cost(x, t), split, 1.0, tolerance).integral;
        }
        total
    };
    quadrature::integrate(inner, 0.0, s, tolerance).integral
        + quadrature::integrate(inner, s, 1.0, tolerance).integral
}

/// Limiting ratio `k (2 - b) U(OPT)` of the pareto strategy to the
/// coordinated baseline.
pub fn pareto_ratio_limit(params: &ContinuumParams) -> f64 {
    params.k as f64 * (2.0 - params.b) * u_opt(params)
}

/// The same limit written as `k sigma (2 - sigma) + k (2 - b)(1 - sigma)^2/(k + 1)`.
pub fn pareto_ratio_expanded(params: &ContinuumParams) -> f64 {
    let k = params.k as f64;
    let s = params.sigma;
    k * s * (2.0 - s) + k * (2.0 - params.b) * (1.0 - s) * (1.0 - s) / (k + 1.0)
}

/// Exact `T(pareto) / T(cord)` on the Pareto prior with `m` boxes.
pub fn finite_pareto_ratio(b: f64, k: usize, m: usize) -> Result<f64> {
    let prior = make_pareto(b, m)?;
    let spec = SearcherSpec::new(SearcherKind::Pareto, k, &prior)?;
    Ok(exact_time(&spec, &prior)?.midpoint() / cord_time(&prior, k)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `prod_{i=a}^{b} i/(i + phi) <= (a/b)^phi`, evaluated in log space.
pub fn gamma_product_check(a: u64, b: u64, phi: f64) -> Result<GammaCheck> {
    if !(phi > 0.0 && phi <= 1.0) {
        return Err(Error::InvalidArgument(format!("need 0 < phi <= 1, got {phi}")));
    }
    if a == 0 || b < a {
        return Err(Error::InvalidArgument(format!("need 1 <= a <= b, got a={a}, b={b}")));
    }
    let log_lhs: f64 = (a..=b).map(|i| -(phi / i as f64).ln_1p()).sum();
    let log_rhs = phi * (a as f64 / b as f64).ln();
    Ok(GammaCheck {
        lhs: log_lhs.exp(),
        rhs: log_rhs.exp(),
        holds: log_lhs <= log_rhs + 1e-12f64.ln_1p(),
    })
}

/// Minimizes `sum c(x) f(x)^k` over `f` in `[0, 1]` subject to
/// `sum (1 - f(x)) <= budget`.
///
/// The minimizer is `f = min(1, alpha c^{-1/(k-1)})` for the smallest
/// feasible `alpha`. Boxes are sorted by `c` descending and each prefix is
/// tried as the set of partially checked boxes until the level it implies
/// is consistent with the next box staying at 1.
pub fn discrete_waterfill(c: &[f64], budget: f64, k: usize) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need k >= 2, got {k}")));
    }
    if !(budget >= 0.0) {
        return Err(Error::InvalidArgument(format!("need budget >= 0, got {budget}")));
    }
    if let Some(bad) = c.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!("weights must be finite and >= 0, got {bad}")));
    }
    let mut f = vec![1.0; c.len()];
    let mut order: Vec<usize> = (0..c.len()).filter(|&i| c[i] > 0.0).collect();
    order.sort_by(|&i, &j| c[j].total_cmp(&c[i]));
    if budget == 0.0 || order.is_empty() {
        return Ok(f);
    }
    let exponent = -1.0 / (k - 1) as f64;
    let w: Vec<f64> = order.iter().map(|&i| c[i].powf(exponent)).collect();
    if budget >= order.len() as f64 {
        order.iter().for_each(|&i| f[i] = 0.0);
        return Ok(f);
    }
    let mut prefix = 0.0;
    for n in 1..=order.len() {
        prefix += w[n - 1];
        if (n as f64) <= budget {
            continue;
        }
        let alpha = (n as f64 - budget) / prefix;
        let closes = n == order.len() || alpha * w[n] >= 1.0 - 1e-12;
        if closes {
            for (j, &i) in order.iter().enumerate().take(n) {
                f[i] = (alpha * w[j]).min(1.0);
            }
            return Ok(f);
        }
    }
    Err(Error::Internal("water level sweep found no consistent prefix".into()))
}
