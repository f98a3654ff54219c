//! Functional view of single-agent strategies.
//!
//! A strategy is summarized by its survival matrix `N(x, t)`: the probability
//! that one agent has not checked box `x` after `t` queries. With `k`
//! independent agents the treasure in box `x` is still hidden at time `t`
//! with probability `N(x, t)^k`, so the expected discovery time is
//! `sum_x p(x) sum_t N(x, t)^k`.

use serde::Serialize;

use crate::distributions::{q_weights, BoxPrior, QWeights};
use crate::error::{Error, Result};
use crate::numeric::{self, ceil_div, powk, CompensatedSum};

/// Slack allowed on the column requirement `C_N(t) <= t`.
pub const COLUMN_TOLERANCE: f64 = 1e-9;

/// Lower and upper bracket on an expected time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeBracket {
    pub lower: f64,
    pub upper: f64,
}

impl TimeBracket {
    pub fn exact(value: f64) -> Self {
        Self {
            lower: value,
            upper: value,
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn scale(self, c: f64) -> Self {
        Self {
            lower: self.lower * c,
            upper: self.upper * c,
        }
    }
}

/// Dense survival matrix over boxes `1..=boxes` and times `0..=horizon`.
///
/// Contributions after the horizon are kept per box as a bracket on
/// `sum_{t > H} N(x,t)^k`; under a prior they fold into
/// [`StrategyMatrix::tail_bound`].
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyMatrix {
    boxes: usize,
    horizon: usize,
    data: Vec<f64>,
    tails: Vec<TimeBracket>,
}

impl StrategyMatrix {
    /// Builds a matrix from one row per box, each of length `horizon + 1`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let boxes = rows.len();
        if boxes == 0 {
            return Err(Error::InvalidArgument("matrix needs at least one box".into()));
        }
        let width = rows[0].len();
        if width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidArgument("ragged or empty matrix rows".into()));
        }
        Ok(Self {
            boxes,
            horizon: width - 1,
            data: rows.into_iter().flatten().collect(),
            tails: vec![TimeBracket::exact(0.0); boxes],
        })
    }

    /// All-ones matrix (nothing ever checked) to be filled in by generators.
    pub(crate) fn ones(boxes: usize, horizon: usize) -> Self {
        Self {
            boxes,
            horizon,
            data: vec![1.0; boxes * (horizon + 1)],
            tails: vec![TimeBracket::exact(0.0); boxes],
        }
    }

    /// Sets the truncated-contribution bracket of box `x`.
    pub fn set_tail(&mut self, x: usize, tail: TimeBracket) {
        self.tails[x - 1] = tail;
    }

    pub fn tail(&self, x: usize) -> TimeBracket {
        self.tails[x - 1]
    }

    /// Upper bound on `sum_{t > H} sum_x p(x) N(x,t)^k`.
    pub fn tail_bound(&self, prior: &BoxPrior) -> f64 {
        numeric::sum((1..=self.boxes.min(prior.support())).map(|x| prior.mass(x) * self.tail(x).upper))
    }

    /// Lower bound matching [`StrategyMatrix::tail_bound`].
    pub fn tail_floor(&self, prior: &BoxPrior) -> f64 {
        numeric::sum((1..=self.boxes.min(prior.support())).map(|x| prior.mass(x) * self.tail(x).lower))
    }

    pub fn boxes(&self) -> usize {
        self.boxes
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `N(x, t)` for 1-based `x`.
    #[inline]
    pub fn get(&self, x: usize, t: usize) -> f64 {
        self.data[(x - 1) * (self.horizon + 1) + t]
    }

    #[inline]
    pub(crate) fn set(&mut self, x: usize, t: usize, value: f64) {
        let w = self.horizon + 1;
        self.data[(x - 1) * w + t] = value;
    }

    pub fn row(&self, x: usize) -> &[f64] {
        let w = self.horizon + 1;
        &self.data[(x - 1) * w..x * w]
    }

    /// Column requirement `C_N(t) = sum_x (1 - N(x, t))`.
    pub fn column_load(&self, t: usize) -> f64 {
        numeric::sum((1..=self.boxes).map(|x| 1.0 - self.get(x, t)))
    }
}

/// A broken invariant of a survival matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    /// `N(x, t)` outside `[0, 1]`.
    Range { x: usize, t: usize, value: f64 },
    /// `N(x, 0) != 1`.
    Initial { x: usize, value: f64 },
    /// `N(x, t) > N(x, t - 1)`.
    Increasing { x: usize, t: usize, increase: f64 },
    /// `C_N(t) > t`.
    Column { t: usize, excess: f64 },
}

/// Lists every invariant violation; empty iff the matrix is a valid function.
pub fn validate(n: &StrategyMatrix) -> Vec<Violation> {
    let mut out = Vec::new();
    for x in 1..=n.boxes() {
        let row = n.row(x);
        if row[0] != 1.0 {
            out.push(Violation::Initial { x, value: row[0] });
        }
        for (t, &v) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                out.push(Violation::Range { x, t, value: v });
            }
            if t > 0 && v > row[t - 1] + 1e-15 {
                out.push(Violation::Increasing {
                    x,
                    t,
                    increase: v - row[t - 1],
                });
            }
        }
    }
    for t in 0..=n.horizon() {
        let excess = n.column_load(t) - t as f64;
        if excess > COLUMN_TOLERANCE {
            out.push(Violation::Column { t, excess });
        }
    }
    out
}

/// `T_{p,k}(N)` bracketed by the matrix's tail bounds.
pub fn expected_time(n: &StrategyMatrix, prior: &BoxPrior, k: usize) -> Result<TimeBracket> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need k >= 2, got {k}")));
    }
    let support = prior.support();
    if n.boxes() < support {
        return Err(Error::InvalidArgument(format!(
            "matrix covers {} boxes but the prior has support {support}",
            n.boxes()
        )));
    }
    if let Some(x) =
        (1..=support).find(|&x| n.get(x, n.horizon()) > 0.0 && n.tail(x).upper == 0.0)
    {
        return Err(Error::IncompleteMatrix {
            horizon: n.horizon(),
            box_index: x,
        });
    }
    let mut total = CompensatedSum::new();
    for t in 0..=n.horizon() {
        let column: CompensatedSum = (1..=support)
            .map(|x| prior.mass(x) * powk(n.get(x, t), k))
            .collect();
        total.add(column.value());
    }
    let partial = total.value();
    Ok(TimeBracket {
        lower: partial + n.tail_floor(prior),
        upper: partial + n.tail_bound(prior),
    })
}

/// Expected time of the optimal coordinated baseline: `sum_x p(x) ceil(x/k)`.
pub fn cord_time(prior: &BoxPrior, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need k >= 2, got {k}")));
    }
    Ok(numeric::sum(
        prior
            .masses()
            .iter()
            .enumerate()
            .rev()
            .map(|(i, &p)| p * ceil_div(i + 1, k) as f64),
    ))
}

/// The water levels and active prefixes defining the entrywise-optimal valid
/// function `L(x, t) = min(1, alpha(t) q(x))`.
#[derive(Debug, Clone)]
pub struct LSchedule {
    k: usize,
    q: QWeights,
    masses: Vec<f64>,
    /// `alpha[t]` for `t = 0..=m`; `alpha[0]` is infinite.
    alpha: Vec<f64>,
    /// `active[t] = ac(t)`, the active prefix length.
    active: Vec<usize>,
    /// Prefix sums of `q` over the support, `prefix_q[y] = sum_{x <= y} q(x)`.
    prefix_q: Vec<f64>,
}

/// Computes `alpha(t)` and `ac(t)` for every `t <= m` by the active-prefix scan.
pub fn build_l(prior: &BoxPrior, k: usize) -> Result<LSchedule> {
    let q = q_weights(prior, k)?;
    let m = prior.support();
    let qv = q.values();

    let mut prefix_q = Vec::with_capacity(m + 1);
    let mut acc = CompensatedSum::new();
    prefix_q.push(0.0);
    for &v in &qv[..m] {
        acc.add(v);
        prefix_q.push(acc.value());
    }

    let mut alpha = vec![f64::INFINITY];
    let mut active = vec![0usize];
    for t in 1..=m {
        let tf = t as f64;
        // sum_{x <= y} (1 - q(x)/q(y)) is non-decreasing in y, so resume the
        // scan where the previous step stopped. Past the support it equals m.
        let mut y = active[t - 1] + 1;
        let ac = loop {
            if y > m {
                break m;
            }
            let spread = y as f64 - prefix_q[y] / qv[y - 1];
            // Exact ties keep extending the active set.
            if spread > tf + 1e-12 * tf.max(1.0) {
                break y - 1;
            }
            y += 1;
        };
        if t < m && ac <= t {
            return Err(Error::ScanExhausted { t, support: m });
        }
        let level = if t >= m {
            0.0
        } else {
            (ac - t) as f64 / prefix_q[ac]
        };
        alpha.push(level);
        active.push(ac);
    }

    Ok(LSchedule {
        k,
        q,
        masses: prior.masses().to_vec(),
        alpha,
        active,
        prefix_q,
    })
}

impl LSchedule {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Support size `m`; the schedule covers `t = 0..=m`.
    pub fn support(&self) -> usize {
        self.alpha.len() - 1
    }

    pub fn boxes(&self) -> usize {
        self.masses.len()
    }

    pub fn q(&self) -> &QWeights {
        &self.q
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// Water level at time `t` (zero from `m` on).
    pub fn alpha_at(&self, t: usize) -> f64 {
        self.alpha.get(t).copied().unwrap_or(0.0)
    }

    /// Active prefix at time `t` (the whole support from `m` on).
    pub fn active_at(&self, t: usize) -> usize {
        self.active.get(t).copied().unwrap_or(self.support())
    }

    /// `L(x, t)` for 1-based `x`.
    pub fn value(&self, x: usize, t: usize) -> f64 {
        if x > self.support() {
            return 1.0;
        }
        if t == 0 {
            return 1.0;
        }
        if t >= self.support() {
            return 0.0;
        }
        (self.alpha[t] * self.q.get(x)).min(1.0)
    }

    /// `sum_{x <= y} q(x)`.
    pub fn prefix_q(&self, y: usize) -> f64 {
        self.prefix_q[y]
    }

    /// Materializes `L` as a dense matrix over all `M` boxes and `t = 0..=m`.
    pub fn matrix(&self) -> StrategyMatrix {
        let m = self.support();
        let mut n = StrategyMatrix::ones(self.boxes(), m);
        for x in 1..=self.boxes() {
            for t in 0..=m {
                n.set(x, t, self.value(x, t));
            }
        }
        n
    }

    /// Exact `T_{p,k}(L)` without materializing the matrix.
    ///
    /// Uses `p(x) q(x)^k = q(x)`, so the active part of column `t` costs
    /// `alpha(t)^k * sum_{x <= ac(t)} q(x)` and inactive boxes contribute their mass.
    pub fn expected_time(&self) -> f64 {
        let m = self.support();
        let mut tail_mass = vec![0.0; m + 2];
        let mut acc = CompensatedSum::new();
        for x in (1..=m).rev() {
            acc.add(self.masses[x - 1]);
            tail_mass[x] = acc.value();
        }
        let mut total = CompensatedSum::new();
        total.add(1.0);
        for t in 1..m {
            let ac = self.active[t];
            total.add(powk(self.alpha[t], self.k) * self.prefix_q[ac]);
            total.add(tail_mass[ac + 1]);
        }
        total.value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{make_custom, make_uniform};

    fn paper_prior() -> BoxPrior {
        make_custom(&[0.5, 1.0 / 3.0, 1.0 / 6.0]).unwrap()
    }

    #[test]
    fn three_box_schedule() {
        let l = build_l(&paper_prior(), 2).unwrap();
        let a = l.alpha();
        assert!((a[1] - 0.2).abs() < 1e-12);
        assert!((a[2] - 1.0 / 11.0).abs() < 1e-12);
        assert_eq!(a[3], 0.0);
        assert_eq!(l.active(), &[0, 2, 3, 3]);

        let n = l.matrix();
        let want = [
            [1.0, 0.4, 2.0 / 11.0, 0.0],
            [1.0, 0.6, 3.0 / 11.0, 0.0],
            [1.0, 1.0, 6.0 / 11.0, 0.0],
        ];
        for x in 1..=3 {
            for t in 0..=3 {
                assert!((n.get(x, t) - want[x - 1][t]).abs() < 1e-12, "({x},{t})");
            }
        }
    }

    #[test]
    fn uniform_three_schedule() {
        let l = build_l(&make_uniform(3).unwrap(), 2).unwrap();
        for x in 1..=3 {
            for t in 0..=3 {
                let want = (3 - t) as f64 / 3.0;
                assert!((l.value(x, t) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_box_schedule() {
        let l = build_l(&make_uniform(1).unwrap(), 3).unwrap();
        assert_eq!(l.alpha_at(1), 0.0);
        assert_eq!(l.value(1, 0), 1.0);
        assert_eq!(l.value(1, 1), 0.0);
        assert_eq!(l.value(1, 7), 0.0);
        assert!((l.expected_time() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn expected_time_examples() {
        let p = paper_prior();
        let l = build_l(&p, 2).unwrap();
        let t = expected_time(&l.matrix(), &p, 2).unwrap();
        assert!((t.lower - 481.0 / 330.0).abs() < 1e-12);
        assert_eq!(t.lower, t.upper);
        assert!((l.expected_time() - 481.0 / 330.0).abs() < 1e-12);

        let u = make_uniform(3).unwrap();
        let l = build_l(&u, 2).unwrap();
        let t = expected_time(&l.matrix(), &u, 2).unwrap();
        assert!((t.lower - 14.0 / 9.0).abs() < 1e-12);

        // Found immediately: only the t = 0 term survives.
        let n = StrategyMatrix::from_rows(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let t = expected_time(&n, &make_uniform(2).unwrap(), 2).unwrap();
        assert_eq!(t.lower, 1.0);
    }

    #[test]
    fn expected_time_rejects_truncated_matrix() {
        let n = StrategyMatrix::from_rows(vec![vec![1.0, 0.5]]).unwrap();
        let err = expected_time(&n, &make_uniform(1).unwrap(), 2).unwrap_err();
        assert!(matches!(err, Error::IncompleteMatrix { box_index: 1, .. }));
    }

    #[test]
    fn cord_examples() {
        assert!((cord_time(&paper_prior(), 2).unwrap() - 7.0 / 6.0).abs() < 1e-15);
        assert!((cord_time(&make_uniform(5).unwrap(), 5).unwrap() - 1.0).abs() < 1e-15);
        assert!((cord_time(&make_uniform(4).unwrap(), 2).unwrap() - 1.5).abs() < 1e-15);
        assert!(cord_time(&make_uniform(4).unwrap(), 1).is_err());
    }

    #[test]
    fn validate_examples() {
        let l = build_l(&paper_prior(), 2).unwrap();
        assert!(validate(&l.matrix()).is_empty());

        let n = StrategyMatrix::from_rows(vec![vec![1.0, -0.1], vec![1.0, 1.0]]).unwrap();
        let v = validate(&n);
        assert!(v.contains(&Violation::Range {
            x: 1,
            t: 1,
            value: -0.1
        }));

        // C_N(1) = 1.5 = t + 0.5
        let n = StrategyMatrix::from_rows(vec![vec![1.0, 0.25], vec![1.0, 0.25]]).unwrap();
        let v = validate(&n);
        assert_eq!(v.len(), 1);
        match &v[0] {
            Violation::Column { t, excess } => {
                assert_eq!(*t, 1);
                assert!((excess - 0.5).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }

        let n = StrategyMatrix::from_rows(vec![vec![0.9, 0.5, 0.7]]).unwrap();
        let v = validate(&n);
        assert!(v.iter().any(|v| matches!(v, Violation::Initial { x: 1, .. })));
        assert!(v.iter().any(|v| matches!(v, Violation::Increasing { x: 1, t: 2, .. })));
    }

    #[test]
    fn zero_mass_rows_stay_unchecked() {
        let p = make_custom(&[2.0, 1.0, 0.0]).unwrap();
        let l = build_l(&p, 2).unwrap();
        let n = l.matrix();
        assert_eq!(n.boxes(), 3);
        assert!(n.row(3).iter().all(|&v| v == 1.0));
        assert_eq!(n.get(1, 2), 0.0);
        let t = expected_time(&n, &p, 2).unwrap();
        assert!((t.lower - l.expected_time()).abs() < 1e-14);
    }
}
