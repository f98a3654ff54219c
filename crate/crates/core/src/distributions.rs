//! Priors over boxes and the derived water-filling weights.
//!
//! Boxes are 1-based in every public API. Internally a prior is a vector
//! indexed from 0, so box `x` lives at `masses[x - 1]`.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;

/// Tolerance on the total mass of a constructed prior.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Which family a prior was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PriorKind {
    Custom,
    Uniform,
    Pareto { b: f64 },
}

/// A non-increasing probability vector over boxes `1..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxPrior {
    masses: Vec<f64>,
    kind: PriorKind,
    support: usize,
}

impl BoxPrior {
    fn from_normalized(masses: Vec<f64>, kind: PriorKind) -> Result<Self> {
        check_order(&masses)?;
        let total = numeric::sum(masses.iter().copied());
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "prior masses sum to {total}, expected 1"
            )));
        }
        let support = masses.iter().take_while(|&&m| m > 0.0).count();
        Ok(Self {
            masses,
            kind,
            support,
        })
    }

    /// Box count `M` (including any zero-mass tail).
    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Number of boxes with positive mass. Zero-mass boxes only occur as a suffix.
    pub fn support(&self) -> usize {
        self.support
    }

    pub fn kind(&self) -> PriorKind {
        self.kind
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Mass of box `x` (1-based); zero outside `1..=M`.
    pub fn mass(&self, x: usize) -> f64 {
        if x == 0 {
            return 0.0;
        }
        self.masses.get(x - 1).copied().unwrap_or(0.0)
    }

    /// Cumulative masses `P(X <= x)` for `x = 1..=M`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = numeric::CompensatedSum::new();
        self.masses
            .iter()
            .map(|&m| {
                acc.add(m);
                acc.value()
            })
            .collect()
    }

    /// The Pareto exponent, if this prior is a Pareto prior.
    pub fn pareto_exponent(&self) -> Option<f64> {
        match self.kind {
            PriorKind::Pareto { b } => Some(b),
            _ => None,
        }
    }

    pub fn to_file(&self) -> PriorFile {
        let (kind, b) = match self.kind {
            PriorKind::Custom => ("custom", None),
            PriorKind::Uniform => ("uniform", None),
            PriorKind::Pareto { b } => ("pareto", Some(b)),
        };
        PriorFile {
            kind: kind.to_string(),
            m: self.len(),
            b,
            masses: self.masses.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("prior serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PriorFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_prior()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

impl fmt::Display for BoxPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            PriorKind::Uniform => write!(f, "uniform:{}", self.len()),
            PriorKind::Pareto { b } => write!(f, "pareto:{},{}", b, self.len()),
            PriorKind::Custom => write!(f, "custom[{}]", self.len()),
        }
    }
}

/// On-disk JSON shape of a prior: `{kind, M, b?, masses[]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorFile {
    pub kind: String,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    pub masses: Vec<f64>,
}

impl PriorFile {
    pub fn into_prior(self) -> Result<BoxPrior> {
        if self.m != self.masses.len() {
            return Err(Error::Parse(format!(
                "M = {} but {} masses given",
                self.m,
                self.masses.len()
            )));
        }
        match self.kind.as_str() {
            "uniform" => {
                let prior = make_uniform(self.m)?;
                check_matches(&prior, &self.masses)?;
                Ok(prior)
            }
            "pareto" => {
                let b = self
                    .b
                    .ok_or_else(|| Error::Parse("pareto prior needs `b`".into()))?;
                let prior = make_pareto(b, self.m)?;
                check_matches(&prior, &self.masses)?;
                Ok(prior)
            }
            "custom" => make_custom(&self.masses),
            other => Err(Error::Parse(format!("unknown prior kind `{other}`"))),
        }
    }
}

fn check_matches(prior: &BoxPrior, stored: &[f64]) -> Result<()> {
    for (x, (&a, &b)) in prior.masses().iter().zip(stored).enumerate() {
        if (a - b).abs() > MASS_TOLERANCE {
            return Err(Error::Parse(format!(
                "stored mass of box {} is {b}, family gives {a}",
                x + 1
            )));
        }
    }
    Ok(())
}

fn check_order(masses: &[f64]) -> Result<()> {
    for (i, pair) in masses.windows(2).enumerate() {
        if pair[1] > pair[0] {
            return Err(Error::OrderViolation {
                prev_index: i + 1,
                index: i + 2,
                prev: pair[0],
                next: pair[1],
            });
        }
    }
    Ok(())
}

pub fn make_uniform(m: usize) -> Result<BoxPrior> {
    if m == 0 {
        return Err(Error::InvalidArgument("uniform prior needs M >= 1".into()));
    }
    BoxPrior::from_normalized(vec![1.0 / m as f64; m], PriorKind::Uniform)
}

/// `r_{b,M}(x) = I / x^b` with `I` the normalizer over `1..=M`.
pub fn make_pareto(b: f64, m: usize) -> Result<BoxPrior> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "pareto exponent must be positive, got {b}"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("pareto prior needs M >= 1".into()));
    }
    let weights: Vec<f64> = (1..=m).map(|x| (x as f64).powf(-b)).collect();
    let norm = numeric::sum(weights.iter().rev().copied());
    let masses = weights.into_iter().map(|w| w / norm).collect();
    BoxPrior::from_normalized(masses, PriorKind::Pareto { b })
}

/// Normalizes arbitrary non-negative weights. Non-monotone input is rejected
/// rather than sorted.
pub fn make_custom(weights: &[f64]) -> Result<BoxPrior> {
    if weights.is_empty() {
        return Err(Error::InvalidArgument("prior needs at least one box".into()));
    }
    if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "weights must be finite and non-negative, got {bad}"
        )));
    }
    check_order(weights)?;
    let total = numeric::sum(weights.iter().copied());
    if total <= 0.0 {
        return Err(Error::InvalidArgument("all weights are zero".into()));
    }
    let masses = weights.iter().map(|w| w / total).collect();
    BoxPrior::from_normalized(masses, PriorKind::Custom)
}

/// Parses `uniform:M`, `pareto:b,M` or `file:<path>`.
pub fn parse_prior_spec(spec: &str) -> Result<BoxPrior> {
    let (head, rest) = spec
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("expected kind:args, got `{spec}`")))?;
    let parse_m = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("bad box count `{s}`: {e}")))
    };
    match head {
        "uniform" => make_uniform(parse_m(rest)?),
        "pareto" => {
            let (b, m) = rest
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("expected pareto:b,M, got `{spec}`")))?;
            let b = b
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad exponent `{b}`: {e}")))?;
            make_pareto(b, parse_m(m)?)
        }
        "file" => BoxPrior::load(rest),
        other => Err(Error::Parse(format!("unknown prior kind `{other}`"))),
    }
}

/// `q(x) = p(x)^{-1/(k-1)}`, infinite where `p(x) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QWeights {
    q: Vec<f64>,
    k: usize,
}

impl QWeights {
    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `q(x)` for 1-based `x`.
    pub fn get(&self, x: usize) -> f64 {
        self.q[x - 1]
    }

    /// Maps back to masses: `p(x) ∝ q(x)^{-(k-1)}`, renormalized.
    pub fn to_masses(&self) -> Vec<f64> {
        let raw: Vec<f64> = self
            .q
            .iter()
            .map(|&q| {
                if q.is_finite() {
                    q.powf(-((self.k - 1) as f64))
                } else {
                    0.0
                }
            })
            .collect();
        let total = numeric::sum(raw.iter().copied());
        raw.into_iter().map(|r| r / total).collect()
    }
}

pub fn q_weights(prior: &BoxPrior, k: usize) -> Result<QWeights> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need k >= 2, got {k}")));
    }
    let exponent = -1.0 / (k - 1) as f64;
    let q = prior
        .masses()
        .iter()
        .map(|&p| if p > 0.0 { p.powf(exponent) } else { f64::INFINITY })
        .collect();
    Ok(QWeights { q, k })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn uniform_examples() {
        assert_eq!(make_uniform(1).unwrap().masses(), &[1.0]);
        assert_eq!(make_uniform(4).unwrap().masses(), &[0.25; 4]);
        let u3 = make_uniform(3).unwrap();
        assert!(u3.masses().iter().all(|&m| close(m, 1.0 / 3.0, 1e-15)));
        assert!(matches!(make_uniform(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn pareto_examples() {
        let p = make_pareto(0.5, 2).unwrap();
        let i = 1.0 / (1.0 + 2f64.powf(-0.5));
        assert!(close(p.masses()[0], i, 1e-15));
        assert!(close(p.masses()[1], i * 2f64.powf(-0.5), 1e-15));
        assert!(close(p.masses()[0], 0.585786, 1e-6));
        assert!(close(p.masses()[1], 0.414214, 1e-6));

        for b in [0.1, 1.0, 7.0] {
            assert_eq!(make_pareto(b, 1).unwrap().masses(), &[1.0]);
        }

        let p = make_pareto(1.0, 3).unwrap();
        for (got, want) in p.masses().iter().zip([6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0]) {
            assert!(close(*got, want, 1e-15));
        }
        assert_eq!(p.kind(), PriorKind::Pareto { b: 1.0 });

        assert!(make_pareto(0.0, 3).is_err());
        assert!(make_pareto(-1.0, 3).is_err());
    }

    #[test]
    fn pareto_near_zero_exponent_is_nearly_uniform() {
        let p = make_pareto(1e-9, 1000).unwrap();
        let max = p.masses()[0];
        let min = *p.masses().last().unwrap();
        assert!(max - min < 1e-6);
    }

    #[test]
    fn custom_examples() {
        let p = make_custom(&[0.5, 1.0 / 3.0, 1.0 / 6.0]).unwrap();
        assert!(close(p.masses()[0], 0.5, 1e-15));
        assert!(close(p.masses()[2], 1.0 / 6.0, 1e-15));

        let p = make_custom(&[2.0, 1.0, 1.0]).unwrap();
        assert_eq!(p.masses(), &[0.5, 0.25, 0.25]);

        match make_custom(&[0.3, 0.4, 0.3]) {
            Err(Error::OrderViolation { index, .. }) => assert_eq!(index, 2),
            other => panic!("expected order violation, got {other:?}"),
        }
        assert!(matches!(
            make_custom(&[0.0, 0.0]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(make_custom(&[]).is_err());
        assert!(make_custom(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn zero_tail_is_allowed() {
        let p = make_custom(&[3.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.support(), 2);
        assert_eq!(p.mass(5), 0.0);
    }

    #[test]
    fn q_weight_examples() {
        let p = make_custom(&[0.5, 1.0 / 3.0, 1.0 / 6.0]).unwrap();
        let q = q_weights(&p, 2).unwrap();
        for (got, want) in q.values().iter().zip([2.0, 3.0, 6.0]) {
            assert!(close(*got, want, 1e-12));
        }

        let q = q_weights(&make_uniform(5).unwrap(), 3).unwrap();
        assert!(q.values().iter().all(|&v| close(v, 5f64.sqrt(), 1e-12)));

        let q = q_weights(&make_custom(&[1.0, 0.0]).unwrap(), 2).unwrap();
        assert_eq!(q.values()[0], 1.0);
        assert!(q.values()[1].is_infinite());

        assert!(q_weights(&p, 1).is_err());
    }

    #[test]
    fn spec_strings_parse() {
        assert_eq!(parse_prior_spec("uniform:3").unwrap().len(), 3);
        let p = parse_prior_spec("pareto:0.5,1000").unwrap();
        assert_eq!(p.pareto_exponent(), Some(0.5));
        assert!(parse_prior_spec("pareto:0.5").is_err());
        assert!(parse_prior_spec("weird:1").is_err());
        assert!(parse_prior_spec("uniform").is_err());
    }

    #[test]
    fn json_round_trip() {
        for prior in [
            make_uniform(4).unwrap(),
            make_pareto(0.7, 9).unwrap(),
            make_custom(&[0.5, 1.0 / 3.0, 1.0 / 6.0]).unwrap(),
        ] {
            let back = BoxPrior::from_json(&prior.to_json()).unwrap();
            assert_eq!(back, prior);
        }
        let bad = r#"{"kind":"pareto","M":2,"b":0.5,"masses":[0.9,0.1]}"#;
        assert!(BoxPrior::from_json(bad).is_err());
    }
}
