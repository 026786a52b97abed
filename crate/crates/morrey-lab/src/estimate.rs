use serde::{Deserialize, Serialize};

use crate::geometry::Ball;

/// One-or-two-sided numerical estimate of a supremum-type quantity.
///
/// `lower` is always a witnessed value (some ball/candidate attains it).
/// `upper` is present only when a proven closed-form bound applies.
/// `trace` records the value at successive grid refinements; `stabilized`
/// means the last two trace entries agree to within `STABLE_RTOL`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Estimate {
    pub lower: f64,
    pub upper: Option<f64>,
    pub trace: Vec<f64>,
    pub stabilized: bool,
    pub witness: Option<Ball>,
}

/// Relative change under refinement below which a supremum counts as stable.
pub const STABLE_RTOL: f64 = 0.01;

/// Growth factor across two successive refinements that by itself counts as
/// divergence.
pub const DIVERGE_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    FiniteStable,
    DivergingUnderRefinement,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::FiniteStable => write!(f, "finite-stable"),
            Verdict::DivergingUnderRefinement => write!(f, "diverging"),
            Verdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

impl Estimate {
    pub fn from_trace(trace: Vec<f64>, witness: Option<Ball>) -> Estimate {
        let lower = trace.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let stabilized = trace_stable(&trace);
        Estimate { lower, upper: None, trace, stabilized, witness }
    }

    pub fn exact(v: f64) -> Estimate {
        Estimate { lower: v, upper: Some(v), trace: vec![v], stabilized: true, witness: None }
    }

    pub fn with_upper(mut self, upper: f64) -> Estimate {
        self.upper = Some(upper);
        self
    }

    /// Interval product; used for per-ball condition values
    /// (norm times dual norm over |B|).
    pub fn product(&self, other: &Estimate) -> Estimate {
        let n = self.trace.len().max(other.trace.len());
        let get = |t: &[f64], i: usize| *t.get(i).or(t.last()).unwrap_or(&f64::NAN);
        let trace: Vec<f64> =
            (0..n).map(|i| get(&self.trace, i) * get(&other.trace, i)).collect();
        Estimate {
            lower: self.lower * other.lower,
            upper: match (self.upper, other.upper) {
                (Some(a), Some(b)) => Some(a * b),
                _ => None,
            },
            stabilized: trace_stable(&trace),
            trace,
            witness: self.witness.or(other.witness),
        }
    }

    pub fn scale(&self, c: f64) -> Estimate {
        Estimate {
            lower: self.lower * c,
            upper: self.upper.map(|u| u * c),
            trace: self.trace.iter().map(|v| v * c).collect(),
            stabilized: self.stabilized,
            witness: self.witness,
        }
    }

    /// `diverging` needs either factor-2 growth at the last two refinements
    /// or steady >1% growth with the witness pinned to the moving grid edge.
    pub fn verdict(&self, witness_on_boundary: bool) -> Verdict {
        let t = &self.trace;
        if !self.lower.is_finite() {
            return Verdict::DivergingUnderRefinement;
        }
        if t.len() < 2 {
            return Verdict::Inconclusive;
        }
        if self.stabilized {
            return Verdict::FiniteStable;
        }
        let n = t.len();
        if n >= 3 && t[n - 1] >= DIVERGE_FACTOR * t[n - 2] && t[n - 2] >= DIVERGE_FACTOR * t[n - 3]
        {
            return Verdict::DivergingUnderRefinement;
        }
        let steady_growth = t
            .windows(2)
            .all(|w| w[1] > w[0] * (1.0 + STABLE_RTOL));
        if steady_growth && witness_on_boundary {
            return Verdict::DivergingUnderRefinement;
        }
        Verdict::Inconclusive
    }
}

pub fn trace_stable(trace: &[f64]) -> bool {
    match trace {
        [.., a, b] => {
            if !a.is_finite() || !b.is_finite() {
                false
            } else {
                (b - a).abs() <= STABLE_RTOL * a.abs().max(f64::MIN_POSITIVE)
            }
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_trace_is_finite_stable() {
        let e = Estimate::from_trace(vec![1.0, 1.004, 1.0041], None);
        assert!(e.stabilized);
        assert_eq!(e.verdict(false), Verdict::FiniteStable);
    }

    #[test]
    fn factor_two_growth_is_diverging() {
        let e = Estimate::from_trace(vec![1.0, 2.5, 6.0], None);
        assert_eq!(e.verdict(false), Verdict::DivergingUnderRefinement);
    }

    #[test]
    fn slow_growth_needs_boundary_witness() {
        let e = Estimate::from_trace(vec![1.0, 1.2, 1.45], None);
        assert_eq!(e.verdict(false), Verdict::Inconclusive);
        assert_eq!(e.verdict(true), Verdict::DivergingUnderRefinement);
    }

    #[test]
    fn product_combines_traces() {
        let a = Estimate::from_trace(vec![1.0, 2.0], None);
        let b = Estimate::from_trace(vec![3.0, 3.0], None);
        let p = a.product(&b);
        assert_eq!(p.trace, vec![3.0, 6.0]);
        assert_eq!(p.lower, 6.0);
        assert!(p.upper.is_none());
    }
}
