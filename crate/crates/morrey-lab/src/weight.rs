use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Ball;
use crate::quadrature::{pow_integral, pow_integral_from};

/// Even weights w(x) = w(|x|) that are piecewise pure powers on (0, infinity).
///
/// The class is closed under multiplication by |x|^alpha and under pointwise
/// real powers, which is exactly what the dual-exponent weights w^(1-p') and
/// the power-split weights |x|^alpha * w need. Measures over balls are exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Weight {
    Power { beta: f64 },
    PowerTimes { alpha: f64, inner: Box<Weight> },
    PiecewisePower { segments: Vec<PowerSegment> },
}

/// c * x^exponent on [lo, hi) with c > 0; hi may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSegment {
    pub lo: f64,
    pub hi: f64,
    pub coeff: f64,
    pub exponent: f64,
}

impl Weight {
    pub fn one() -> Weight {
        Weight::Power { beta: 0.0 }
    }

    pub fn power(beta: f64) -> Weight {
        Weight::Power { beta }
    }

    /// Flattened normal form: sorted segments covering (0, inf) contiguously.
    pub fn segments(&self) -> Vec<PowerSegment> {
        match self {
            Weight::Power { beta } => {
                vec![PowerSegment { lo: 0.0, hi: f64::INFINITY, coeff: 1.0, exponent: *beta }]
            }
            Weight::PowerTimes { alpha, inner } => inner
                .segments()
                .into_iter()
                .map(|s| PowerSegment { exponent: s.exponent + alpha, ..s })
                .collect(),
            Weight::PiecewisePower { segments } => segments.clone(),
        }
    }

    /// Weights must be positive a.e. and locally integrable away from the
    /// origin; local integrability AT the origin is checked where integrals
    /// are taken, since dual-exponent weights legitimately fail it.
    pub fn validate(&self) -> Result<()> {
        let segs = self.segments();
        if segs.is_empty() {
            return Err(Error::Config("piecewise weight needs at least one segment".into()));
        }
        let mut expect_lo = 0.0;
        for (i, s) in segs.iter().enumerate() {
            if !(s.coeff > 0.0) || !s.coeff.is_finite() || !s.exponent.is_finite() {
                return Err(Error::Config(format!("bad weight segment {i}: {s:?}")));
            }
            if s.lo != expect_lo || !(s.hi > s.lo) {
                return Err(Error::Config(format!(
                    "weight segments must tile (0, inf) contiguously; segment {i} covers [{}, {})",
                    s.lo, s.hi
                )));
            }
            expect_lo = s.hi;
        }
        if expect_lo.is_finite() {
            return Err(Error::Config("last weight segment must extend to infinity".into()));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let ax = x.abs();
        for s in self.segments() {
            if ax < s.hi && (ax >= s.lo || (s.lo == 0.0 && ax == 0.0)) {
                if ax == 0.0 {
                    return match s.exponent.partial_cmp(&0.0).unwrap() {
                        std::cmp::Ordering::Greater => 0.0,
                        std::cmp::Ordering::Equal => s.coeff,
                        std::cmp::Ordering::Less => f64::INFINITY,
                    };
                }
                return s.coeff * ax.powf(s.exponent);
            }
        }
        0.0
    }

    /// Exponent governing integrability at the origin.
    pub fn exponent_at_origin(&self) -> f64 {
        self.segments()[0].exponent
    }

    pub fn as_pure_power(&self) -> Option<(f64, f64)> {
        let segs = self.segments();
        if segs.len() == 1 {
            Some((segs[0].coeff, segs[0].exponent))
        } else {
            None
        }
    }

    /// Pointwise power w^t, still in the class.
    pub fn pow(&self, t: f64) -> Weight {
        let segs = self
            .segments()
            .into_iter()
            .map(|s| PowerSegment {
                lo: s.lo,
                hi: s.hi,
                coeff: s.coeff.powf(t),
                exponent: s.exponent * t,
            })
            .collect();
        Weight::PiecewisePower { segments: segs }
    }

    /// Dual-exponent weight sigma = w^(1 - p'), p > 1.
    pub fn sigma(&self, p: f64) -> Weight {
        debug_assert!(p > 1.0);
        let pprime = p / (p - 1.0);
        self.pow(1.0 - pprime)
    }

    pub fn times_power(&self, alpha: f64) -> Weight {
        Weight::PowerTimes { alpha, inner: Box::new(self.clone()) }
    }

    /// Exact integral of w over [a, b] on the positive half-line.
    /// a = 0 is allowed and checked for integrability.
    pub fn measure_pos(&self, a: f64, b: f64) -> Result<f64> {
        debug_assert!(a >= 0.0 && b >= a);
        if a == b {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for s in self.segments() {
            let lo = s.lo.max(a);
            let hi = s.hi.min(b);
            if hi <= lo {
                continue;
            }
            if lo == 0.0 && s.exponent <= -1.0 {
                return Err(Error::DivergenceAtOrigin { exponent: s.exponent });
            }
            total += s.coeff * pow_integral(lo, hi, s.exponent);
        }
        Ok(total)
    }

    /// Integral over [a, a + len] in [0, inf) with the length supplied
    /// exactly, dodging endpoint cancellation for short intervals far from
    /// the origin. Falls back to endpoint arithmetic when the interval spans
    /// a segment boundary (boundaries are order-one user inputs).
    pub fn measure_pos_len(&self, a: f64, len: f64) -> Result<f64> {
        debug_assert!(a >= 0.0 && len >= 0.0);
        if len == 0.0 {
            return Ok(0.0);
        }
        let b = a + len;
        if a > 0.0 {
            for s in self.segments() {
                if s.lo <= a && b <= s.hi {
                    return Ok(s.coeff * pow_integral_from(a, len, s.exponent));
                }
            }
        }
        self.measure_pos(a, b)
    }

    /// w(B), exact. Mirrors across the origin: w is even. Computed from the
    /// ball's exact (center, radius) pair, not its rounded endpoints.
    pub fn measure(&self, b: Ball) -> Result<f64> {
        let c = b.center.abs();
        if c >= b.radius {
            self.measure_pos_len(c - b.radius, 2.0 * b.radius)
        } else {
            self.measure_interval(b.lo(), b.hi())
        }
    }

    /// Exact integral of w over an arbitrary real interval.
    pub fn measure_interval(&self, lo: f64, hi: f64) -> Result<f64> {
        debug_assert!(lo <= hi);
        let mut total = 0.0;
        if hi > 0.0 {
            total += self.measure_pos(lo.max(0.0), hi)?;
        }
        if lo < 0.0 {
            total += self.measure_pos((-hi).max(0.0), -lo)?;
        }
        Ok(total)
    }

    /// Essential infimum over a ball; exact because each segment is monotone.
    /// Zero when the ball contains the origin and w vanishes there.
    pub fn ess_inf(&self, b: Ball) -> f64 {
        let mut pieces: Vec<(f64, f64)> = Vec::new();
        let (lo, hi) = (b.lo(), b.hi());
        if hi > 0.0 {
            pieces.push((lo.max(0.0), hi));
        }
        if lo < 0.0 {
            pieces.push(((-hi).max(0.0), -lo));
        }
        let mut inf = f64::INFINITY;
        for (a, c) in pieces {
            inf = inf.min(self.ess_inf_pos(a, c));
        }
        inf
    }

    /// Essential infimum over [a, c] on the positive half-line.
    pub fn ess_inf_pos(&self, a: f64, c: f64) -> f64 {
        let mut inf = f64::INFINITY;
        for s in self.segments() {
            let lo = s.lo.max(a);
            let hi = s.hi.min(c);
            if hi < lo {
                continue;
            }
            // monotone on the segment: extremes at the clipped endpoints
            let at_lo = if lo == 0.0 {
                match s.exponent.partial_cmp(&0.0).unwrap() {
                    std::cmp::Ordering::Greater => 0.0,
                    std::cmp::Ordering::Equal => s.coeff,
                    std::cmp::Ordering::Less => f64::INFINITY,
                }
            } else {
                s.coeff * lo.powf(s.exponent)
            };
            let at_hi = if hi.is_finite() { s.coeff * hi.powf(s.exponent) } else { at_lo };
            inf = inf.min(at_lo.min(at_hi));
        }
        inf
    }

    /// Reverse-doubling exponent, closed form for pure powers:
    /// |x|^beta lies in RD_delta with delta = min(1, 1 + beta) over all nested
    /// balls and delta = 1 + beta over centered ones.
    pub fn rd_exponent_closed(&self, centered_only: bool) -> Option<f64> {
        let (_, beta) = self.as_pure_power()?;
        if beta <= -1.0 {
            return None;
        }
        Some(if centered_only { 1.0 + beta } else { (1.0 + beta).min(1.0) })
    }
}
