//! Test-function representations.
//!
//! The symbolic class is spanned by terms c * |x|^a * L^k with L = ln(1/|x|)
//! on magnitude intervals, mirrored or one-sided. It is closed under
//! truncation, multiplication by power weights, integer powers, and the
//! antiderivatives the operators need, so operator outputs on indicators stay
//! exactly representable. A log-grid piecewise-constant table is the fallback
//! for everything else.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Ball;
use crate::quadrature::{integrate_adaptive, power_log_integral, MIN_U, REL_TOL};
use crate::weight::Weight;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Both,
    Pos,
    Neg,
}

impl Side {
    pub fn covers_pos(&self) -> bool {
        matches!(self, Side::Both | Side::Pos)
    }
    pub fn covers_neg(&self) -> bool {
        matches!(self, Side::Both | Side::Neg)
    }
    fn covers(&self, positive: bool) -> bool {
        if positive {
            self.covers_pos()
        } else {
            self.covers_neg()
        }
    }
}

/// coeff * x^exponent * ln(1/x)^log_pow on x > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLogTerm {
    pub coeff: f64,
    pub exponent: f64,
    #[serde(default)]
    pub log_pow: u32,
}

impl PowerLogTerm {
    pub fn new(coeff: f64, exponent: f64, log_pow: u32) -> PowerLogTerm {
        PowerLogTerm { coeff, exponent, log_pow }
    }

    pub fn eval(&self, x: f64) -> f64 {
        debug_assert!(x > 0.0);
        self.coeff * x.powf(self.exponent) * (-x.ln()).powi(self.log_pow as i32)
    }
}

/// Sum of terms on the magnitude interval [lo, hi), mirrored per `side`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerLogPiece {
    pub lo: f64,
    pub hi: f64,
    pub side: Side,
    pub terms: Vec<PowerLogTerm>,
}

/// JSON accepts either a `terms` array or single-term shorthand
/// (coeff / exponent / log_pow at top level); `hi: null` means infinity.
#[derive(Deserialize)]
struct PieceRepr {
    lo: f64,
    #[serde(default)]
    hi: Option<f64>,
    #[serde(default)]
    side: Option<Side>,
    #[serde(default)]
    terms: Option<Vec<PowerLogTerm>>,
    #[serde(default)]
    coeff: Option<f64>,
    #[serde(default)]
    exponent: Option<f64>,
    #[serde(default)]
    log_pow: Option<u32>,
}

impl TryFrom<PieceRepr> for PowerLogPiece {
    type Error = String;
    fn try_from(r: PieceRepr) -> std::result::Result<Self, String> {
        let terms = match (r.terms, r.coeff, r.exponent) {
            (Some(t), None, None) => t,
            (None, Some(c), Some(e)) => {
                vec![PowerLogTerm::new(c, e, r.log_pow.unwrap_or(0))]
            }
            _ => {
                return Err(
                    "piece needs either a terms array or coeff+exponent shorthand".to_string()
                )
            }
        };
        let p = PowerLogPiece {
            lo: r.lo,
            hi: r.hi.unwrap_or(f64::INFINITY),
            side: r.side.unwrap_or(Side::Both),
            terms,
        };
        p.validate().map_err(|e| e.to_string())?;
        Ok(p)
    }
}

impl<'de> Deserialize<'de> for PowerLogPiece {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = PieceRepr::deserialize(d)?;
        PowerLogPiece::try_from(repr).map_err(serde::de::Error::custom)
    }
}

impl PowerLogPiece {
    pub fn new(lo: f64, hi: f64, side: Side, terms: Vec<PowerLogTerm>) -> PowerLogPiece {
        PowerLogPiece { lo, hi, side, terms }
    }

    pub fn single(lo: f64, hi: f64, side: Side, coeff: f64, exponent: f64, log_pow: u32) -> Self {
        PowerLogPiece { lo, hi, side, terms: vec![PowerLogTerm::new(coeff, exponent, log_pow)] }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo >= 0.0) || !(self.hi > self.lo) || !self.lo.is_finite() {
            return Err(Error::Config(format!(
                "piece magnitude interval [{}, {}) invalid",
                self.lo, self.hi
            )));
        }
        if self.terms.is_empty() {
            return Err(Error::Config("piece needs at least one term".into()));
        }
        for t in &self.terms {
            if !t.coeff.is_finite() || !t.exponent.is_finite() {
                return Err(Error::Config(format!("bad term {t:?}")));
            }
        }
        Ok(())
    }

    fn eval_mag(&self, m: f64) -> f64 {
        self.terms.iter().map(|t| t.eval(m)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerLogFunc {
    pub pieces: Vec<PowerLogPiece>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedGrid {
    /// Strictly increasing cell boundaries; the function is vals[i] on
    /// [xs[i], xs[i+1]) and zero outside.
    pub xs: Vec<f64>,
    pub vals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Func {
    CharBall(Ball),
    PowerLog(PowerLogFunc),
    Tabulated(TabulatedGrid),
}

// ---------- term algebra ----------

pub fn eval_terms(terms: &[PowerLogTerm], x: f64) -> f64 {
    terms.iter().map(|t| t.eval(x)).sum()
}

pub fn scale_terms(terms: &[PowerLogTerm], c: f64) -> Vec<PowerLogTerm> {
    terms.iter().map(|t| PowerLogTerm::new(t.coeff * c, t.exponent, t.log_pow)).collect()
}

pub fn mul_terms(a: &[PowerLogTerm], b: &[PowerLogTerm]) -> Vec<PowerLogTerm> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for ta in a {
        for tb in b {
            out.push(PowerLogTerm::new(
                ta.coeff * tb.coeff,
                ta.exponent + tb.exponent,
                ta.log_pow + tb.log_pow,
            ));
        }
    }
    collect_terms(out)
}

pub fn pow_terms(terms: &[PowerLogTerm], n: u32) -> Vec<PowerLogTerm> {
    debug_assert!(n >= 1);
    let mut out = terms.to_vec();
    for _ in 1..n {
        out = mul_terms(&out, terms);
    }
    out
}

pub fn collect_terms(mut terms: Vec<PowerLogTerm>) -> Vec<PowerLogTerm> {
    terms.sort_by(|a, b| {
        (a.exponent, a.log_pow).partial_cmp(&(b.exponent, b.log_pow)).unwrap()
    });
    let mut out: Vec<PowerLogTerm> = Vec::with_capacity(terms.len());
    for t in terms {
        match out.last_mut() {
            Some(last) if last.exponent == t.exponent && last.log_pow == t.log_pow => {
                last.coeff += t.coeff;
            }
            _ => out.push(t),
        }
    }
    out.retain(|t| t.coeff != 0.0);
    out
}

/// Antiderivative of a term sum, itself a term sum. Fails (Tolerance) when an
/// exponent sits so close to -1 that the closed form cancels.
pub fn terms_antiderivative(terms: &[PowerLogTerm]) -> Result<Vec<PowerLogTerm>> {
    let mut out = Vec::new();
    for t in terms {
        let u = t.exponent + 1.0;
        let m = t.log_pow;
        if u == 0.0 {
            out.push(PowerLogTerm::new(-t.coeff / (m as f64 + 1.0), 0.0, m + 1));
            continue;
        }
        if u.abs() < MIN_U {
            return Err(Error::Tolerance { lo: t.exponent, hi: -1.0, err: u.abs() });
        }
        let mut falling = 1.0;
        let mut upow = u;
        for j in 0..=m {
            out.push(PowerLogTerm::new(t.coeff * falling / upow, u, m - j));
            falling *= (m - j) as f64;
            upow *= u;
        }
    }
    Ok(collect_terms(out))
}

/// Exact integral of a term sum against a weight over [a, b] on (0, inf).
pub fn integrate_terms_against(
    terms: &[PowerLogTerm],
    w: &Weight,
    a: f64,
    b: f64,
) -> Result<f64> {
    debug_assert!(a >= 0.0 && b >= a);
    if a == b {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for seg in w.segments() {
        let lo = seg.lo.max(a);
        let hi = seg.hi.min(b);
        if hi <= lo {
            continue;
        }
        for t in terms {
            total += t.coeff
                * seg.coeff
                * power_log_integral(lo, hi, t.exponent + seg.exponent, t.log_pow)?;
        }
    }
    Ok(total)
}

// ---------- PowerLogFunc ----------

impl PowerLogFunc {
    pub fn new(pieces: Vec<PowerLogPiece>) -> Result<PowerLogFunc> {
        let f = PowerLogFunc { pieces };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.pieces {
            p.validate()?;
        }
        for positive in [true, false] {
            let mut ivs: Vec<(f64, f64)> = self
                .pieces
                .iter()
                .filter(|p| p.side.covers(positive))
                .map(|p| (p.lo, p.hi))
                .collect();
            ivs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for w in ivs.windows(2) {
                if w[1].0 < w[0].1 {
                    return Err(Error::Config(format!(
                        "pieces overlap on the {} side: [{},{}) and [{},{})",
                        if positive { "positive" } else { "negative" },
                        w[0].0,
                        w[0].1,
                        w[1].0,
                        w[1].1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x == 0.0 {
            // the origin has measure zero; report the limit when finite
            let m = 1e-300;
            return self
                .pieces
                .iter()
                .filter(|p| p.lo == 0.0)
                .map(|p| p.eval_mag(m))
                .next()
                .unwrap_or(0.0);
        }
        let mag = x.abs();
        let positive = x > 0.0;
        self.pieces
            .iter()
            .filter(|p| p.side.covers(positive) && mag >= p.lo && mag < p.hi)
            .map(|p| p.eval_mag(mag))
            .sum()
    }

    /// Magnitude breakpoints, including any interior crossing of 1 (where the
    /// log changes sign).
    pub fn mag_breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for p in &self.pieces {
            out.push(p.lo);
            if p.hi.is_finite() {
                out.push(p.hi);
            }
            if p.lo < 1.0 && p.hi > 1.0 {
                out.push(1.0);
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        out
    }

    pub fn support_bound(&self) -> f64 {
        self.pieces.iter().map(|p| p.hi).fold(0.0, f64::max)
    }

    /// Dominant local exponent at the origin on either side: the smallest
    /// term exponent among pieces touching zero. None if no piece touches 0.
    pub fn min_exponent_at_origin(&self) -> Option<f64> {
        self.pieces
            .iter()
            .filter(|p| p.lo == 0.0)
            .flat_map(|p| p.terms.iter().map(|t| t.exponent))
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }

    /// Largest term exponent among unbounded pieces (tail growth indicator).
    pub fn max_exponent_at_infinity(&self) -> Option<f64> {
        self.pieces
            .iter()
            .filter(|p| p.hi.is_infinite())
            .flat_map(|p| p.terms.iter().map(|t| t.exponent))
            .max_by(|a, b| a.partial_cmp(b).unwrap())
    }

    pub fn scale(&self, c: f64) -> PowerLogFunc {
        PowerLogFunc {
            pieces: self
                .pieces
                .iter()
                .map(|p| PowerLogPiece {
                    lo: p.lo,
                    hi: p.hi,
                    side: p.side,
                    terms: scale_terms(&p.terms, c),
                })
                .collect(),
        }
    }

    /// Fragments covering one sign, as (lo, hi, terms).
    fn sign_fragments(&self, positive: bool) -> Vec<(f64, f64, Vec<PowerLogTerm>)> {
        let mut frags: Vec<(f64, f64, Vec<PowerLogTerm>)> = self
            .pieces
            .iter()
            .filter(|p| p.side.covers(positive))
            .map(|p| (p.lo, p.hi, p.terms.clone()))
            .collect();
        frags.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        frags
    }

    /// Pointwise sum; pieces are re-segmented at the union of breakpoints.
    pub fn add(&self, other: &PowerLogFunc) -> PowerLogFunc {
        let mut pieces = Vec::new();
        for positive in [true, false] {
            let mut cuts: Vec<f64> = Vec::new();
            for f in [self, other] {
                for p in f.pieces.iter().filter(|p| p.side.covers(positive)) {
                    cuts.push(p.lo);
                    cuts.push(p.hi);
                }
            }
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            cuts.dedup();
            let side = if positive { Side::Pos } else { Side::Neg };
            for w in cuts.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                let mut terms = Vec::new();
                for f in [self, other] {
                    for p in f.pieces.iter().filter(|p| p.side.covers(positive)) {
                        if p.lo <= lo && hi <= p.hi {
                            terms.extend_from_slice(&p.terms);
                        }
                    }
                }
                let terms = collect_terms(terms);
                if !terms.is_empty() {
                    pieces.push(PowerLogPiece::new(lo, hi, side, terms));
                }
            }
        }
        PowerLogFunc { pieces }
    }

    /// Restrict to a real-axis interval [lo, hi].
    pub fn truncate(&self, lo: f64, hi: f64) -> PowerLogFunc {
        let mut pieces = Vec::new();
        // positive part: magnitudes in [max(lo,0), max(hi,0)]
        let (plo, phi) = (lo.max(0.0), hi.max(0.0));
        if phi > plo {
            for (a, b, terms) in self.sign_fragments(true) {
                let (ca, cb) = (a.max(plo), b.min(phi));
                if cb > ca {
                    pieces.push(PowerLogPiece::new(ca, cb, Side::Pos, terms));
                }
            }
        }
        let (nlo, nhi) = ((-hi).max(0.0), (-lo).max(0.0));
        if nhi > nlo {
            for (a, b, terms) in self.sign_fragments(false) {
                let (ca, cb) = (a.max(nlo), b.min(nhi));
                if cb > ca {
                    pieces.push(PowerLogPiece::new(ca, cb, Side::Neg, terms));
                }
            }
        }
        PowerLogFunc { pieces }
    }

    /// Split every piece crossing magnitude 1, where ln(1/x) changes sign.
    fn split_at_one(&self) -> PowerLogFunc {
        let mut pieces = Vec::new();
        for p in &self.pieces {
            if p.lo < 1.0 && p.hi > 1.0 {
                pieces.push(PowerLogPiece::new(p.lo, 1.0, p.side, p.terms.clone()));
                pieces.push(PowerLogPiece::new(1.0, p.hi, p.side, p.terms.clone()));
            } else {
                pieces.push(p.clone());
            }
        }
        PowerLogFunc { pieces }
    }

    /// Symbolic |f|^p when representable: single-term pieces with k*p an
    /// integer, or integer p with a constant sign on the piece (verified on a
    /// dense sample). Returns None when the class cannot express it; callers
    /// then integrate |f|^p adaptively, which is always correct.
    pub fn abs_pow_symbolic(&self, p: f64) -> Option<PowerLogFunc> {
        const MAX_LOG_POW: u32 = 12;
        let split = self.split_at_one();
        let mut pieces = Vec::new();
        for piece in &split.pieces {
            let in_unit = piece.hi <= 1.0;
            let transformed: Vec<PowerLogTerm> = if piece.terms.len() == 1 {
                let t = piece.terms[0];
                let kp = t.log_pow as f64 * p;
                let m = kp.round();
                if (kp - m).abs() > 1e-9 || m < 0.0 || m > MAX_LOG_POW as f64 {
                    return None;
                }
                let m = m as u32;
                // |L|^m = L^m on (0,1], (-1)^m L^m beyond
                let sign = if in_unit || m % 2 == 0 { 1.0 } else { -1.0 };
                vec![PowerLogTerm::new(
                    sign * t.coeff.abs().powf(p),
                    t.exponent * p,
                    m,
                )]
            } else {
                let n = p.round();
                if (p - n).abs() > 1e-9 || n < 1.0 || n > 6.0 {
                    return None;
                }
                let sign = piece_constant_sign(piece)?;
                let base: Vec<PowerLogTerm> = if sign >= 0.0 {
                    piece.terms.clone()
                } else {
                    scale_terms(&piece.terms, -1.0)
                };
                let powed = pow_terms(&base, n as u32);
                if powed.iter().any(|t| t.log_pow > MAX_LOG_POW) {
                    return None;
                }
                powed
            };
            if !transformed.is_empty() {
                pieces.push(PowerLogPiece::new(piece.lo, piece.hi, piece.side, transformed));
            }
        }
        Some(PowerLogFunc { pieces })
    }

    /// Signed exact integral of f against w over the real interval [lo, hi].
    pub fn integrate_signed_against(&self, w: &Weight, lo: f64, hi: f64) -> Result<f64> {
        let mut total = 0.0;
        let (plo, phi) = (lo.max(0.0), hi.max(0.0));
        if phi > plo {
            for (a, b, terms) in self.sign_fragments(true) {
                let (ca, cb) = (a.max(plo), b.min(phi));
                if cb > ca {
                    total += integrate_terms_against(&terms, w, ca, cb)?;
                }
            }
        }
        let (nlo, nhi) = ((-hi).max(0.0), (-lo).max(0.0));
        if nhi > nlo {
            for (a, b, terms) in self.sign_fragments(false) {
                let (ca, cb) = (a.max(nlo), b.min(nhi));
                if cb > ca {
                    total += integrate_terms_against(&terms, w, ca, cb)?;
                }
            }
        }
        Ok(total)
    }
}

/// Constant sign of a piece, decided on a dense log sample. None if mixed.
fn piece_constant_sign(piece: &PowerLogPiece) -> Option<f64> {
    let lo = if piece.lo == 0.0 { (piece.hi.min(1e300)) * 1e-12 } else { piece.lo };
    let hi = if piece.hi.is_finite() { piece.hi } else { piece.lo.max(1e-300) * 1e12 };
    let mut saw_pos = false;
    let mut saw_neg = false;
    let n = 33;
    for i in 0..=n {
        let t = i as f64 / n as f64;
        let x = lo * (hi / lo).powf(t);
        let v = piece.eval_mag(x.clamp(lo, hi * (1.0 - 1e-15)));
        if v > 0.0 {
            saw_pos = true;
        }
        if v < 0.0 {
            saw_neg = true;
        }
        if saw_pos && saw_neg {
            return None;
        }
    }
    Some(if saw_neg { -1.0 } else { 1.0 })
}

// ---------- TabulatedGrid ----------

impl TabulatedGrid {
    pub fn new(xs: Vec<f64>, vals: Vec<f64>) -> Result<TabulatedGrid> {
        let g = TabulatedGrid { xs, vals };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.xs.len() < 2 || self.vals.len() + 1 != self.xs.len() {
            return Err(Error::Config(format!(
                "tabulated grid needs n+1 boundaries for n cells, got {} and {}",
                self.xs.len(),
                self.vals.len()
            )));
        }
        if !self.xs.windows(2).all(|w| w[0] < w[1]) || !self.xs.iter().all(|x| x.is_finite()) {
            return Err(Error::Config("tabulated boundaries must be finite and increasing".into()));
        }
        if !self.vals.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("tabulated values must be finite".into()));
        }
        Ok(())
    }

    /// Even function from samples on positive magnitudes:
    /// value vals[i] for |x| in [mags[i], mags[i+1]).
    pub fn even_from_magnitudes(mags: &[f64], vals: &[f64]) -> Result<TabulatedGrid> {
        debug_assert!(mags.len() == vals.len() + 1);
        let mut xs: Vec<f64> = mags.iter().rev().map(|m| -m).collect();
        let mut vs: Vec<f64> = vals.iter().rev().cloned().collect();
        if mags[0] == 0.0 {
            // the boundary at zero appears once; normalize the -0.0
            *xs.last_mut().unwrap() = 0.0;
            xs.extend(mags.iter().skip(1));
        } else {
            xs.extend(mags.iter());
            // the hole (-mags[0], mags[0]) gets value 0 via an extra cell
            vs.push(0.0);
        }
        vs.extend(vals.iter());
        TabulatedGrid::new(xs, vs)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < self.xs[0] || x >= *self.xs.last().unwrap() {
            return 0.0;
        }
        let i = self.xs.partition_point(|&b| b <= x) - 1;
        self.vals[i.min(self.vals.len() - 1)]
    }

    pub fn support_radius(&self) -> f64 {
        self.xs[0].abs().max(self.xs.last().unwrap().abs())
    }
}

// ---------- Func ----------

impl Func {
    pub fn char_ball(b: Ball) -> Func {
        Func::CharBall(b)
    }

    pub fn power_log(pieces: Vec<PowerLogPiece>) -> Result<Func> {
        Ok(Func::PowerLog(PowerLogFunc::new(pieces)?))
    }

    /// 1 + ln(1/|x|) on 0 < |x| <= 1: the profile of the Calderon operator
    /// acting on the unit-ball indicator, up to constants.
    pub fn one_plus_log() -> Func {
        Func::PowerLog(PowerLogFunc {
            pieces: vec![PowerLogPiece::new(
                0.0,
                1.0,
                Side::Both,
                vec![PowerLogTerm::new(1.0, 0.0, 0), PowerLogTerm::new(1.0, 0.0, 1)],
            )],
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Func::CharBall(b) => Ball::new(b.center, b.radius).map(|_| ()),
            Func::PowerLog(f) => f.validate(),
            Func::Tabulated(g) => g.validate(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Func::CharBall(b) => {
                if b.contains(x) {
                    1.0
                } else {
                    0.0
                }
            }
            Func::PowerLog(f) => f.eval(x),
            Func::Tabulated(g) => g.eval(x),
        }
    }

    /// Radius R with supp f inside [-R, R]; infinite for unbounded pieces.
    pub fn support_radius(&self) -> f64 {
        match self {
            Func::CharBall(b) => b.lo().abs().max(b.hi().abs()),
            Func::PowerLog(f) => f.support_bound(),
            Func::Tabulated(g) => g.support_radius(),
        }
    }

    pub fn is_nonneg(&self) -> bool {
        match self {
            Func::CharBall(_) => true,
            Func::PowerLog(f) => f
                .pieces
                .iter()
                .all(|p| piece_constant_sign(p).map(|s| s >= 0.0).unwrap_or(false)),
            Func::Tabulated(g) => g.vals.iter().all(|&v| v >= 0.0),
        }
    }

    /// Pointwise |f|^s when the class can express it.
    pub fn pow_scalar(&self, s: f64) -> Option<Func> {
        if s == 1.0 && self.is_nonneg() {
            return Some(self.clone());
        }
        match self {
            Func::CharBall(b) => Some(Func::CharBall(*b)),
            Func::PowerLog(f) => f.abs_pow_symbolic(s).map(Func::PowerLog),
            Func::Tabulated(g) => Some(Func::Tabulated(TabulatedGrid {
                xs: g.xs.clone(),
                vals: g.vals.iter().map(|v| v.abs().powf(s)).collect(),
            })),
        }
    }

    /// Superlevel set {x in [lo, hi] : |f(x)| > t} as disjoint intervals.
    pub fn superlevel_in(&self, t: f64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        debug_assert!(t > 0.0 && lo <= hi);
        match self {
            Func::CharBall(b) => {
                if t < 1.0 {
                    let (a, c) = (b.lo().max(lo), b.hi().min(hi));
                    if c > a {
                        vec![(a, c)]
                    } else {
                        vec![]
                    }
                } else {
                    vec![]
                }
            }
            Func::Tabulated(g) => {
                let mut out = Vec::new();
                for i in 0..g.vals.len() {
                    if g.vals[i].abs() > t {
                        let (a, c) = (g.xs[i].max(lo), g.xs[i + 1].min(hi));
                        if c > a {
                            out.push((a, c));
                        }
                    }
                }
                merge_intervals(out)
            }
            Func::PowerLog(f) => {
                let mut out = Vec::new();
                for positive in [true, false] {
                    let (mlo, mhi) = if positive {
                        (lo.max(0.0), hi.max(0.0))
                    } else {
                        ((-hi).max(0.0), (-lo).max(0.0))
                    };
                    if mhi <= mlo {
                        continue;
                    }
                    for (a, b, terms) in f.sign_fragments(positive) {
                        let (ca, cb) = (a.max(mlo), b.min(mhi));
                        if cb <= ca {
                            continue;
                        }
                        for (ia, ib) in superlevel_on_fragment(&terms, t, ca, cb) {
                            out.push(if positive { (ia, ib) } else { (-ib, -ia) });
                        }
                    }
                }
                merge_intervals(out)
            }
        }
    }
}

/// {x in [a, b] : |sum terms| > t} by log-grid scan plus bisection refinement.
fn superlevel_on_fragment(
    terms: &[PowerLogTerm],
    t: f64,
    a: f64,
    b: f64,
) -> Vec<(f64, f64)> {
    const N: usize = 96;
    let a_eff = if a == 0.0 { b * 1e-18 } else { a };
    let g = |x: f64| eval_terms(terms, x).abs() - t;
    // sample in log space
    let xs: Vec<f64> = (0..=N)
        .map(|i| a_eff * (b / a_eff).powf(i as f64 / N as f64))
        .collect();
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut start: Option<f64> = None;
    // leading edge: if f exceeds t already at the smallest sample and the
    // piece touches zero, the level set extends to the origin only when the
    // dominant exponent is nonpositive; approximate by a_eff
    for i in 0..=N {
        let above = g(xs[i]) > 0.0;
        match (above, start) {
            (true, None) => {
                let left = if i == 0 {
                    if a == 0.0 {
                        a
                    } else {
                        a_eff
                    }
                } else {
                    bisect_crossing(&g, xs[i - 1], xs[i])
                };
                start = Some(left);
            }
            (false, Some(s)) => {
                let right = bisect_crossing(&g, xs[i - 1], xs[i]);
                out.push((s, right));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, b));
    }
    out
}

fn bisect_crossing(g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    // bisect in log space for scale invariance, 1e-12 relative
    for _ in 0..64 {
        let mid = (lo * hi).sqrt();
        if (hi - lo) <= 1e-12 * hi {
            return mid;
        }
        if (g(lo) > 0.0) != (g(mid) > 0.0) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo * hi).sqrt()
}

fn merge_intervals(mut ivs: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    ivs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in ivs {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

// ---------- integration entry point ----------

/// int_B |f|^p w dx, exact on the symbolic class when the exponents allow,
/// otherwise adaptive to relative tolerance 1e-9. This is the single integral
/// every norm in the lab reduces to.
pub fn integrate_ball(f: &Func, w: &Weight, b: Ball, p: f64) -> Result<f64> {
    debug_assert!(p >= 1.0);
    match f {
        Func::CharBall(s) => match b.intersect(s) {
            Some(i) => w.measure(i),
            None => Ok(0.0),
        },
        Func::Tabulated(g) => {
            let mut total = 0.0;
            for i in 0..g.vals.len() {
                if g.vals[i] == 0.0 {
                    continue;
                }
                let lo = g.xs[i].max(b.lo());
                let hi = g.xs[i + 1].min(b.hi());
                if hi > lo {
                    total += g.vals[i].abs().powf(p) * w.measure_interval(lo, hi)?;
                }
            }
            Ok(total)
        }
        Func::PowerLog(pl) => {
            // divergence is structural: dominant exponent at the origin
            if b.contains(0.0) {
                if let Some(e) = pl.min_exponent_at_origin() {
                    if p * e + w.exponent_at_origin() <= -1.0 && pl.eval(1e-300) != 0.0 {
                        return Err(Error::DivergenceAtOrigin {
                            exponent: p * e + w.exponent_at_origin(),
                        });
                    }
                }
            }
            if let Some(g) = pl.abs_pow_symbolic(p) {
                match g.integrate_signed_against(w, b.lo(), b.hi()) {
                    Ok(v) => return Ok(v),
                    Err(Error::Tolerance { .. }) => {} // cancellation guard: fall back
                    Err(e) => return Err(e),
                }
            }
            let mut cuts: Vec<f64> = Vec::new();
            for m in pl.mag_breakpoints() {
                if m.is_finite() {
                    cuts.push(m);
                    cuts.push(-m);
                }
            }
            for s in w.segments() {
                if s.lo > 0.0 && s.lo.is_finite() {
                    cuts.push(s.lo);
                    cuts.push(-s.lo);
                }
            }
            let integrand = |x: f64| pl.eval(x).abs().powf(p) * w.eval(x);
            integrate_adaptive(&integrand, b.lo(), b.hi(), REL_TOL, &cuts)
        }
    }
}

/// w(B); named wrapper so the measure shows up next to integrate_ball.
pub fn weight_measure(w: &Weight, b: Ball) -> Result<f64> {
    w.measure(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(c: f64, r: f64) -> Ball {
        Ball::new(c, r).unwrap()
    }

    fn close(a: f64, b: f64, rtol: f64) -> bool {
        (a - b).abs() <= rtol * b.abs().max(1e-300)
    }

    #[test]
    fn indicator_against_sqrt_weight() {
        // int_{-1}^{1} |x|^(-1/2) dx = 4
        let f = Func::char_ball(ball(0.0, 1.0));
        let w = Weight::power(-0.5);
        let got = integrate_ball(&f, &w, ball(0.0, 1.0), 1.0).unwrap();
        assert!(close(got, 4.0, 1e-13), "{got}");
    }

    #[test]
    fn one_plus_log_integrates_to_four() {
        // 2 * int_0^1 (1 - ln x) dx = 4
        let f = Func::one_plus_log();
        let got = integrate_ball(&f, &Weight::one(), ball(0.0, 1.0), 1.0).unwrap();
        assert!(close(got, 4.0, 1e-12), "{got}");
    }

    #[test]
    fn symbolic_and_adaptive_agree_on_log_powers() {
        let f = Func::one_plus_log();
        let w = Weight::power(-0.5);
        // p = 2 expands symbolically; p = 1.7 must go adaptive
        let sym = integrate_ball(&f, &w, ball(0.25, 0.2), 2.0).unwrap();
        let g = |x: f64| {
            let v = f.eval(x);
            v * v * w.eval(x)
        };
        let brute = integrate_adaptive(&g, 0.05, 0.45, REL_TOL, &[]).unwrap();
        assert!(close(sym, brute, 1e-8), "{sym} vs {brute}");
        let ad = integrate_ball(&f, &w, ball(0.25, 0.2), 1.7).unwrap();
        assert!(ad > 0.0 && ad.is_finite());
    }

    #[test]
    fn divergent_instance_is_structural_error() {
        // |f|^p w ~ x^(-1.2) near 0
        let f = Func::PowerLog(PowerLogFunc {
            pieces: vec![PowerLogPiece::single(0.0, 1.0, Side::Both, 1.0, -0.6, 0)],
        });
        let w = Weight::one();
        match integrate_ball(&f, &w, ball(0.0, 1.0), 2.0) {
            Err(Error::DivergenceAtOrigin { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn truncation_respects_sides() {
        let f = PowerLogFunc {
            pieces: vec![PowerLogPiece::single(0.0, 2.0, Side::Both, 1.0, 0.0, 0)],
        };
        let t = f.truncate(-0.5, 1.5);
        // value 1 on [-0.5, 1.5] within magnitude < 2
        assert_eq!(t.eval(1.0), 1.0);
        assert_eq!(t.eval(-0.4), 1.0);
        assert_eq!(t.eval(-0.7), 0.0);
        assert_eq!(t.eval(1.7), 0.0);
    }

    #[test]
    fn add_resegments_disjointly() {
        let a = PowerLogFunc {
            pieces: vec![PowerLogPiece::single(0.0, 2.0, Side::Both, 1.0, 0.0, 0)],
        };
        let b = PowerLogFunc {
            pieces: vec![PowerLogPiece::single(1.0, 3.0, Side::Pos, 2.0, 0.0, 0)],
        };
        let s = a.add(&b);
        s.validate().unwrap();
        assert_eq!(s.eval(0.5), 1.0);
        assert_eq!(s.eval(1.5), 3.0);
        assert_eq!(s.eval(-1.5), 1.0);
        assert_eq!(s.eval(2.5), 2.0);
        assert_eq!(s.eval(-2.5), 0.0);
    }

    #[test]
    fn antiderivative_of_inverse_produces_log() {
        // int x^-1 dx -> -L, L = ln(1/x)
        let anti = terms_antiderivative(&[PowerLogTerm::new(1.0, -1.0, 0)]).unwrap();
        assert_eq!(anti.len(), 1);
        assert_eq!(anti[0].log_pow, 1);
        assert!((anti[0].coeff + 1.0).abs() < 1e-15);
        // check F(b) - F(a) = ln(b/a)
        let fb = eval_terms(&anti, 3.0);
        let fa = eval_terms(&anti, 1.5);
        assert!(close(fb - fa, 2.0f64.ln(), 1e-13));
    }

    #[test]
    fn superlevel_of_decreasing_log_profile() {
        // |1 + ln(1/|x|)| > t on (0,1) iff |x| < e^(1-t) for t > 1
        let f = Func::one_plus_log();
        let t = 2.5;
        let want = (1.0f64 - t).exp();
        let ivs = f.superlevel_in(t, -1.0, 1.0);
        assert_eq!(ivs.len(), 1);
        let (a, b) = ivs[0];
        assert!(close(-a, want, 1e-9), "{a} vs {want}");
        assert!(close(b, want, 1e-9), "{b} vs {want}");
    }

    #[test]
    fn tabulated_even_construction_and_integration() {
        let g = TabulatedGrid::even_from_magnitudes(&[0.0, 1.0, 2.0], &[3.0, 1.0]).unwrap();
        let f = Func::Tabulated(g);
        assert_eq!(f.eval(0.5), 3.0);
        assert_eq!(f.eval(-1.5), 1.0);
        assert_eq!(f.eval(2.5), 0.0);
        let got = integrate_ball(&f, &Weight::one(), ball(0.0, 2.0), 1.0).unwrap();
        assert!(close(got, 2.0 * (3.0 + 1.0), 1e-13));
    }

    #[test]
    fn piece_json_accepts_both_shapes() {
        let shorthand: PowerLogPiece =
            serde_json::from_str(r#"{"lo": 0.0, "hi": 1.0, "coeff": 2.0, "exponent": -0.5}"#)
                .unwrap();
        assert_eq!(shorthand.terms.len(), 1);
        let full: PowerLogPiece = serde_json::from_str(
            r#"{"lo": 0.0, "side": "pos", "terms": [{"coeff": 1.0, "exponent": 0.0, "log_pow": 1}]}"#,
        )
        .unwrap();
        assert!(full.hi.is_infinite());
        assert_eq!(full.side, Side::Pos);
    }

    #[test]
    fn func_json_roundtrip() {
        let f = Func::one_plus_log();
        let s = serde_json::to_string(&f).unwrap();
        let back: Func = serde_json::from_str(&s).unwrap();
        assert_eq!(f, back);
    }
}
