//! Averaging operators on the line.
//!
//! Three maximal operators share one candidate-ball pool per evaluation
//! point: the centered-at-origin maximal (balls B(0,r) with |x| <= r), the
//! local maximal (balls containing x with radius <= kappa * |center|), and
//! the full Hardy-Littlewood maximal over every pooled ball. Sharing the pool
//! makes the decomposition inequalities
//!
//!   max(M0, Mloc) <= M <= (1 + 1/kappa) * M0 + Mloc
//!
//! hold for the computed values exactly, ball by ball: every pooled ball
//! containing x is either centered (beats nothing but M0 <= M), local, or a
//! "middle" ball B(y, r) with |y| < r/kappa, and for middle balls the pool
//! also carries B(0, |y| + r), which dominates their average up to the factor
//! (|y| + r)/r < 1 + 1/kappa. Suprema over a strict inequality like
//! radius < kappa|center| agree with the closed version because ball averages
//! are continuous in the radius, so candidates sit on the closure.
//!
//! The Calderon operator S f(x) = |x|^-1 int_{|y|<|x|} |f| + int_{|y|>|x|}
//! |f(y)|/|y| dy maps the symbolic class into itself; its kernel-smoothed
//! variant int |f(y)|/(|x|+|y|) dy and the truncated Hilbert transform get
//! pointwise evaluators with closed forms on indicators.

use crate::error::{Error, Result};
use crate::estimate::Estimate;
use crate::func::{
    eval_terms, terms_antiderivative, Func, PowerLogFunc, PowerLogPiece, PowerLogTerm, Side,
    TabulatedGrid,
};
use crate::geometry::{Ball, GridSpec};
use crate::quadrature::{integrate_adaptive, REL_TOL};
use crate::weight::Weight;

pub const DEFAULT_KAPPA: f64 = 0.25;

/// Upper decomposition constant: middle balls cost (|y|+r)/r < 1 + 1/kappa.
pub fn decomposition_upper_constant(kappa: f64) -> f64 {
    1.0 + 1.0 / kappa
}

// ---------- |f| mass with the representation chosen once ----------

enum AbsProfile {
    Char(Ball),
    Sym(PowerLogFunc),
    Tab(TabulatedGrid),
    Raw(PowerLogFunc),
}

pub struct AbsMass {
    profile: AbsProfile,
    breakpoints: Vec<f64>,
}

impl AbsMass {
    pub fn new(f: &Func) -> AbsMass {
        let breakpoints = real_breakpoints(f);
        let profile = match f {
            Func::CharBall(b) => AbsProfile::Char(*b),
            Func::Tabulated(g) => AbsProfile::Tab(g.clone()),
            Func::PowerLog(pl) => match pl.abs_pow_symbolic(1.0) {
                Some(a) => AbsProfile::Sym(a),
                None => AbsProfile::Raw(pl.clone()),
            },
        };
        AbsMass { profile, breakpoints }
    }

    /// int_lo^hi |f| dx, exact except on the Raw fallback.
    pub fn mass(&self, lo: f64, hi: f64) -> Result<f64> {
        debug_assert!(lo <= hi);
        match &self.profile {
            AbsProfile::Char(b) => Ok((hi.min(b.hi()) - lo.max(b.lo())).max(0.0)),
            AbsProfile::Tab(g) => {
                let mut total = 0.0;
                for i in 0..g.vals.len() {
                    let a = g.xs[i].max(lo);
                    let b = g.xs[i + 1].min(hi);
                    if b > a {
                        total += g.vals[i].abs() * (b - a);
                    }
                }
                Ok(total)
            }
            AbsProfile::Sym(a) => a.integrate_signed_against(&Weight::one(), lo, hi),
            AbsProfile::Raw(pl) => {
                let g = |x: f64| pl.eval(x).abs();
                integrate_adaptive(&g, lo, hi, REL_TOL, &self.breakpoints)
            }
        }
    }

    /// int over lo..hi of |f(y)| / |y| dy with 0 <= lo; hi may be infinite.
    fn mass_over_abs(&self, lo: f64, hi: f64, positive_side: bool) -> Result<f64> {
        let (rlo, rhi) = if positive_side { (lo, hi) } else { (-hi, -lo) };
        match &self.profile {
            AbsProfile::Char(b) => {
                let a = rlo.max(b.lo());
                let c = rhi.min(b.hi());
                if c <= a {
                    return Ok(0.0);
                }
                // both endpoints have the same sign here (lo >= 0)
                let (ma, mc) = if positive_side { (a, c) } else { (-c, -a) };
                if ma <= 0.0 {
                    return Err(Error::DivergenceAtOrigin { exponent: -1.0 });
                }
                Ok((mc / ma).ln())
            }
            AbsProfile::Tab(g) => {
                let mut total = 0.0;
                for i in 0..g.vals.len() {
                    let a = g.xs[i].max(rlo);
                    let c = g.xs[i + 1].min(rhi);
                    if c > a && g.vals[i] != 0.0 {
                        let (ma, mc) = if positive_side { (a, c) } else { (-c, -a) };
                        if ma <= 0.0 {
                            return Err(Error::DivergenceAtOrigin { exponent: -1.0 });
                        }
                        total += g.vals[i].abs() * (mc / ma).ln();
                    }
                }
                Ok(total)
            }
            AbsProfile::Sym(f) => f.integrate_signed_against(&Weight::power(-1.0), rlo, rhi),
            AbsProfile::Raw(pl) => {
                if rhi.is_infinite() || rlo.is_infinite() {
                    return Err(Error::Precondition(
                        "adaptive tail of f/|y| needs bounded support".into(),
                    ));
                }
                let g = |x: f64| pl.eval(x).abs() / x.abs();
                integrate_adaptive(&g, rlo, rhi, REL_TOL, &self.breakpoints)
            }
        }
    }
}

/// Real-axis breakpoints of f (piece seams, support edges, log sign change).
pub fn real_breakpoints(f: &Func) -> Vec<f64> {
    let mut out = Vec::new();
    match f {
        Func::CharBall(b) => {
            out.push(b.lo());
            out.push(b.hi());
        }
        Func::PowerLog(pl) => {
            for m in pl.mag_breakpoints() {
                if m.is_finite() {
                    out.push(m);
                    out.push(-m);
                }
            }
        }
        Func::Tabulated(g) => out.extend_from_slice(&g.xs),
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup();
    out
}

// ---------- shared-pool maximal operators ----------

#[derive(Debug, Clone, Copy)]
pub struct DecompositionValues {
    pub m0: f64,
    pub m_loc: f64,
    pub m: f64,
}

/// Evaluate the three maximal operators at x over one shared candidate pool.
pub fn decomposition_values(
    f: &Func,
    x: f64,
    spec: &GridSpec,
    kappa: f64,
) -> Result<DecompositionValues> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Precondition(format!("kappa must lie in (0,1), got {kappa}")));
    }
    let mass = AbsMass::new(f);
    let ax = x.abs();
    let breaks = real_breakpoints(f);
    let support = f.support_radius();

    // centered radii: the log grid plus structural radii
    let mut radii: Vec<f64> = spec.radii().into_iter().filter(|&r| r >= ax).collect();
    if ax > 0.0 {
        radii.push(ax);
    }
    if support.is_finite() && support >= ax && support > 0.0 {
        radii.push(support);
    }
    for &b in &breaks {
        if b.abs() >= ax && b.abs() > 0.0 {
            radii.push(b.abs());
        }
    }

    // non-centered candidates containing x
    let mut others: Vec<Ball> = Vec::new();
    let push = |c: f64, r: f64, others: &mut Vec<Ball>| {
        // tolerant containment: anchored balls may miss x by an ulp; drop
        // balls whose endpoints collapse in floating point
        if r > 0.0
            && r.is_finite()
            && c.is_finite()
            && (c - x).abs() <= r * (1.0 + 1e-12)
            && c + r > c - r
        {
            others.push(Ball { center: c, radius: r });
        }
    };
    // shrinking balls at x itself: recovers |f(x)| in the interior of pieces
    if ax > 0.0 {
        let mut r = kappa * ax;
        for _ in 0..52 {
            push(x, r, &mut others);
            r *= 0.5;
        }
    }
    // kappa-extremal balls with an edge at x or at a breakpoint of f, built
    // from their endpoints so the anchor lies in the ball exactly
    let mut anchors: Vec<f64> = breaks.clone();
    anchors.push(x);
    for &a in &anchors {
        if a == 0.0 {
            continue;
        }
        let inner = a * (1.0 - kappa) / (1.0 + kappa);
        let outer = a * (1.0 + kappa) / (1.0 - kappa);
        for other_end in [inner, outer] {
            let (lo, hi) = (a.min(other_end), a.max(other_end));
            if hi > lo {
                push((lo + hi) / 2.0, (hi - lo) / 2.0, &mut others);
            }
        }
    }
    // balls spanned by breakpoints and x: exact for indicator geometry
    let mut ends: Vec<f64> = breaks.clone();
    ends.push(x);
    ends.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for i in 0..ends.len() {
        for j in (i + 1)..ends.len() {
            let (lo, hi) = (ends[i], ends[j]);
            if hi > lo {
                push((lo + hi) / 2.0, (hi - lo) / 2.0, &mut others);
            }
        }
    }
    // middle balls on the radius grid around x
    for &r in &spec.radii() {
        for c in [x - r, x - r / 2.0, x, x + r / 2.0, x + r] {
            if c.abs() < r / kappa {
                push(c, r, &mut others);
            }
        }
    }

    // closure: a middle ball B(y,r) is dominated by B(0, |y|+r) at cost
    // (|y|+r)/r < 1 + 1/kappa, so that radius joins the centered pool
    for b in &others {
        if b.radius < kappa * b.center.abs() {
            continue;
        }
        let r = b.center.abs() + b.radius;
        debug_assert!(r >= ax * (1.0 - 1e-12));
        radii.push(r.max(ax));
    }
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    radii.dedup();

    let mut m0: f64 = 0.0;
    for &r in &radii {
        let avg = mass.mass(-r, r)? / (2.0 * r);
        m0 = m0.max(avg);
    }
    let mut m_loc: f64 = 0.0;
    let mut m: f64 = m0;
    for b in &others {
        // denominator is the same float interval the mass integrates over;
        // b.len() = 2r disagrees with hi - lo once r is tiny against |center|
        let avg = mass.mass(b.lo(), b.hi())? / (b.hi() - b.lo());
        m = m.max(avg);
        if b.radius <= kappa * b.center.abs() * (1.0 + 1e-12) {
            m_loc = m_loc.max(avg);
        }
    }
    Ok(DecompositionValues { m0, m_loc, m })
}

pub fn m0_value(f: &Func, x: f64, spec: &GridSpec) -> Result<f64> {
    Ok(decomposition_values(f, x, spec, DEFAULT_KAPPA)?.m0)
}

pub fn mloc_value(f: &Func, x: f64, spec: &GridSpec, kappa: f64) -> Result<f64> {
    Ok(decomposition_values(f, x, spec, kappa)?.m_loc)
}

pub fn hl_value(f: &Func, x: f64, spec: &GridSpec) -> Result<f64> {
    Ok(decomposition_values(f, x, spec, DEFAULT_KAPPA)?.m)
}

// ---------- exact maximal outputs on indicators ----------

/// M0(char_B) exactly. With s1 = |center| - radius, s2 = |center| + radius:
/// 1 on |x| < -s1 (when the ball straddles the origin), then
/// 1/2 + |s1|/(2|x|) up to s2, then radius/|x|; for 0 <= s1 the plateau is
/// radius/s2 out to s2. Even in x, exact at every point.
pub fn m0_func(b: Ball) -> Func {
    let c = b.center.abs();
    let rho = b.radius;
    let (s1, s2) = (c - rho, c + rho);
    let mut pieces = Vec::new();
    if s1 < 0.0 {
        let a = -s1;
        if a > 0.0 {
            pieces.push(PowerLogPiece::single(0.0, a, Side::Both, 1.0, 0.0, 0));
        }
        if s2 > a {
            pieces.push(PowerLogPiece::new(
                a,
                s2,
                Side::Both,
                vec![PowerLogTerm::new(0.5, 0.0, 0), PowerLogTerm::new(a / 2.0, -1.0, 0)],
            ));
        }
    } else {
        pieces.push(PowerLogPiece::single(0.0, s2, Side::Both, rho / s2, 0.0, 0));
    }
    pieces.push(PowerLogPiece::single(s2, f64::INFINITY, Side::Both, rho, -1.0, 0));
    Func::PowerLog(PowerLogFunc { pieces })
}

/// Mloc(char_{B(0,R)}) exactly: 1 inside, then
/// [(1+kappa) R - (1-kappa)|x|] / (2 kappa |x|) out to R(1+kappa)/(1-kappa),
/// then 0. Off-center indicators produce shifted-power profiles outside the
/// symbolic class, so only the centered case has a closed output.
pub fn mloc_func_centered(radius: f64, kappa: f64) -> Result<Func> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Precondition(format!("kappa must lie in (0,1), got {kappa}")));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::BadBall { center: 0.0, radius });
    }
    let cutoff = radius * (1.0 + kappa) / (1.0 - kappa);
    let pieces = vec![
        PowerLogPiece::single(0.0, radius, Side::Both, 1.0, 0.0, 0),
        PowerLogPiece::new(
            radius,
            cutoff,
            Side::Both,
            vec![
                PowerLogTerm::new((1.0 + kappa) * radius / (2.0 * kappa), -1.0, 0),
                PowerLogTerm::new(-(1.0 - kappa) / (2.0 * kappa), 0.0, 0),
            ],
        ),
    ];
    Ok(Func::PowerLog(PowerLogFunc { pieces }))
}

// ---------- Calderon operator ----------

/// S f(x), pointwise: |x|^-1 int_{|y|<=|x|} |f| + int_{|y|>|x|} |f|/|y| dy.
pub fn calderon_value(f: &Func, x: f64) -> Result<f64> {
    let m = x.abs();
    let mass = AbsMass::new(f);
    let tail_hi = match f.support_radius() {
        r if r.is_finite() => r.max(m),
        _ => f64::INFINITY,
    };
    let near = if m > 0.0 { mass.mass(-m, m)? / m } else { 0.0 };
    let far = if tail_hi > m {
        mass.mass_over_abs(m, tail_hi, true)? + mass.mass_over_abs(m, tail_hi, false)?
    } else {
        0.0
    };
    let v = near + far;
    if !v.is_finite() {
        return Err(Error::UndefinedAtOrigin);
    }
    Ok(v)
}

/// S f as a symbolic even function, exact. Fails when |f| is not symbolic,
/// when f is not integrable at the origin, or when the tail of f/|y| does
/// not converge.
pub fn calderon_func(f: &Func) -> Result<Func> {
    let abs1: PowerLogFunc = match f {
        Func::CharBall(b) => {
            // indicator as a symbolic piece on its magnitude range(s)
            let mut pieces = Vec::new();
            if b.hi() > 0.0 {
                pieces.push(PowerLogPiece::single(
                    b.lo().max(0.0),
                    b.hi(),
                    Side::Pos,
                    1.0,
                    0.0,
                    0,
                ));
            }
            if b.lo() < 0.0 {
                pieces.push(PowerLogPiece::single(
                    (-b.hi()).max(0.0),
                    -b.lo(),
                    Side::Neg,
                    1.0,
                    0.0,
                    0,
                ));
            }
            PowerLogFunc { pieces }
        }
        Func::PowerLog(pl) => pl
            .abs_pow_symbolic(1.0)
            .ok_or_else(|| Error::Precondition("|f| left the symbolic class".into()))?,
        Func::Tabulated(g) => {
            let mut pieces = Vec::new();
            for i in 0..g.vals.len() {
                if g.vals[i] == 0.0 {
                    continue;
                }
                let (a, b) = (g.xs[i], g.xs[i + 1]);
                if b <= 0.0 {
                    pieces.push(PowerLogPiece::single(-b, -a, Side::Neg, g.vals[i].abs(), 0.0, 0));
                } else if a >= 0.0 {
                    pieces.push(PowerLogPiece::single(a, b, Side::Pos, g.vals[i].abs(), 0.0, 0));
                } else {
                    pieces.push(PowerLogPiece::single(0.0, -a, Side::Neg, g.vals[i].abs(), 0.0, 0));
                    pieces.push(PowerLogPiece::single(0.0, b, Side::Pos, g.vals[i].abs(), 0.0, 0));
                }
            }
            PowerLogFunc { pieces }
        }
    };

    // collapse to a magnitude profile g(m) = |f|(m) + |f|(-m)
    let mut cuts: Vec<f64> = abs1.pieces.iter().flat_map(|p| [p.lo, p.hi]).collect();
    cuts.push(0.0);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    cuts.retain(|c| c.is_finite());
    if abs1.pieces.iter().any(|p| p.hi.is_infinite()) {
        cuts.push(f64::INFINITY);
    }
    let mut profile: Vec<(f64, f64, Vec<PowerLogTerm>)> = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mut terms = Vec::new();
        for p in &abs1.pieces {
            if p.lo <= lo && hi <= p.hi {
                let both = p.side == Side::Both;
                let weight = if both { 2.0 } else { 1.0 };
                for t in &p.terms {
                    terms.push(PowerLogTerm::new(t.coeff * weight, t.exponent, t.log_pow));
                }
            }
        }
        if !terms.is_empty() {
            profile.push((lo, hi, terms));
        }
    }
    if profile.is_empty() {
        return Ok(Func::PowerLog(PowerLogFunc::default()));
    }

    // G(m) = int_0^m g, accumulated forward
    let mut out_pieces: Vec<PowerLogPiece> = Vec::new();
    let mut g_acc = 0.0;
    let mut g_parts: Vec<(f64, f64, Vec<PowerLogTerm>, f64)> = Vec::new();
    let mut cursor = 0.0;
    for (lo, hi, terms) in &profile {
        if *lo > cursor {
            g_parts.push((cursor, *lo, Vec::new(), g_acc));
        }
        let anti = terms_antiderivative(terms)?;
        let at_lo = if *lo == 0.0 {
            if anti.iter().any(|t| t.exponent <= 0.0 && t.coeff != 0.0) {
                return Err(Error::DivergenceAtOrigin {
                    exponent: terms
                        .iter()
                        .map(|t| t.exponent)
                        .fold(f64::INFINITY, f64::min),
                });
            }
            0.0
        } else {
            eval_terms(&anti, *lo)
        };
        let base = g_acc - at_lo;
        let mut shifted = anti.clone();
        if base != 0.0 {
            shifted.push(PowerLogTerm::new(base, 0.0, 0));
        }
        g_parts.push((*lo, *hi, shifted, f64::NAN));
        if hi.is_finite() {
            g_acc = base + eval_terms(&anti, *hi);
        } else {
            g_acc = f64::INFINITY;
        }
        cursor = *hi;
    }
    let total_mass_bound = cursor; // magnitude where f's support ends (or inf)

    // H(m) = int_m^infinity g(y)/y dy, accumulated backward with explicit
    // gap segments where H stays constant. H(0+) may diverge; the pieces
    // only ever represent H on m > 0, so the bottom boundary is never
    // evaluated.
    let mut h_parts: Vec<(f64, f64, Vec<PowerLogTerm>)> = Vec::new();
    let mut h_acc: f64 = 0.0;
    let top = *cuts.last().unwrap();
    let mut cursor_h = top;
    for (lo, hi, terms) in profile.iter().rev() {
        if *hi < cursor_h {
            // gap above this piece: H is the constant accumulated so far
            let t = if h_acc != 0.0 {
                vec![PowerLogTerm::new(h_acc, 0.0, 0)]
            } else {
                Vec::new()
            };
            h_parts.push((*hi, cursor_h, t));
        }
        let over: Vec<PowerLogTerm> =
            terms.iter().map(|t| PowerLogTerm::new(t.coeff, t.exponent - 1.0, t.log_pow)).collect();
        let anti = terms_antiderivative(&over)?;
        if hi.is_infinite() {
            if anti.iter().any(|t| t.coeff != 0.0 && t.exponent >= 0.0) {
                return Err(Error::TailDivergence {
                    exponent: terms.iter().map(|t| t.exponent).fold(f64::NEG_INFINITY, f64::max),
                    from: *lo,
                });
            }
            // antiderivative vanishes at infinity: H(m) = -anti(m)
            let mut neg: Vec<PowerLogTerm> =
                anti.iter().map(|t| PowerLogTerm::new(-t.coeff, t.exponent, t.log_pow)).collect();
            if h_acc != 0.0 {
                neg.push(PowerLogTerm::new(h_acc, 0.0, 0));
            }
            h_parts.push((*lo, *hi, neg));
            if *lo > 0.0 {
                h_acc += -eval_terms(&anti, *lo);
            } else {
                h_acc = f64::INFINITY;
            }
        } else {
            let at_hi = eval_terms(&anti, *hi);
            // H(m) = h_acc + anti(hi) - anti(m) on [lo, hi)
            let mut neg: Vec<PowerLogTerm> =
                anti.iter().map(|t| PowerLogTerm::new(-t.coeff, t.exponent, t.log_pow)).collect();
            let c = h_acc + at_hi;
            if c != 0.0 {
                neg.push(PowerLogTerm::new(c, 0.0, 0));
            }
            h_parts.push((*lo, *hi, neg));
            if *lo > 0.0 {
                h_acc += at_hi - eval_terms(&anti, *lo);
            } else {
                h_acc = f64::INFINITY;
            }
        }
        cursor_h = *lo;
    }
    if cursor_h > 0.0 {
        // below the support: H is the full integral, a finite constant here
        let t = if h_acc != 0.0 { vec![PowerLogTerm::new(h_acc, 0.0, 0)] } else { Vec::new() };
        h_parts.push((0.0, cursor_h, t));
    }
    h_parts.reverse();

    // assemble S = G(m)/m + H(m) piecewise on the union of part boundaries
    let mut seams: Vec<f64> = Vec::new();
    for (lo, hi, _, _) in &g_parts {
        seams.push(*lo);
        if hi.is_finite() {
            seams.push(*hi);
        }
    }
    for (lo, hi, _) in &h_parts {
        seams.push(*lo);
        if hi.is_finite() {
            seams.push(*hi);
        }
    }
    seams.sort_by(|a, b| a.partial_cmp(b).unwrap());
    seams.dedup();
    let unbounded = g_parts.iter().any(|(_, hi, _, _)| hi.is_infinite())
        || h_parts.iter().any(|(_, hi, _)| hi.is_infinite())
        || total_mass_bound.is_finite();
    if unbounded {
        seams.push(f64::INFINITY);
    }
    for w in seams.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mut terms: Vec<PowerLogTerm> = Vec::new();
        let mut covered_g = false;
        for (glo, ghi, t, pre) in &g_parts {
            if *glo <= lo && hi <= *ghi {
                covered_g = true;
                if t.is_empty() {
                    if *pre != 0.0 && pre.is_finite() {
                        terms.push(PowerLogTerm::new(*pre, -1.0, 0));
                    }
                } else {
                    for tt in t {
                        terms.push(PowerLogTerm::new(tt.coeff, tt.exponent - 1.0, tt.log_pow));
                    }
                }
            }
        }
        if !covered_g && total_mass_bound.is_finite() && lo >= total_mass_bound {
            // beyond the support: G is the full mass, H is zero
            if g_acc != 0.0 {
                terms.push(PowerLogTerm::new(g_acc, -1.0, 0));
            }
        }
        for (hlo, hhi, t) in &h_parts {
            if *hlo <= lo && hi <= *hhi {
                for tt in t {
                    terms.push(PowerLogTerm::new(tt.coeff, tt.exponent, tt.log_pow));
                }
            }
        }
        if !terms.is_empty() {
            out_pieces.push(PowerLogPiece::new(lo, hi, Side::Both, crate::func::collect_terms(terms)));
        }
    }
    let out = PowerLogFunc { pieces: out_pieces };
    out.validate()?;
    Ok(Func::PowerLog(out))
}

// ---------- kernel-smoothed Calderon and truncated Hilbert ----------

/// int |f(y)| / (|x| + |y|) dy, pointwise. Closed form for indicators and
/// tables, adaptive quadrature for symbolic profiles.
pub fn hilbert_kernel_value(f: &Func, x: f64) -> Result<f64> {
    let m = x.abs();
    let cell = |v: f64, a: f64, b: f64| -> f64 {
        // int_a^b dy/(m+|y|) over an interval of one sign
        if b <= 0.0 {
            v * ((m - a) / (m - b)).ln()
        } else {
            v * ((m + b) / (m + a)).ln()
        }
    };
    match f {
        Func::CharBall(b) => {
            let mut total = 0.0;
            let (lo, hi) = (b.lo(), b.hi());
            if hi > 0.0 {
                let a = lo.max(0.0);
                if m == 0.0 && a == 0.0 {
                    return Err(Error::UndefinedAtOrigin);
                }
                total += cell(1.0, a, hi);
            }
            if lo < 0.0 {
                let bneg = hi.min(0.0);
                if m == 0.0 && bneg == 0.0 {
                    return Err(Error::UndefinedAtOrigin);
                }
                total += cell(1.0, lo, bneg);
            }
            Ok(total)
        }
        Func::Tabulated(g) => {
            let mut total = 0.0;
            for i in 0..g.vals.len() {
                if g.vals[i] == 0.0 {
                    continue;
                }
                let (a, b) = (g.xs[i], g.xs[i + 1]);
                if b <= 0.0 || a >= 0.0 {
                    total += cell(g.vals[i].abs(), a, b);
                } else {
                    if m == 0.0 {
                        return Err(Error::UndefinedAtOrigin);
                    }
                    total += cell(g.vals[i].abs(), a, 0.0) + cell(g.vals[i].abs(), 0.0, b);
                }
            }
            Ok(total)
        }
        Func::PowerLog(pl) => {
            let support = pl.support_bound();
            if support.is_infinite() {
                // compare against the Calderon kernel: same up to a factor 2
                return Err(Error::Precondition(
                    "kernel-smoothed evaluation needs bounded support".into(),
                ));
            }
            let breaks = real_breakpoints(f);
            let g = |y: f64| pl.eval(y).abs() / (m + y.abs());
            integrate_adaptive(&g, -support, support, REL_TOL, &breaks)
        }
    }
}

/// Truncated Hilbert transform int_{|x-y|>eps} f(y)/(x-y) dy, signed.
pub fn truncated_hilbert_value(f: &Func, x: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Precondition("truncation eps must be positive".into()));
    }
    match f {
        Func::CharBall(b) => {
            // int over (lo,hi) \ (x-eps, x+eps) of dy/(x-y), antiderivative
            // -ln|x-y|
            let mut total = 0.0;
            let (lo, hi) = (b.lo(), b.hi());
            let left = (lo.min(x - eps), hi.min(x - eps));
            if left.1 > left.0 {
                total += ((x - left.0) / (x - left.1)).ln();
            }
            let right = (lo.max(x + eps), hi.max(x + eps));
            if right.1 > right.0 {
                total += ((x - right.0).abs() / (x - right.1).abs()).ln();
            }
            Ok(total)
        }
        _ => {
            let support = f.support_radius();
            if support.is_infinite() {
                return Err(Error::Precondition(
                    "truncated Hilbert evaluation needs bounded support".into(),
                ));
            }
            let mut breaks = real_breakpoints(f);
            breaks.push(x - eps);
            breaks.push(x + eps);
            let g = |y: f64| {
                if (x - y).abs() <= eps {
                    0.0
                } else {
                    f.eval(y) / (x - y)
                }
            };
            integrate_adaptive(&g, -support, support, REL_TOL, &breaks)
        }
    }
}

// ---------- tabulation of pointwise operators ----------

/// Sample a pointwise operator onto a signed log grid as a step function.
/// Cell values are midpoint samples; the result estimates, it does not bound.
pub fn tabulate_op(
    op: &dyn Fn(f64) -> Result<f64>,
    spec: &GridSpec,
) -> Result<TabulatedGrid> {
    let mags = spec.radii();
    let mut xs: Vec<f64> = mags.iter().rev().map(|m| -m).collect();
    xs.extend(mags.iter());
    let mut vals = Vec::with_capacity(xs.len() - 1);
    for w in xs.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = if a > 0.0 {
            (a * b).sqrt()
        } else if b < 0.0 {
            -((a * b).sqrt())
        } else {
            // straddling cell: avoid 0, where log-type operators blow up
            b * 0.5
        };
        vals.push(op(mid)?);
    }
    TabulatedGrid::new(xs, vals)
}

/// Refinement trace of a pointwise supremum sup_x op(x) over grid levels.
pub fn sup_over_grid(
    op: &dyn Fn(f64) -> Result<f64>,
    spec: &GridSpec,
    levels: u32,
) -> Result<Estimate> {
    let mut trace = Vec::new();
    let mut best_witness: Option<Ball> = None;
    for level in 0..=levels {
        let g = spec.refined(level);
        let mut sup: f64 = 0.0;
        let mut arg = 0.0;
        for &m in &g.radii() {
            for x in [m, -m] {
                let v = op(x)?;
                if v > sup {
                    sup = v;
                    arg = x;
                }
            }
        }
        trace.push(sup);
        best_witness = Some(Ball { center: arg, radius: arg.abs().max(g.r_min) });
    }
    Ok(Estimate::from_trace(trace, best_witness))
}
