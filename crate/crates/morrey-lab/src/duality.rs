//! Köthe-dual norm machinery.
//!
//! The dual norm ||g||' = sup { int |fg| : ||f|| <= 1 } is an
//! infinite-dimensional supremum, so the contract here is an interval:
//! a certified lower bound from explicit candidate functions, and a
//! closed-form upper bound where one is proven. Downstream condition checks
//! work in this interval arithmetic and never treat a lower bound as the
//! value. Everything is n = 1.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::Estimate;
use crate::func::{Func, PowerLogPiece, Side};
use crate::geometry::{Ball, BallFamily};
use crate::morrey::{
    ball_norm_value, char_norm_closed, stabilized_sup, supported_norm_candidates, Scope,
    SpaceParams,
};
use crate::operators::m0_func;
use crate::weight::Weight;

/// The candidate exponent from the power-weight necessity argument:
/// pairing w^alpha against chi_B witnesses divergence of the condition
/// constant exactly where the closed-form range ends.
pub fn prop_candidate_exponent(sp: &SpaceParams) -> f64 {
    let (l1, l2) = (sp.phi.lambda1(), sp.phi.lambda2());
    (l2 - 1.0) / (sp.p - 1.0 + l1 + l2)
}

/// kernel * chi_support as a symbolic function. Pure indicator kernels stay
/// indicators so the norm path can use the closed form.
fn weight_char_func(kernel: &Weight, support: Ball) -> Result<Func> {
    if let Some((c, e)) = kernel.as_pure_power() {
        if c == 1.0 && e == 0.0 {
            return Ok(Func::CharBall(support));
        }
    }
    let (lo, hi) = (support.lo(), support.hi());
    let mut pieces: Vec<PowerLogPiece> = Vec::new();
    let add_side = |mlo: f64, mhi: f64, side: Side, pieces: &mut Vec<PowerLogPiece>| {
        for s in kernel.segments() {
            let a = s.lo.max(mlo);
            let b = s.hi.min(mhi);
            if b > a {
                pieces.push(PowerLogPiece::single(a, b, side, s.coeff, s.exponent, 0));
            }
        }
    };
    if hi > 0.0 {
        add_side(lo.max(0.0), hi, Side::Pos, &mut pieces);
    }
    if lo < 0.0 {
        add_side((-hi).max(0.0), -lo, Side::Neg, &mut pieces);
    }
    Func::power_log(pieces)
}

/// Exponent arithmetic deciding whether kernel * chi_support has finite
/// nonzero Morrey norm. Near the origin the integrand |f|^p w behaves like
/// x^eta; the norm is finite iff the mass is integrable there and the ratio
/// to phi stays bounded as balls shrink onto 0. Supports away from the
/// origin are always fine (everything is bounded on them).
pub(crate) fn candidate_in_space(kernel: &Weight, support: Ball, sp: &SpaceParams) -> bool {
    if support.lo() > 0.0 || support.hi() < 0.0 {
        return true;
    }
    let beta0 = sp.w.exponent_at_origin();
    let eta = kernel.exponent_at_origin() * sp.p + beta0;
    let mass_exp = 1.0 + eta;
    if mass_exp <= 1e-12 {
        return false;
    }
    let phi_exp = sp.phi.lambda1() + sp.phi.lambda2() * (1.0 + beta0);
    // Equality is inside: the per-scale ratio is then a nonzero constant and
    // the supremum over shrinking balls is that constant, not infinity. This
    // is exactly the closed lower endpoint of the power ranges.
    mass_exp - phi_exp > -1e-12
}

/// Sharp witness balls for the norm of a function supported in `b`: the
/// scales where the canonical candidates attain their suprema (the support
/// ball, its dilates, the centered hull, and edge sub-balls where steep
/// kernels or weights pile up their mass). Local-scope lists hold only
/// centered balls, matching the norm's definition.
fn witness_balls(b: Ball, scope: Scope) -> Vec<Ball> {
    let t = b.tilde();
    let mut out = match scope {
        Scope::Global => vec![b.dilate(0.5), b, b.dilate(2.0), t, t.dilate(2.0)],
        Scope::Local => vec![t.dilate(0.5), t, t.dilate(2.0), t.dilate(4.0)],
    };
    match scope {
        Scope::Global => {
            for frac in [0.25, 0.0625] {
                let rho = b.radius * frac;
                let off = b.radius - rho;
                out.push(Ball { center: b.center - off, radius: rho });
                out.push(Ball { center: b.center + off, radius: rho });
            }
        }
        Scope::Local => {
            let s1 = b.lo().max(-b.hi()).max(0.0);
            if s1 > 0.0 {
                out.push(Ball { center: 0.0, radius: s1 + b.radius * 0.5 });
                out.push(Ball { center: 0.0, radius: s1 + b.radius * 0.25 });
            }
        }
    }
    out
}

/// Norm of a supported candidate from the witness list alone: the norm
/// functional evaluated where the canonical candidates attain their suprema.
/// Local indicators take the closed form when its regime check passes; the
/// global closed form is written in the |B| convention and sits a factor
/// below this module's phi normalization, so it is never used here (an
/// under-estimated denominator would inflate the dual lower bound).
pub(crate) fn candidate_norm_quick(f: &Func, support: Ball, sp: &SpaceParams) -> Result<f64> {
    if sp.scope == Scope::Local {
        if let Func::CharBall(b) = f {
            match char_norm_closed(*b, sp) {
                Ok(v) => return Ok(v),
                Err(Error::Precondition(_)) | Err(Error::RegimeNotCovered(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    let mut best = 0.0f64;
    for b in witness_balls(support, sp.scope) {
        let v = ball_norm_value(f, sp, b)?;
        if v > best {
            best = v;
        }
    }
    Ok(best)
}

/// Norm of a supported candidate from a refinement sweep over the family
/// restricted to twice the support.
fn candidate_norm_swept(
    f: &Func,
    support: Ball,
    sp: &SpaceParams,
    fam: &BallFamily,
    levels: u32,
) -> Result<f64> {
    let est = stabilized_sup(
        fam,
        levels,
        |fm| supported_norm_candidates(support, sp, fm),
        |b| ball_norm_value(f, sp, b),
    )?;
    Ok(est.lower)
}

/// One pairing candidate kernel * chi_support with its cached Morrey norm.
#[derive(Debug, Clone)]
pub struct DualCandidate {
    pub label: String,
    pub kernel: Weight,
    pub support: Ball,
    pub f: Func,
    pub norm: f64,
}

/// Candidate functions for certified dual-norm lower bounds on a target
/// ball: the indicator itself, the dual-exponent kernel w^(1-p'), weight
/// powers w^alpha on a log-symmetric grid bracketing the necessity exponent,
/// and sub-ball indicators. Every retained candidate has finite nonzero
/// Morrey norm; kernels failing the origin exponent test are dropped up
/// front so an underestimated norm can never inflate a lower bound.
#[derive(Debug, Clone)]
pub struct DualCandidateFamily {
    pub target: Ball,
    pub candidates: Vec<DualCandidate>,
}

impl DualCandidateFamily {
    /// Full family with norms from a refinement sweep over `fam`.
    pub fn for_ball(b: Ball, sp: &SpaceParams, fam: &BallFamily) -> Result<Self> {
        Self::build(b, sp, Some(fam))
    }

    /// Trimmed family with witness-list norms, cheap enough to construct at
    /// every ball of a condition sweep.
    pub fn canonical(b: Ball, sp: &SpaceParams) -> Result<Self> {
        Self::build(b, sp, None)
    }

    fn build(b: Ball, sp: &SpaceParams, fam: Option<&BallFamily>) -> Result<Self> {
        let mut gens: Vec<(String, Weight, Ball)> =
            vec![("char".into(), Weight::one(), b)];
        if sp.p > 1.0 {
            gens.push(("dual-exponent".into(), sp.sigma()?, b));
        }
        let astar = prop_candidate_exponent(sp);
        if astar.is_finite() && astar != 0.0 {
            let js: &[i32] = if fam.is_some() { &[-4, -3, -2, -1, 0, 1, 2, 3, 4] } else { &[-2, 0, 2] };
            for &j in js {
                let alpha = astar * 2f64.powf(j as f64 / 2.0);
                gens.push((format!("alpha-grid[{j}]"), sp.w.pow(alpha), b));
            }
        }
        // Kernel with origin exponent exactly -1: finite norm precisely when
        // the weight's origin exponent clears the sharp upper endpoint, and
        // then the pairing against any origin-straddling indicator diverges.
        // This is the witness the alpha grid misses (its divergent members
        // are screened out by the in-space test).
        let beta0 = sp.w.exponent_at_origin();
        if beta0 > 0.0 {
            gens.push(("divergence-probe".into(), sp.w.pow(-1.0 / beta0), b));
        }
        let mut subs = vec![b.dilate(0.5)];
        if fam.is_some() {
            subs.push(b.dilate(0.25));
            let rho = b.radius / 4.0;
            subs.push(Ball { center: b.center - (b.radius - rho), radius: rho });
            subs.push(Ball { center: b.center + (b.radius - rho), radius: rho });
        }
        for e in subs {
            gens.push(("sub-ball".into(), Weight::one(), e));
        }

        let candidates: Vec<DualCandidate> = gens
            .into_par_iter()
            .map(|(label, kernel, support)| -> Result<Option<DualCandidate>> {
                if !candidate_in_space(&kernel, support, sp) {
                    return Ok(None);
                }
                let f = weight_char_func(&kernel, support)?;
                let norm = match fam {
                    Some(fm) => candidate_norm_swept(&f, support, sp, fm, 2),
                    None => candidate_norm_quick(&f, support, sp),
                };
                match norm {
                    Ok(v) if v.is_finite() && v > 0.0 => {
                        Ok(Some(DualCandidate { label, kernel, support, f, norm: v }))
                    }
                    Ok(_) => Ok(None),
                    Err(e) if e.is_structural_infinity() => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        if candidates.is_empty() {
            return Err(Error::DegenerateCandidates);
        }
        Ok(DualCandidateFamily { target: b, candidates })
    }
}

/// The Köthe pairing of g against kernel * chi_support: the exact value of
/// int_{support} kernel |g| dx. Structurally divergent integrals surface as
/// errors for the caller to fold into +infinity.
pub fn pairing_abs(kernel: &Weight, support: Ball, g: &Func) -> Result<f64> {
    match g {
        Func::CharBall(bg) => match support.intersect(bg) {
            Some(i) => kernel.measure(i),
            None => Ok(0.0),
        },
        Func::PowerLog(pl) => {
            let gabs = if g.is_nonneg() {
                pl.clone()
            } else {
                pl.abs_pow_symbolic(1.0).ok_or_else(|| {
                    Error::RegimeNotCovered(
                        "pairing needs |g| expressible in the symbolic class".into(),
                    )
                })?
            };
            gabs.integrate_signed_against(kernel, support.lo(), support.hi())
        }
        Func::Tabulated(t) => {
            let mut total = 0.0;
            for (i, v) in t.vals.iter().enumerate() {
                let lo = t.xs[i].max(support.lo());
                let hi = t.xs[i + 1].min(support.hi());
                if hi > lo && *v != 0.0 {
                    total += v.abs() * kernel.measure_interval(lo, hi)?;
                }
            }
            Ok(total)
        }
    }
}

/// Certified lower bound for ||g|| in the dual space: the best ratio
/// int |fg| / ||f|| over the candidate family. Lower-only by construction;
/// an infinite pairing against a finite-norm candidate certifies that the
/// dual norm itself is infinite.
pub fn dual_norm_lower(g: &Func, cands: &DualCandidateFamily) -> Result<Estimate> {
    g.validate()?;
    if cands.candidates.is_empty() {
        return Err(Error::DegenerateCandidates);
    }
    let ratios: Vec<(f64, Ball)> = cands
        .candidates
        .par_iter()
        .map(|c| -> Result<(f64, Ball)> {
            let v = match pairing_abs(&c.kernel, c.support, g) {
                Ok(v) => v,
                Err(e) if e.is_structural_infinity() => f64::INFINITY,
                Err(e) => return Err(e),
            };
            Ok((v / c.norm, c.support))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = (0.0f64, cands.target);
    for (v, b) in ratios {
        if v > best.0 {
            best = (v, b);
        }
    }
    Ok(Estimate {
        lower: best.0,
        upper: None,
        trace: vec![best.0],
        stabilized: false,
        witness: Some(best.1),
    })
}

/// Direct Hölder upper bound for ||chi_B||': phi-ball^(1/p) sigma(B)^(1/p')
/// for p > 1 (phi at B globally, at the centered hull locally), phi / essinf
/// for p = 1. Constants are exactly 1 with this module's phi normalization.
/// +infinity when sigma(B) diverges or essinf vanishes; that alone proves
/// nothing, the shell bound may still be finite.
fn plain_dual_upper(b: Ball, sp: &SpaceParams) -> Result<f64> {
    let ph = match sp.scope {
        Scope::Global => sp.phi_of(b)?,
        Scope::Local => sp.phi_of(b.tilde())?,
    };
    if sp.p > 1.0 {
        let sig = match sp.sigma()?.measure(b) {
            Ok(v) => v,
            Err(e) if e.is_structural_infinity() => f64::INFINITY,
            Err(e) => return Err(e),
        };
        Ok(ph.powf(1.0 / sp.p) * sig.powf(1.0 / sp.p_conj()))
    } else {
        let inf = sp.w.ess_inf(b);
        Ok(if inf > 0.0 { ph / inf } else { f64::INFINITY })
    }
}

/// Dyadic-shell upper bound for ||chi_B||': peel B(0, |c|+r) into shells
/// A_j = { 2^(-j-1) s <= |x| < 2^(-j) s } and apply Hölder on each shell
/// against the centered ball B(0, 2^(-j) s). Stays finite in the improved
/// power ranges where sigma(B) itself diverges. Once shells sit inside the
/// innermost weight segment every term is exact power arithmetic and the
/// term ratio is constant, so the remaining tail is a geometric series at
/// the observed ratio; a ratio >= 1 there certifies the bound is infinite.
fn shell_dual_upper(b: Ball, sp: &SpaceParams) -> Result<f64> {
    let s2 = b.center.abs() + b.radius;
    let s1 = (b.center.abs() - b.radius).max(0.0);
    let sigma = if sp.p > 1.0 { Some(sp.sigma()?) } else { None };
    let inner_hi = sp.w.segments()[0].hi;
    let pc = if sp.p > 1.0 { sp.p_conj() } else { f64::INFINITY };
    let mut total = 0.0f64;
    let mut prev: Option<f64> = None;
    let mut inside = 0u32;
    let mut rho_hi = s2;
    for _ in 0..400 {
        let rho_lo = rho_hi / 2.0;
        let a = rho_lo.max(s1);
        let ph = sp.phi_of(Ball { center: 0.0, radius: rho_hi })?;
        let term = match &sigma {
            Some(sg) => {
                let sj = 2.0 * sg.measure_pos(a, rho_hi)?;
                ph.powf(1.0 / sp.p) * sj.powf(1.0 / pc)
            }
            None => {
                let inf = sp.w.ess_inf_pos(a, rho_hi);
                if inf > 0.0 {
                    ph / inf
                } else {
                    f64::INFINITY
                }
            }
        };
        if !term.is_finite() {
            return Ok(f64::INFINITY);
        }
        total += term;
        if rho_lo <= s1 {
            // the ball sits away from the origin: finitely many shells
            return Ok(total);
        }
        if rho_hi <= inner_hi {
            inside += 1;
        }
        if inside >= 2 {
            // both this shell and the previous lie in the innermost segment
            let q = term / prev.expect("inside >= 2 implies a previous term");
            if q >= 1.0 - 1e-9 {
                return Ok(f64::INFINITY);
            }
            return Ok(total + term * q / (1.0 - q));
        }
        prev = Some(term);
        rho_hi = rho_lo;
    }
    Ok(f64::INFINITY)
}

/// The smaller of the two closed-form upper bounds for ||chi_b||';
/// +infinity when neither applies.
pub fn dual_char_upper(b: Ball, sp: &SpaceParams) -> Result<f64> {
    Ok(plain_dual_upper(b, sp)?.min(shell_dual_upper(b, sp)?))
}

/// Dual norm of chi_b as an interval: certified lower from the canonical
/// candidates, upper = min(direct Hölder, dyadic shell) where finite.
/// upper = None flags the uncovered case (lower-only Estimate).
pub fn dual_char_norm(b: Ball, sp: &SpaceParams) -> Result<Estimate> {
    let cands = DualCandidateFamily::canonical(b, sp)?;
    let mut est = dual_norm_lower(&Func::CharBall(b), &cands)?;
    let up = dual_char_upper(b, sp)?;
    if up.is_finite() {
        est.upper = Some(up);
    }
    est.witness = Some(b);
    Ok(est)
}

/// Summability status of the dyadic expansion behind [`dual_m0_char`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailStatus {
    /// Geometric decay certified; the upper bound is finite.
    Summable,
    /// The term ratio settled at >= 1: the dyadic bound genuinely diverges.
    /// A meaningful outcome (the condition built on it fails), not an error.
    NonSummable,
    /// The ratio never settled within the iteration budget; no upper bound.
    Uncertified,
}

/// Interval for the dual norm of a maximal-function image, with the tail
/// diagnosis of its dyadic upper bound.
#[derive(Debug, Clone, Serialize)]
pub struct DyadicDualBound {
    pub est: Estimate,
    pub tail: TailStatus,
    /// Dyadic terms evaluated before truncation or giving up.
    pub terms: usize,
}

/// Dual-space norm of M0(chi_b)^(1/s), which for s = 1 is also the interval
/// used for M(chi_b): the lower bound pairs the exact symbolic profile
/// against candidates at dilated scales, the upper bound sums the pointwise
/// expansion M(chi_B)^(1/s) <= sum_{k>=0} min(1, 2^((2-k)/s)) chi_{2^k B}
/// term by term with exact per-ball dual uppers (the maximal function is
/// at most 2^(2-k) on the k-th dyadic shell). Each coefficient is
/// nondecreasing in s, so the bound inherits the s-monotonicity of the
/// profile itself. The tail is certified by the observed term ratio, which
/// settles to exact power arithmetic for power-regime weights.
pub fn dual_m0_char(b: Ball, sp: &SpaceParams, s: f64) -> Result<DyadicDualBound> {
    if !b.is_centered() {
        return Err(Error::Precondition("dyadic dual bound needs a centered ball".into()));
    }
    if !(s >= 1.0) || !s.is_finite() {
        return Err(Error::Precondition(format!("dyadic exponent must satisfy s >= 1, got {s}")));
    }
    let g = m0_func(b)
        .pow_scalar(1.0 / s)
        .expect("centered maximal profile is single-term piecewise power");
    let mut cands = DualCandidateFamily::canonical(b, sp)?;
    for k in [4.0, 16.0, 64.0] {
        if let Ok(more) = DualCandidateFamily::canonical(b.dilate(k), sp) {
            cands.candidates.extend(more.candidates);
        }
    }
    let lower = dual_norm_lower(&g, &cands)?;

    const SETTLE: usize = 8;
    const KMAX: usize = 160;
    let dual_up = |ball: Ball| -> Result<f64> {
        Ok(plain_dual_upper(ball, sp)?.min(shell_dual_upper(ball, sp)?))
    };
    let mut partial = 0.0f64;
    let mut terms: Vec<f64> = Vec::new();
    let mut upper: Option<f64> = None;
    let mut tail = TailStatus::Uncertified;
    for k in 0..=KMAX {
        let coeff = 2f64.powf((2.0 - k as f64) / s).min(1.0);
        let t = coeff * dual_up(b.dilate(2f64.powi(k as i32)))?;
        if !t.is_finite() {
            break;
        }
        partial += t;
        terms.push(t);
        if k >= SETTLE && terms.len() >= 4 {
            let n = terms.len();
            let r1 = terms[n - 1] / terms[n - 2];
            let r2 = terms[n - 2] / terms[n - 3];
            let r3 = terms[n - 3] / terms[n - 4];
            let settled =
                (r1 - r2).abs() <= 1e-9 * r1.max(r2) && (r2 - r3).abs() <= 1e-9 * r2.max(r3);
            if settled {
                if r1 >= 1.0 - 1e-9 {
                    tail = TailStatus::NonSummable;
                } else {
                    upper = Some(partial + terms[n - 1] * r1 / (1.0 - r1));
                    tail = TailStatus::Summable;
                }
                break;
            }
        }
    }
    let mut est = lower;
    est.upper = upper;
    Ok(DyadicDualBound { est, tail, terms: terms.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::TabulatedGrid;
    use crate::geometry::{BallKind, GridSpec};
    use crate::morrey::PhiSpec;

    fn sp(
        p: f64,
        phi: PhiSpec,
        w: Weight,
        scope: Scope,
    ) -> SpaceParams {
        SpaceParams::new(p, phi, w, scope).unwrap()
    }

    fn coarse_family() -> BallFamily {
        BallFamily::new(BallKind::All, GridSpec::coarse())
    }

    #[test]
    fn char_candidate_gives_exact_lower_for_identity_weight() {
        // candidate chi_B itself: ratio = |B| / ||chi_B|| with the closed
        // norm (2 r^(1-lambda))^(1/p)
        for &(p, lam) in &[(1.5, 0.25), (2.0, 0.5), (3.0, 0.75)] {
            let sp = sp(p, PhiSpec::samko(lam), Weight::one(), Scope::Global);
            let b = Ball { center: 0.0, radius: 1.0 };
            let cands = DualCandidateFamily::canonical(b, &sp).unwrap();
            let est = dual_norm_lower(&Func::CharBall(b), &cands).unwrap();
            let floor = b.len() / (2.0f64).powf(1.0 / p);
            assert!(
                est.lower >= floor * (1.0 - 1e-9),
                "p={p} lam={lam}: lower {} < floor {floor}",
                est.lower
            );
        }
    }

    #[test]
    fn zero_target_has_zero_lower() {
        let sp = sp(2.0, PhiSpec::samko(0.5), Weight::one(), Scope::Global);
        let b = Ball { center: 0.0, radius: 1.0 };
        let cands = DualCandidateFamily::canonical(b, &sp).unwrap();
        let zero = Func::Tabulated(TabulatedGrid::new(vec![-1.0, 1.0], vec![0.0]).unwrap());
        let est = dual_norm_lower(&zero, &cands).unwrap();
        assert_eq!(est.lower, 0.0);
    }

    #[test]
    fn local_sigma_candidate_recovers_dual_closed_form() {
        // the dual-exponent candidate reproduces the two-sided local value
        // sigma(B)^(1/p') phi(B~)^(1/p) exactly on this instance
        let lam = 0.5;
        let p = 2.0;
        let sp = sp(p, PhiSpec::samko(lam), Weight::one(), Scope::Local);
        let b = Ball { center: 4.0, radius: 1.0 };
        let est = dual_char_norm(b, &sp).unwrap();
        let expect = 2f64.sqrt() * 5f64.powf(lam / 2.0);
        assert!((est.lower - expect).abs() <= 1e-9 * expect, "lower {}", est.lower);
        let up = est.upper.expect("local p>1 closed form present");
        assert!((up - expect).abs() <= 1e-9 * expect, "upper {up}");
    }

    #[test]
    fn global_p1_upper_is_phi_over_essinf() {
        let lam = 0.3;
        let sp = sp(1.0, PhiSpec::samko(lam), Weight::one(), Scope::Global);
        for &r in &[0.5, 1.0, 8.0] {
            let b = Ball { center: 0.0, radius: r };
            let est = dual_char_norm(b, &sp).unwrap();
            let up = est.upper.expect("identity weight is covered");
            let expect = r.powf(lam);
            assert!((up - expect).abs() <= 1e-12 * expect, "r={r}: {up} vs {expect}");
            assert!(
                est.lower <= up * (1.0 + 1e-9),
                "r={r}: lower {} witness {:?} upper {up}",
                est.lower,
                est.witness
            );
        }
    }

    #[test]
    fn uncovered_p1_growth_is_lower_only() {
        // p = 1, w = |x|^beta with beta above the phi exponent: both upper
        // routes diverge and the estimate is flagged lower-only
        let sp = sp(1.0, PhiSpec::samko(0.5), Weight::power(0.8), Scope::Global);
        let est = dual_char_norm(Ball { center: 0.0, radius: 1.0 }, &sp).unwrap();
        assert!(est.upper.is_none());
        assert!(est.lower > 0.0);
    }

    #[test]
    fn shell_upper_covers_sigma_divergent_range() {
        // beta in (p-1, p-1+lambda): sigma is not locally integrable, the
        // direct Hölder bound is infinite, the shell bound is finite
        let lam = 0.5;
        let p = 2.0;
        let sp = sp(p, PhiSpec::samko(lam), Weight::power(1.2), Scope::Global);
        let b = Ball { center: 0.0, radius: 1.0 };
        assert!(plain_dual_upper(b, &sp).unwrap().is_infinite());
        let shell = shell_dual_upper(b, &sp).unwrap();
        assert!(shell.is_finite() && shell > 0.0, "shell {shell}");
        let est = dual_char_norm(b, &sp).unwrap();
        assert_eq!(est.upper, Some(shell));
    }

    #[test]
    fn holder_consistency_against_upper() {
        // int |f chi_B| <= ||f|| * upper(chi_B) for every candidate f
        let fam = coarse_family();
        for &beta in &[-0.5, 0.0, 0.5] {
            for scope in [Scope::Global, Scope::Local] {
                let sp = sp(2.0, PhiSpec::samko(0.5), Weight::power(beta), scope);
                for b in [Ball { center: 0.0, radius: 1.0 }, Ball { center: 6.0, radius: 1.0 }] {
                    let up = plain_dual_upper(b, &sp).unwrap().min(shell_dual_upper(b, &sp).unwrap());
                    let cands = DualCandidateFamily::for_ball(b, &sp, &fam).unwrap();
                    for c in &cands.candidates {
                        let pairing = pairing_abs(&c.kernel, c.support, &Func::CharBall(b)).unwrap();
                        assert!(
                            pairing <= c.norm * up * (1.0 + 1e-9),
                            "beta={beta} {:?} cand {}: {pairing} > {} * {up}",
                            scope,
                            c.label,
                            c.norm
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn lower_below_upper_across_power_sweep() {
        for phi in [PhiSpec::samko(0.5), PhiSpec::komori_shirai(0.5), PhiSpec::poelhuis_torchinsky(0.5)] {
            for &beta in &[-0.5, 0.0, 0.75] {
                for &p in &[1.5, 2.0] {
                    let Ok(sp) = SpaceParams::new(p, phi, Weight::power(beta), Scope::Local)
                    else {
                        continue;
                    };
                    for b in [Ball { center: 0.0, radius: 2.0 }, Ball { center: 8.0, radius: 1.0 }] {
                        let est = dual_char_norm(b, &sp).unwrap();
                        if let Some(up) = est.upper {
                            assert!(
                                est.lower <= up * (1.0 + 1e-9),
                                "{phi:?} beta={beta} p={p} {b:?}: {} > {up}",
                                est.lower
                            );
                            assert!(
                                up <= 8.0 * est.lower,
                                "{phi:?} beta={beta} p={p} {b:?}: band {up} vs {}",
                                est.lower
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn p_monotonicity_transfer_on_closed_forms() {
        // per ball: value_p <= value_q^(q/p) for q < p, where value_p =
        // ||chi_B||_p ||chi_B||_p,dual / |B|; phi cancels so this is the
        // classical per-ball Jensen inequality
        let lam = 0.5;
        for &beta in &[-0.4, 0.0, 0.3] {
            for b in [Ball { center: 0.0, radius: 1.0 }, Ball { center: 5.0, radius: 0.5 }] {
                let value = |p: f64| -> f64 {
                    let sp = sp(p, PhiSpec::samko(lam), Weight::power(beta), Scope::Global);
                    let norm = char_norm_closed(b, &sp).unwrap();
                    let dual = plain_dual_upper(b, &sp).unwrap();
                    norm * dual / b.len()
                };
                for &(q, p) in &[(1.5, 2.0), (2.0, 3.0), (1.5, 3.0)] {
                    let vp = value(p);
                    let vq = value(q);
                    assert!(
                        vp <= vq.powf(q / p) * (1.0 + 1e-9),
                        "beta={beta} {b:?} q={q} p={p}: {vp} vs {}",
                        vq.powf(q / p)
                    );
                }
            }
        }
    }

    #[test]
    fn dyadic_bound_fails_on_borderline_weight() {
        // w = |x|^(lambda-1) under Samko(lambda): the dyadic terms are
        // exactly flat, the expansion cannot converge for any p
        for &p in &[1.0, 2.0] {
            let lam = 0.6;
            let sp = sp(p, PhiSpec::samko(lam), Weight::power(lam - 1.0), Scope::Global);
            let out = dual_m0_char(Ball { center: 0.0, radius: 1.0 }, &sp, 1.0).unwrap();
            assert_eq!(out.tail, TailStatus::NonSummable, "p={p}");
            assert!(out.est.upper.is_none());
        }
    }

    #[test]
    fn dyadic_bound_two_sided_for_identity_weight() {
        let sp = sp(2.0, PhiSpec::samko(0.5), Weight::one(), Scope::Global);
        let out = dual_m0_char(Ball { center: 0.0, radius: 1.0 }, &sp, 1.1).unwrap();
        assert_eq!(out.tail, TailStatus::Summable);
        let up = out.est.upper.expect("summable expansion has an upper bound");
        assert!(out.est.lower > 0.0 && out.est.lower <= up * (1.0 + 1e-9));
    }

    #[test]
    fn dyadic_bound_monotone_in_s() {
        // M(chi_B) <= 1, so the s-th root grows with s on both sides; the
        // grid stays below s = 4/3, where this instance's expansion stops
        // converging (per-ball uppers grow like (2^k)^(3/4))
        let sp = sp(2.0, PhiSpec::samko(0.5), Weight::one(), Scope::Global);
        let b = Ball { center: 0.0, radius: 1.0 };
        let mut prev_lower = 0.0;
        let mut prev_upper = 0.0;
        for &s in &[1.0, 1.1, 1.2, 1.3] {
            let out = dual_m0_char(b, &sp, s).unwrap();
            let up = out.est.upper.unwrap_or_else(|| panic!("s={s}: no upper ({:?})", out.tail));
            assert!(out.est.lower >= prev_lower * (1.0 - 1e-12), "s={s}");
            assert!(up >= prev_upper * (1.0 - 1e-12), "s={s}");
            prev_lower = out.est.lower;
            prev_upper = up;
        }
    }

    #[test]
    fn candidate_family_drops_out_of_space_kernels() {
        // beta = 1.2, p = 2: sigma = w^(1-p') has exponent -1.2, not locally
        // integrable, so the dual-exponent candidate must be absent
        let sp = sp(2.0, PhiSpec::samko(0.5), Weight::power(1.2), Scope::Global);
        let cands =
            DualCandidateFamily::canonical(Ball { center: 0.0, radius: 1.0 }, &sp).unwrap();
        assert!(cands.candidates.iter().all(|c| c.label != "dual-exponent"));
        assert!(cands.candidates.iter().any(|c| c.label == "char"));
    }


    #[test]
    fn pairing_handles_tabulated_targets() {
        let sp = sp(2.0, PhiSpec::samko(0.5), Weight::one(), Scope::Global);
        let _ = sp;
        let g = Func::Tabulated(
            TabulatedGrid::new(vec![-1.0, 0.0, 2.0], vec![3.0, -0.5]).unwrap(),
        );
        let support = Ball { center: 0.5, radius: 1.0 };
        // int over [-0.5, 1.5]: 3 * |[-0.5,0]| + 0.5 * |[0,1.5]| = 1.5 + 0.75
        let v = pairing_abs(&Weight::one(), support, &g).unwrap();
        assert!((v - 2.25).abs() < 1e-12, "{v}");
    }
}
