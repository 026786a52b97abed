use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval [center - radius, center + radius]; |B| = 2r.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: f64,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: f64, radius: f64) -> Result<Ball> {
        if !center.is_finite() || !radius.is_finite() || radius <= 0.0 {
            return Err(Error::BadBall { center, radius });
        }
        Ok(Ball { center, radius })
    }

    pub fn lo(&self) -> f64 {
        self.center - self.radius
    }

    pub fn hi(&self) -> f64 {
        self.center + self.radius
    }

    pub fn len(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo() <= x && x <= self.hi()
    }

    /// B1 subset of B2 as closed intervals.
    pub fn subset_of(&self, other: &Ball) -> bool {
        (self.center - other.center).abs() <= other.radius - self.radius + 1e-15 * other.radius
    }

    /// Smallest centered ball containing B: B(0, |c| + r).
    pub fn tilde(&self) -> Ball {
        Ball { center: 0.0, radius: self.center.abs() + self.radius }
    }

    pub fn dilate(&self, s: f64) -> Ball {
        debug_assert!(s > 0.0);
        Ball { center: self.center, radius: self.radius * s }
    }

    pub fn is_centered(&self) -> bool {
        self.center == 0.0
    }

    /// |c_B| > 4 r_B: the off-center regime where M0 is essentially constant.
    pub fn is_off_center(&self) -> bool {
        self.center.abs() > 4.0 * self.radius
    }

    /// Intersection as a ball, None when the interiors are disjoint. The
    /// radius comes from (r1 + r2) - |c1 - c2| rather than endpoint
    /// subtraction, so short overlaps far from the origin keep full relative
    /// precision (endpoints c +- r cancel to ~ulp(|c|) there).
    pub fn intersect(&self, other: &Ball) -> Option<Ball> {
        let d = (self.center - other.center).abs();
        if d + other.radius <= self.radius {
            return Some(*other);
        }
        if d + self.radius <= other.radius {
            return Some(*self);
        }
        let overlap = (self.radius + other.radius) - d;
        if overlap <= 0.0 {
            return None;
        }
        let sign = if self.center <= other.center { 1.0 } else { -1.0 };
        Some(Ball {
            center: 0.5 * (self.center + other.center) + sign * 0.5 * (self.radius - other.radius),
            radius: 0.5 * overlap,
        })
    }
}

/// Geometric (log-equispaced, base 10) grid for radii and center magnitudes.
///
/// Refinement level l doubles points_per_decade and widens the range by a
/// decade on each end; suprema are accepted only once they are stable under
/// this refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub c_max: f64,
    pub points_per_decade: u32,
}

impl Default for GridSpec {
    fn default() -> Self {
        // 2^+-20 ~ 10^+-6, scaled by the problem's natural length 1.
        GridSpec {
            r_min: (2.0f64).powi(-20),
            r_max: (2.0f64).powi(20),
            c_max: (2.0f64).powi(20),
            points_per_decade: 16,
        }
    }
}

impl GridSpec {
    pub fn new(r_min: f64, r_max: f64, c_max: f64, points_per_decade: u32) -> Result<GridSpec> {
        let g = GridSpec { r_min, r_max, c_max, points_per_decade };
        g.validate()?;
        Ok(g)
    }

    /// Coarse grid for sweeps where every cell runs the full refinement ladder.
    pub fn coarse() -> GridSpec {
        GridSpec { r_min: 1e-4, r_max: 1e4, c_max: 1e4, points_per_decade: 4 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.r_min > 0.0
            && self.r_min.is_finite()
            && self.r_max >= self.r_min
            && self.r_max.is_finite()
            && self.c_max >= self.r_min
            && self.c_max.is_finite()
            && self.points_per_decade >= 1
            && self.points_per_decade <= 4096;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid grid spec: {self:?}")))
        }
    }

    pub fn refined(&self, level: u32) -> GridSpec {
        let widen = 10f64.powi(level as i32);
        GridSpec {
            r_min: self.r_min / widen,
            r_max: self.r_max * widen,
            c_max: self.c_max * widen,
            points_per_decade: self.points_per_decade << level,
        }
    }

    /// Log-equispaced values in [lo, hi], endpoints included.
    pub fn log_grid(&self, lo: f64, hi: f64) -> Vec<f64> {
        debug_assert!(lo > 0.0 && hi >= lo);
        let ppd = self.points_per_decade as f64;
        let decades = (hi / lo).log10();
        let n = (decades * ppd).ceil() as usize;
        let mut out = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let v = lo * 10f64.powf(k as f64 / ppd);
            out.push(v.min(hi));
        }
        out.dedup();
        out
    }

    pub fn radii(&self) -> Vec<f64> {
        self.log_grid(self.r_min, self.r_max)
    }

    /// Center magnitudes share the radius grid's lower end so that shrinking
    /// balls hugging the origin enter the family under refinement.
    pub fn center_magnitudes(&self) -> Vec<f64> {
        self.log_grid(self.r_min, self.c_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BallKind {
    /// Centered and off-center balls, both signs of center.
    All,
    /// c = 0 only.
    Centered,
    /// |c| > 4r strictly.
    OffCenter,
    /// |c| = 4r exactly, enumerated on the radius grid.
    Boundary,
    /// r < kappa |c| strictly.
    Local { kappa: f64 },
}

/// Tangency ratios 1 +- 2^-j sampled by the exhaustive family, deep enough
/// to resolve shape peaks within about half a percent of the origin.
const TANGENT_STEPS: i32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallFamily {
    pub kind: BallKind,
    pub grid: GridSpec,
}

impl BallFamily {
    pub fn new(kind: BallKind, grid: GridSpec) -> BallFamily {
        BallFamily { kind, grid }
    }

    pub fn centered(grid: GridSpec) -> BallFamily {
        BallFamily { kind: BallKind::Centered, grid }
    }

    pub fn all(grid: GridSpec) -> BallFamily {
        BallFamily { kind: BallKind::All, grid }
    }

    pub fn refined(&self, level: u32) -> BallFamily {
        BallFamily { kind: self.kind, grid: self.grid.refined(level) }
    }

    /// Deterministic enumeration, sorted by (center, radius).
    /// An unsatisfiable kind/grid combination is an error, not a silent
    /// empty sweep.
    pub fn enumerate(&self) -> Result<Vec<Ball>> {
        if let BallKind::Local { kappa } = self.kind {
            if !(kappa > 0.0) || !kappa.is_finite() {
                return Err(Error::Config(format!("local family needs kappa > 0, got {kappa}")));
            }
        }
        self.grid.validate()?;
        let radii = self.grid.radii();
        let mags = self.grid.center_magnitudes();
        let mut out: Vec<Ball> = Vec::new();
        let push_signed = |mag: f64, r: f64, out: &mut Vec<Ball>| {
            out.push(Ball { center: mag, radius: r });
            out.push(Ball { center: -mag, radius: r });
        };
        match self.kind {
            BallKind::Centered => {
                for &r in &radii {
                    out.push(Ball { center: 0.0, radius: r });
                }
            }
            BallKind::All => {
                for &r in &radii {
                    out.push(Ball { center: 0.0, radius: r });
                    for &m in &mags {
                        push_signed(m, r, &mut out);
                    }
                }
                // Singular weights peak on balls nearly tangent to the
                // origin, and the product grid only realizes ratios
                // |c|/r = 10^(k/ppd), so the sup near tangency creeps under
                // refinement forever. The ratios 1 +- 2^-j are scale
                // invariant, hence identical across levels: sample them
                // directly, like the local family samples its boundary.
                for &r in &radii {
                    if r <= self.grid.c_max {
                        push_signed(r, r, &mut out);
                    }
                    for j in 1..=TANGENT_STEPS {
                        let s = (0.5f64).powi(j);
                        for mag in [r * (1.0 - s), r * (1.0 + s)] {
                            if mag <= self.grid.c_max {
                                push_signed(mag, r, &mut out);
                            }
                        }
                    }
                }
            }
            BallKind::OffCenter => {
                for &r in &radii {
                    for &m in &mags {
                        if m > 4.0 * r {
                            push_signed(m, r, &mut out);
                        }
                    }
                }
            }
            BallKind::Boundary => {
                for &r in &radii {
                    if 4.0 * r <= self.grid.c_max {
                        push_signed(4.0 * r, r, &mut out);
                    }
                }
            }
            BallKind::Local { kappa } => {
                for &r in &radii {
                    for &m in &mags {
                        if r < kappa * m {
                            push_signed(m, r, &mut out);
                        }
                    }
                }
                // The constraint boundary r = kappa |c| never sits on a log
                // grid, so the best grid ratio creeps toward kappa under
                // refinement and a sup attained there looks unstabilized.
                // Per-ball integrals are continuous in r, hence the sup over
                // r < kappa |c| equals its value on the boundary: sample it.
                for &m in &mags {
                    let r = kappa * m;
                    if r >= self.grid.r_min && r <= self.grid.r_max {
                        push_signed(m, r, &mut out);
                    }
                }
            }
        }
        out.sort_by(|a, b| {
            (a.center, a.radius)
                .partial_cmp(&(b.center, b.radius))
                .expect("grid values are finite")
        });
        out.dedup();
        if out.is_empty() {
            return Err(Error::EmptyFamily(format!(
                "{:?} over r in [{:.3e}, {:.3e}], |c| <= {:.3e}",
                self.kind, self.grid.r_min, self.grid.r_max, self.grid.c_max
            )));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(r_min: f64, r_max: f64, c_max: f64, ppd: u32) -> GridSpec {
        GridSpec::new(r_min, r_max, c_max, ppd).unwrap()
    }

    #[test]
    fn tilde_of_offcenter_ball() {
        let b = Ball::new(4.0, 1.0).unwrap();
        assert_eq!(b.tilde(), Ball { center: 0.0, radius: 5.0 });
    }

    #[test]
    fn enumerate_is_deterministic_and_deduped() {
        let f = BallFamily::all(grid(0.1, 10.0, 10.0, 2));
        let a = f.enumerate().unwrap();
        let b = f.enumerate().unwrap();
        assert_eq!(a, b);
        let mut c = a.clone();
        c.dedup();
        assert_eq!(a.len(), c.len());
    }

    #[test]
    fn off_center_predicate_is_exact() {
        let f = BallFamily::new(BallKind::OffCenter, grid(0.1, 10.0, 100.0, 3));
        for b in f.enumerate().unwrap() {
            assert!(b.center.abs() > 4.0 * b.radius);
        }
    }

    #[test]
    fn boundary_family_sits_on_the_ratio_four_line() {
        let f = BallFamily::new(BallKind::Boundary, grid(0.5, 8.0, 1000.0, 1));
        for b in f.enumerate().unwrap() {
            assert_eq!(b.center.abs(), 4.0 * b.radius);
        }
    }

    #[test]
    fn unsatisfiable_family_is_reported() {
        // needs |c| > 4r >= 4 but centers stop at 4
        let f = BallFamily::new(BallKind::OffCenter, grid(1.0, 2.0, 4.0, 1));
        match f.enumerate() {
            Err(Error::EmptyFamily(_)) => {}
            other => panic!("expected EmptyFamily, got {other:?}"),
        }
    }

    #[test]
    fn local_family_respects_kappa() {
        let f = BallFamily::new(BallKind::Local { kappa: 0.25 }, grid(0.1, 10.0, 100.0, 2));
        let balls = f.enumerate().unwrap();
        for b in &balls {
            assert!(b.radius <= 0.25 * b.center.abs());
        }
        // The closure of the constraint is sampled exactly.
        assert!(balls.iter().any(|b| b.radius == 0.25 * b.center.abs()));
    }

    #[test]
    fn refinement_doubles_density_and_widens_range() {
        let g = grid(1e-2, 1e2, 1e2, 4);
        let r = g.refined(1);
        assert_eq!(r.points_per_decade, 8);
        assert!((r.r_min - 1e-3).abs() < 1e-18);
        assert!((r.r_max - 1e3).abs() < 1e-12);
        // every coarse radius stays within one grid step of a refined point
        let coarse = g.radii();
        let fine = r.radii();
        for &v in &coarse {
            let near = fine.iter().any(|&u| (u / v).log10().abs() < 1.0 / 8.0);
            assert!(near, "coarse point {v} lost after refinement");
        }
    }

    #[test]
    fn centered_family_spans_requested_decades() {
        let f = BallFamily::centered(grid(1e-3, 1e3, 1e3, 1));
        let balls = f.enumerate().unwrap();
        assert_eq!(balls.len(), 7);
        assert!(balls.iter().all(|b| b.center == 0.0));
    }
}
