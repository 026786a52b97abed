//! Pointwise splitting of the maximal function into its centered and local
//! parts, evaluated over one shared candidate pool so the comparison has no
//! discretization slack on the lower side: every ball scored for M is scored
//! for M0 or M_loc too, and every middle ball's centered majorant joins the
//! M0 pool. The bands checked here are therefore exact up to roundoff,
//! not heuristic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{csv_f, write_csv, ExperimentSpec, ExperimentTable};
use crate::error::Result;
use crate::func::{Func, PowerLogPiece, Side, TabulatedGrid};
use crate::geometry::Ball;
use crate::operators::{decomposition_upper_constant, decomposition_values};

const SLACK: f64 = 1.0 + 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct PointRow {
    pub input: String,
    pub x: f64,
    pub m0: f64,
    pub m_loc: f64,
    pub m: f64,
    /// m / (m0 + m_loc).
    pub ratio: f64,
    pub in_band: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstancyRow {
    pub input: String,
    pub center: f64,
    pub radius: f64,
    pub m0_min: f64,
    pub m0_max: f64,
    pub ratio: f64,
    pub in_band: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionTable {
    pub points: Vec<PointRow>,
    pub constancy: Vec<ConstancyRow>,
    pub band_lo: f64,
    pub band_hi: f64,
    pub constancy_cap: f64,
}

/// Deterministic input family: two fixed anchors, then randomized shapes
/// cycling through indicator / step / power profiles.
fn build_inputs(spec: &ExperimentSpec) -> Result<Vec<(String, Func)>> {
    let mut out: Vec<(String, Func)> = Vec::new();
    out.push(("char-unit".into(), Func::char_ball(Ball { center: 0.0, radius: 1.0 })));
    out.push((
        "constant-one".into(),
        Func::power_log(vec![PowerLogPiece::single(0.0, f64::INFINITY, Side::Both, 1.0, 0.0, 0)])?,
    ));
    for i in 2..spec.inputs {
        let mut rng = ChaCha8Rng::seed_from_u64(
            spec.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        match i % 3 {
            0 => {
                let c = rng.gen_range(0.1..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let r = rng.gen_range(0.1..2.0);
                out.push((format!("char c={c:.3} r={r:.3}"), Func::char_ball(Ball { center: c, radius: r })));
            }
            1 => {
                let cells = rng.gen_range(3..=7usize);
                let mut mags = vec![0.0];
                for _ in 0..cells {
                    mags.push(rng.gen_range(0.05..5.0));
                }
                mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
                mags.dedup();
                let vals: Vec<f64> = (1..mags.len()).map(|_| rng.gen_range(0.0..4.0)).collect();
                let grid = TabulatedGrid::even_from_magnitudes(&mags, &vals)?;
                out.push((format!("step cells={}", vals.len()), Func::Tabulated(grid)));
            }
            _ => {
                let a = rng.gen_range(-0.4..1.2);
                let rr = rng.gen_range(0.5..4.0);
                let coeff = rng.gen_range(0.5..2.0);
                let f = Func::power_log(vec![PowerLogPiece::single(0.0, rr, Side::Both, coeff, a, 0)])?;
                out.push((format!("power a={a:.3} R={rr:.3}"), f));
            }
        }
    }
    Ok(out)
}

fn sample_points(spec: &ExperimentSpec, salt: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ salt.wrapping_mul(0xD134_2543_DE82_EF95));
    (0..spec.points_per_input)
        .map(|_| {
            let u = rng.gen_range(-2.5..2.5);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            sign * 10f64.powf(u)
        })
        .collect()
}

pub fn run_decomposition_checks(spec: &ExperimentSpec) -> Result<DecompositionTable> {
    spec.validate()?;
    let band_hi = decomposition_upper_constant(spec.kappa);
    let inputs = build_inputs(spec)?;

    let points: Vec<PointRow> = inputs
        .par_iter()
        .enumerate()
        .map(|(i, (label, f))| {
            let mut rows = Vec::new();
            for x in sample_points(spec, i as u64) {
                let v = decomposition_values(f, x, &spec.grid, spec.kappa)?;
                let sum = v.m0 + v.m_loc;
                let ratio = if sum == 0.0 && v.m == 0.0 { 1.0 } else { v.m / sum };
                let in_band = 0.5 * sum <= v.m * SLACK && v.m <= band_hi * sum * SLACK;
                rows.push(PointRow {
                    input: label.clone(),
                    x,
                    m0: v.m0,
                    m_loc: v.m_loc,
                    m: v.m,
                    ratio,
                    in_band,
                });
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    // M0 depends only on |x| and decreases in it, so on a ball with
    // |c| >= 4r the spread of values is at most (|c|+r)/(|c|-r) <= 5/3.
    // The cap of 2 leaves room for pool differences between the samples.
    let constancy: Vec<ConstancyRow> = inputs
        .par_iter()
        .enumerate()
        .map(|(i, (label, f))| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(spec.seed ^ (i as u64).wrapping_mul(0xA076_1D64_78BD_642F));
            let mut rows = Vec::new();
            for _ in 0..3 {
                let r = 10f64.powf(rng.gen_range(-1.5..0.5));
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let c = sign * 4.0 * r * rng.gen_range(1.5..8.0);
                let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                for k in 0..5 {
                    let x = c - r + 2.0 * r * (k as f64 + 0.5) / 5.0;
                    let m0 = decomposition_values(f, x, &spec.grid, spec.kappa)?.m0;
                    lo = lo.min(m0);
                    hi = hi.max(m0);
                }
                let ratio = if lo == 0.0 && hi == 0.0 { 1.0 } else { hi / lo };
                rows.push(ConstancyRow {
                    input: label.clone(),
                    center: c,
                    radius: r,
                    m0_min: lo,
                    m0_max: hi,
                    ratio,
                    in_band: ratio <= 2.0 * SLACK,
                });
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    Ok(DecompositionTable { points, constancy, band_lo: 0.5, band_hi, constancy_cap: 2.0 })
}

impl ExperimentTable for DecompositionTable {
    fn name(&self) -> &'static str {
        "decomposition"
    }

    fn csv(&self) -> String {
        let header = ["row", "input", "x_or_center", "radius", "m0", "m_loc", "m", "m0_min", "m0_max", "ratio", "in_band"];
        let mut records: Vec<Vec<String>> = Vec::new();
        for r in &self.points {
            records.push(vec![
                "point".into(),
                r.input.clone(),
                csv_f(r.x),
                String::new(),
                csv_f(r.m0),
                csv_f(r.m_loc),
                csv_f(r.m),
                String::new(),
                String::new(),
                csv_f(r.ratio),
                r.in_band.to_string(),
            ]);
        }
        for r in &self.constancy {
            records.push(vec![
                "constancy".into(),
                r.input.clone(),
                csv_f(r.center),
                csv_f(r.radius),
                String::new(),
                String::new(),
                String::new(),
                csv_f(r.m0_min),
                csv_f(r.m0_max),
                csv_f(r.ratio),
                r.in_band.to_string(),
            ]);
        }
        write_csv(&header, records)
    }

    fn summary(&self) -> serde_json::Value {
        let worst_low = self.points.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        let worst_high = self.points.iter().map(|r| r.ratio).fold(0.0, f64::max);
        let worst_const = self.constancy.iter().map(|r| r.ratio).fold(0.0, f64::max);
        serde_json::json!({
            "experiment": "decomposition",
            "point_rows": self.points.len(),
            "constancy_rows": self.constancy.len(),
            "band": [self.band_lo, self.band_hi],
            "ratio_min": worst_low,
            "ratio_max": worst_high,
            "constancy_cap": self.constancy_cap,
            "constancy_max": worst_const,
            "violations": self.violations(),
        })
    }

    fn violations(&self) -> usize {
        self.points.iter().filter(|r| !r.in_band).count()
            + self.constancy.iter().filter(|r| !r.in_band).count()
    }
}
