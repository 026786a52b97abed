//! Power-weight range agreement: closed-form sharp ranges vs the numeric
//! condition sweeps, cell by cell.

use rayon::prelude::*;
use serde::Serialize;

use super::{csv_f, sharp_power_range, write_csv, ExperimentSpec, ExperimentTable, Preset};
use crate::error::Result;
use crate::estimate::Verdict;
use crate::geometry::BallFamily;
use crate::morrey::{Scope, SpaceParams};
use crate::muckenhoupt::{extrapolation_condition, morrey_ap_constant_with};
use crate::weight::Weight;

/// One sweep cell. `verdict` is the numeric outcome of the condition sweep
/// (`finite-stable`, `diverging`, `inconclusive`), or `invalid-space` when
/// the (phi, w) pair fails admissibility up front, or `error` when a sweep
/// failed non-structurally. `ext_verdict` is the stronger dyadic-sum
/// condition at (q = p, s = 1), reported as data and not judged: its upper
/// mechanism certifies nothing below the range.
#[derive(Debug, Clone, Serialize)]
pub struct RangeRow {
    pub preset: &'static str,
    pub p: f64,
    pub lambda: f64,
    pub beta: f64,
    pub range_lo: f64,
    pub range_hi: f64,
    pub predicted: bool,
    pub verdict: String,
    pub agree: bool,
    pub endpoint_distance: f64,
    pub constant_lower: f64,
    pub constant_upper: f64,
    pub ext_verdict: String,
    pub witness_center: f64,
    pub witness_radius: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RangesTable {
    pub rows: Vec<RangeRow>,
    pub cells: usize,
    pub agreements: usize,
    pub agreement_rate: f64,
    /// Largest endpoint distance among disagreeing cells (0 when none).
    pub max_disagreement_distance: f64,
    /// Disagreements farther than this from an endpoint count as violations.
    pub discretization_zone: f64,
}

/// Per-cell beta grid when the spec gives none: both endpoints offset by
/// +-`off`, plus the midpoint (two interior points when the range is
/// right-unbounded).
fn auto_betas(range: &super::PowerRange, off: f64) -> Vec<f64> {
    let mut v = vec![range.lo - off, range.lo + off];
    if range.hi.is_finite() {
        v.push(0.5 * (range.lo + range.hi));
        v.push(range.hi - off);
        v.push(range.hi + off);
    } else {
        v.push(range.lo + 1.0);
        v.push(range.lo + 3.0);
    }
    v
}

fn eval_cell(preset: Preset, p: f64, lambda: f64, beta: f64, spec: &ExperimentSpec) -> RangeRow {
    let phi = preset.phi(lambda);
    let range = sharp_power_range(p, &phi).expect("presets with n = 1 always have a range");
    let predicted = range.contains(beta);
    let mut row = RangeRow {
        preset: preset.label(),
        p,
        lambda,
        beta,
        range_lo: range.lo,
        range_hi: range.hi,
        predicted,
        verdict: String::new(),
        agree: false,
        endpoint_distance: range.endpoint_distance(beta),
        constant_lower: f64::NAN,
        constant_upper: f64::NAN,
        ext_verdict: String::new(),
        witness_center: f64::NAN,
        witness_radius: f64::NAN,
    };
    let sp = match SpaceParams::new(p, phi, Weight::power(beta), Scope::Global) {
        Ok(sp) => sp,
        Err(_) => {
            // weight non-integrable or the space degenerates structurally
            row.verdict = "invalid-space".into();
            row.agree = !predicted;
            return row;
        }
    };
    match morrey_ap_constant_with(&sp, &BallFamily::all(spec.grid), spec.levels) {
        Ok(rep) => {
            row.verdict = rep.verdict.to_string();
            row.agree = match rep.verdict {
                Verdict::FiniteStable => predicted,
                Verdict::DivergingUnderRefinement => !predicted,
                Verdict::Inconclusive => false,
            };
            row.constant_lower = rep.constant.lower;
            row.constant_upper = rep.constant.upper.unwrap_or(f64::NAN);
            if let Some(b) = rep.constant.witness {
                row.witness_center = b.center;
                row.witness_radius = b.radius;
            }
        }
        Err(_) => {
            row.verdict = "error".into();
        }
    }
    row.ext_verdict = match extrapolation_condition(&sp, p, 1.0) {
        Ok(rep) => rep.verdict.to_string(),
        Err(_) => "error".into(),
    };
    row
}

pub fn run_power_weight_ranges(spec: &ExperimentSpec) -> Result<RangesTable> {
    spec.validate()?;
    let mut cells: Vec<(Preset, f64, f64, f64)> = Vec::new();
    for &preset in &spec.presets {
        for &p in &spec.ps {
            for &lambda in &spec.lambdas {
                let betas = if spec.betas.is_empty() {
                    let range = sharp_power_range(p, &preset.phi(lambda))
                        .expect("presets with n = 1 always have a range");
                    auto_betas(&range, spec.endpoint_offset)
                } else {
                    spec.betas.clone()
                };
                for beta in betas {
                    cells.push((preset, p, lambda, beta));
                }
            }
        }
    }
    let rows: Vec<RangeRow> = cells
        .into_par_iter()
        .map(|(preset, p, lambda, beta)| eval_cell(preset, p, lambda, beta, spec))
        .collect();
    let cells = rows.len();
    let agreements = rows.iter().filter(|r| r.agree).count();
    let max_disagreement_distance = rows
        .iter()
        .filter(|r| !r.agree)
        .map(|r| r.endpoint_distance)
        .fold(0.0f64, f64::max);
    Ok(RangesTable {
        rows,
        cells,
        agreements,
        agreement_rate: agreements as f64 / cells.max(1) as f64,
        max_disagreement_distance,
        discretization_zone: 0.05,
    })
}

impl ExperimentTable for RangesTable {
    fn name(&self) -> &'static str {
        "ranges"
    }

    fn csv(&self) -> String {
        let header = [
            "preset", "p", "lambda", "beta", "range_lo", "range_hi", "predicted", "verdict",
            "agree", "endpoint_distance", "constant_lower", "constant_upper", "ext_verdict",
            "witness_center", "witness_radius",
        ];
        let records = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.preset.to_string(),
                    csv_f(r.p),
                    csv_f(r.lambda),
                    csv_f(r.beta),
                    csv_f(r.range_lo),
                    csv_f(r.range_hi),
                    r.predicted.to_string(),
                    r.verdict.clone(),
                    r.agree.to_string(),
                    csv_f(r.endpoint_distance),
                    csv_f(r.constant_lower),
                    csv_f(r.constant_upper),
                    r.ext_verdict.clone(),
                    csv_f(r.witness_center),
                    csv_f(r.witness_radius),
                ]
            })
            .collect();
        write_csv(&header, records)
    }

    fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "experiment": "ranges",
            "cells": self.cells,
            "agreements": self.agreements,
            "agreement_rate": self.agreement_rate,
            "max_disagreement_distance": self.max_disagreement_distance,
            "discretization_zone": self.discretization_zone,
            "violations": self.violations(),
            "disagreements": self.rows.iter().filter(|r| !r.agree).map(|r| serde_json::json!({
                "preset": r.preset,
                "p": r.p,
                "lambda": r.lambda,
                "beta": r.beta,
                "verdict": r.verdict,
                "predicted": r.predicted,
                "endpoint_distance": r.endpoint_distance,
            })).collect::<Vec<_>>(),
        })
    }

    /// A cell violates when it disagrees outside the discretization zone, or
    /// when the aggregate agreement rate drops below 95%.
    fn violations(&self) -> usize {
        let far = self
            .rows
            .iter()
            .filter(|r| !r.agree && r.endpoint_distance > self.discretization_zone)
            .count();
        far + usize::from(self.agreement_rate < 0.95)
    }
}
