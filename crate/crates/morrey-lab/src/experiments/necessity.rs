//! Necessary conditions extracted from boundedness: when the averaging
//! condition holds on a space built over phi(B) = r^l1 w(B)^(l2/n), the
//! weight must satisfy reverse doubling at delta = l1/(1-l2) and a
//! Muckenhoupt condition at q = (p+l1)/(1-l2). For power weights both have
//! closed-form validity ranges, so every numeric outcome is checked against
//! a prediction, and the implication itself is checked row by row.
//!
//! Cells with l2 = 1 have no finite q and are skipped; the summary records
//! how many.

use rayon::prelude::*;
use serde::Serialize;

use super::{csv_f, sharp_power_range, write_csv, ExperimentSpec, ExperimentTable, Preset};
use crate::classes::{ap_constant_with, reverse_doubling_check_with};
use crate::error::Result;
use crate::estimate::Verdict;
use crate::geometry::BallFamily;
use crate::morrey::{Scope, SpaceParams};
use crate::muckenhoupt::morrey_ap_constant_with;
use crate::weight::Weight;

#[derive(Debug, Clone, Serialize)]
pub struct NecessityRow {
    pub preset: &'static str,
    pub p: f64,
    pub lambda: f64,
    pub beta: f64,
    pub delta: f64,
    pub rd_predicted: bool,
    pub rd_holds: bool,
    pub rd_constant: f64,
    pub rd_agree: bool,
    pub q: f64,
    pub aq_predicted: bool,
    pub aq_verdict: String,
    pub aq_constant: f64,
    pub aq_agree: bool,
    pub ap_verdict: String,
    /// Boundedness never co-occurs with a failed necessary condition.
    pub implication_ok: bool,
    pub witness_center: f64,
    pub witness_radius: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NecessityTable {
    pub rows: Vec<NecessityRow>,
    pub skipped_l2_one: usize,
}

/// Power exponents probing both sides of the sharp range: the lower endpoint
/// itself (closed for these cells), a point below it, the midpoint, and a
/// point above the upper endpoint. Exponents at or below -1 are not weights
/// and are dropped; when that removes the below-range probe, the midpoint
/// between -1 and the endpoint stands in.
fn auto_betas(p: f64, preset: Preset, lambda: f64) -> Vec<f64> {
    let range = sharp_power_range(p, &preset.phi(lambda)).expect("range exists for l2 < 1");
    let mid = if range.hi.is_finite() { 0.5 * (range.lo + range.hi) } else { range.lo + 1.0 };
    let below = if range.lo - 0.4 > -0.999 { range.lo - 0.4 } else { 0.5 * (range.lo - 1.0) };
    let above = if range.hi.is_finite() { range.hi + 0.3 } else { range.lo + 4.0 };
    let mut out = vec![range.lo, below, mid, above];
    out.retain(|b| *b > -0.999);
    if !out.iter().any(|b| (*b - mid).abs() > 1e-12 && range.contains(*b)) {
        out.push((mid - 1.0).max(-0.6));
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    out
}

fn eval_cell(
    preset: Preset,
    p: f64,
    lambda: f64,
    beta: f64,
    spec: &ExperimentSpec,
) -> Result<NecessityRow> {
    let phi = preset.phi(lambda);
    let (l1, l2) = (phi.lambda1(), phi.lambda2());
    let delta = l1 / (1.0 - l2);
    let q = (p + l1) / (1.0 - l2);
    let w = Weight::power(beta);
    let fam = BallFamily::all(spec.grid);

    // reverse doubling: a power weight grows like min(1, 1+beta) along
    // nested balls, so RD(delta) holds exactly when that clears delta
    let rd_predicted = (1.0f64).min(1.0 + beta) >= delta - 1e-12;
    let (rd_holds, rd_constant, rd_witness) = if delta > 1e-12 {
        let rep = reverse_doubling_check_with(&w, delta, &fam, false, spec.levels)?;
        (rep.holds, rep.constant.lower, rep.witness_pair.map(|(b1, _)| b1))
    } else {
        // delta <= 0 asks for no growth at all; trivially true
        (true, 1.0, None)
    };
    let rd_agree = rd_holds == rd_predicted;

    let aq_predicted = beta > -1.0 && beta < q - 1.0;
    let aq = ap_constant_with(&w, q, &fam, spec.levels)?;
    let aq_agree = match aq.verdict {
        Verdict::FiniteStable => aq_predicted,
        Verdict::DivergingUnderRefinement => !aq_predicted,
        Verdict::Inconclusive => false,
    };

    let ap_verdict = match SpaceParams::new(p, phi, w, Scope::Global) {
        Ok(sp) => morrey_ap_constant_with(&sp, &fam, spec.levels)?.verdict.to_string(),
        Err(_) => "invalid-space".to_string(),
    };
    let implication_ok = !(ap_verdict == "finite-stable"
        && (!rd_holds || aq.verdict == Verdict::DivergingUnderRefinement));

    let (wc, wr) = rd_witness
        .or(aq.constant.witness)
        .map(|b| (b.center, b.radius))
        .unwrap_or((f64::NAN, f64::NAN));
    Ok(NecessityRow {
        preset: preset.label(),
        p,
        lambda,
        beta,
        delta,
        rd_predicted,
        rd_holds,
        rd_constant,
        rd_agree,
        q,
        aq_predicted,
        aq_verdict: aq.verdict.to_string(),
        aq_constant: aq.constant.lower,
        aq_agree,
        ap_verdict,
        implication_ok,
        witness_center: wc,
        witness_radius: wr,
    })
}

pub fn run_necessity_rd(spec: &ExperimentSpec) -> Result<NecessityTable> {
    spec.validate()?;
    let mut cells: Vec<(Preset, f64, f64, f64)> = Vec::new();
    let mut skipped = 0usize;
    for &preset in &spec.presets {
        for &p in &spec.ps {
            for &lambda in &spec.lambdas {
                if preset.phi(lambda).lambda2() >= 1.0 {
                    skipped += 1;
                    continue;
                }
                let betas = if spec.betas.is_empty() {
                    auto_betas(p, preset, lambda)
                } else {
                    let mut bs = spec.betas.clone();
                    bs.retain(|b| *b > -0.999);
                    bs
                };
                for beta in betas {
                    cells.push((preset, p, lambda, beta));
                }
            }
        }
    }
    let rows: Vec<NecessityRow> = cells
        .into_par_iter()
        .map(|(preset, p, lambda, beta)| eval_cell(preset, p, lambda, beta, spec))
        .collect::<Result<Vec<_>>>()?;
    Ok(NecessityTable { rows, skipped_l2_one: skipped })
}

impl ExperimentTable for NecessityTable {
    fn name(&self) -> &'static str {
        "necessity"
    }

    fn csv(&self) -> String {
        let header = [
            "preset", "p", "lambda", "beta", "delta", "rd_predicted", "rd_holds", "rd_constant",
            "rd_agree", "q", "aq_predicted", "aq_verdict", "aq_constant", "aq_agree",
            "ap_verdict", "implication_ok", "witness_center", "witness_radius",
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
                    csv_f(r.delta),
                    r.rd_predicted.to_string(),
                    r.rd_holds.to_string(),
                    csv_f(r.rd_constant),
                    r.rd_agree.to_string(),
                    csv_f(r.q),
                    r.aq_predicted.to_string(),
                    r.aq_verdict.clone(),
                    csv_f(r.aq_constant),
                    r.aq_agree.to_string(),
                    r.ap_verdict.clone(),
                    r.implication_ok.to_string(),
                    csv_f(r.witness_center),
                    csv_f(r.witness_radius),
                ]
            })
            .collect();
        write_csv(&header, records)
    }

    fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "experiment": "necessity",
            "rows": self.rows.len(),
            "skipped_l2_one": self.skipped_l2_one,
            "rd_disagreements": self.rows.iter().filter(|r| !r.rd_agree).count(),
            "aq_disagreements": self.rows.iter().filter(|r| !r.aq_agree).count(),
            "implication_failures": self.rows.iter().filter(|r| !r.implication_ok).count(),
            "violations": self.violations(),
        })
    }

    fn violations(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| !r.rd_agree || !r.aq_agree || !r.implication_ok)
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> ExperimentSpec {
        ExperimentSpec {
            presets: vec![Preset::Samko],
            ps: vec![2.0],
            lambdas: vec![0.5],
            levels: 2,
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn samko_betas_probe_both_sides_of_the_range() {
        let bs = auto_betas(2.0, Preset::Samko, 0.5);
        // range [-0.5, 1.5): endpoint, below, mid, above
        assert!(bs.contains(&-0.5));
        assert!(bs.contains(&-0.9));
        assert!(bs.contains(&0.5));
        assert!(bs.contains(&1.8));
    }

    #[test]
    fn komori_shirai_keeps_an_in_range_probe_despite_the_open_endpoint() {
        let bs = auto_betas(2.0, Preset::KomoriShirai, 0.5);
        assert!(bs.iter().all(|b| *b > -0.999));
        let range = sharp_power_range(2.0, &Preset::KomoriShirai.phi(0.5)).unwrap();
        assert!(bs.iter().filter(|b| range.contains(**b)).count() >= 2);
    }

    #[test]
    fn rd_and_aq_verdicts_match_predictions_on_samko_cells() {
        let t = run_necessity_rd(&tiny_spec()).unwrap();
        assert!(!t.rows.is_empty());
        for r in &t.rows {
            assert!(r.rd_agree, "{r:?}");
            assert!(r.aq_agree, "{r:?}");
            assert!(r.implication_ok, "{r:?}");
        }
        assert_eq!(t.violations(), 0);
    }

    #[test]
    fn poelhuis_torchinsky_cells_are_skipped_not_judged() {
        let mut spec = tiny_spec();
        spec.presets = vec![Preset::PoelhuisTorchinsky];
        let t = run_necessity_rd(&spec).unwrap();
        assert!(t.rows.is_empty());
        assert_eq!(t.skipped_l2_one, 1);
    }
}
