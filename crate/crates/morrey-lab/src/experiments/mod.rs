//! Named, reproducible experiment drivers.
//!
//! Each driver takes one [`ExperimentSpec`], sweeps it in parallel, and
//! returns an in-memory table that renders to CSV (fixed, documented schema)
//! and to a JSON summary. Randomized suites derive all randomness from the
//! spec's seed, so a table is a pure function of its spec. Band limits are
//! artifact policy, not derived constants; every summary repeats the band it
//! was judged against.

mod counterexample;
mod decomposition;
mod necessity;
mod norms;
mod ranges;

pub use counterexample::{run_log_counterexample, CounterexampleTable, WindowRow};
pub use decomposition::{run_decomposition_checks, ConstancyRow, DecompositionTable, PointRow};
pub use necessity::{run_necessity_rd, NecessityRow, NecessityTable};
pub use norms::{run_norm_equivalence, NormRow, NormsTable};
pub use ranges::{run_power_weight_ranges, RangeRow, RangesTable};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GridSpec;
use crate::morrey::PhiSpec;
use crate::operators::DEFAULT_KAPPA;

/// Acceptance band for ratio checks, `[lo, hi]` with 0 < lo <= hi.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Default for Band {
    fn default() -> Band {
        Band { lo: 1.0 / 16.0, hi: 16.0 }
    }
}

impl Band {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo > 0.0 && self.lo <= self.hi && self.hi.is_finite()) {
            return Err(Error::Config(format!(
                "band must satisfy 0 < lo <= hi < inf, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// The three one-parameter functional presets used in sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Samko,
    KomoriShirai,
    PoelhuisTorchinsky,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Samko, Preset::KomoriShirai, Preset::PoelhuisTorchinsky];

    pub fn phi(self, lambda: f64) -> PhiSpec {
        match self {
            Preset::Samko => PhiSpec::samko(lambda),
            Preset::KomoriShirai => PhiSpec::komori_shirai(lambda),
            Preset::PoelhuisTorchinsky => PhiSpec::poelhuis_torchinsky(lambda),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Preset::Samko => "samko",
            Preset::KomoriShirai => "komori-shirai",
            Preset::PoelhuisTorchinsky => "poelhuis-torchinsky",
        }
    }
}

/// Shared sweep configuration for every driver. Single-experiment fields
/// (the counterexample's (p, lambda), the randomized-suite sizes) ride along
/// so one JSON object configures any subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub presets: Vec<Preset>,
    pub ps: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// Explicit beta values; empty means a per-cell automatic grid
    /// (endpoints +- `endpoint_offset` plus midpoints).
    pub betas: Vec<f64>,
    pub endpoint_offset: f64,
    pub grid: GridSpec,
    pub levels: u32,
    pub band: Band,
    pub seed: u64,
    pub kappa: f64,
    /// Counterexample driver: single space exponent and lambda.
    pub p: f64,
    pub lambda: f64,
    pub k_max: u32,
    /// Randomized decomposition suite sizes.
    pub inputs: u32,
    pub points_per_input: u32,
}

impl Default for ExperimentSpec {
    fn default() -> ExperimentSpec {
        ExperimentSpec {
            presets: Preset::ALL.to_vec(),
            ps: vec![1.0, 1.5, 2.0, 3.0],
            lambdas: vec![0.25, 0.5, 0.75],
            betas: Vec::new(),
            endpoint_offset: 0.2,
            grid: GridSpec { r_min: 1e-2, r_max: 1e2, c_max: 1e2, points_per_decade: 2 },
            levels: 3,
            band: Band::default(),
            seed: 0xC0FFEE,
            kappa: DEFAULT_KAPPA,
            p: 2.0,
            lambda: 0.5,
            k_max: 20,
            inputs: 12,
            points_per_input: 24,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if self.presets.is_empty() {
            return cfg("sweep needs at least one preset".into());
        }
        if self.ps.is_empty() || self.ps.iter().any(|&p| !(p >= 1.0) || !p.is_finite()) {
            return cfg(format!("exponent list must be nonempty with p >= 1, got {:?}", self.ps));
        }
        if self.lambdas.is_empty()
            || self.lambdas.iter().any(|&l| !(l > 0.0 && l < 1.0))
        {
            return cfg(format!(
                "lambda list must be nonempty within (0, 1), got {:?}",
                self.lambdas
            ));
        }
        if self.betas.iter().any(|b| !b.is_finite()) {
            return cfg("explicit betas must be finite".into());
        }
        if !(self.endpoint_offset > 0.0 && self.endpoint_offset <= 1.0) {
            return cfg(format!("endpoint_offset must lie in (0, 1], got {}", self.endpoint_offset));
        }
        self.grid.validate()?;
        if !(1..=6).contains(&self.levels) {
            return cfg(format!("levels must lie in 1..=6, got {}", self.levels));
        }
        self.band.validate()?;
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return cfg(format!("kappa must lie in (0, 1), got {}", self.kappa));
        }
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return cfg(format!("p must be >= 1, got {}", self.p));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return cfg(format!("lambda must lie in (0, 1), got {}", self.lambda));
        }
        if !(1..=40).contains(&self.k_max) {
            return cfg(format!("k_max must lie in 1..=40, got {}", self.k_max));
        }
        if !(1..=64).contains(&self.inputs) {
            return cfg(format!("inputs must lie in 1..=64, got {}", self.inputs));
        }
        if !(1..=256).contains(&self.points_per_input) {
            return cfg(format!("points_per_input must lie in 1..=256, got {}", self.points_per_input));
        }
        Ok(())
    }
}

/// Sharp power-weight range for w = |x|^beta on the line: the condition
/// constant is finite exactly on [lo, hi) (lo open when `lo_closed` is
/// false; hi may be infinite). Requires the formula dimension n = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerRange {
    pub lo: f64,
    pub lo_closed: bool,
    pub hi: f64,
}

pub fn sharp_power_range(p: f64, phi: &PhiSpec) -> Option<PowerRange> {
    if phi.n() != 1 || !(p >= 1.0) {
        return None;
    }
    let (l1, l2) = (phi.lambda1(), phi.lambda2());
    if l2 >= 1.0 {
        // w(B)-proportional functional: no upper restriction; the lower
        // endpoint is forced by reverse doubling of phi and is open (at
        // equality the space degenerates).
        return Some(PowerRange { lo: -1.0 - l1, lo_closed: false, hi: f64::INFINITY });
    }
    let hi = (p - 1.0 + l1 + l2) / (1.0 - l2);
    let (lo, lo_closed) = if l1 >= 0.0 {
        (-(1.0 - l1 - l2) / (1.0 - l2), true)
    } else {
        (-1.0, false)
    };
    Some(PowerRange { lo, lo_closed, hi })
}

impl PowerRange {
    pub fn contains(&self, beta: f64) -> bool {
        if beta <= -1.0 {
            // not locally integrable: no space to speak of
            return false;
        }
        let above = if self.lo_closed { beta >= self.lo } else { beta > self.lo };
        above && beta < self.hi
    }

    /// Distance to the nearest finite endpoint (discretization-zone gauge).
    pub fn endpoint_distance(&self, beta: f64) -> f64 {
        let mut d = (beta - self.lo).abs();
        if self.hi.is_finite() {
            d = d.min((beta - self.hi).abs());
        }
        d
    }
}

/// Rendered table common surface for the CLI: name, CSV body, JSON summary,
/// and the count of band/agreement violations (exit-code driver).
pub trait ExperimentTable {
    fn name(&self) -> &'static str;
    fn csv(&self) -> String;
    fn summary(&self) -> serde_json::Value;
    fn violations(&self) -> usize;
}

/// CSV cell for floats: empty for NaN (absent), `inf`/`-inf` spelled out.
pub(crate) fn csv_f(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

pub(crate) fn write_csv(header: &[&str], records: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("csv header");
    for rec in records {
        w.write_record(&rec).expect("csv record");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("csv utf8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_validates() {
        ExperimentSpec::default().validate().unwrap();
    }

    #[test]
    fn spec_rejects_bad_band_and_empty_sweep() {
        let mut s = ExperimentSpec::default();
        s.band = Band { lo: 2.0, hi: 1.0 };
        assert!(s.validate().is_err());
        let mut s = ExperimentSpec::default();
        s.ps.clear();
        assert!(s.validate().is_err());
    }

    #[test]
    fn preset_ranges_match_hand_values() {
        // radius-power functional, lambda = 1/2, p = 2: [-1/2, 3/2)
        let r = sharp_power_range(2.0, &PhiSpec::samko(0.5)).unwrap();
        assert_eq!(r.lo, -0.5);
        assert!(r.lo_closed);
        assert_eq!(r.hi, 1.5);
        // weight-measure functional, lambda = 1/2, p = 2: (-1, 3)
        let r = sharp_power_range(2.0, &PhiSpec::komori_shirai(0.5)).unwrap();
        assert_eq!(r.lo, -1.0);
        assert_eq!(r.hi, 3.0);
        assert!(r.contains(0.0) && !r.contains(3.0) && !r.contains(-1.0));
        // central normalization: left endpoint open, no right endpoint
        let r = sharp_power_range(2.0, &PhiSpec::poelhuis_torchinsky(0.5)).unwrap();
        assert_eq!(r.lo, -0.5);
        assert!(!r.lo_closed && !r.contains(-0.5) && r.contains(10.0));
        assert_eq!(r.hi, f64::INFINITY);
    }

    #[test]
    fn range_membership_respects_closedness() {
        let r = sharp_power_range(1.0, &PhiSpec::samko(0.25)).unwrap();
        assert_eq!(r.lo, -0.75);
        assert!(r.contains(-0.75));
        assert!(!r.contains(0.25));
        assert!((r.endpoint_distance(0.2) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn spec_json_round_trips() {
        let s = ExperimentSpec::default();
        let j = serde_json::to_string(&s).unwrap();
        let back: ExperimentSpec = serde_json::from_str(&j).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let j = r#"{"presets": ["samko"], "no_such_key": 1}"#;
        assert!(serde_json::from_str::<ExperimentSpec>(j).is_err());
    }
}
