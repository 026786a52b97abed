//! A numerical laboratory for weighted Morrey norms on the real line.
//!
//! The pieces: ball families on log grids (`geometry`), piecewise-power
//! weights with exact measures (`weight`), a symbolic function class closed
//! under the operators of interest plus adaptive quadrature fallback (`func`,
//! `quadrature`), maximal and Calderon-type operators (`operators`), Morrey
//! and local-Morrey norms with refinement verdicts (`morrey`, `estimate`),
//! block-dual norms (`duality`), Muckenhoupt-type constants and
//! necessary-condition checks (`muckenhoupt`), and batch experiment drivers
//! behind the CLI (`experiments`, `config`).
//!
//! Everything reduces to one integral, int_B |f|^p w, computed exactly
//! whenever f lives in the power-log class and the exponents allow, and by
//! adaptive Gauss-Kronrod panels otherwise. Suprema over infinite ball
//! families are reported as `Estimate`s: a lower bound, an upper bound when
//! a proof-backed formula exists, and a refinement trace that grades the
//! result finite-stable, diverging, or inconclusive.

pub mod classes;
pub mod duality;
pub mod error;
pub mod experiments;
pub mod morrey;
pub mod muckenhoupt;
pub mod operators;
pub mod estimate;
pub mod func;
pub mod geometry;
pub mod quadrature;
pub mod weight;

pub use classes::{ap_constant, reverse_doubling_check, reverse_holder_check, RdReport, RhReport, WeightClassReport};
pub use duality::{
    dual_char_norm, dual_m0_char, dual_norm_lower, pairing_abs, prop_candidate_exponent,
    DualCandidate, DualCandidateFamily, DyadicDualBound, TailStatus,
};
pub use error::{Error, Result};
pub use estimate::{Estimate, Verdict};
pub use experiments::{
    run_decomposition_checks, run_log_counterexample, run_necessity_rd, run_norm_equivalence,
    run_power_weight_ranges, sharp_power_range, Band, ExperimentSpec, ExperimentTable,
    PowerRange, Preset,
};
pub use func::{Func, PowerLogFunc, PowerLogPiece, PowerLogTerm, Side, TabulatedGrid};
pub use geometry::{Ball, BallFamily, BallKind, GridSpec};
pub use morrey::{PhiSpec, Scope, SpaceParams};
pub use muckenhoupt::{
    calderon_condition, extrapolation_condition, indicator_norm_interval, morrey_ap_constant,
    operator_norm_estimate, BallRow, ConditionReport, OpKind, OperatorReport,
};
pub use weight::{PowerSegment, Weight};
