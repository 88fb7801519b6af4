//! Accuracy evaluation for panel-judged sports.
//!
//! The pipeline: control scores from the median of each performance's panel,
//! a heteroscedastic model of judging error variability fitted per apparatus
//! or discipline, marking scores that standardize every discrepancy by that
//! variability, and judge-calibrated outlier flags. Rank-distance and
//! group-comparison tools support the accompanying studies.

// Negated comparisons below deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod ingest;
pub mod marking;
pub mod model;
pub mod outlier;
pub mod panel;
pub mod ranking;
pub mod rng;
pub mod simul;
pub mod stats;
pub mod synth;
pub mod variability;

pub use error::{Error, Result};
pub use model::{
    ControlScore, Correlations, Discipline, Gender, JudgeEvaluation, JudgeRole, MarkRecord, ParameterSetId,
    PerformanceEvaluation, PerformanceKey, RankingParams, ScopeKind, SigmaModel, SimulatedJudge, SimulationResult,
};
pub use ranking::Ranking;
pub use variability::{ErrorBin, ModelSet};
