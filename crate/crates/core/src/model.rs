//! Domain types shared by every stage of the pipeline.
//!
//! The true quality of a performance is never observed. Everything downstream
//! works against its proxy, the [`ControlScore`], i.e. the median mark of the
//! enlarged judging panel.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest mark increment accepted at ingestion.
pub const MARK_GRID: f64 = 0.05;
/// Absolute tolerance for grid membership of floating-point marks.
pub const GRID_TOLERANCE: f64 = 1e-9;
pub const MARK_MIN: f64 = 0.0;
pub const MARK_MAX: f64 = 10.0;

macro_rules! token_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $token:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(
                #[serde(rename = $token)]
                $variant,
            )+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $token,)+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($token => Ok($name::$variant),)+
                    other => Err(Error::InvalidValue(format!(
                        "unknown {} `{}`",
                        stringify!($name),
                        other
                    ))),
                }
            }
        }
    };
}

token_enum!(
    /// Gymnastics discipline.
    Discipline {
        Artistic => "ART",
        Rhythmic => "RG",
        Aerobic => "AER",
        Acrobatic => "ACRO",
        Trampoline => "TRA",
    }
);

token_enum!(
    JudgeRole {
        Execution => "EXECUTION",
        Reference => "REFERENCE",
        Superior => "SUPERIOR",
        VideoReview => "VIDEO_REVIEW",
    }
);

token_enum!(
    Gender {
        Female => "F",
        Male => "M",
        Unknown => "UNKNOWN",
    }
);

/// Returns true when `mark` is an integral multiple of [`MARK_GRID`].
pub fn on_mark_grid(mark: f64) -> bool {
    let steps = (mark / MARK_GRID).round();
    (mark - steps * MARK_GRID).abs() <= GRID_TOLERANCE
}

/// One judge's mark for one performance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkRecord {
    pub competition_id: String,
    pub discipline: Discipline,
    pub apparatus: String,
    pub phase: String,
    pub performance_id: String,
    pub gymnast_id: String,
    pub gymnast_country: String,
    pub judge_id: String,
    pub judge_country: String,
    pub judge_role: JudgeRole,
    pub judge_gender: Gender,
    pub mark: f64,
    pub completed: bool,
}

impl MarkRecord {
    /// Problems with this record taken in isolation.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(MARK_MIN..=MARK_MAX).contains(&self.mark) {
            out.push(format!("mark out of range: {}", self.mark));
        } else if !on_mark_grid(self.mark) {
            out.push(format!("mark off 0.05 grid: {}", self.mark));
        }
        if self.performance_id.is_empty() {
            out.push("empty performance_id".into());
        }
        if self.judge_id.is_empty() {
            out.push("empty judge_id".into());
        }
        out
    }

    pub fn performance_key(&self) -> PerformanceKey {
        PerformanceKey {
            performance_id: self.performance_id.clone(),
            discipline: self.discipline,
            apparatus: self.apparatus.clone(),
            phase: self.phase.clone(),
            completed: self.completed,
        }
    }

    pub fn same_country(&self) -> bool {
        self.judge_country == self.gymnast_country
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PerformanceKey {
    pub performance_id: String,
    pub discipline: Discipline,
    pub apparatus: String,
    pub phase: String,
    pub completed: bool,
}

/// Median mark of the enlarged panel for one performance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlScore {
    pub performance_id: String,
    pub value: f64,
    pub panel_size: usize,
}

impl ControlScore {
    /// Re-checks that `value` is the median of `marks`.
    pub fn matches(&self, marks: &[f64]) -> bool {
        marks.len() == self.panel_size
            && crate::panel::control_score(marks).map(|m| (m - self.value).abs() <= GRID_TOLERANCE).unwrap_or(false)
    }

    pub fn on_grid(&self) -> bool {
        on_mark_grid(self.value)
    }
}

/// How records are partitioned into variability scopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScopeKind {
    #[default]
    Apparatus,
    Discipline,
}

impl ScopeKind {
    pub fn key(self, record: &MarkRecord) -> String {
        match self {
            ScopeKind::Apparatus => record.apparatus.clone(),
            ScopeKind::Discipline => record.discipline.as_str().to_string(),
        }
    }
}

/// Fitted intrinsic judging error variability `max(alpha + beta * exp(gamma * c), floor)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaModel {
    pub scope: String,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub floor: f64,
    pub rmsd: f64,
    pub n_marks: usize,
    pub c_min: f64,
    pub c_max: f64,
}

impl SigmaModel {
    /// An unfitted model with the given parameters; diagnostics are zeroed.
    pub fn from_params(scope: impl Into<String>, alpha: f64, beta: f64, gamma: f64, floor: f64) -> Self {
        SigmaModel {
            scope: scope.into(),
            alpha,
            beta,
            gamma,
            floor,
            rmsd: 0.0,
            n_marks: 0,
            c_min: MARK_MIN,
            c_max: MARK_MAX,
        }
    }

    /// The regression curve without the floor.
    pub fn unfloored(&self, c: f64) -> f64 {
        self.alpha + self.beta * libm::exp(self.gamma * c)
    }

    pub fn sigma_at(&self, c: f64) -> f64 {
        self.unfloored(c).max(self.floor)
    }

    pub fn fitted_range(&self) -> [f64; 2] {
        [self.c_min, self.c_max]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.floor > 0.0) {
            return Err(Error::InvalidValue(format!("floor must be positive, got {}", self.floor)));
        }
        if !(self.rmsd >= 0.0) {
            return Err(Error::InvalidValue(format!("rmsd must be nonnegative, got {}", self.rmsd)));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !v.is_finite() {
                return Err(Error::InvalidValue(format!("{name} is not finite")));
            }
        }
        if self.c_min > self.c_max {
            return Err(Error::InvalidValue("c_min exceeds c_max".into()));
        }
        Ok(())
    }
}

/// One performance as seen by one judge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceEvaluation {
    pub performance_id: String,
    pub control: f64,
    pub e_hat: f64,
    pub marking_score: f64,
    pub outlier: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeEvaluation {
    pub judge_id: String,
    pub scope: String,
    pub per_performance: Vec<PerformanceEvaluation>,
    pub overall_marking_score: f64,
    pub n: usize,
}

impl JudgeEvaluation {
    pub fn validate(&self) -> Result<()> {
        if self.n != self.per_performance.len() {
            return Err(Error::InvalidValue(format!(
                "n = {} but {} performances recorded",
                self.n,
                self.per_performance.len()
            )));
        }
        let scores: Vec<f64> = self.per_performance.iter().map(|p| p.marking_score).collect();
        let m = crate::marking::overall_marking_score(&scores)?;
        if (m - self.overall_marking_score).abs() > 1e-12 * m.max(1.0) {
            return Err(Error::InvalidValue(format!(
                "overall marking score {} does not match recomputed {}",
                self.overall_marking_score, m
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParameterSetId {
    #[serde(rename = "SET1")]
    Set1,
    #[serde(rename = "SET2")]
    Set2,
    #[serde(rename = "SET3")]
    Set3,
    #[serde(rename = "CUSTOM")]
    Custom,
}

impl FromStr for ParameterSetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SET1" => Ok(ParameterSetId::Set1),
            "SET2" => Ok(ParameterSetId::Set2),
            "SET3" => Ok(ParameterSetId::Set3),
            "CUSTOM" => Ok(ParameterSetId::Custom),
            _ => Err(Error::UnknownParameterSet(s.to_string())),
        }
    }
}

/// Weights and costs of a generalized Kendall distance.
///
/// `delta[0]` is the cost attached to the first position and must be 1.
/// `d[i][j]` is the cost of swapping the competitors at reference positions
/// `i` and `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingParams {
    pub set_id: ParameterSetId,
    pub w: Vec<f64>,
    pub delta: Vec<f64>,
    pub d: Vec<Vec<f64>>,
}

impl RankingParams {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.w.len();
        if self.delta.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.delta.len() });
        }
        if self.d.len() != n || self.d.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidParams(format!("D must be {n}x{n}")));
        }
        if let Some(&first) = self.delta.first() {
            if first != 1.0 {
                return Err(Error::InvalidParams(format!("delta[1] must be 1, got {first}")));
            }
        }
        if self.delta.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::InvalidParams("position costs must be positive".into()));
        }
        for i in 0..n {
            if self.d[i][i] != 0.0 {
                return Err(Error::InvalidParams(format!("D[{i}][{i}] must be 0")));
            }
            for j in 0..n {
                if !(self.d[i][j] >= 0.0) || self.d[i][j] != self.d[j][i] {
                    return Err(Error::InvalidParams(format!("D must be symmetric and nonnegative (entry {i},{j})")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedJudge {
    pub judge_index: usize,
    pub marking_score: f64,
    /// Distance to the reference ranking under SET1, SET2 and SET3.
    pub ranking_scores: [f64; 3],
}

/// Correlation of marking score against each ranking score; `None` when undefined.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Correlations {
    pub pearson: [Option<f64>; 3],
    pub spearman: [Option<f64>; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub seed: u64,
    pub per_judge: Vec<SimulatedJudge>,
    pub correlations: Correlations,
}
