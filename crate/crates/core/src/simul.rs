//! Synthetic-judge study comparing marking scores with rank distances.
//!
//! Each synthetic judge marks every performance with a draw from
//! `Normal(c_p, sigma(c_p))`. Judges get their own random stream derived from
//! `(seed, judge index)`, so results do not depend on evaluation order.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::marking::{overall_marking_score, performance_marking_score};
use crate::model::{Correlations, RankingParams, SigmaModel, SimulatedJudge, SimulationResult};
use crate::ranking::{kendall_between, parameter_set, ranking_from_marks, Ranking, TieBreak, PARAMETER_SETS};
use crate::rng::SimRng;
use crate::stats::{pearson, spearman};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    /// Clamp simulated marks to [0, 10].
    pub clamp: bool,
    /// Round simulated marks to this grid, for sensitivity runs.
    pub round_to: Option<f64>,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions { clamp: true, round_to: None }
    }
}

fn check_inputs(controls: &[f64], n_judges: usize) -> Result<()> {
    if controls.len() < 2 {
        return Err(Error::InvalidValue(format!("need at least 2 performances, got {}", controls.len())));
    }
    if n_judges == 0 {
        return Err(Error::InvalidValue("need at least one judge".into()));
    }
    Ok(())
}

fn judge_marks(controls: &[f64], model: &SigmaModel, seed: u64, judge: usize, opts: SimulationOptions) -> Vec<f64> {
    let mut rng = SimRng::substream(seed, judge as u64);
    controls
        .iter()
        .map(|&c| {
            let mut s = rng.normal(c, model.sigma_at(c));
            if let Some(step) = opts.round_to {
                s = (s / step).round() * step;
            }
            if opts.clamp {
                s = s.clamp(0.0, 10.0);
            }
            s
        })
        .collect()
}

/// `n_judges` rows of simulated marks, one column per performance.
pub fn simulate_marks(controls: &[f64], model: &SigmaModel, n_judges: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    simulate_marks_with(controls, model, n_judges, seed, SimulationOptions::default())
}

pub fn simulate_marks_with(
    controls: &[f64],
    model: &SigmaModel,
    n_judges: usize,
    seed: u64,
    opts: SimulationOptions,
) -> Result<Vec<Vec<f64>>> {
    check_inputs(controls, n_judges)?;
    Ok((0..n_judges).map(|j| judge_marks(controls, model, seed, j, opts)).collect())
}

/// Reference ranking and the three parameter sets, indexed by reference position.
pub struct ReferenceFrame {
    pub reference: Ranking,
    pub params: Vec<RankingParams>,
}

impl ReferenceFrame {
    pub fn new(controls: &[f64]) -> Result<Self> {
        let reference = ranking_from_marks(controls, TieBreak::ByIndex);
        let by_position: Vec<f64> = reference.inverse().ranks().iter().map(|&i| controls[i - 1]).collect();
        let params = PARAMETER_SETS.iter().map(|&s| parameter_set(s, &by_position)).collect::<Result<_>>()?;
        Ok(ReferenceFrame { reference, params })
    }
}

/// Marking score and SET1..SET3 distances of one judge's marks.
pub fn score_judge(
    marks: &[f64],
    controls: &[f64],
    model: &SigmaModel,
    frame: &ReferenceFrame,
) -> Result<(f64, [f64; 3])> {
    if marks.len() != controls.len() {
        return Err(Error::DimensionMismatch { expected: controls.len(), got: marks.len() });
    }
    let m: Vec<f64> = marks.iter().zip(controls).map(|(&s, &c)| performance_marking_score(s, c, model)).collect();
    let judge_ranking = ranking_from_marks(marks, TieBreak::ByIndex);
    let mut k = [0.0; 3];
    for (slot, params) in k.iter_mut().zip(&frame.params) {
        *slot = kendall_between(&judge_ranking, &frame.reference, params)?;
    }
    Ok((overall_marking_score(&m)?, k))
}

pub fn ranking_vs_marking_experiment(
    controls: &[f64],
    model: &SigmaModel,
    n_judges: usize,
    seed: u64,
) -> Result<SimulationResult> {
    ranking_vs_marking_experiment_with(controls, model, n_judges, seed, SimulationOptions::default())
}

pub fn ranking_vs_marking_experiment_with(
    controls: &[f64],
    model: &SigmaModel,
    n_judges: usize,
    seed: u64,
    opts: SimulationOptions,
) -> Result<SimulationResult> {
    check_inputs(controls, n_judges)?;
    let frame = ReferenceFrame::new(controls)?;
    let mut per_judge = Vec::with_capacity(n_judges);
    for j in 0..n_judges {
        let marks = judge_marks(controls, model, seed, j, opts);
        let (marking_score, ranking_scores) = score_judge(&marks, controls, model, &frame)?;
        per_judge.push(SimulatedJudge { judge_index: j, marking_score, ranking_scores });
    }
    let ms: Vec<f64> = per_judge.iter().map(|j| j.marking_score).collect();
    let mut correlations = Correlations::default();
    for set in 0..3 {
        let ks: Vec<f64> = per_judge.iter().map(|j| j.ranking_scores[set]).collect();
        correlations.pearson[set] = pearson(&ms, &ks).ok();
        correlations.spearman[set] = spearman(&ms, &ks).ok();
    }
    Ok(SimulationResult { seed, per_judge, correlations })
}

pub fn write_experiment_csv<W: Write>(output: W, result: &SimulationResult) -> Result<()> {
    let mut writer = csv::Writer::from_writer(output);
    writer.write_record(["judge_index", "marking_score", "k_set1", "k_set2", "k_set3"])?;
    for j in &result.per_judge {
        writer.write_record([
            j.judge_index.to_string(),
            format!("{:.6}", j.marking_score),
            format!("{:.6}", j.ranking_scores[0]),
            format!("{:.6}", j.ranking_scores[1]),
            format!("{:.6}", j.ranking_scores[2]),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn format_correlations(result: &SimulationResult) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.6}"));
    let mut s = String::new();
    let _ = writeln!(s, "judges = {}  seed = {}", result.per_judge.len(), result.seed);
    let _ = writeln!(s, "correlation of marking score with ranking score:");
    for (i, name) in ["SET1", "SET2", "SET3"].iter().enumerate() {
        let _ = writeln!(
            s,
            "  {name}: pearson = {}  spearman = {}",
            fmt(result.correlations.pearson[i]),
            fmt(result.correlations.spearman[i])
        );
    }
    s
}
