//! Outlier marks.
//!
//! A mark is flagged when its discrepancy exceeds `max(2 * sigma(c) * M_j, 0.1)`,
//! so each judge is held to their own long-run accuracy. The unscaled
//! `2 * sigma(c)` rule is available as a baseline.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{JudgeEvaluation, MarkRecord, SigmaModel};
use crate::variability::ModelSet;

/// A discrepancy this small is never an outlier.
pub const MIN_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    /// Scaled by the judge's overall marking score.
    #[default]
    Scaled,
    /// Two standard deviations for everybody.
    Fixed,
}

/// Which marking score scales the threshold of a mark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JudgeScoreSource {
    /// The judge's score over everything in scope.
    #[default]
    Full,
    /// The judge's score over every other competition; falls back to the full
    /// score when the judge has no marks outside the competition.
    LeaveCompetitionOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OutlierOptions {
    pub mode: ThresholdMode,
    pub source: JudgeScoreSource,
}

pub fn outlier_threshold(model: &SigmaModel, c: f64, judge_score: f64) -> f64 {
    (2.0 * model.sigma_at(c) * judge_score).max(MIN_THRESHOLD)
}

pub fn fixed_threshold(model: &SigmaModel, c: f64) -> f64 {
    2.0 * model.sigma_at(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierRow {
    pub performance_id: String,
    pub judge_id: String,
    pub judge_country: String,
    pub gymnast_country: String,
    pub e_hat: f64,
    pub threshold: f64,
    pub flagged: bool,
    pub same_country: bool,
}

fn leave_out_scores(evaluation: &JudgeEvaluation, competition_of: &dyn Fn(&str) -> String) -> BTreeMap<String, f64> {
    let total: f64 = evaluation.per_performance.iter().map(|p| p.marking_score * p.marking_score).sum();
    let mut per_comp: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for p in &evaluation.per_performance {
        let e = per_comp.entry(competition_of(&p.performance_id)).or_default();
        e.0 += p.marking_score * p.marking_score;
        e.1 += 1;
    }
    per_comp
        .into_iter()
        .map(|(comp, (sq, n))| {
            let rest = evaluation.n - n;
            let score =
                if rest == 0 { evaluation.overall_marking_score } else { ((total - sq).max(0.0) / rest as f64).sqrt() };
            (comp, score)
        })
        .collect()
}

/// One row per evaluated mark, in evaluation order.
pub fn flag_outliers(
    evaluations: &[JudgeEvaluation],
    records: &[MarkRecord],
    models: &ModelSet,
    options: OutlierOptions,
) -> Result<Vec<OutlierRow>> {
    let by_key: HashMap<(&str, &str), &MarkRecord> =
        records.iter().map(|r| ((r.performance_id.as_str(), r.judge_id.as_str()), r)).collect();
    let mut rows = Vec::new();
    for evaluation in evaluations {
        let model =
            models.models.get(&evaluation.scope).ok_or_else(|| Error::MissingModel(evaluation.scope.clone()))?;
        let lookup = |perf: &str| -> Result<&MarkRecord> {
            by_key.get(&(perf, evaluation.judge_id.as_str())).copied().ok_or_else(|| {
                Error::InvalidValue(format!("no record for performance `{perf}` and judge `{}`", evaluation.judge_id))
            })
        };
        let leave_out = match options.source {
            JudgeScoreSource::Full => None,
            JudgeScoreSource::LeaveCompetitionOut => {
                for p in &evaluation.per_performance {
                    lookup(&p.performance_id)?;
                }
                let competition_of = |perf: &str| by_key[&(perf, evaluation.judge_id.as_str())].competition_id.clone();
                Some(leave_out_scores(evaluation, &competition_of))
            }
        };
        for p in &evaluation.per_performance {
            let record = lookup(&p.performance_id)?;
            let threshold = match options.mode {
                ThresholdMode::Fixed => fixed_threshold(model, p.control),
                ThresholdMode::Scaled => {
                    let score =
                        leave_out.as_ref().map_or(evaluation.overall_marking_score, |m| m[&record.competition_id]);
                    outlier_threshold(model, p.control, score)
                }
            };
            rows.push(OutlierRow {
                performance_id: p.performance_id.clone(),
                judge_id: evaluation.judge_id.clone(),
                judge_country: record.judge_country.clone(),
                gymnast_country: record.gymnast_country.clone(),
                e_hat: p.e_hat,
                threshold,
                flagged: p.e_hat.abs() > threshold,
                same_country: record.same_country(),
            });
        }
    }
    Ok(rows)
}

/// Copies flags from `rows` onto the matching per-performance entries.
pub fn apply_flags(evaluations: &mut [JudgeEvaluation], rows: &[OutlierRow]) {
    let flagged: HashMap<(&str, &str), bool> =
        rows.iter().map(|r| ((r.performance_id.as_str(), r.judge_id.as_str()), r.flagged)).collect();
    for e in evaluations.iter_mut() {
        for p in e.per_performance.iter_mut() {
            if let Some(&f) = flagged.get(&(p.performance_id.as_str(), e.judge_id.as_str())) {
                p.outlier = f;
            }
        }
    }
}

pub fn flagged_fraction(rows: &[OutlierRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|r| r.flagged).count() as f64 / rows.len() as f64
}

pub fn write_outliers_csv<W: Write>(output: W, rows: &[OutlierRow]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(output);
    writer.write_record([
        "performance_id",
        "judge_id",
        "judge_country",
        "gymnast_country",
        "e_hat",
        "threshold",
        "flagged",
        "same_country",
    ])?;
    for r in rows {
        writer.write_record([
            r.performance_id.clone(),
            r.judge_id.clone(),
            r.judge_country.clone(),
            r.gymnast_country.clone(),
            format!("{:.4}", r.e_hat),
            format!("{:.6}", r.threshold),
            r.flagged.to_string(),
            r.same_country.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Discipline, Gender, JudgeRole, PerformanceEvaluation};
    use proptest::prelude::*;

    fn constant(sigma: f64) -> SigmaModel {
        SigmaModel::from_params("FX", sigma, 0.0, 0.0, 0.05)
    }

    #[test]
    fn thresholds() {
        assert!((outlier_threshold(&constant(0.3), 9.0, 0.5) - 0.3).abs() < 1e-12);
        assert_eq!(outlier_threshold(&constant(0.3), 9.0, 0.0), 0.1);
        assert!((outlier_threshold(&constant(0.4), 9.0, 1.0) - 0.8).abs() < 1e-12);
        assert!((fixed_threshold(&constant(0.4), 9.0) - 0.8).abs() < 1e-12);
    }

    fn record(perf: &str, judge: &str, comp: &str, judge_country: &str) -> MarkRecord {
        MarkRecord {
            competition_id: comp.into(),
            discipline: Discipline::Artistic,
            apparatus: "FX".into(),
            phase: "f".into(),
            performance_id: perf.into(),
            gymnast_id: "G".into(),
            gymnast_country: "USA".into(),
            judge_id: judge.into(),
            judge_country: judge_country.into(),
            judge_role: JudgeRole::Execution,
            judge_gender: Gender::Male,
            mark: 9.0,
            completed: true,
        }
    }

    fn evaluation(judge: &str, entries: &[(&str, f64, f64)], sigma: f64) -> JudgeEvaluation {
        let per_performance: Vec<_> = entries
            .iter()
            .map(|(id, c, e)| PerformanceEvaluation {
                performance_id: id.to_string(),
                control: *c,
                e_hat: *e,
                marking_score: e / sigma,
                outlier: false,
            })
            .collect();
        let scores: Vec<f64> = per_performance.iter().map(|p| p.marking_score).collect();
        JudgeEvaluation {
            judge_id: judge.into(),
            scope: "FX".into(),
            overall_marking_score: crate::marking::overall_marking_score(&scores).unwrap(),
            n: per_performance.len(),
            per_performance,
        }
    }

    #[test]
    fn flags_by_threshold() {
        let models: ModelSet = [constant(0.2)].into_iter().collect();
        // Pin M_j to 1.
        let mut e = evaluation("J1", &[("P1", 9.0, 0.05), ("P2", 9.0, 0.5)], 0.2);
        e.overall_marking_score = 1.0;
        let recs = [record("P1", "J1", "C1", "USA"), record("P2", "J1", "C1", "FRA")];
        let rows = flag_outliers(&[e], &recs, &models, OutlierOptions::default()).unwrap();
        assert!(!rows[0].flagged);
        assert!(rows[0].same_country);
        assert!((rows[1].threshold - 0.4).abs() < 1e-12);
        assert!(rows[1].flagged);
        assert!(!rows[1].same_country);
    }

    #[test]
    fn leave_competition_out_uses_other_competitions() {
        let models: ModelSet = [constant(0.2)].into_iter().collect();
        let e = evaluation("J1", &[("P1", 9.0, 0.4), ("P2", 9.0, 0.0), ("P3", 9.0, 0.0)], 0.2);
        let recs = [record("P1", "J1", "C1", "A"), record("P2", "J1", "C2", "A"), record("P3", "J1", "C2", "A")];
        let opts = OutlierOptions { source: JudgeScoreSource::LeaveCompetitionOut, ..Default::default() };
        let rows = flag_outliers(std::slice::from_ref(&e), &recs, &models, opts).unwrap();
        // Outside C1 the judge is perfect, so the floor applies.
        assert_eq!(rows[0].threshold, MIN_THRESHOLD);
        assert!(rows[0].flagged);
        // Outside C2 the judge's score is 2.
        assert!((rows[1].threshold - 0.8).abs() < 1e-12);
        let full = flag_outliers(&[e], &recs, &models, OutlierOptions::default()).unwrap();
        assert!((full[0].threshold - 2.0 * 0.2 * (4.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn apply_flags_marks_entries() {
        let models: ModelSet = [constant(0.2)].into_iter().collect();
        let mut evals = vec![evaluation("J1", &[("P1", 9.0, 0.0), ("P2", 9.0, 0.0), ("P3", 9.0, 0.9)], 0.2)];
        let recs = [record("P1", "J1", "C", "A"), record("P2", "J1", "C", "A"), record("P3", "J1", "C", "A")];
        let rows = flag_outliers(&evals, &recs, &models, OutlierOptions::default()).unwrap();
        apply_flags(&mut evals, &rows);
        let flags: Vec<bool> = evals[0].per_performance.iter().map(|p| p.outlier).collect();
        assert_eq!(flags, rows.iter().map(|r| r.flagged).collect::<Vec<_>>());
        assert!((flagged_fraction(&rows) - flags.iter().filter(|f| **f).count() as f64 / 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn threshold_monotone(sigma in 0.0f64..1.0, s2 in 0.0f64..1.0, m1 in 0.0f64..3.0, m2 in 0.0f64..3.0, c in 0.0f64..10.0) {
            let model = constant(sigma);
            let (lo, hi) = if m1 <= m2 { (m1, m2) } else { (m2, m1) };
            prop_assert!(outlier_threshold(&model, c, lo) <= outlier_threshold(&model, c, hi));
            let (a, b) = if sigma <= s2 { (sigma, s2) } else { (s2, sigma) };
            prop_assert!(outlier_threshold(&constant(a), c, m1) <= outlier_threshold(&constant(b), c, m1));
            prop_assert!(outlier_threshold(&model, c, m1) >= MIN_THRESHOLD);
        }
    }
}
