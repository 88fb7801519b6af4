//! Marking scores: each discrepancy expressed in units of the intrinsic
//! variability at that control score, aggregated per judge as a root mean
//! square. A perfect judge scores 0, a typical one about 1.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{
    ControlScore, Discipline, JudgeEvaluation, MarkRecord, PerformanceEvaluation, ScopeKind, SigmaModel,
};
use crate::variability::ModelSet;

pub fn performance_marking_score(mark: f64, control: f64, model: &SigmaModel) -> f64 {
    (mark - control) / model.sigma_at(control)
}

pub fn overall_marking_score(per_performance: &[f64]) -> Result<f64> {
    if per_performance.is_empty() {
        return Err(Error::NoEvaluations);
    }
    let mean_sq = per_performance.iter().map(|m| m * m).sum::<f64>() / per_performance.len() as f64;
    Ok(mean_sq.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvaluationPolicy {
    pub scope: ScopeKind,
    /// `None` applies [`default_include_aborted`] per discipline.
    pub include_aborted: Option<bool>,
}

/// Marks on aborted routines are left out for trampoline and kept elsewhere.
pub fn default_include_aborted(discipline: Discipline) -> bool {
    discipline != Discipline::Trampoline
}

/// One evaluation per (judge, scope), sorted by judge then scope.
pub fn evaluate_judges(
    records: &[MarkRecord],
    controls: &BTreeMap<String, ControlScore>,
    models: &ModelSet,
    policy: EvaluationPolicy,
) -> Result<Vec<JudgeEvaluation>> {
    let mut groups: BTreeMap<(String, String), Vec<PerformanceEvaluation>> = BTreeMap::new();
    for r in records {
        let include_aborted = policy.include_aborted.unwrap_or_else(|| default_include_aborted(r.discipline));
        if !r.completed && !include_aborted {
            continue;
        }
        let model = models.resolve(r, policy.scope)?;
        let control =
            controls.get(&r.performance_id).ok_or_else(|| Error::MissingControlScore(r.performance_id.clone()))?.value;
        groups.entry((r.judge_id.clone(), model.scope.clone())).or_default().push(PerformanceEvaluation {
            performance_id: r.performance_id.clone(),
            control,
            e_hat: r.mark - control,
            marking_score: performance_marking_score(r.mark, control, model),
            outlier: false,
        });
    }
    groups
        .into_iter()
        .map(|((judge_id, scope), per_performance)| {
            let scores: Vec<f64> = per_performance.iter().map(|p| p.marking_score).collect();
            Ok(JudgeEvaluation {
                judge_id,
                scope,
                overall_marking_score: overall_marking_score(&scores)?,
                n: per_performance.len(),
                per_performance,
            })
        })
        .collect()
}

pub fn write_evaluations_csv<W: Write>(output: W, evaluations: &[JudgeEvaluation]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(output);
    writer.write_record(["judge_id", "scope", "n", "overall_marking_score"])?;
    for e in evaluations {
        writer.write_record([
            e.judge_id.clone(),
            e.scope.clone(),
            e.n.to_string(),
            format!("{:.6}", e.overall_marking_score),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Per-performance detail for one judge evaluation.
pub fn write_evaluation_detail_csv<W: Write>(output: W, evaluation: &JudgeEvaluation) -> Result<()> {
    let mut writer = csv::Writer::from_writer(output);
    writer.write_record(["performance_id", "control", "e_hat", "marking_score", "outlier"])?;
    for p in &evaluation.per_performance {
        writer.write_record([
            p.performance_id.clone(),
            format!("{:.4}", p.control),
            format!("{:.4}", p.e_hat),
            format!("{:.6}", p.marking_score),
            p.outlier.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Gender, JudgeRole};
    use proptest::prelude::*;

    fn constant_model(sigma: f64) -> SigmaModel {
        SigmaModel::from_params("FX", sigma, 0.0, 0.0, 0.05)
    }

    fn record(perf: &str, judge: &str, mark: f64, completed: bool, discipline: Discipline) -> MarkRecord {
        MarkRecord {
            competition_id: "C".into(),
            discipline,
            apparatus: "FX".into(),
            phase: "f".into(),
            performance_id: perf.into(),
            gymnast_id: "G".into(),
            gymnast_country: "A".into(),
            judge_id: judge.into(),
            judge_country: "B".into(),
            judge_role: JudgeRole::Execution,
            judge_gender: Gender::Female,
            mark,
            completed,
        }
    }

    fn controls(values: &[(&str, f64)]) -> BTreeMap<String, ControlScore> {
        values
            .iter()
            .map(|(id, v)| (id.to_string(), ControlScore { performance_id: id.to_string(), value: *v, panel_size: 5 }))
            .collect()
    }

    #[test]
    fn performance_scores() {
        let m = constant_model(0.2);
        assert_eq!(performance_marking_score(9.2, 9.2, &m), 0.0);
        assert!((performance_marking_score(9.4, 9.2, &m) - 1.0).abs() < 1e-12);
        assert!((performance_marking_score(9.0, 9.2, &m) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn overall_scores() {
        assert_eq!(overall_marking_score(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(overall_marking_score(&[1.0, -1.0, 1.0, -1.0]).unwrap(), 1.0);
        assert!((overall_marking_score(&[0.0, 2.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(overall_marking_score(&[]), Err(Error::NoEvaluations));
    }

    #[test]
    fn perfect_judge_scores_zero() {
        let ids: Vec<String> = (0..10).map(|i| format!("P{i}")).collect();
        let cs: Vec<(&str, f64)> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), 8.0 + i as f64 * 0.1)).collect();
        let recs: Vec<_> = cs.iter().map(|(id, v)| record(id, "J1", *v, true, Discipline::Artistic)).collect();
        let models: ModelSet = [constant_model(0.3)].into_iter().collect();
        let evals = evaluate_judges(&recs, &controls(&cs), &models, EvaluationPolicy::default()).unwrap();
        assert_eq!(evals.len(), 1);
        assert_eq!(evals[0].overall_marking_score, 0.0);
        assert_eq!(evals[0].n, 10);
        evals[0].validate().unwrap();
    }

    #[test]
    fn one_sigma_judge_scores_one() {
        let models: ModelSet = [constant_model(0.25)].into_iter().collect();
        let recs = [record("P1", "J1", 9.25, true, Discipline::Artistic)];
        let evals = evaluate_judges(&recs, &controls(&[("P1", 9.0)]), &models, EvaluationPolicy::default()).unwrap();
        assert!((evals[0].overall_marking_score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aborted_routines_policy() {
        let models: ModelSet = [constant_model(0.3)].into_iter().collect();
        let cs = controls(&[("P1", 9.0), ("P2", 4.0)]);
        let recs = [
            record("P1", "J1", 9.1, true, Discipline::Trampoline),
            record("P2", "J1", 5.0, false, Discipline::Trampoline),
        ];
        let strict = EvaluationPolicy { include_aborted: Some(false), ..Default::default() };
        let evals = evaluate_judges(&recs, &cs, &models, strict).unwrap();
        assert_eq!(evals[0].n, 1);
        assert!(evals[0].per_performance.iter().all(|p| p.performance_id != "P2"));
        // Trampoline default is to leave them out too.
        assert_eq!(evaluate_judges(&recs, &cs, &models, EvaluationPolicy::default()).unwrap()[0].n, 1);
        let lenient = EvaluationPolicy { include_aborted: Some(true), ..Default::default() };
        assert_eq!(evaluate_judges(&recs, &cs, &models, lenient).unwrap()[0].n, 2);
    }

    #[test]
    fn missing_model_names_scope() {
        let recs = [record("P1", "J1", 9.1, true, Discipline::Artistic)];
        let err = evaluate_judges(&recs, &controls(&[("P1", 9.0)]), &ModelSet::default(), EvaluationPolicy::default())
            .unwrap_err();
        assert_eq!(err, Error::MissingModel("FX".into()));
    }

    proptest! {
        #[test]
        fn overall_score_properties(
            ms in prop::collection::vec(-4.0f64..4.0, 1..40),
            k in 0.0f64..5.0,
            rot in 0usize..40,
        ) {
            let m = overall_marking_score(&ms).unwrap();
            let mut permuted = ms.clone();
            permuted.rotate_left(rot % ms.len());
            prop_assert!((overall_marking_score(&permuted).unwrap() - m).abs() <= 1e-12 * m.max(1.0));
            let scaled: Vec<f64> = ms.iter().map(|x| x * k).collect();
            prop_assert!((overall_marking_score(&scaled).unwrap() - k * m).abs() <= 1e-12 * (k * m).max(1.0));
            let mut extended = ms.clone();
            extended.push(m);
            prop_assert!((overall_marking_score(&extended).unwrap() - m).abs() <= 1e-12 * m.max(1.0));
        }

        #[test]
        fn performance_score_increases_with_mark(c in 0.0f64..10.0, s1 in 0.0f64..10.0, s2 in 0.0f64..10.0) {
            prop_assume!(s1 < s2);
            let model = SigmaModel::from_params("X", 0.6, -0.004, 0.5, 0.05);
            prop_assert!(performance_marking_score(s1, c, &model) < performance_marking_score(s2, c, &model));
        }
    }
}
