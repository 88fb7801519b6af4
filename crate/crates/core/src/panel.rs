//! Control scores and official panel aggregation.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{ControlScore, MarkRecord};

/// Default gap between panel and reference score that triggers a merge.
/// Placeholder: the official value is not public.
pub const DEFAULT_GAP_TOL: f64 = 0.3;
/// Default maximal disagreement between the two reference judges.
/// Placeholder: the official value is not public.
pub const DEFAULT_REF_AGREEMENT_TOL: f64 = 0.2;

fn sorted(marks: &[f64]) -> Vec<f64> {
    let mut v = marks.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Sample median; the mean of the two middle values for even counts.
pub fn control_score(marks: &[f64]) -> Result<f64> {
    if marks.is_empty() {
        return Err(Error::NoMarks);
    }
    let v = sorted(marks);
    let mid = v.len() / 2;
    Ok(if v.len() % 2 == 1 { v[mid] } else { (v[mid - 1] + v[mid]) / 2.0 })
}

/// Control scores of every performance, over all roles present in the data.
pub fn control_scores(records: &[MarkRecord]) -> BTreeMap<String, ControlScore> {
    let mut marks: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        marks.entry(&r.performance_id).or_default().push(r.mark);
    }
    marks
        .into_iter()
        .map(|(id, m)| {
            let value = control_score(&m).expect("nonempty by construction");
            (id.to_string(), ControlScore { performance_id: id.to_string(), value, panel_size: m.len() })
        })
        .collect()
}

/// Mean of the middle three of five execution marks.
pub fn execution_panel_score(marks: &[f64]) -> Result<f64> {
    if marks.len() != 5 {
        return Err(Error::PanelSize { expected: 5, got: marks.len() });
    }
    let v = sorted(marks);
    Ok((v[1] + v[2] + v[3]) / 3.0)
}

pub fn reference_score(marks: &[f64]) -> Result<f64> {
    if marks.len() != 2 {
        return Err(Error::PanelSize { expected: 2, got: marks.len() });
    }
    Ok((marks[0] + marks[1]) / 2.0)
}

/// Thresholds of the reference-judge merge rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeTolerances {
    pub gap_tol: f64,
    pub ref_agreement_tol: f64,
}

impl Default for MergeTolerances {
    fn default() -> Self {
        MergeTolerances { gap_tol: DEFAULT_GAP_TOL, ref_agreement_tol: DEFAULT_REF_AGREEMENT_TOL }
    }
}

/// Final execution score after the reference-judge merge rule.
///
/// When the panel and reference scores are more than `gap_tol` apart and the
/// two reference judges agree to within `ref_agreement_tol`, the result is the
/// mean of both scores; otherwise it is the panel score.
pub fn final_execution_score(
    panel: f64,
    reference: f64,
    ref_marks: [f64; 2],
    tolerances: MergeTolerances,
) -> Result<f64> {
    for tol in [tolerances.gap_tol, tolerances.ref_agreement_tol] {
        if !(tol > 0.0) {
            return Err(Error::NonPositiveTolerance(tol));
        }
    }
    let gap = (panel - reference).abs();
    let ref_spread = (ref_marks[0] - ref_marks[1]).abs();
    if gap > tolerances.gap_tol && ref_spread < tolerances.ref_agreement_tol {
        Ok((panel + reference) / 2.0)
    } else {
        Ok(panel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn medians() {
        assert!(close(control_score(&[9.0, 9.1, 9.2, 9.3, 9.4]).unwrap(), 9.2));
        assert!(close(control_score(&[9.0, 9.1, 9.2, 9.3]).unwrap(), 9.15));
        assert_eq!(control_score(&[7.0]).unwrap(), 7.0);
        assert_eq!(control_score(&[]), Err(Error::NoMarks));
    }

    #[test]
    fn trimmed_mean() {
        assert!(close(execution_panel_score(&[9.0, 9.1, 9.2, 9.3, 9.4]).unwrap(), 9.2));
        assert!(close(execution_panel_score(&[8.0, 9.2, 9.2, 9.2, 10.0]).unwrap(), 9.2));
        assert!(close(execution_panel_score(&[1.0; 5]).unwrap(), 1.0));
        assert!(matches!(execution_panel_score(&[1.0; 4]), Err(Error::PanelSize { expected: 5, got: 4 })));
    }

    #[test]
    fn reference_mean() {
        assert!(close(reference_score(&[9.0, 9.2]).unwrap(), 9.1));
        assert!(close(reference_score(&[9.1, 9.1]).unwrap(), 9.1));
        assert!(close(reference_score(&[0.0, 10.0]).unwrap(), 5.0));
        assert!(reference_score(&[9.0]).is_err());
    }

    #[test]
    fn merge_rule() {
        let tol = MergeTolerances { gap_tol: 0.3, ref_agreement_tol: 0.2 };
        assert!(close(final_execution_score(9.2, 9.2, [9.0, 9.4], tol).unwrap(), 9.2));
        assert!(close(final_execution_score(9.0, 9.6, [9.6, 9.6], tol).unwrap(), 9.3));
        assert!(close(final_execution_score(9.0, 9.6, [9.9, 9.3], tol).unwrap(), 9.0));
        let bad = MergeTolerances { gap_tol: 0.0, ..tol };
        assert!(final_execution_score(9.0, 9.6, [9.6, 9.6], bad).is_err());
    }

    #[test]
    fn control_scores_use_every_role() {
        use crate::model::*;
        let base = MarkRecord {
            competition_id: "C".into(),
            discipline: Discipline::Artistic,
            apparatus: "VT".into(),
            phase: "final".into(),
            performance_id: "P".into(),
            gymnast_id: "G".into(),
            gymnast_country: "USA".into(),
            judge_id: String::new(),
            judge_country: "FRA".into(),
            judge_role: JudgeRole::Execution,
            judge_gender: Gender::Female,
            mark: 0.0,
            completed: true,
        };
        let marks = [(8.0, JudgeRole::Execution), (8.2, JudgeRole::Execution), (9.0, JudgeRole::Reference)];
        let recs: Vec<_> = marks
            .iter()
            .enumerate()
            .map(|(i, (m, role))| MarkRecord { judge_id: format!("J{i}"), mark: *m, judge_role: *role, ..base.clone() })
            .collect();
        let cs = control_scores(&recs);
        assert_eq!(cs["P"].value, 8.2);
        assert_eq!(cs["P"].panel_size, 3);
        assert!(cs["P"].matches(&[8.0, 8.2, 9.0]));
    }

    fn grid_mark() -> impl Strategy<Value = f64> {
        (0u32..=200).prop_map(|k| k as f64 * 0.05)
    }

    proptest! {
        #[test]
        fn median_is_permutation_invariant_and_bounded(
            marks in prop::collection::vec(grid_mark(), 1..12),
            seed in any::<u64>(),
        ) {
            let c = control_score(&marks).unwrap();
            let lo = marks.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = marks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= c && c <= hi);
            let mut shuffled = marks.clone();
            let k = (seed as usize) % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            prop_assert_eq!(control_score(&shuffled).unwrap(), c);
        }

        #[test]
        fn merge_is_identity_without_gap(panel in 0.0f64..10.0, r0 in 0.0f64..10.0, r1 in 0.0f64..10.0) {
            let out = final_execution_score(panel, panel, [r0, r1], MergeTolerances::default()).unwrap();
            prop_assert_eq!(out, panel);
        }
    }
}
