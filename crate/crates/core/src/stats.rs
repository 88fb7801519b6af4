//! Group comparisons of marking scores and correlation utilities.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marking::overall_marking_score;
use crate::model::{Gender, JudgeEvaluation, MarkRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// Mean of the first sample is less than the mean of the second.
    Less,
    Greater,
}

impl Alternative {
    pub fn as_str(self) -> &'static str {
        match self {
            Alternative::TwoSided => "two-sided",
            Alternative::Less => "less",
            Alternative::Greater => "greater",
        }
    }
}

impl FromStr for Alternative {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-sided" => Ok(Alternative::TwoSided),
            "less" => Ok(Alternative::Less),
            "greater" => Ok(Alternative::Greater),
            _ => Err(Error::InvalidValue(format!("unknown alternative `{s}`"))),
        }
    }
}

const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 10_000;

/// Continued fraction of the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)` and its complement, given both
/// `x` and `y = 1 - x` so the caller can supply an accurate complement.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64, y: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if y <= 0.0 {
        return (1.0, 0.0);
    }
    let ln_beta = libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b);
    let front = libm::exp(a * libm::log(x) + b * libm::log(y) - ln_beta);
    if x < (a + 1.0) / (a + b + 2.0) {
        let lower = front * beta_cf(a, b, x) / a;
        (lower, 1.0 - lower)
    } else {
        let upper = front * beta_cf(b, a, y) / b;
        (1.0 - upper, upper)
    }
}

/// `P(T <= t)` for Student's t with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let t2 = t * t;
    let x = df / (df + t2);
    let y = t2 / (df + t2);
    let (tail2, _) = regularized_incomplete_beta(df / 2.0, 0.5, x, y);
    if t < 0.0 {
        0.5 * tail2
    } else {
        1.0 - 0.5 * tail2
    }
}

/// `P(|T| >= |t|)`.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    let t2 = t * t;
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t2), t2 / (df + t2)).0
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub alternative: Alternative,
    pub mean_a: f64,
    pub mean_b: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Welch's unequal-variance t-test.
pub fn welch_t_test(a: &[f64], b: &[f64], alternative: Alternative) -> Result<TTest> {
    for (name, s) in [("a", a), ("b", b)] {
        if s.len() < 2 {
            return Err(Error::DegenerateSample(format!("sample {name} needs at least 2 values")));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateSample(format!("sample {name} has non-finite values")));
        }
        if !(variance(s) > 0.0) {
            return Err(Error::DegenerateSample(format!("sample {name} has zero variance")));
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (qa, qb) = (variance(a) / na, variance(b) / nb);
    let se2 = qa + qb;
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    let p = match alternative {
        Alternative::TwoSided => student_t_two_sided(t, df),
        Alternative::Less => student_t_cdf(t, df),
        Alternative::Greater => student_t_cdf(-t, df),
    };
    Ok(TTest { t, df, p: p.clamp(0.0, 1.0), alternative, mean_a: ma, mean_b: mb, n_a: a.len(), n_b: b.len() })
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::DegenerateSample("need at least 2 pairs".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::DegenerateSample("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Role,
    Gender,
    Apparatus,
}

impl GroupBy {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupBy::Role => "role",
            GroupBy::Gender => "gender",
            GroupBy::Apparatus => "apparatus",
        }
    }
}

impl FromStr for GroupBy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "role" => Ok(GroupBy::Role),
            "gender" => Ok(GroupBy::Gender),
            "apparatus" => Ok(GroupBy::Apparatus),
            _ => Err(Error::InvalidValue(format!("unknown grouping `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupedScores {
    pub groups: BTreeMap<String, Vec<f64>>,
    pub warnings: Vec<String>,
}

/// Marking scores per group. Each evaluation is split by the group of each of
/// its marks and every part yields one score, so a judge who sat in two roles
/// on the same scope contributes to both role groups.
pub fn group_marking_scores(
    evaluations: &[JudgeEvaluation],
    records: &[MarkRecord],
    group_by: GroupBy,
) -> Result<GroupedScores> {
    let by_key: HashMap<(&str, &str), &MarkRecord> =
        records.iter().map(|r| ((r.performance_id.as_str(), r.judge_id.as_str()), r)).collect();
    let mut out = GroupedScores::default();
    let mut skipped_unknown = 0usize;
    for e in evaluations {
        let mut parts: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for p in &e.per_performance {
            let r = by_key.get(&(p.performance_id.as_str(), e.judge_id.as_str())).ok_or_else(|| {
                Error::InvalidValue(format!(
                    "no record for performance `{}` and judge `{}`",
                    p.performance_id, e.judge_id
                ))
            })?;
            let key = match group_by {
                GroupBy::Role => r.judge_role.as_str().to_string(),
                GroupBy::Gender if r.judge_gender == Gender::Unknown => {
                    skipped_unknown += 1;
                    continue;
                }
                GroupBy::Gender => r.judge_gender.as_str().to_string(),
                GroupBy::Apparatus => r.apparatus.clone(),
            };
            parts.entry(key).or_default().push(p.marking_score);
        }
        for (key, scores) in parts {
            out.groups.entry(key).or_default().push(overall_marking_score(&scores)?);
        }
    }
    if skipped_unknown > 0 {
        out.warnings.push(format!("{skipped_unknown} marks by judges of unknown gender left out"));
    }
    if out.groups.is_empty() {
        out.warnings.push(format!("no {} group has any marking score", group_by.as_str()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub group_by: GroupBy,
    pub group_a: String,
    pub group_b: String,
    pub test: TTest,
}

/// Welch tests for every pair of groups, in key order.
pub fn compare_groups(grouped: &GroupedScores, group_by: GroupBy, alternative: Alternative) -> Vec<Result<Comparison>> {
    let keys: Vec<&String> = grouped.groups.keys().collect();
    let mut out = Vec::new();
    for i in 0..keys.len() {
        for j in i + 1..keys.len() {
            let (a, b) = (keys[i], keys[j]);
            out.push(welch_t_test(&grouped.groups[a], &grouped.groups[b], alternative).map(|test| Comparison {
                group_by,
                group_a: a.clone(),
                group_b: b.clone(),
                test,
            }));
        }
    }
    out
}

pub fn format_comparison(c: &Comparison) -> String {
    let mut s = String::new();
    let t = &c.test;
    let _ = writeln!(s, "comparison by {}: {} vs {}", c.group_by.as_str(), c.group_a, c.group_b);
    let _ = writeln!(s, "  {:<12} n = {:>4}  mean M = {:.6}", c.group_a, t.n_a, t.mean_a);
    let _ = writeln!(s, "  {:<12} n = {:>4}  mean M = {:.6}", c.group_b, t.n_b, t.mean_b);
    let _ = writeln!(s, "  alternative = {}", t.alternative.as_str());
    let _ = writeln!(s, "  t = {:.6}  df = {:.4}  p = {:.6e}", t.t, t.df, t.p);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Reference values from scipy.stats.ttest_ind(equal_var=False).
    const CASE_A: ([f64; 5], [f64; 5]) = ([1.0, 2.0, 3.0, 4.0, 5.0], [3.0, 4.0, 5.0, 6.0, 7.0]);

    #[test]
    fn welch_oracle_small() {
        let (a, b) = CASE_A;
        let r = welch_t_test(&a, &b, Alternative::TwoSided).unwrap();
        assert!((r.t + 2.0).abs() < 1e-12);
        assert!((r.df - 8.0).abs() < 1e-12);
        assert!((r.p - 0.080_516_237_957_262_57).abs() < 1e-10);
        let less = welch_t_test(&a, &b, Alternative::Less).unwrap();
        assert!((less.p - 0.040_258_118_978_631_28).abs() < 1e-10);
    }

    #[test]
    fn identical_samples() {
        let a = [0.8, 1.1, 0.9, 1.3];
        let r = welch_t_test(&a, &a, Alternative::TwoSided).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn swapping_negates_t() {
        let (a, b) = CASE_A;
        let ab = welch_t_test(&a, &b, Alternative::TwoSided).unwrap();
        let ba = welch_t_test(&b, &a, Alternative::TwoSided).unwrap();
        assert_eq!(ab.t, -ba.t);
        assert_eq!(ab.p, ba.p);
    }

    #[test]
    fn degenerate_samples() {
        assert!(welch_t_test(&[1.0], &[1.0, 2.0], Alternative::TwoSided).is_err());
        assert!(welch_t_test(&[1.0, 1.0], &[1.0, 2.0], Alternative::TwoSided).is_err());
    }

    #[test]
    fn t_cdf_limits() {
        assert_eq!(student_t_cdf(0.0, 5.0), 0.5);
        // df = 1 is Cauchy.
        for t in [-3.0f64, -0.5, 0.7, 2.0, 10.0] {
            let cauchy = 0.5 + t.atan() / std::f64::consts::PI;
            assert!((student_t_cdf(t, 1.0) - cauchy).abs() < 1e-13, "{t}");
        }
        // df = 2 has the closed form 1/2 + t / (2 sqrt(2 + t^2)).
        for t in [-4.0f64, -1.0, 0.3, 2.5] {
            let closed = 0.5 + t / (2.0 * (2.0 + t * t).sqrt());
            assert!((student_t_cdf(t, 2.0) - closed).abs() < 1e-13, "{t}");
        }
    }

    #[test]
    fn correlations() {
        let x: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!((spearman(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!(pearson(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    fn sample() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0f64..5.0, 3..20)
    }

    proptest! {
        #[test]
        fn welch_invariances(a in sample(), b in sample(), shift in -10.0f64..10.0, k in 0.1f64..10.0) {
            let Ok(base) = welch_t_test(&a, &b, Alternative::TwoSided) else { return Ok(()); };
            prop_assume!(variance(&a) > 1e-6 && variance(&b) > 1e-6);
            let shifted = |s: &[f64]| s.iter().map(|v| v + shift).collect::<Vec<_>>();
            let scaled = |s: &[f64]| s.iter().map(|v| v * k).collect::<Vec<_>>();
            let ts = welch_t_test(&shifted(&a), &shifted(&b), Alternative::TwoSided).unwrap();
            let tk = welch_t_test(&scaled(&a), &scaled(&b), Alternative::TwoSided).unwrap();
            for other in [ts, tk] {
                prop_assert!((other.p - base.p).abs() < 1e-12);
                prop_assert!((other.df - base.df).abs() < 1e-9 * base.df);
                prop_assert!((other.t - base.t).abs() < 1e-9 * base.t.abs().max(1.0));
            }
            let less = welch_t_test(&a, &b, Alternative::Less).unwrap().p;
            let greater = welch_t_test(&a, &b, Alternative::Greater).unwrap().p;
            prop_assert!((less + greater - 1.0).abs() < 1e-12);
        }

        #[test]
        fn spearman_monotone_invariance(x in prop::collection::vec(-3.0f64..3.0, 3..30), y in prop::collection::vec(-3.0f64..3.0, 30)) {
            let y = &y[..x.len()];
            let Ok(base) = spearman(&x, y) else { return Ok(()); };
            let tx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
            let ty: Vec<f64> = y.iter().map(|v| v * v * v + 2.0 * v).collect();
            prop_assert!((spearman(&tx, &ty).unwrap() - base).abs() < 1e-12);
        }
    }
}
