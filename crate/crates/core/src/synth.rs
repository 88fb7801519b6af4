//! Synthetic competition datasets with a known generating model.
//!
//! Each performance gets a latent true quality; every panel judge marks it
//! with `Normal(quality + bias, scale * sigma(quality))`, rounded to 0.1 and
//! clamped to [0, 10]. The true qualities are returned alongside the marks so
//! downstream estimates can be checked against them.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Discipline, Gender, JudgeRole, MarkRecord};
use crate::rng::SimRng;

/// Generating curve `max(alpha + beta * exp(gamma * q), floor)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaCurve {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
}

fn default_floor() -> f64 {
    0.05
}

impl SigmaCurve {
    /// The curve with growth rate `gamma` through two `(quality, sigma)` points.
    pub fn through(gamma: f64, (q1, s1): (f64, f64), (q2, s2): (f64, f64)) -> Self {
        let (e1, e2) = (libm::exp(gamma * q1), libm::exp(gamma * q2));
        let beta = (s2 - s1) / (e2 - e1);
        SigmaCurve { alpha: s1 - beta * e1, beta, gamma, floor: default_floor() }
    }

    /// Default artistic-like curve: about 0.45 at quality 7 down to about 0.10
    /// at 9.5. Both anchors are visual approximations, not fitted values.
    pub fn artistic_default() -> Self {
        SigmaCurve::through(0.5, (7.0, 0.45), (9.5, 0.10))
    }

    pub fn at(&self, q: f64) -> f64 {
        (self.alpha + self.beta * libm::exp(self.gamma * q)).max(self.floor)
    }
}

/// Truncated normal distribution of true qualities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityDistribution {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApparatusSpec {
    pub code: String,
    pub sigma: SigmaCurve,
    /// Judges allowed on this apparatus; empty means every judge.
    #[serde(default)]
    pub judges: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeProfile {
    pub judge_id: String,
    pub country: String,
    #[serde(default = "unknown_gender")]
    pub gender: Gender,
    /// Multiplier on the generating standard deviation.
    #[serde(default = "one")]
    pub scale: f64,
    /// Constant added to every mark.
    #[serde(default)]
    pub bias: f64,
    /// Added to marks for gymnasts of the judge's own country.
    #[serde(default)]
    pub compatriot_bias: f64,
}

fn unknown_gender() -> Gender {
    Gender::Unknown
}

fn one() -> f64 {
    1.0
}

fn default_phase() -> String {
    "qualification".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub competition_prefix: String,
    #[serde(default = "one_usize")]
    pub n_competitions: usize,
    pub discipline: Discipline,
    #[serde(default = "default_phase")]
    pub phase: String,
    pub apparatus: Vec<ApparatusSpec>,
    /// Performances per apparatus.
    pub n_performances: usize,
    /// Execution judges per panel.
    pub panel_size: usize,
    /// Reference judges per panel.
    #[serde(default)]
    pub n_reference: usize,
    pub quality: QualityDistribution,
    pub judges: Vec<JudgeProfile>,
    pub gymnast_countries: Vec<String>,
    /// Probability that a routine is aborted; its quality is then scaled by a
    /// uniform factor in [0.3, 0.8].
    #[serde(default)]
    pub abort_rate: f64,
    pub seed: u64,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub performance_id: String,
    pub true_quality: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub records: Vec<MarkRecord>,
    pub truth: Vec<TruthRow>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidSpec(m));
        if self.panel_size < 3 {
            return fail(format!("panel_size must be at least 3, got {}", self.panel_size));
        }
        if self.n_competitions == 0 {
            return fail("n_competitions must be positive".into());
        }
        if self.apparatus.is_empty() {
            return fail("no apparatus".into());
        }
        if self.gymnast_countries.is_empty() {
            return fail("no gymnast countries".into());
        }
        if !(0.0..=1.0).contains(&self.abort_rate) {
            return fail(format!("abort_rate must be in [0, 1], got {}", self.abort_rate));
        }
        let q = &self.quality;
        if !(q.sd >= 0.0) || !(q.min <= q.max) || q.min < 0.0 || q.max > 10.0 {
            return fail("quality distribution must have sd >= 0 and 0 <= min <= max <= 10".into());
        }
        let mut ids: Vec<&str> = self.judges.iter().map(|j| j.judge_id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return fail("duplicate judge ids".into());
        }
        if self.judges.iter().any(|j| !(j.scale >= 0.0)) {
            return fail("judge scale must be nonnegative".into());
        }
        let needed = self.panel_size + self.n_reference;
        for a in &self.apparatus {
            let eligible = self.eligible(a);
            if eligible.len() < needed {
                return fail(format!("apparatus {} has {} eligible judges, needs {needed}", a.code, eligible.len()));
            }
            if a.judges.iter().any(|id| !self.judges.iter().any(|j| &j.judge_id == id)) {
                return fail(format!("apparatus {} lists an unknown judge", a.code));
            }
        }
        Ok(())
    }

    fn eligible(&self, apparatus: &ApparatusSpec) -> Vec<usize> {
        (0..self.judges.len())
            .filter(|&i| apparatus.judges.is_empty() || apparatus.judges.contains(&self.judges[i].judge_id))
            .collect()
    }

    /// A four-apparatus artistic competition with a mixed pool of 96 judges.
    pub fn artistic_default(seed: u64) -> Self {
        let countries: Vec<String> =
            ["USA", "CHN", "JPN", "RUS", "GBR", "FRA", "GER", "ITA", "BRA", "CAN", "AUS", "NED"]
                .iter()
                .map(|s| s.to_string())
                .collect();
        let judges: Vec<JudgeProfile> = (0..96)
            .map(|i| JudgeProfile {
                judge_id: format!("J{i:03}"),
                country: countries[i % countries.len()].clone(),
                gender: if i % 2 == 0 { Gender::Female } else { Gender::Male },
                // Spread of accuracies; men slightly less precise on average.
                scale: 0.75 + 0.5 * ((i * 37) % 96) as f64 / 95.0 + if i % 2 == 1 { 0.1 } else { 0.0 },
                bias: 0.0,
                compatriot_bias: if i % 24 == 5 { 0.3 } else { 0.0 },
            })
            .collect();
        let women: Vec<String> =
            judges.iter().filter(|j| j.gender == Gender::Female).map(|j| j.judge_id.clone()).collect();
        let men: Vec<String> = judges.iter().filter(|j| j.gender == Gender::Male).map(|j| j.judge_id.clone()).collect();
        let apparatus = vec![
            ApparatusSpec { code: "FX_W".into(), sigma: SigmaCurve::artistic_default(), judges: women.clone() },
            ApparatusSpec {
                code: "UB".into(),
                sigma: SigmaCurve::through(0.6, (7.0, 0.50), (9.5, 0.12)),
                judges: women,
            },
            ApparatusSpec {
                code: "FX_M".into(),
                sigma: SigmaCurve::through(0.3, (7.0, 0.40), (9.5, 0.15)),
                judges: men.clone(),
            },
            ApparatusSpec { code: "SR".into(), sigma: SigmaCurve::through(0.4, (7.0, 0.42), (9.5, 0.12)), judges: men },
        ];
        SynthSpec {
            competition_prefix: "SYN".into(),
            n_competitions: 4,
            discipline: Discipline::Artistic,
            phase: default_phase(),
            apparatus,
            n_performances: 360,
            panel_size: 5,
            n_reference: 2,
            quality: QualityDistribution { mean: 8.2, sd: 0.6, min: 6.0, max: 9.8 },
            judges,
            gymnast_countries: countries,
            abort_rate: 0.0,
            seed,
        }
    }
}

fn draw_quality(rng: &mut SimRng, q: &QualityDistribution) -> f64 {
    if q.sd == 0.0 || q.min == q.max {
        return q.mean.clamp(q.min, q.max);
    }
    for _ in 0..10_000 {
        let x = rng.normal(q.mean, q.sd);
        if (q.min..=q.max).contains(&x) {
            return x;
        }
    }
    q.min + (q.max - q.min) * rng.uniform()
}

fn round_mark(x: f64) -> f64 {
    ((x * 10.0).round() / 10.0).clamp(0.0, 10.0)
}

pub fn generate_competition(spec: &SynthSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let mut rng = SimRng::new(spec.seed);
    let mut records = Vec::new();
    let mut truth = Vec::new();
    let panel = spec.panel_size + spec.n_reference;
    for apparatus in &spec.apparatus {
        let eligible = spec.eligible(apparatus);
        for k in 0..spec.n_performances {
            let competition_id = format!("{}{}", spec.competition_prefix, k % spec.n_competitions + 1);
            let performance_id = format!("{}-{}-{:05}", spec.competition_prefix, apparatus.code, k + 1);
            let gymnast_id = format!("G-{}-{:05}", apparatus.code, k + 1);
            let gymnast_country = spec.gymnast_countries[rng.below(spec.gymnast_countries.len())].clone();
            let mut quality = draw_quality(&mut rng, &spec.quality);
            let completed = !(spec.abort_rate > 0.0 && rng.uniform() < spec.abort_rate);
            if !completed {
                quality *= 0.3 + 0.5 * rng.uniform();
            }
            let sigma = apparatus.sigma.at(quality);
            let chosen = rng.choose_distinct(eligible.len(), panel);
            for (seat, &pick) in chosen.iter().enumerate() {
                let judge = &spec.judges[eligible[pick]];
                let mut mean = quality + judge.bias;
                if judge.country == gymnast_country {
                    mean += judge.compatriot_bias;
                }
                let mark = round_mark(rng.normal(mean, judge.scale * sigma));
                records.push(MarkRecord {
                    competition_id: competition_id.clone(),
                    discipline: spec.discipline,
                    apparatus: apparatus.code.clone(),
                    phase: spec.phase.clone(),
                    performance_id: performance_id.clone(),
                    gymnast_id: gymnast_id.clone(),
                    gymnast_country: gymnast_country.clone(),
                    judge_id: judge.judge_id.clone(),
                    judge_country: judge.country.clone(),
                    judge_role: if seat < spec.panel_size { JudgeRole::Execution } else { JudgeRole::Reference },
                    judge_gender: judge.gender,
                    mark,
                    completed,
                });
            }
            truth.push(TruthRow { performance_id, true_quality: quality });
        }
    }
    Ok(SyntheticDataset { records, truth })
}

pub fn write_truth_csv<W: Write>(output: W, truth: &[TruthRow]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(output);
    writer.write_record(["performance_id", "true_quality"])?;
    for t in truth {
        writer.write_record([t.performance_id.clone(), format!("{:.6}", t.true_quality)])?;
    }
    writer.flush()?;
    Ok(())
}
