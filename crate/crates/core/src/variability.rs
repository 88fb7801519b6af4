//! Intrinsic judging error variability.
//!
//! Judging discrepancies are binned by control score, each bin yields a sample
//! standard deviation, and the curve `alpha + beta * exp(gamma * c)` is fitted
//! to those standard deviations by weighted least squares with the number of
//! performances per bin as weight. The floor of the model only applies at
//! evaluation time.
//!
//! For a fixed `gamma` the problem is linear in `alpha` and `beta`, so the fit
//! profiles `gamma` out: a coarse grid over [`GAMMA_BRACKET`] followed by
//! golden-section refinement of every grid-local minimum.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ControlScore, Discipline, MarkRecord, ScopeKind, SigmaModel};

pub const DEFAULT_FLOOR: f64 = 0.05;
pub const DEFAULT_BIN_WIDTH: f64 = 0.1;
pub const GAMMA_BRACKET: (f64, f64) = (-2.0, 2.0);

const GRID_STEP: f64 = 0.01;
const GAMMA_TOL: f64 = 1e-10;
const BIN_EDGE_EPS: f64 = 1e-9;

/// Judging discrepancy of one mark, with the context needed for binning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub performance_id: String,
    pub judge_id: String,
    pub control: f64,
    pub e_hat: f64,
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBin {
    pub c: f64,
    pub sample_sd: f64,
    pub sample_var: f64,
    pub n_marks: usize,
    pub n_performances: usize,
}

pub fn compute_discrepancies(
    records: &[MarkRecord],
    controls: &BTreeMap<String, ControlScore>,
) -> Result<Vec<Discrepancy>> {
    records
        .iter()
        .map(|r| {
            let c =
                controls.get(&r.performance_id).ok_or_else(|| Error::MissingControlScore(r.performance_id.clone()))?;
            Ok(Discrepancy {
                performance_id: r.performance_id.clone(),
                judge_id: r.judge_id.clone(),
                control: c.value,
                e_hat: r.mark - c.value,
                completed: r.completed,
            })
        })
        .collect()
}

/// Index of the bin whose center is nearest to `c`; halves round up.
pub fn bin_index(c: f64, bin_width: f64) -> i64 {
    (c / bin_width + 0.5 + BIN_EDGE_EPS).floor() as i64
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

pub fn bin_errors(discrepancies: &[Discrepancy], bin_width: f64, exclude_aborted: bool) -> Result<Vec<ErrorBin>> {
    if !(bin_width > 0.0) {
        return Err(Error::InvalidValue(format!("bin width must be positive, got {bin_width}")));
    }
    let mut groups: BTreeMap<i64, (Vec<f64>, BTreeSet<&str>)> = BTreeMap::new();
    for d in discrepancies {
        if exclude_aborted && !d.completed {
            continue;
        }
        let entry = groups.entry(bin_index(d.control, bin_width)).or_default();
        entry.0.push(d.e_hat);
        entry.1.insert(&d.performance_id);
    }
    let bins: Vec<ErrorBin> = groups
        .into_iter()
        .filter(|(_, (errors, _))| errors.len() >= 2)
        .map(|(k, (errors, perfs))| {
            let var = sample_variance(&errors);
            ErrorBin {
                c: k as f64 * bin_width,
                sample_sd: var.sqrt(),
                sample_var: var,
                n_marks: errors.len(),
                n_performances: perfs.len(),
            }
        })
        .collect();
    if bins.is_empty() {
        return Err(Error::InsufficientData("no bin holds at least two marks".into()));
    }
    Ok(bins)
}

pub fn sigma_at(model: &SigmaModel, c: f64) -> f64 {
    model.sigma_at(c)
}

/// Frequency-weighted RMSD between bin standard deviations and the unfloored curve.
pub fn weighted_rmsd(bins: &[ErrorBin], model: &SigmaModel) -> f64 {
    let (num, den) = bins.iter().fold((0.0, 0.0), |(num, den), b| {
        let w = b.n_performances as f64;
        let r = b.sample_sd - model.unfloored(b.c);
        (num + w * r * r, den + w)
    });
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        0.0
    }
}

/// Weighted data in a numerically convenient frame: abscissae are centred on
/// their weighted mean so the linear sub-problem stays well conditioned.
struct Profile {
    c: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    center: f64,
    y_mean: f64,
    total_ss: f64,
}

/// Weighted linear fit `y = a + b * x` at a given `gamma`.
struct LinearFit {
    a: f64,
    b: f64,
    sse: f64,
}

impl Profile {
    fn new(bins: &[ErrorBin]) -> Self {
        let c: Vec<f64> = bins.iter().map(|b| b.c).collect();
        let y: Vec<f64> = bins.iter().map(|b| b.sample_sd).collect();
        let w: Vec<f64> = bins.iter().map(|b| b.n_performances as f64).collect();
        let sw: f64 = w.iter().sum();
        let center = w.iter().zip(&c).map(|(w, c)| w * c).sum::<f64>() / sw;
        let y_mean = w.iter().zip(&y).map(|(w, y)| w * y).sum::<f64>() / sw;
        let total_ss = w.iter().zip(&y).map(|(w, y)| w * (y - y_mean) * (y - y_mean)).sum();
        Profile { c, y, w, center, y_mean, total_ss }
    }

    /// Regressor `(exp(gamma * (c - center)) - 1) / gamma`, which tends to
    /// `c - center` as `gamma` goes to zero.
    fn regressor(&self, gamma: f64, c: f64) -> f64 {
        let u = c - self.center;
        if gamma == 0.0 {
            u
        } else {
            libm::expm1(gamma * u) / gamma
        }
    }

    fn fit(&self, gamma: f64) -> LinearFit {
        let x: Vec<f64> = self.c.iter().map(|&c| self.regressor(gamma, c)).collect();
        let sw: f64 = self.w.iter().sum();
        let x_mean = self.w.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() / sw;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for ((w, x), y) in self.w.iter().zip(&x).zip(&self.y) {
            sxx += w * (x - x_mean) * (x - x_mean);
            sxy += w * (x - x_mean) * (y - self.y_mean);
        }
        let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let a = self.y_mean - b * x_mean;
        let sse = self
            .w
            .iter()
            .zip(&x)
            .zip(&self.y)
            .map(|((w, x), y)| {
                let r = y - (a + b * x);
                w * r * r
            })
            .sum();
        LinearFit { a, b, sse }
    }

    fn golden_section(&self, mut lo: f64, mut hi: f64) -> f64 {
        const INV_PHI: f64 = 0.618_033_988_749_894_8;
        let mut x1 = hi - INV_PHI * (hi - lo);
        let mut x2 = lo + INV_PHI * (hi - lo);
        let mut f1 = self.fit(x1).sse;
        let mut f2 = self.fit(x2).sse;
        while hi - lo > GAMMA_TOL {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - INV_PHI * (hi - lo);
                f1 = self.fit(x1).sse;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + INV_PHI * (hi - lo);
                f2 = self.fit(x2).sse;
            }
        }
        if f1 <= f2 {
            x1
        } else {
            x2
        }
    }

    fn minimize(&self) -> (f64, LinearFit) {
        let (lo, hi) = GAMMA_BRACKET;
        let steps = ((hi - lo) / GRID_STEP).round() as usize;
        let grid: Vec<f64> = (0..=steps).map(|i| lo + i as f64 * GRID_STEP).collect();
        let values: Vec<f64> = grid.iter().map(|&g| self.fit(g).sse).collect();

        let mut best: Option<(f64, LinearFit)> = None;
        for i in 0..grid.len() {
            let left = if i == 0 { f64::INFINITY } else { values[i - 1] };
            let right = values.get(i + 1).copied().unwrap_or(f64::INFINITY);
            if values[i] > left || values[i] > right {
                continue;
            }
            let a = grid[i.saturating_sub(1)];
            let b = grid[(i + 1).min(grid.len() - 1)];
            let gamma = self.golden_section(a, b);
            let candidates = [(gamma, self.fit(gamma)), (grid[i], self.fit(grid[i]))];
            for (g, f) in candidates {
                if best.as_ref().is_none_or(|(_, bf)| f.sse < bf.sse) {
                    best = Some((g, f));
                }
            }
        }
        best.expect("grid is nonempty")
    }
}

/// Weighted least-squares fit of `alpha + beta * exp(gamma * c)` to per-bin
/// standard deviations. The returned model has an empty scope.
pub fn fit_sigma(bins: &[ErrorBin], floor: f64) -> Result<SigmaModel> {
    if !(floor > 0.0) {
        return Err(Error::InvalidValue(format!("floor must be positive, got {floor}")));
    }
    if bins.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 bins, got {}", bins.len())));
    }
    for b in bins {
        if b.n_performances == 0 || !b.sample_sd.is_finite() || b.sample_sd < 0.0 || !b.c.is_finite() {
            return Err(Error::InvalidValue(format!("malformed bin at c = {}", b.c)));
        }
    }
    let mut sorted = bins.to_vec();
    sorted.sort_by(|a, b| a.c.total_cmp(&b.c).then(a.sample_sd.total_cmp(&b.sample_sd)));
    let c_min = sorted[0].c;
    let c_max = sorted[sorted.len() - 1].c;
    if c_max - c_min <= 0.0 {
        return Err(Error::DegenerateDesign("all bins share the same control score".into()));
    }

    let profile = Profile::new(&sorted);
    let (gamma, fit) = profile.minimize();
    let scale = sorted.iter().map(|b| b.n_performances as f64 * b.sample_sd * b.sample_sd).sum::<f64>();
    let no_better_than_constant = fit.sse >= profile.total_ss - 1e-12 * scale.max(f64::MIN_POSITIVE);

    let (alpha, beta, gamma) = if no_better_than_constant || fit.b == 0.0 {
        (profile.y_mean, 0.0, 0.0)
    } else {
        let (lo, hi) = GAMMA_BRACKET;
        if gamma - lo < 1e-6 || hi - gamma < 1e-6 {
            return Err(Error::GammaAtBoundary { gamma });
        }
        // Guard against landing exactly on the removable singularity.
        let gamma = if gamma == 0.0 { 1e-9 } else { gamma };
        let fit = profile.fit(gamma);
        let alpha = fit.a - fit.b / gamma;
        let beta = fit.b * libm::exp(-gamma * profile.center) / gamma;
        (alpha, beta, gamma)
    };

    let mut model = SigmaModel {
        scope: String::new(),
        alpha,
        beta,
        gamma,
        floor,
        rmsd: 0.0,
        n_marks: sorted.iter().map(|b| b.n_marks).sum(),
        c_min,
        c_max,
    };
    model.rmsd = weighted_rmsd(&sorted, &model);
    Ok(model)
}

/// Options for fitting one model per scope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub scope: ScopeKind,
    pub bin_width: f64,
    pub floor: f64,
    /// `None` applies the per-discipline default: aborted routines are
    /// excluded for trampoline only.
    pub exclude_aborted: Option<bool>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            scope: ScopeKind::Apparatus,
            bin_width: DEFAULT_BIN_WIDTH,
            floor: DEFAULT_FLOOR,
            exclude_aborted: None,
        }
    }
}

pub fn default_exclude_aborted(discipline: Discipline) -> bool {
    discipline == Discipline::Trampoline
}

/// Fitted model and the bins it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct ScopeFit {
    pub model: SigmaModel,
    pub bins: Vec<ErrorBin>,
}

/// Fits every scope present in `records`. Scopes that cannot be fitted map to their error.
pub fn fit_scopes(
    records: &[MarkRecord],
    controls: &BTreeMap<String, ControlScore>,
    options: FitOptions,
) -> Result<BTreeMap<String, Result<ScopeFit>>> {
    let mut by_scope: BTreeMap<String, (Vec<MarkRecord>, Discipline)> = BTreeMap::new();
    for r in records {
        by_scope.entry(options.scope.key(r)).or_insert_with(|| (Vec::new(), r.discipline)).0.push(r.clone());
    }
    let mut out = BTreeMap::new();
    for (scope, (recs, discipline)) in by_scope {
        let discrepancies = compute_discrepancies(&recs, controls)?;
        let exclude = options.exclude_aborted.unwrap_or_else(|| default_exclude_aborted(discipline));
        let fit = bin_errors(&discrepancies, options.bin_width, exclude).and_then(|bins| {
            let mut model = fit_sigma(&bins, options.floor)?;
            model.scope = scope.clone();
            Ok(ScopeFit { model, bins })
        });
        out.insert(scope, fit);
    }
    Ok(out)
}

/// Fitted models keyed by scope code.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelSet {
    pub models: BTreeMap<String, SigmaModel>,
}

impl ModelSet {
    pub fn insert(&mut self, model: SigmaModel) {
        self.models.insert(model.scope.clone(), model);
    }

    /// Model for a record: the apparatus model when `kind` is apparatus and
    /// one exists, else the discipline model.
    pub fn resolve(&self, record: &MarkRecord, kind: ScopeKind) -> Result<&SigmaModel> {
        if kind == ScopeKind::Apparatus {
            if let Some(m) = self.models.get(&record.apparatus) {
                return Ok(m);
            }
        }
        let key = ScopeKind::Discipline.key(record);
        self.models.get(&key).ok_or_else(|| match kind {
            ScopeKind::Apparatus => Error::MissingModel(record.apparatus.clone()),
            ScopeKind::Discipline => Error::MissingModel(key),
        })
    }
}

impl FromIterator<SigmaModel> for ModelSet {
    fn from_iter<I: IntoIterator<Item = SigmaModel>>(iter: I) -> Self {
        let mut set = ModelSet::default();
        for m in iter {
            set.insert(m);
        }
        set
    }
}

pub fn write_model_json<W: Write>(mut output: W, model: &SigmaModel) -> Result<()> {
    serde_json::to_writer_pretty(&mut output, model)?;
    output.write_all(b"\n")?;
    Ok(())
}

pub fn read_model_json<R: Read>(input: R) -> Result<SigmaModel> {
    let model: SigmaModel = serde_json::from_reader(input)?;
    model.validate()?;
    Ok(model)
}

pub fn write_bins_csv<W: Write>(output: W, bins: &[ErrorBin]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(output);
    writer.write_record(["c", "sample_sd", "sample_var", "n_marks", "n_performances"])?;
    for b in bins {
        writer.write_record([
            format!("{:.2}", b.c),
            format!("{:.6}", b.sample_sd),
            format!("{:.6}", b.sample_var),
            b.n_marks.to_string(),
            b.n_performances.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
