use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use judgemark_core::ingest::{parse_marks_csv, validate_dataset, write_marks_csv};
use judgemark_core::marking::{evaluate_judges, write_evaluations_csv, EvaluationPolicy};
use judgemark_core::outlier::JudgeScoreSource;
use judgemark_core::outlier::{
    apply_flags, flag_outliers, flagged_fraction, write_outliers_csv, OutlierOptions, OutlierRow,
};
use judgemark_core::panel::control_scores;
use judgemark_core::simul::{
    format_correlations, ranking_vs_marking_experiment_with, write_experiment_csv, SimulationOptions,
};
use judgemark_core::stats::{
    compare_groups, format_comparison, group_marking_scores, Alternative, Comparison, GroupBy,
};
use judgemark_core::synth::{generate_competition, write_truth_csv, SynthSpec};
use judgemark_core::variability::{fit_scopes, read_model_json, write_bins_csv, write_model_json, FitOptions};
use judgemark_core::{ControlScore, JudgeEvaluation, MarkRecord, ModelSet, ScopeKind};

use crate::{CompareArgs, FitArgs, OutlierArgs, ReportArgs, ScoreArgs, SimulateArgs, SynthArgs};

/// Standard output and standard error of a command.
pub struct Console<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn out_file(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create directory {}", dir.display()))?;
    let path = dir.join(name);
    let w = create(&path)?;
    Ok((path, w))
}

/// File stem for a scope code.
pub fn scope_file_stem(scope: &str) -> String {
    scope.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Reads and validates a marks CSV. Validation errors are listed with their
/// line numbers and fail the command; warnings are only printed.
pub fn load_marks(path: &Path, console: &mut Console) -> Result<Vec<MarkRecord>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let records = parse_marks_csv(BufReader::new(file)).with_context(|| format!("cannot parse {}", path.display()))?;
    let report = validate_dataset(&records);
    for w in &report.warnings {
        writeln!(console.err, "warning: line {}: {}: {}", w.line, w.code, w.message)?;
    }
    if !report.is_accepted() {
        for e in &report.errors {
            writeln!(console.err, "error: line {}: {}: {}", e.line, e.code, e.message)?;
        }
        bail!("{} validation error(s) in {}", report.errors.len(), path.display());
    }
    Ok(records)
}

/// Every `*.json` model in `dir`, in file name order.
pub fn load_models(dir: &Path) -> Result<ModelSet> {
    let entries = fs::read_dir(dir).with_context(|| format!("cannot read models directory {}", dir.display()))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut set = ModelSet::default();
    for path in paths {
        let file = File::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
        let model =
            read_model_json(BufReader::new(file)).with_context(|| format!("invalid model {}", path.display()))?;
        set.insert(model);
    }
    if set.models.is_empty() {
        bail!("no models in {}", dir.display());
    }
    Ok(set)
}

pub fn cmd_fit(args: &FitArgs, console: &mut Console) -> Result<()> {
    let records = load_marks(&args.input, console)?;
    let controls = control_scores(&records);
    let options = FitOptions {
        scope: args.scope.into(),
        bin_width: args.bin_width,
        floor: args.floor,
        exclude_aborted: args.exclude_aborted,
    };
    let fits = fit_scopes(&records, &controls, options)?;
    fs::create_dir_all(&args.models_dir)
        .with_context(|| format!("cannot create directory {}", args.models_dir.display()))?;
    writeln!(console.out, "{:<12} {:>10} {:>8} {:>6}", "scope", "rmsd", "marks", "bins")?;
    for (scope, fit) in &fits {
        let fit = match fit {
            Ok(fit) => fit,
            Err(e) => {
                writeln!(console.err, "warning: scope {scope} skipped: {e}")?;
                continue;
            }
        };
        let stem = scope_file_stem(scope);
        let mut w = create(&args.models_dir.join(format!("{stem}.json")))?;
        write_model_json(&mut w, &fit.model)?;
        w.flush()?;
        let mut w = create(&args.models_dir.join(format!("{stem}.bins.csv")))?;
        write_bins_csv(&mut w, &fit.bins)?;
        w.flush()?;
        writeln!(console.out, "{:<12} {:>10.6} {:>8} {:>6}", scope, fit.model.rmsd, fit.model.n_marks, fit.bins.len())?;
    }
    Ok(())
}

fn evaluate(
    records: &[MarkRecord],
    controls: &BTreeMap<String, ControlScore>,
    models: &ModelSet,
    scope: ScopeKind,
) -> Result<Vec<JudgeEvaluation>> {
    Ok(evaluate_judges(records, controls, models, EvaluationPolicy { scope, include_aborted: None })?)
}

fn write_performance_scores<W: Write>(output: W, evaluations: &[JudgeEvaluation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(output);
    w.write_record(["judge_id", "scope", "performance_id", "control", "e_hat", "marking_score", "outlier"])?;
    for e in evaluations {
        for p in &e.per_performance {
            w.write_record([
                e.judge_id.clone(),
                e.scope.clone(),
                p.performance_id.clone(),
                format!("{:.4}", p.control),
                format!("{:.4}", p.e_hat),
                format!("{:.6}", p.marking_score),
                p.outlier.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_score(args: &ScoreArgs, console: &mut Console) -> Result<()> {
    let records = load_marks(&args.input, console)?;
    let models = load_models(&args.models_dir)?;
    let controls = control_scores(&records);
    let evaluations = evaluate(&records, &controls, &models, args.scope.into())?;
    let (path, mut w) = out_file(&args.out_dir, "marking_scores.csv")?;
    write_evaluations_csv(&mut w, &evaluations)?;
    w.flush()?;
    let (detail, mut w) = out_file(&args.out_dir, "performance_scores.csv")?;
    write_performance_scores(&mut w, &evaluations)?;
    w.flush()?;
    writeln!(
        console.out,
        "{} judge evaluations written to {} and {}",
        evaluations.len(),
        path.display(),
        detail.display()
    )?;
    Ok(())
}

pub fn cmd_outliers(args: &OutlierArgs, console: &mut Console) -> Result<()> {
    let records = load_marks(&args.input, console)?;
    let models = load_models(&args.models_dir)?;
    let controls = control_scores(&records);
    let evaluations = evaluate(&records, &controls, &models, args.scope.into())?;
    let source =
        if args.leave_competition_out { JudgeScoreSource::LeaveCompetitionOut } else { JudgeScoreSource::Full };
    let rows = flag_outliers(&evaluations, &records, &models, OutlierOptions { mode: args.mode.into(), source })?;
    let (path, mut w) = out_file(&args.out_dir, "outliers.csv")?;
    write_outliers_csv(&mut w, &rows)?;
    w.flush()?;
    let flagged = rows.iter().filter(|r| r.flagged).count();
    writeln!(
        console.out,
        "{flagged} of {} marks flagged ({:.2}%), written to {}",
        rows.len(),
        100.0 * flagged_fraction(&rows),
        path.display()
    )?;
    Ok(())
}

/// Control scores from a text file: one number per line, `#` comments.
pub fn read_controls(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let value: f64 =
            line.parse().with_context(|| format!("{}: line {}: not a number: `{line}`", path.display(), i + 1))?;
        if !(0.0..=10.0).contains(&value) {
            bail!("{}: line {}: control score {value} outside [0, 10]", path.display(), i + 1);
        }
        out.push(value);
    }
    Ok(out)
}

pub fn cmd_simulate(args: &SimulateArgs, console: &mut Console) -> Result<()> {
    let controls = read_controls(&args.controls)?;
    let file = File::open(&args.model).with_context(|| format!("cannot open {}", args.model.display()))?;
    let model =
        read_model_json(BufReader::new(file)).with_context(|| format!("invalid model {}", args.model.display()))?;
    let opts = SimulationOptions { round_to: args.round_to, ..SimulationOptions::default() };
    let result = ranking_vs_marking_experiment_with(&controls, &model, args.n_judges, args.seed, opts)?;
    let (_, mut w) = out_file(&args.out_dir, "experiment.csv")?;
    write_experiment_csv(&mut w, &result)?;
    w.flush()?;
    let summary = format_correlations(&result);
    let (_, mut w) = out_file(&args.out_dir, "correlations.txt")?;
    w.write_all(summary.as_bytes())?;
    w.flush()?;
    console.out.write_all(summary.as_bytes())?;
    Ok(())
}

fn format_comparisons(
    results: &[judgemark_core::Result<Comparison>],
    group_by: GroupBy,
    warnings: &[String],
) -> String {
    let mut s = String::new();
    for w in warnings {
        let _ = writeln!(s, "note: {w}");
    }
    if results.is_empty() {
        let _ = writeln!(s, "no pair of {} groups to compare", group_by.as_str());
    }
    for r in results {
        match r {
            Ok(c) => s.push_str(&format_comparison(c)),
            Err(e) => {
                let _ = writeln!(s, "comparison by {} skipped: {e}", group_by.as_str());
            }
        }
    }
    s
}

pub fn cmd_compare(args: &CompareArgs, console: &mut Console) -> Result<()> {
    let records = load_marks(&args.input, console)?;
    let models = load_models(&args.models_dir)?;
    let controls = control_scores(&records);
    let evaluations = evaluate(&records, &controls, &models, args.scope.into())?;
    let group_by: GroupBy = args.group_by.into();
    let grouped = group_marking_scores(&evaluations, &records, group_by)?;
    let results = compare_groups(&grouped, group_by, args.alternative.into());
    let text = format_comparisons(&results, group_by, &grouped.warnings);
    if let Some(dir) = &args.out_dir {
        let (_, mut w) = out_file(dir, "comparison.txt")?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
    }
    console.out.write_all(text.as_bytes())?;
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs, console: &mut Console) -> Result<()> {
    let mut spec = match &args.spec {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            serde_json::from_reader::<_, SynthSpec>(BufReader::new(file))
                .with_context(|| format!("invalid spec {}", path.display()))?
        }
        None => SynthSpec::artistic_default(args.seed.unwrap_or(1)),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if args.print_spec {
        serde_json::to_writer_pretty(&mut *console.out, &spec)?;
        writeln!(console.out)?;
        return Ok(());
    }
    let data = generate_competition(&spec)?;
    let (marks, mut w) = out_file(&args.out_dir, "marks.csv")?;
    write_marks_csv(&mut w, &data.records)?;
    w.flush()?;
    let (truth, mut w) = out_file(&args.out_dir, "truth.csv")?;
    write_truth_csv(&mut w, &data.truth)?;
    w.flush()?;
    writeln!(console.out, "{} marks written to {}; truth in {}", data.records.len(), marks.display(), truth.display())?;
    Ok(())
}

fn quantile_summary(values: &mut [f64]) -> (f64, f64, f64, f64) {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) };
    (mean, median, values[0], values[n - 1])
}

fn write_comparisons_csv<W: Write>(output: W, comparisons: &[Comparison]) -> Result<()> {
    let mut w = csv::Writer::from_writer(output);
    w.write_record([
        "group_by",
        "group_a",
        "group_b",
        "n_a",
        "n_b",
        "mean_a",
        "mean_b",
        "t",
        "df",
        "alternative",
        "p",
    ])?;
    for c in comparisons {
        let t = &c.test;
        w.write_record([
            c.group_by.as_str().to_string(),
            c.group_a.clone(),
            c.group_b.clone(),
            t.n_a.to_string(),
            t.n_b.to_string(),
            format!("{:.6}", t.mean_a),
            format!("{:.6}", t.mean_b),
            format!("{:.6}", t.t),
            format!("{:.4}", t.df),
            t.alternative.as_str().to_string(),
            format!("{:.6e}", t.p),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn same_country_rates(rows: &[OutlierRow]) -> (usize, usize, usize, usize) {
    let mut same = (0, 0);
    let mut other = (0, 0);
    for r in rows {
        let slot = if r.same_country { &mut same } else { &mut other };
        slot.0 += usize::from(r.flagged);
        slot.1 += 1;
    }
    (same.0, same.1, other.0, other.1)
}

fn pct(k: usize, n: usize) -> String {
    if n == 0 {
        "n/a".into()
    } else {
        format!("{:.2}%", 100.0 * k as f64 / n as f64)
    }
}

/// Builds the report text and writes the CSV bundle into `out_dir`.
pub fn cmd_report(args: &ReportArgs, console: &mut Console) -> Result<()> {
    let records = load_marks(&args.input, console)?;
    let models = load_models(&args.models_dir)?;
    let controls = control_scores(&records);
    let scope: ScopeKind = args.scope.into();
    let alternative: Alternative = args.alternative.into();
    let mut evaluations = evaluate(&records, &controls, &models, scope)?;
    let rows = flag_outliers(
        &evaluations,
        &records,
        &models,
        OutlierOptions { mode: args.mode.into(), ..Default::default() },
    )?;
    apply_flags(&mut evaluations, &rows);

    let mut s = String::new();
    let judges: std::collections::BTreeSet<&str> = records.iter().map(|r| r.judge_id.as_str()).collect();
    let _ = writeln!(s, "JUDGING ACCURACY REPORT");
    let _ = writeln!(s);
    let _ = writeln!(s, "[dataset]");
    let _ = writeln!(s, "marks = {}  performances = {}  judges = {}", records.len(), controls.len(), judges.len());
    let scope_name = if scope == ScopeKind::Apparatus { "apparatus" } else { "discipline" };
    let mode = if args.mode == crate::ModeArg::Scaled { "scaled" } else { "fixed" };
    let _ = writeln!(s, "scope = {scope_name}  outlier thresholds = {mode}  alternative = {}", alternative.as_str());
    let _ = writeln!(s);

    let _ = writeln!(s, "[models]");
    let _ = writeln!(
        s,
        "{:<10} {:>10} {:>12} {:>9} {:>6} {:>9} {:>7} {:>11}",
        "scope", "alpha", "beta", "gamma", "floor", "rmsd", "marks", "range"
    );
    for m in models.models.values() {
        let _ = writeln!(
            s,
            "{:<10} {:>10.6} {:>12.6e} {:>9.6} {:>6.3} {:>9.6} {:>7} {:>11}",
            m.scope,
            m.alpha,
            m.beta,
            m.gamma,
            m.floor,
            m.rmsd,
            m.n_marks,
            format!("{:.2}-{:.2}", m.c_min, m.c_max)
        );
    }
    let _ = writeln!(s);

    let _ = writeln!(s, "[marking scores]");
    let mut by_scope: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for e in &evaluations {
        by_scope.entry(e.scope.as_str()).or_default().push(e.overall_marking_score);
    }
    let _ =
        writeln!(s, "{:<10} {:>7} {:>9} {:>9} {:>9} {:>9}", "scope", "judges", "mean M", "median M", "min M", "max M");
    for (scope, scores) in &mut by_scope {
        let n = scores.len();
        let (mean, median, min, max) = quantile_summary(scores);
        let _ = writeln!(s, "{scope:<10} {n:>7} {mean:>9.4} {median:>9.4} {min:>9.4} {max:>9.4}");
    }
    let mut ranked: Vec<&JudgeEvaluation> = evaluations.iter().collect();
    ranked.sort_by(|a, b| {
        b.overall_marking_score.total_cmp(&a.overall_marking_score).then_with(|| a.judge_id.cmp(&b.judge_id))
    });
    let _ = writeln!(s, "least accurate evaluations (highest M):");
    for e in ranked.iter().take(10) {
        let _ = writeln!(s, "  {:<10} {:<10} n = {:>4}  M = {:.4}", e.judge_id, e.scope, e.n, e.overall_marking_score);
    }
    let _ = writeln!(s);

    let _ = writeln!(s, "[outliers]");
    let flagged = rows.iter().filter(|r| r.flagged).count();
    let _ = writeln!(s, "flagged = {flagged} of {} marks ({})", rows.len(), pct(flagged, rows.len()));
    let (sf, sn, of, on) = same_country_rates(&rows);
    let _ = writeln!(s, "same-country marks: {sf} of {sn} flagged ({})", pct(sf, sn));
    let _ = writeln!(s, "other marks:        {of} of {on} flagged ({})", pct(of, on));
    let _ = writeln!(s);

    let _ = writeln!(s, "[group comparisons]");
    let mut comparisons = Vec::new();
    for group_by in [GroupBy::Role, GroupBy::Gender, GroupBy::Apparatus] {
        let grouped = group_marking_scores(&evaluations, &records, group_by)?;
        let results = compare_groups(&grouped, group_by, alternative);
        s.push_str(&format_comparisons(&results, group_by, &grouped.warnings));
        comparisons.extend(results.into_iter().filter_map(|r| r.ok()));
    }

    let (_, mut w) = out_file(&args.out_dir, "report.txt")?;
    w.write_all(s.as_bytes())?;
    w.flush()?;
    let (_, mut w) = out_file(&args.out_dir, "marking_scores.csv")?;
    write_evaluations_csv(&mut w, &evaluations)?;
    w.flush()?;
    let (_, mut w) = out_file(&args.out_dir, "performance_scores.csv")?;
    write_performance_scores(&mut w, &evaluations)?;
    w.flush()?;
    let (_, mut w) = out_file(&args.out_dir, "outliers.csv")?;
    write_outliers_csv(&mut w, &rows)?;
    w.flush()?;
    let (_, mut w) = out_file(&args.out_dir, "comparisons.csv")?;
    write_comparisons_csv(&mut w, &comparisons)?;
    w.flush()?;
    console.out.write_all(s.as_bytes())?;
    Ok(())
}

/// Files written by `report`, in a fixed order.
pub const REPORT_FILES: [&str; 5] =
    ["report.txt", "marking_scores.csv", "performance_scores.csv", "outliers.csv", "comparisons.csv"];
