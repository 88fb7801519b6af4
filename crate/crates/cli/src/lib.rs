//! Command-line front end: argument definitions and the commands behind them.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use judgemark_core::outlier::ThresholdMode;
use judgemark_core::stats::{Alternative, GroupBy};
use judgemark_core::variability::{DEFAULT_BIN_WIDTH, DEFAULT_FLOOR};
use judgemark_core::ScopeKind;

pub mod commands;

#[derive(Debug, Parser)]
#[command(name = "judgemark", version, about = "Evaluate the accuracy of panel judges")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the error variability model for every scope in a dataset.
    Fit(FitArgs),
    /// Marking scores of every judge.
    Score(ScoreArgs),
    /// Flag outlier marks.
    Outliers(OutlierArgs),
    /// Synthetic-judge study of marking scores against rank distances.
    Simulate(SimulateArgs),
    /// Welch tests between groups of judges.
    Compare(CompareArgs),
    /// Generate a synthetic competition dataset.
    Synth(SynthArgs),
    /// Consolidated report: marking scores, outliers and group comparisons.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    Apparatus,
    Discipline,
}

impl From<ScopeArg> for ScopeKind {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Apparatus => ScopeKind::Apparatus,
            ScopeArg::Discipline => ScopeKind::Discipline,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Scaled,
    Fixed,
}

impl From<ModeArg> for ThresholdMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Scaled => ThresholdMode::Scaled,
            ModeArg::Fixed => ThresholdMode::Fixed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupByArg {
    Role,
    Gender,
    Apparatus,
}

impl From<GroupByArg> for GroupBy {
    fn from(g: GroupByArg) -> Self {
        match g {
            GroupByArg::Role => GroupBy::Role,
            GroupByArg::Gender => GroupBy::Gender,
            GroupByArg::Apparatus => GroupBy::Apparatus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlternativeArg {
    TwoSided,
    Less,
    Greater,
}

impl From<AlternativeArg> for Alternative {
    fn from(a: AlternativeArg) -> Self {
        match a {
            AlternativeArg::TwoSided => Alternative::TwoSided,
            AlternativeArg::Less => Alternative::Less,
            AlternativeArg::Greater => Alternative::Greater,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Marks CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory receiving one model JSON and one bins CSV per scope.
    #[arg(long)]
    pub models_dir: PathBuf,
    #[arg(long, value_enum, default_value = "apparatus")]
    pub scope: ScopeArg,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    pub bin_width: f64,
    /// Lower bound on the fitted standard deviation.
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    pub floor: f64,
    /// Leave aborted routines out of the fit. Defaults to true for trampoline
    /// and false elsewhere.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub exclude_aborted: Option<bool>,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub models_dir: PathBuf,
    #[arg(long, value_enum, default_value = "apparatus")]
    pub scope: ScopeArg,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct OutlierArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub models_dir: PathBuf,
    #[arg(long, value_enum, default_value = "apparatus")]
    pub scope: ScopeArg,
    #[arg(long, value_enum, default_value = "scaled")]
    pub mode: ModeArg,
    /// Scale each threshold by the judge's marking score over the other
    /// competitions only.
    #[arg(long)]
    pub leave_competition_out: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Control scores, one per line; `#` starts a comment.
    #[arg(long)]
    pub controls: PathBuf,
    /// Model JSON written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub n_judges: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Round simulated marks to this step.
    #[arg(long)]
    pub round_to: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub models_dir: PathBuf,
    #[arg(long, value_enum, default_value = "apparatus")]
    pub scope: ScopeArg,
    #[arg(long, value_enum, default_value = "gender")]
    pub group_by: GroupByArg,
    #[arg(long, value_enum, default_value = "two-sided")]
    pub alternative: AlternativeArg,
    /// Also write the report to `comparison.txt` here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Generator spec JSON; the built-in artistic spec when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Overrides the seed in the spec.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print the effective spec as JSON instead of generating data.
    #[arg(long)]
    pub print_spec: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub models_dir: PathBuf,
    #[arg(long, value_enum, default_value = "apparatus")]
    pub scope: ScopeArg,
    #[arg(long, value_enum, default_value = "scaled")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "two-sided")]
    pub alternative: AlternativeArg,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}
