//! CSV ingestion and dataset validation.
//!
//! The header is fixed (see [`COLUMNS`]) but column order is free. Parsing is
//! fail-fast and reports the offending line; [`validate_dataset`] instead
//! collects every problem it finds.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Discipline, Gender, JudgeRole, MarkRecord};

pub const COLUMNS: [&str; 13] = [
    "competition_id",
    "discipline",
    "apparatus",
    "phase",
    "performance_id",
    "gymnast_id",
    "gymnast_country",
    "judge_id",
    "judge_country",
    "judge_role",
    "judge_gender",
    "mark",
    "completed",
];

/// Panels smaller than this produce a warning.
pub const MIN_PANEL_SIZE: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub line: u64,
    pub code: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ValidationReport {
    pub n_records: usize,
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_accepted(&self) -> bool {
        self.errors.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MarkProblem {
    Malformed,
    OutOfRange,
    OffGrid,
}

/// Parses a decimal mark into integer hundredths without going through floats.
fn parse_hundredths(raw: &str) -> std::result::Result<i64, MarkProblem> {
    let s = raw.trim();
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(MarkProblem::Malformed);
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(MarkProblem::Malformed);
    }
    let int_value: i64 = if int_part.is_empty() {
        0
    } else if int_part.len() > 6 {
        return Err(MarkProblem::OutOfRange);
    } else {
        int_part.parse().map_err(|_| MarkProblem::Malformed)?
    };
    let frac = frac_part.trim_end_matches('0');
    let digit = |i: usize| frac.as_bytes().get(i).map_or(0, |b| (b - b'0') as i64);
    let hundredths = int_value * 100 + digit(0) * 10 + digit(1);
    let exceeds_hundredths = frac.len() > 2;
    if negative && (hundredths > 0 || exceeds_hundredths) {
        return Err(MarkProblem::OutOfRange);
    }
    if hundredths > 1000 || (hundredths == 1000 && exceeds_hundredths) {
        return Err(MarkProblem::OutOfRange);
    }
    if exceeds_hundredths || hundredths % 5 != 0 {
        return Err(MarkProblem::OffGrid);
    }
    Ok(hundredths)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim() {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

/// Reads mark records from CSV, in file order.
pub fn parse_marks_csv<R: Read>(input: R) -> Result<Vec<MarkRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers()?.clone();

    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, name) in headers.iter().enumerate() {
        let name = name.trim();
        let Some(col) = COLUMNS.iter().find(|c| **c == name) else {
            return Err(Error::Parse { line: 1, message: format!("unknown column `{name}`") });
        };
        if index.insert(col, i).is_some() {
            return Err(Error::Parse { line: 1, message: format!("duplicate column `{name}`") });
        }
    }
    if let Some(missing) = COLUMNS.iter().find(|c| !index.contains_key(*c)) {
        return Err(Error::Parse { line: 1, message: format!("missing column `{missing}`") });
    }

    let mut records = Vec::new();
    let mut seen: HashMap<(String, String), u64> = HashMap::new();
    let mut row = csv::StringRecord::new();
    while reader.read_record(&mut row)? {
        let line = row.position().map_or(0, |p| p.line());
        let field = |name: &str| row.get(index[name]).unwrap_or("").trim();
        let err = |message: String| Error::Parse { line, message };

        let discipline: Discipline = field("discipline").parse().map_err(|e: Error| err(e.to_string()))?;
        let judge_role: JudgeRole = field("judge_role").parse().map_err(|e: Error| err(e.to_string()))?;
        let judge_gender: Gender = field("judge_gender").parse().map_err(|e: Error| err(e.to_string()))?;
        let mark_raw = field("mark");
        let hundredths = parse_hundredths(mark_raw).map_err(|p| match p {
            MarkProblem::Malformed => err(format!("malformed mark `{mark_raw}`")),
            MarkProblem::OutOfRange => err(format!("mark out of range: {mark_raw}")),
            MarkProblem::OffGrid => err(format!("mark off 0.05 grid: {mark_raw}")),
        })?;
        let completed =
            parse_bool(field("completed")).ok_or_else(|| err(format!("invalid boolean `{}`", field("completed"))))?;

        let record = MarkRecord {
            competition_id: field("competition_id").to_string(),
            discipline,
            apparatus: field("apparatus").to_string(),
            phase: field("phase").to_string(),
            performance_id: field("performance_id").to_string(),
            gymnast_id: field("gymnast_id").to_string(),
            gymnast_country: field("gymnast_country").to_string(),
            judge_id: field("judge_id").to_string(),
            judge_country: field("judge_country").to_string(),
            judge_role,
            judge_gender,
            mark: hundredths as f64 / 100.0,
            completed,
        };
        if record.performance_id.is_empty() || record.judge_id.is_empty() {
            return Err(err("empty performance_id or judge_id".into()));
        }
        let key = (record.performance_id.clone(), record.judge_id.clone());
        if let Some(first) = seen.insert(key, line) {
            return Err(err(format!(
                "duplicate mark for performance `{}` and judge `{}` (first on line {first})",
                record.performance_id, record.judge_id
            )));
        }
        records.push(record);
    }
    Ok(records)
}

/// Writes records in the ingestion format. Marks are written with two decimals.
pub fn write_marks_csv<W: Write>(output: W, records: &[MarkRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(output);
    writer.write_record(COLUMNS)?;
    for r in records {
        writer.write_record([
            r.competition_id.as_str(),
            r.discipline.as_str(),
            &r.apparatus,
            &r.phase,
            &r.performance_id,
            &r.gymnast_id,
            &r.gymnast_country,
            &r.judge_id,
            &r.judge_country,
            r.judge_role.as_str(),
            r.judge_gender.as_str(),
            &format!("{:.2}", r.mark),
            if r.completed { "true" } else { "false" },
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Checks every record and every cross-record constraint.
///
/// Line numbers assume the records came from a CSV with one header line and
/// one line per record, in order.
pub fn validate_dataset(records: &[MarkRecord]) -> ValidationReport {
    let mut report = ValidationReport { n_records: records.len(), ..Default::default() };
    let line_of = |i: usize| i as u64 + 2;

    for (i, r) in records.iter().enumerate() {
        for problem in r.problems() {
            let code = if problem.starts_with("mark out of range") {
                "MARK_RANGE"
            } else if problem.starts_with("mark off") {
                "MARK_GRID"
            } else {
                "EMPTY_ID"
            };
            report.errors.push(Issue { line: line_of(i), code, message: problem });
        }
    }

    let mut seen: HashMap<(&str, &str), usize> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        if let Some(first) = seen.insert((&r.performance_id, &r.judge_id), i) {
            report.errors.push(Issue {
                line: line_of(i),
                code: "DUPLICATE",
                message: format!(
                    "duplicate mark for performance `{}` and judge `{}` (first on line {})",
                    r.performance_id,
                    r.judge_id,
                    line_of(first)
                ),
            });
        }
    }

    let mut first_of: BTreeMap<&str, usize> = BTreeMap::new();
    let mut panel_sizes: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let entry = panel_sizes.entry(&r.performance_id).or_insert((i, 0));
        entry.1 += 1;
        let first = *first_of.entry(&r.performance_id).or_insert(i);
        if first == i {
            continue;
        }
        let f = &records[first];
        let mut conflicts = Vec::new();
        if f.competition_id != r.competition_id {
            conflicts.push("competition_id");
        }
        if f.discipline != r.discipline {
            conflicts.push("discipline");
        }
        if f.apparatus != r.apparatus {
            conflicts.push("apparatus");
        }
        if f.phase != r.phase {
            conflicts.push("phase");
        }
        if f.gymnast_id != r.gymnast_id {
            conflicts.push("gymnast_id");
        }
        if f.completed != r.completed {
            conflicts.push("completed");
        }
        if !conflicts.is_empty() {
            report.errors.push(Issue {
                line: line_of(i),
                code: "CONFLICT",
                message: format!(
                    "performance `{}` conflicts with line {} on {}",
                    r.performance_id,
                    line_of(first),
                    conflicts.join(", ")
                ),
            });
        }
    }

    for (perf, (first, size)) in panel_sizes {
        if size < MIN_PANEL_SIZE {
            report.warnings.push(Issue {
                line: line_of(first),
                code: "PANEL_SMALL",
                message: format!("panel too small for performance `{perf}`: {size} marks"),
            });
        }
    }
    report.errors.sort_by_key(|e| e.line);
    report
}
