use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::data::format_value;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub attack_fraction: f64,
    pub knowledge_fraction: f64,
    pub trial: usize,
    pub seed: u64,
    pub average_error: f64,
    /// Sample standard deviation of the per-target errors in this trial.
    pub error_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub attack_fraction: f64,
    pub knowledge_fraction: f64,
    pub trials: usize,
    pub mean_error: f64,
    /// Sample standard deviation of the trial errors.
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub attack_fraction: f64,
    pub knowledge_fraction: f64,
    pub trial: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// The configuration that produced the result; absent when the result
    /// was read back from CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ExperimentConfig>,
    pub rows: Vec<TrialRow>,
    pub aggregated: Vec<SweepPoint>,
    #[serde(default)]
    pub failures: Vec<TrialFailure>,
}

impl SweepResult {
    pub fn point(&self, attack_fraction: f64, knowledge_fraction: f64) -> Option<&SweepPoint> {
        self.aggregated
            .iter()
            .find(|p| p.attack_fraction == attack_fraction && p.knowledge_fraction == knowledge_fraction)
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn file_name(self) -> &'static str {
        match self {
            ReportFormat::Csv => "result.csv",
            ReportFormat::Json => "result.json",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidConfig(format!("unknown report format `{other}`"))),
        }
    }
}

pub const CSV_COLUMNS: [&str; 9] = [
    "kind",
    "attack_fraction",
    "knowledge_fraction",
    "trial",
    "seed",
    "average_error",
    "error_std",
    "trials",
    "message",
];

/// One row per trial, then one `aggregate` row per sweep point, then one
/// `failure` row per failed trial.
pub fn write_csv(result: &SweepResult, writer: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(CSV_COLUMNS)?;
    for r in &result.rows {
        w.write_record([
            "trial".to_string(),
            format_value(r.attack_fraction),
            format_value(r.knowledge_fraction),
            r.trial.to_string(),
            r.seed.to_string(),
            format_value(r.average_error),
            format_value(r.error_std),
            String::new(),
            String::new(),
        ])?;
    }
    for p in &result.aggregated {
        w.write_record([
            "aggregate".to_string(),
            format_value(p.attack_fraction),
            format_value(p.knowledge_fraction),
            String::new(),
            String::new(),
            format_value(p.mean_error),
            format_value(p.std_error),
            p.trials.to_string(),
            String::new(),
        ])?;
    }
    for f in &result.failures {
        w.write_record([
            "failure".to_string(),
            format_value(f.attack_fraction),
            format_value(f.knowledge_fraction),
            f.trial.to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            f.message.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn field(rec: &csv::StringRecord, k: usize, line: u64) -> Result<&str> {
    rec.get(k).ok_or_else(|| Error::Parse {
        line,
        message: format!("missing column {}", CSV_COLUMNS[k]),
    })
}

fn parse<T: FromStr>(rec: &csv::StringRecord, k: usize, line: u64) -> Result<T> {
    let s = field(rec, k, line)?;
    s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad {} `{s}`", CSV_COLUMNS[k]),
    })
}

/// Reads what [`write_csv`] wrote. The configuration is not part of the CSV.
pub fn read_csv(reader: impl Read) -> Result<SweepResult> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", CSV_COLUMNS.join(",")),
        });
    }
    let mut result = SweepResult {
        config: None,
        rows: Vec::new(),
        aggregated: Vec::new(),
        failures: Vec::new(),
    };
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        match field(&rec, 0, line)? {
            "trial" => result.rows.push(TrialRow {
                attack_fraction: parse(&rec, 1, line)?,
                knowledge_fraction: parse(&rec, 2, line)?,
                trial: parse(&rec, 3, line)?,
                seed: parse(&rec, 4, line)?,
                average_error: parse(&rec, 5, line)?,
                error_std: parse(&rec, 6, line)?,
            }),
            "aggregate" => result.aggregated.push(SweepPoint {
                attack_fraction: parse(&rec, 1, line)?,
                knowledge_fraction: parse(&rec, 2, line)?,
                trials: parse(&rec, 7, line)?,
                mean_error: parse(&rec, 5, line)?,
                std_error: parse(&rec, 6, line)?,
            }),
            "failure" => result.failures.push(TrialFailure {
                attack_fraction: parse(&rec, 1, line)?,
                knowledge_fraction: parse(&rec, 2, line)?,
                trial: parse(&rec, 3, line)?,
                message: field(&rec, 8, line)?.to_string(),
            }),
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown row kind `{other}`"),
                })
            }
        }
    }
    Ok(result)
}

pub fn to_json(result: &SweepResult) -> Result<String> {
    Ok(serde_json::to_string_pretty(result)?)
}

pub fn from_json(text: &str) -> Result<SweepResult> {
    Ok(serde_json::from_str(text)?)
}

/// Writes `result.csv` and/or `result.json` into `dir` and returns the paths.
pub fn emit_report(result: &SweepResult, dir: impl AsRef<Path>, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    if result.rows.is_empty() && result.failures.is_empty() {
        return Err(Error::InvalidConfig("nothing to report".into()));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for &format in formats {
        let path = dir.join(format.file_name());
        match format {
            ReportFormat::Csv => write_csv(result, fs::File::create(&path)?)?,
            ReportFormat::Json => fs::write(&path, to_json(result)?)?,
        }
        written.push(path);
    }
    Ok(written)
}

/// Reads a report back, choosing the parser from the file extension.
pub fn load_report(path: impl AsRef<Path>) -> Result<SweepResult> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => from_json(&fs::read_to_string(path)?),
        _ => read_csv(fs::File::open(path)?),
    }
}
