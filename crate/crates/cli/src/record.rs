//! Result tables and their CSV/JSON artifacts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde_json::{json, Map, Value};

use crate::config::ExperimentConfig;
use crate::CliError;

/// One CSV cell. Floats print with 17 significant digits.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Float(v) => Some(v),
            Cell::Int(v) => Some(v as f64),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct ResultRecord {
    pub experiment: String,
    pub config_hash: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub metadata: Map<String, Value>,
    pub duration: Duration,
    /// False when a property or agreement check inside the run failed.
    pub passed: bool,
}

impl ResultRecord {
    pub fn new(command: &str, config: &ExperimentConfig, columns: Vec<&'static str>) -> Self {
        let config_hash = config.content_hash();
        Self {
            experiment: format!("{command}-{}", &config_hash[..12]),
            config_hash,
            columns,
            rows: Vec::new(),
            metadata: Map::new(),
            duration: Duration::ZERO,
            passed: true,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: &str, value: impl Into<Value>) {
        self.metadata.insert(key.to_string(), value.into());
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    /// Rows whose `key` column renders as `value`.
    pub fn rows_where<'a>(&'a self, key: &str, value: &'a str) -> impl Iterator<Item = &'a Vec<Cell>> + 'a {
        let k = self.column(key).expect("known column");
        self.rows.iter().filter(move |r| r[k].render() == value)
    }

    /// CSV text: a `# config_hash=` line, the header, then the rows.
    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut buf = format!("# config_hash={}\n", self.config_hash).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.columns)?;
            for row in &self.rows {
                w.write_record(row.iter().map(Cell::render))?;
            }
            w.flush()?;
        }
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn sidecar(&self, config: &ExperimentConfig) -> Value {
        json!({
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "config": config.to_string(),
            "metadata": Value::Object(self.metadata.clone()),
            "rows": self.rows.len(),
            "passed": self.passed,
            "duration_seconds": self.duration.as_secs_f64(),
            "version": env!("CARGO_PKG_VERSION"),
        })
    }
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Hash recorded in an existing output file, if any.
pub fn recorded_hash(out: &Path) -> Result<Option<String>, CliError> {
    if !out.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(out)?;
    Ok(text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# config_hash="))
        .map(str::to_string))
}

/// Refuse to reuse `out` when it holds results of a different configuration.
pub fn check_resumable(config: &ExperimentConfig) -> Result<(), CliError> {
    let Some(out) = &config.out else {
        return Ok(());
    };
    match recorded_hash(out)? {
        None if out.exists() => Err(CliError::Validation(format!(
            "{} exists and carries no config hash",
            out.display()
        ))),
        Some(h) if h != config.content_hash() => Err(CliError::Validation(format!(
            "{} was produced by config {h}, not {}",
            out.display(),
            config.content_hash()
        ))),
        _ => Ok(()),
    }
}

/// Write the CSV (and JSON sidecar when `out` is set) or print the CSV.
pub fn emit(record: &ResultRecord, config: &ExperimentConfig) -> Result<(), CliError> {
    let csv = record.to_csv()?;
    match &config.out {
        Some(out) => {
            fs::write(out, csv)?;
            let sidecar = serde_json::to_string_pretty(&record.sidecar(config))?;
            fs::write(sidecar_path(out), sidecar + "\n")?;
        }
        None => {
            std::io::stdout().write_all(csv.as_bytes())?;
        }
    }
    Ok(())
}
