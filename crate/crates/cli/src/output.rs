//! CSV tables and the run summary.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::CliError;

/// One CSV field. Floats print with 17 significant digits so every value
/// round-trips bit-exactly; missing values are empty fields.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Missing,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Self::Int(v) => v.to_string(),
            Self::Float(v) => format!("{v:.16e}"),
            Self::Text(s) => s.clone(),
            Self::Bool(b) => b.to_string(),
            Self::Missing => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Self::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Self::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Self::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Self::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Self::Text(v.to_owned())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Self::Missing, Self::Float)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_owned(),
            header: header.iter().map(|h| (*h).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    /// Header with extra generated column names, such as `x0, x1, ...`.
    pub fn with_columns(name: &str, header: Vec<String>) -> Self {
        Self {
            name: name.to_owned(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width in {}", self.name);
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// How `value` is compared with `threshold`.
    pub rule: String,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            pass: value <= threshold,
            value: Some(value),
            threshold: Some(threshold),
            rule: "value <= threshold".into(),
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            pass: value >= threshold,
            value: Some(value),
            threshold: Some(threshold),
            rule: "value >= threshold".into(),
        }
    }

    pub fn above(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            pass: value > threshold,
            value: Some(value),
            threshold: Some(threshold),
            rule: "value > threshold".into(),
        }
    }

    pub fn flag(name: impl Into<String>, pass: bool, rule: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            value: None,
            threshold: None,
            rule: rule.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub experiment: String,
    pub version: String,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
}

/// Everything a run produces, written in one go once computation is done.
#[derive(Debug, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Writes `config.resolved.json`, every table and `summary.json`.
    pub fn write(
        &self,
        dir: &Path,
        experiment: &str,
        seed: u64,
        resolved: &impl Serialize,
    ) -> Result<RunSummary, CliError> {
        fs::create_dir_all(dir)?;
        let mut files = vec!["config.resolved.json".to_owned()];
        fs::write(dir.join(&files[0]), to_json(resolved)?)?;
        for t in &self.tables {
            let name = format!("{}.csv", t.name);
            fs::write(dir.join(&name), t.to_bytes()?)?;
            files.push(name);
        }
        files.push("summary.json".to_owned());
        let summary = RunSummary {
            experiment: experiment.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            seed,
            pass: self.pass(),
            checks: self.checks.clone(),
            warnings: self.warnings.clone(),
            files,
        };
        fs::write(dir.join("summary.json"), to_json(&summary)?)?;
        Ok(summary)
    }
}

fn to_json(v: &impl Serialize) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(v).map_err(|e| CliError::Runtime(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_and_rows_end_in_lf() {
        let mut t = Table::new("t", &["a", "b", "c"]);
        let x = 0.1 + 0.2;
        t.push(vec![Cell::from(x), Cell::Missing, Cell::from(3usize)]);
        let text = String::from_utf8(t.to_bytes().unwrap()).unwrap();
        assert_eq!(text, "a,b,c\n3.0000000000000004e-1,,3\n");
        let field = text.lines().nth(1).unwrap().split(',').next().unwrap();
        assert_eq!(field.parse::<f64>().unwrap(), x);
    }

    #[test]
    fn report_passes_only_if_every_check_does() {
        let mut r = Report::default();
        r.checks.push(Check::at_most("a", 1.0, 2.0));
        assert!(r.pass());
        r.checks.push(Check::above("b", 0.001, 0.01));
        assert!(!r.pass());
    }
}
