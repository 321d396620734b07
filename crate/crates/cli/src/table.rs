//! CSV output with a YAML-style `#` comment header.
//!
//! Layout:
//!
//! ```text
//! # command: simulate
//! # version: 0.1.0
//! # seed: 42
//! # ...
//! # section: histogram
//! q,count,probability
//! -2,113,0.113
//!
//! # section: summary
//! ...
//! ```
//!
//! Sections are separated by one blank line. A single-section table is plain
//! CSV after the comment lines.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde_json::Value;

use crate::error::{CliError, CliResult};

/// Metadata keys every table carries.
pub const REQUIRED_METADATA: [&str; 4] = ["command", "version", "seed", "config_sha256"];

/// Named rectangular block of real numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    name: String,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Section {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    /// Panics if `row` does not have one value per column.
    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from column count in section `{}`", self.name);
        self.rows.push(row);
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Ordered metadata entries; values are JSON, written as YAML flow scalars.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metadata {
    entries: Vec<(String, Value)>,
}

impl Metadata {
    pub fn new(command: &str, seed: u64, config_sha256: &str) -> Self {
        let mut m = Self::default();
        m.insert("command", command.into());
        m.insert("version", env!("CARGO_PKG_VERSION").into());
        m.insert("seed", seed.into());
        m.insert("config_sha256", config_sha256.into());
        m
    }

    /// Replaces an existing entry in place or appends a new one.
    pub fn insert(&mut self, key: &str, value: Value) {
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn is_complete(&self) -> bool {
        REQUIRED_METADATA.iter().all(|k| self.get(k).is_some())
    }

    fn write_header(&self, out: &mut String) {
        for (key, value) in &self.entries {
            let text = match value {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            writeln!(out, "# {key}: {text}").expect("writing to a String");
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub metadata: Metadata,
    pub sections: Vec<Section>,
}

impl ResultTable {
    pub fn new(metadata: Metadata) -> Self {
        Self { metadata, sections: Vec::new() }
    }

    pub fn push(&mut self, section: Section) {
        self.sections.push(section);
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    /// Full CSV text. Deterministic: depends only on the table contents.
    pub fn render(&self) -> String {
        debug_assert!(self.metadata.is_complete(), "result table metadata lacks a required key");
        let mut out = String::new();
        self.metadata.write_header(&mut out);
        for (i, section) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            writeln!(out, "# section: {}", section.name).expect("writing to a String");
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer.write_record(&section.columns).expect("in-memory CSV write");
            for row in &section.rows {
                writer.write_record(row.iter().map(|&x| format_number(x))).expect("in-memory CSV write");
            }
            let bytes = writer.into_inner().expect("in-memory CSV flush");
            out.push_str(&String::from_utf8(bytes).expect("CSV output is UTF-8"));
        }
        out
    }
}

/// Shortest round-trip representation; exponent form outside `[1e-4, 1e15)`.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        if x == 0.0 {
            "0".to_string()
        } else {
            x.to_string()
        }
    } else {
        format!("{x:e}")
    }
}

/// Checks that `path` can be created before any computation runs.
pub fn ensure_writable(path: &Path) -> CliResult<()> {
    std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map(|_| ())
        .map_err(|e| CliError::config(format!("output path {} is not writable: {e}", path.display())))
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(text: &str, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Runtime(format!("cannot write to stdout: {e}")))
        }
    }
}
