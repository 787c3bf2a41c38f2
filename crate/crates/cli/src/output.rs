//! Tables written as CSV or JSON, plus the run manifest.

use crate::config::{Format, RunConfig};
use crate::error::CliError;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

/// A rectangular table of string cells.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Collects written files for the manifest.
pub struct OutputDir {
    dir: PathBuf,
    format: Format,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path, format: Format) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(OutputDir { dir: dir.to_path_buf(), format, written: Vec::new() })
    }

    /// Writes `stem.csv` or `stem.json` (an array of row objects).
    pub fn write_table(&mut self, stem: &str, table: &Table) -> Result<(), CliError> {
        let name = match self.format {
            Format::Csv => {
                let name = format!("{stem}.csv");
                let mut w = csv::Writer::from_path(self.dir.join(&name))?;
                w.write_record(&table.columns)?;
                for row in &table.rows {
                    w.write_record(row)?;
                }
                w.flush()?;
                name
            }
            Format::Json => {
                let rows: Vec<serde_json::Map<String, serde_json::Value>> = table
                    .rows
                    .iter()
                    .map(|row| table.columns.iter().zip(row).map(|(c, v)| (c.to_string(), json_cell(v))).collect())
                    .collect();
                let name = format!("{stem}.json");
                fs::write(self.dir.join(&name), serde_json::to_string_pretty(&rows)? + "\n")?;
                name
            }
        };
        self.written.push(name);
        Ok(())
    }

    /// Writes the resolved config and `manifest.json`. The manifest's
    /// `created_unix` field is the only non-deterministic byte in a run.
    pub fn finish(mut self, command: &str, config: &RunConfig) -> Result<Vec<String>, CliError> {
        fs::write(self.dir.join("config.toml"), config.to_toml())?;
        self.written.push("config.toml".into());
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: config.sim.seed,
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            files: &self.written,
            config,
        };
        fs::write(self.dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
        self.written.push("manifest.json".into());
        Ok(self.written)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    created_unix: u64,
    files: &'a [String],
    config: &'a RunConfig,
}

/// Numbers and booleans become JSON scalars; everything else stays a string.
fn json_cell(v: &str) -> serde_json::Value {
    if let Ok(b) = v.parse::<bool>() {
        return b.into();
    }
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => serde_json::Number::from_f64(x).map_or_else(|| v.into(), serde_json::Value::Number),
        _ => v.into(),
    }
}
