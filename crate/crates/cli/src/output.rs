//! Output directory handling and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;

use crate::svg::Chart;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Svg,
    Both,
}

impl Format {
    fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    fn svg(self) -> bool {
        matches!(self, Format::Svg | Format::Both)
    }
}

/// Everything needed to rerun a command: the parsed arguments plus the full
/// text of every input file.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_schema: &'static str,
    pub command: String,
    pub arguments: Value,
    pub seeds: Vec<u64>,
    pub inputs: Value,
    pub outputs: Vec<String>,
}

pub struct Output {
    dir: PathBuf,
    format: Format,
    written: Vec<String>,
}

impl Output {
    pub fn create(dir: &Path, format: Format) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Output { dir: dir.to_path_buf(), format, written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Tables are always written when the format includes CSV.
    pub fn csv(&mut self, name: &str, contents: &str) -> Result<()> {
        if self.format.csv() {
            self.write(name, contents)?;
        }
        Ok(())
    }

    pub fn chart(&mut self, name: &str, chart: &Chart) -> Result<()> {
        if self.format.svg() {
            self.write(name, &chart.render())?;
        }
        Ok(())
    }

    /// Files that are not tables or charts (traces, fitted configs).
    pub fn artifact(&mut self, name: &str, contents: &str) -> Result<()> {
        self.write(name, contents)
    }

    /// Records a file written directly through [`Output::path`].
    pub fn record(&mut self, name: &str) {
        self.written.push(name.to_string());
    }

    pub fn finish(self, command: &str, arguments: Value, seeds: Vec<u64>, inputs: Value) -> Result<()> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config_schema: snm_core::model::CONFIG_SCHEMA,
            command: command.to_string(),
            arguments,
            seeds,
            inputs,
            outputs: self.written,
        };
        let path = self.dir.join(format!("{command}.manifest.json"));
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}

/// Joins CSV lines under a header, with a trailing newline.
pub fn table(header: &str, lines: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for line in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out
}
