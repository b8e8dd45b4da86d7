//! Report bundles: a JSON report with named checks, CSV series and
//! two-column plot files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cfs_core::Tolerances;
use serde::{Deserialize, Serialize};

use crate::config::OutputFormat;
use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// A measured value compared against its limit. NaN never passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, relation: Relation::AtMost, limit, passed: value <= limit }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, relation: Relation::AtLeast, limit, passed: value >= limit }
    }

    /// `|value − target| ≤ tol`, recorded as a deviation.
    pub fn near(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self::at_most(name, (value - target).abs(), tol)
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }

    pub fn prefixed(mut self, prefix: &str) -> Self {
        self.name = format!("{prefix}: {}", self.name);
        self
    }

    pub fn describe(&self) -> String {
        let rel = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        };
        format!("{}: {:e} {rel} {:e}", self.name, self.value, self.limit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub seed: u64,
    pub config_hash: String,
    pub tolerances: Tolerances,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub data: serde_json::Value,
}

impl Report {
    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per check.
    pub fn checks_csv(&self) -> String {
        let mut out = String::from("name,value,relation,limit,passed\n");
        for c in &self.checks {
            let rel = if c.relation == Relation::AtMost { "<=" } else { ">=" };
            let _ = writeln!(out, "\"{}\",{:e},{rel},{:e},{}", c.name.replace('"', "'"), c.value, c.limit, c.passed);
        }
        out
    }
}

/// `(x, y)` pairs written as a whitespace-separated two-column text file.
#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Plot {
    pub fn new(name: &str, points: impl IntoIterator<Item = (f64, f64)>) -> Self {
        Plot { name: name.into(), points: points.into_iter().collect() }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# {}\n", self.name);
        for (x, y) in &self.points {
            let _ = writeln!(out, "{x:.17e} {y:.17e}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub report: Report,
    /// CSV series by file stem.
    pub tables: Vec<(String, String)>,
    pub plots: Vec<Plot>,
    /// Extra files by name, e.g. a minimized system.
    pub files: Vec<(String, String)>,
    /// Sub-reports of composite experiments.
    pub children: Vec<Bundle>,
}

impl Bundle {
    pub fn new(report: Report) -> Self {
        Bundle { report, tables: Vec::new(), plots: Vec::new(), files: Vec::new(), children: Vec::new() }
    }

    pub fn table(mut self, name: &str, csv: String) -> Self {
        self.tables.push((name.into(), csv));
        self
    }

    pub fn plot(mut self, plot: Plot) -> Self {
        self.plots.push(plot);
        self
    }

    pub fn file(mut self, name: &str, contents: String) -> Self {
        self.files.push((name.into(), contents));
        self
    }

    pub fn passed(&self) -> bool {
        self.report.passed
    }

    /// Writes the bundle below `dir`; children go to subdirectories named
    /// after their experiment. Returns the written paths.
    pub fn write(&self, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
        let io = |path: &Path, e: std::io::Error| LabError::Io { path: path.display().to_string(), source: e };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let stem = &self.report.experiment;
        let mut items: Vec<(String, String)> = Vec::new();
        if format.json() {
            items.push((format!("{stem}.json"), self.report.to_json() + "\n"));
        }
        if format.csv() {
            items.push((format!("{stem}-checks.csv"), self.report.checks_csv()));
            items.extend(self.tables.iter().map(|(n, t)| (format!("{n}.csv"), t.clone())));
        }
        items.extend(self.plots.iter().map(|p| (format!("{}.dat", p.name), p.to_text())));
        items.extend(self.files.iter().cloned());
        let mut written = Vec::new();
        for (name, contents) in items {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|e| io(&path, e))?;
            written.push(path);
        }
        for child in &self.children {
            written.extend(child.write(&dir.join(&child.report.experiment), format)?);
        }
        Ok(written)
    }
}
