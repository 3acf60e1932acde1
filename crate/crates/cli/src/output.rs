use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;

/// One pass/fail check recorded in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    /// Bound the value was compared against.
    pub tolerance: f64,
}

impl Check {
    /// Passes when `value <= tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), passed: value <= tolerance, value, tolerance }
    }

    pub fn flag(name: impl Into<String>, passed: bool) -> Self {
        Self { name: name.into(), passed, value: f64::from(u8::from(passed)), tolerance: 1.0 }
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub command: String,
    pub schema_version: u32,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub threads: usize,
    pub wall_time_s: f64,
    pub checks: Vec<Check>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub passed: bool,
}

/// Output directory owned by one run.
pub struct RunDir {
    root: PathBuf,
    written: Vec<String>,
}

impl RunDir {
    /// Creates `root`. An existing directory must be empty.
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        if root.exists() {
            let mut entries = fs::read_dir(root).with_context(|| format!("reading {}", root.display()))?;
            if entries.next().is_some() {
                bail!("output directory {} is not empty", root.display());
            }
        }
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn write_with(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> anyhow::Result<()> {
        let path = self.root.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = BufWriter::new(file);
        body(&mut out).and_then(|_| out.flush()).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.write_with(name, |out| writeln!(out, "{text}"))
    }

    /// CSV with a header row; every cell is already formatted.
    pub fn write_csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> anyhow::Result<()> {
        self.write_with(name, |out| {
            writeln!(out, "{}", header.join(","))?;
            for r in rows {
                writeln!(out, "{}", r.join(","))?;
            }
            Ok(())
        })
    }
}

/// Shortest string that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn coord_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|k| format!("x{k}")).collect()
}
