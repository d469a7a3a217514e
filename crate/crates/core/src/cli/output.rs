use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::geometry::io::sidecar_path;
use crate::Result;

/// One CSV cell. Floats are written as `{:.16e}` so reruns are byte identical.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Float(x) => write!(f, "{x:.16e}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Empty => Ok(()),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Files written by one run, recorded for the manifest.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    names: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Outputs {
            dir: dir.to_path_buf(),
            names: vec![],
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Path for a file the caller writes itself (field files and their sidecars).
    pub fn path(&mut self, name: &str) -> PathBuf {
        self.names.push(name.to_string());
        self.dir.join(name)
    }

    pub fn json(&mut self, name: &str, v: &impl Serialize) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        std::fs::write(self.path(name), s)?;
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r.iter().map(|c| c.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Recorded files plus any sidecars next to them, sorted by name.
    pub fn entries(&self) -> Result<Vec<OutputEntry>> {
        let mut files: Vec<String> = Vec::new();
        for n in &self.names {
            let p = self.dir.join(n);
            files.push(n.clone());
            let side = sidecar_path(&p);
            let desc = self.dir.join(format!("{n}.desc.json"));
            for extra in [side, desc] {
                if extra.exists() {
                    if let Some(s) = extra.file_name().and_then(|s| s.to_str()) {
                        files.push(s.to_string());
                    }
                }
            }
        }
        files.sort();
        files.dedup();
        files
            .into_iter()
            .map(|file| {
                let bytes = std::fs::read(self.dir.join(&file))?;
                Ok(OutputEntry {
                    bytes: bytes.len() as u64,
                    sha256: super::sha256_hex(&bytes),
                    file,
                })
            })
            .collect()
    }
}
