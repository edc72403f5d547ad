//! Result tables and their CSV form with a provenance header.
//!
//! File layout: one `# {json}` provenance line, the column header, then rows.
//! Floats use Rust's shortest round-trip formatting, so identical inputs give
//! identical bytes.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::spec::ExperimentSpec;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v}"),
            Value::Text(v) => write!(f, "{v}"),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<i32> for Value {
    fn from(v: i32) -> Self {
        Value::Int(v as i64)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v as i64)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Int(v as i64)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of column `name` parsed as `f64`.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column(name).ok_or_else(|| anyhow!("no column `{name}`"))?;
        self.rows
            .iter()
            .map(|r| match &r[i] {
                Value::Float(v) => Ok(*v),
                Value::Int(v) => Ok(*v as f64),
                Value::Text(t) => t.parse().map_err(|_| anyhow!("`{t}` in column `{name}` is not a number")),
            })
            .collect()
    }

    /// Header line and rows.
    pub fn body(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub experiment: String,
    pub version: String,
    pub seed: u64,
    /// SHA-256 of the JSON-serialized spec.
    pub config_hash: String,
    pub spec: ExperimentSpec,
}

impl Provenance {
    pub fn new(spec: &ExperimentSpec) -> Self {
        Self {
            experiment: spec.experiment.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: spec.seed,
            config_hash: spec_hash(spec),
            spec: spec.clone(),
        }
    }
}

pub fn spec_hash(spec: &ExperimentSpec) -> String {
    let json = serde_json::to_string(spec).expect("spec serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub provenance: Provenance,
    pub table: Table,
    /// Where the result was written or read, if anywhere.
    pub path: Option<PathBuf>,
}

impl ExperimentResult {
    pub fn new(spec: &ExperimentSpec, table: Table) -> Self {
        Self { provenance: Provenance::new(spec), table, path: None }
    }

    pub fn to_csv(&self) -> String {
        let header = serde_json::to_string(&self.provenance).expect("provenance serializes");
        format!("# {header}\n{}", self.table.body())
    }

    /// Writes `<dir>/<experiment>.csv`, creating `dir` if needed.
    pub fn write(&mut self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(format!("{}.csv", self.provenance.experiment));
        fs::write(&path, self.to_csv()).with_context(|| format!("writing {}", path.display()))?;
        self.path = Some(path.clone());
        Ok(path)
    }

    /// Parses a result file and checks that its config hash matches its spec.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| anyhow!("missing provenance header"))?;
        let provenance: Provenance = serde_json::from_str(header).context("parsing provenance header")?;
        let expected = spec_hash(&provenance.spec);
        if provenance.config_hash != expected {
            bail!("config hash mismatch: header says {}, spec hashes to {expected}", provenance.config_hash);
        }
        let columns: Vec<String> = lines
            .next()
            .ok_or_else(|| anyhow!("missing column header"))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut table = Table { columns, rows: Vec::new() };
        for (n, line) in lines.enumerate() {
            let row: Vec<Value> = line.split(',').map(parse_cell).collect();
            if row.len() != table.columns.len() {
                bail!("row {} has {} cells, header has {}", n + 1, row.len(), table.columns.len());
            }
            table.rows.push(row);
        }
        if !table.columns.iter().any(|c| c == "seed") {
            bail!("result table has no seed column");
        }
        Ok(Self { provenance, table, path: None })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut r = Self::parse(&text).with_context(|| format!("loading {}", path.display()))?;
        r.path = Some(path.to_path_buf());
        Ok(r)
    }
}

fn parse_cell(s: &str) -> Value {
    if let Ok(v) = s.parse::<i64>() {
        Value::Int(v)
    } else if let Ok(v) = s.parse::<f64>() {
        Value::Float(v)
    } else {
        Value::Text(s.to_string())
    }
}
