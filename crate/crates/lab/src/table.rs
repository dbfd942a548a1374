//! CSV tables with a one-line manifest header.
//!
//! Floats are written with 17 significant digits so that every value
//! round-trips exactly; lines end in LF.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{LabError, Result};

/// Provenance line written above the CSV header.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
}

impl Manifest {
    pub fn line(&self) -> String {
        format!(
            "# smdl {} command={} seed={} config_sha256={}",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.seed,
            self.config_sha256
        )
    }
}

pub fn float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

/// Rows of string cells under a fixed header.
#[derive(Clone, Debug)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width does not match header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self, manifest: &Manifest) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("cells are UTF-8");
        format!("{}\n{body}", manifest.line())
    }

    pub fn write(&self, path: &Path, manifest: &Manifest) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
        }
        fs::write(path, self.render(manifest)).map_err(|e| LabError::io(path, e))
    }
}

/// A table read back from disk, with cells addressable by column name.
#[derive(Clone, Debug)]
pub struct ReadTable {
    pub manifest: Option<String>,
    columns: HashMap<String, usize>,
    pub rows: Vec<Vec<String>>,
    path: std::path::PathBuf,
}

impl ReadTable {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let manifest = text.lines().next().filter(|l| l.starts_with('#')).map(str::to_owned);
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| LabError::format(path, e.to_string()))?.clone();
        let columns = header.iter().enumerate().map(|(i, h)| (h.to_owned(), i)).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| LabError::format(path, e.to_string()))?;
            rows.push(rec.iter().map(str::to_owned).collect());
        }
        Ok(Self {
            manifest,
            columns,
            rows,
            path: path.to_path_buf(),
        })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .get(name)
            .copied()
            .ok_or_else(|| LabError::format(&self.path, format!("missing column `{name}`")))
    }

    pub fn text<'a>(&'a self, row: &'a [String], name: &str) -> Result<&'a str> {
        Ok(&row[self.column(name)?])
    }

    pub fn float(&self, row: &[String], name: &str) -> Result<f64> {
        let cell = self.text(row, name)?;
        cell.parse()
            .map_err(|_| LabError::format(&self.path, format!("column `{name}`: `{cell}` is not a number")))
    }

    /// `None` for an empty cell.
    pub fn opt_float(&self, row: &[String], name: &str) -> Result<Option<f64>> {
        if self.text(row, name)?.is_empty() {
            Ok(None)
        } else {
            self.float(row, name).map(Some)
        }
    }

    pub fn uint(&self, row: &[String], name: &str) -> Result<u64> {
        let cell = self.text(row, name)?;
        cell.parse()
            .map_err(|_| LabError::format(&self.path, format!("column `{name}`: `{cell}` is not an integer")))
    }
}
