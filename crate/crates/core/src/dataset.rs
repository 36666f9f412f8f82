//! Tabular outputs: CSV with a JSON mirror and a run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_float(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            Cell::Text(_) => None,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(i) => Value::from(*i),
            Cell::Text(s) => Value::from(s.as_str()),
        }
    }

    fn parse(field: &str) -> Self {
        if let Ok(i) = field.parse::<i64>() {
            Cell::Int(i)
        } else if let Ok(x) = field.parse::<f64>() {
            Cell::Num(x)
        } else {
            Cell::Text(field.to_string())
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
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

/// Seventeen significant digits; enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Dataset {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::SchemaMismatch(format!("row has {} fields, schema has {} columns", row.len(), self.columns.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of a numeric column; text cells read as NaN.
    pub fn numeric(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[k].as_f64().unwrap_or(f64::NAN)).collect())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn to_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let obj: Map<String, Value> = self.columns.iter().cloned().zip(r.iter().map(Cell::to_json)).collect();
                Value::Object(obj)
            })
            .collect();
        serde_json::json!({ "columns": self.columns, "rows": Value::Array(rows) })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

pub fn read_csv(path: &Path) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let columns: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut ds = Dataset { columns, rows: Vec::new() };
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        ds.push(rec.iter().map(Cell::parse).collect())?;
    }
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub created_unix: u64,
    /// Hopping scale `J/2π` in MHz, for converting the dimensionless
    /// frequency columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_over_2pi_mhz: Option<f64>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config_hash: &str, seed: u64) -> Self {
        Self {
            tool: "topamp".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config_hash.into(),
            seed,
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            j_over_2pi_mhz: None,
            outputs: Vec::new(),
        }
    }
}

/// Refuse to clobber existing files unless forced.
pub fn check_writable(paths: &[PathBuf], force: bool) -> Result<()> {
    if !force {
        if let Some(p) = paths.iter().find(|p| p.exists()) {
            return Err(Error::WouldOverwrite(p.display().to_string()));
        }
    }
    Ok(())
}

pub fn write_file(path: &Path, bytes: &[u8], force: bool) -> Result<()> {
    check_writable(&[path.to_path_buf()], force)?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn manifest_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.manifest.json"))
}

/// Write `<stem>.csv`, `<stem>.json` and `<stem>.manifest.json` in `dir`.
pub fn emit_dataset(ds: &Dataset, dir: &Path, stem: &str, manifest: &RunManifest, force: bool) -> Result<Vec<PathBuf>> {
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    let man_path = manifest_path(dir, stem);
    let paths = vec![csv_path.clone(), json_path.clone(), man_path.clone()];
    check_writable(&paths, force)?;
    fs::create_dir_all(dir)?;
    fs::write(&csv_path, ds.to_csv()?)?;
    fs::write(&json_path, serde_json::to_string_pretty(&ds.to_json())? + "\n")?;
    let mut m = manifest.clone();
    m.outputs = paths.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect();
    fs::write(&man_path, serde_json::to_string_pretty(&m)? + "\n")?;
    Ok(paths)
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        let mut ds = Dataset::new(&["omega_over_J", "class", "site"]);
        ds.push(vec![Cell::Num(0.1), "topological".into(), 3usize.into()]).unwrap();
        ds.push(vec![Cell::Num(f64::NAN), "trivial".into(), 4usize.into()]).unwrap();
        ds
    }

    #[test]
    fn floats_round_trip_through_text() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let mut ds = Dataset::new(&["a", "b"]);
        assert!(matches!(ds.push(vec![Cell::Num(1.0)]), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn empty_dataset_writes_header_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::new(&["x", "y"]);
        let paths = emit_dataset(&ds, dir.path(), "empty", &RunManifest::new("test", "abc", 1), false).unwrap();
        assert_eq!(fs::read_to_string(&paths[0]).unwrap(), "x,y\n");
        let m = read_manifest(&paths[2]).unwrap();
        assert_eq!(m.outputs, vec!["empty.csv", "empty.json", "empty.manifest.json"]);
        assert_eq!(m.config_hash, "abc");
    }

    #[test]
    fn overwrite_requires_force_and_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let man = RunManifest::new("test", "abc", 1);
        let paths = emit_dataset(&sample(), dir.path(), "s", &man, false).unwrap();
        let first = fs::read(&paths[0]).unwrap();
        assert!(matches!(emit_dataset(&sample(), dir.path(), "s", &man, false), Err(Error::WouldOverwrite(_))));
        emit_dataset(&sample(), dir.path(), "s", &man, true).unwrap();
        assert_eq!(fs::read(&paths[0]).unwrap(), first);
        assert_eq!(fs::read(&paths[1]).unwrap(), fs::read(&paths[1]).unwrap());
    }

    #[test]
    fn csv_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_dataset(&sample(), dir.path(), "s", &RunManifest::new("t", "h", 0), false).unwrap();
        let back = read_csv(&paths[0]).unwrap();
        assert_eq!(back.columns, sample().columns);
        assert_eq!(back.rows[0], sample().rows[0]);
        assert!(back.numeric("omega_over_J").unwrap()[1].is_nan());
    }
}
