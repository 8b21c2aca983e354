//! Atomic artifact writing: every file goes to a temporary sibling first and
//! is renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::CliError;

/// JSON number, or `null` for non-finite values.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().copied().map(num).collect())
}

pub fn matrix(m: &qkl::RealMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|r| nums(&m.row(r).iter().copied().collect::<Vec<_>>()))
            .collect(),
    )
}

pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Names of the files written so far, in order.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn write_atomic(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.root)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.root.join(name))
            .map_err(|e| CliError::Io(e.error))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("JSON value serializes");
        text.push('\n');
        self.write_atomic(name, text.as_bytes())
    }

    /// CSV with a fixed header; floats use the shortest round-trip form.
    pub fn write_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        self.write_atomic(name, &bytes)
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

/// Formats a CSV cell.
pub fn cell<T: std::fmt::Display>(x: T) -> String {
    x.to_string()
}
