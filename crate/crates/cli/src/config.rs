//! Run configuration: one JSON document, optionally patched by dotted-path
//! overrides from the command line.

use std::path::{Path, PathBuf};

use qkl::qef::{check_weight, ModeCount, DEFAULT_MASS_FRACTION};
use qkl::{OqhoModel, RealMatrix};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Row-major matrix with explicit dimensions. `data` may be nested rows or a
/// flat list of `rows·cols` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub rows: usize,
    pub cols: usize,
    pub data: MatrixData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixData {
    Nested(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

impl MatrixSpec {
    pub fn from_matrix(m: &RealMatrix) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: MatrixData::Nested(
                (0..m.nrows())
                    .map(|r| m.row(r).iter().copied().collect())
                    .collect(),
            ),
        }
    }

    pub fn to_matrix(&self, name: &str) -> Result<RealMatrix, CliError> {
        let flat: Vec<f64> = match &self.data {
            MatrixData::Flat(v) => v.clone(),
            MatrixData::Nested(rows) => {
                if rows.len() != self.rows || rows.iter().any(|r| r.len() != self.cols) {
                    return Err(CliError::Config(format!(
                        "{name}: nested data does not match {}x{}",
                        self.rows, self.cols
                    )));
                }
                rows.concat()
            }
        };
        if flat.len() != self.rows * self.cols {
            return Err(CliError::Config(format!(
                "{name}: {} entries for a {}x{} matrix",
                flat.len(),
                self.rows,
                self.cols
            )));
        }
        if flat.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Config(format!("{name}: non-finite entry")));
        }
        Ok(RealMatrix::from_row_slice(self.rows, self.cols, &flat))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Hamiltonian {
        theta: MatrixSpec,
        #[serde(rename = "R")]
        r: MatrixSpec,
        #[serde(rename = "M")]
        m: MatrixSpec,
    },
    Drift {
        #[serde(rename = "A")]
        a: MatrixSpec,
        #[serde(rename = "B")]
        b: MatrixSpec,
        theta: MatrixSpec,
    },
    /// `"canonical"`: one mode, `A = −2I`, `B = 2J̄`.
    Named(String),
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Named("canonical".into())
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<OqhoModel, CliError> {
        let model = match self {
            ModelSpec::Named(name) if name == "canonical" => OqhoModel::canonical(),
            ModelSpec::Named(name) => {
                return Err(CliError::Config(format!("unknown model name {name:?}")))
            }
            ModelSpec::Hamiltonian { theta, r, m } => OqhoModel::from_hamiltonian(
                theta.to_matrix("model.theta")?,
                r.to_matrix("model.R")?,
                m.to_matrix("model.M")?,
            )?,
            ModelSpec::Drift { a, b, theta } => OqhoModel::from_drift(
                a.to_matrix("model.A")?,
                b.to_matrix("model.B")?,
                theta.to_matrix("model.theta")?,
            )?,
        };
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModesSpec {
    Count(usize),
    Keyword(String),
}

impl Default for ModesSpec {
    fn default() -> Self {
        ModesSpec::Keyword("auto".into())
    }
}

fn default_horizon() -> f64 {
    1.0
}
fn default_basis_k() -> usize {
    256
}
fn default_grid() -> usize {
    400
}
fn default_fraction() -> f64 {
    DEFAULT_MASS_FRACTION
}
fn default_out() -> PathBuf {
    PathBuf::from("qkl-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(rename = "basis_K", default = "default_basis_k")]
    pub basis_k: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(rename = "Pi", default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<MatrixSpec>,
    #[serde(rename = "N", default)]
    pub modes: ModesSpec,
    /// Spectral mass fraction used when `N` is `"auto"`.
    #[serde(default = "default_fraction")]
    pub mass_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock_d: Option<usize>,
    /// Explicit `2N×2N` matrix for `oracle-compare`, bypassing the pipeline.
    #[serde(rename = "H", default, skip_serializing_if = "Option::is_none")]
    pub oracle_h: Option<MatrixSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

impl RunConfig {
    /// Reads `path` (or starts from `{}`), applies `key=value` overrides and
    /// deserializes. Override values are parsed as JSON, falling back to a
    /// plain string.
    pub fn load(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self, CliError> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => Value::Object(Default::default()),
        };
        for (key, value) in overrides {
            set_path(&mut doc, key, value.clone())?;
        }
        let cfg: RunConfig =
            serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate_scalars()?;
        Ok(cfg)
    }

    fn validate_scalars(&self) -> Result<(), CliError> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(CliError::Config(format!("T must be positive, got {}", self.horizon)));
        }
        if self.basis_k == 0 {
            return Err(CliError::Config("basis_K must be positive".into()));
        }
        if !(self.mass_fraction > 0.0 && self.mass_fraction <= 1.0) {
            return Err(CliError::Config(format!(
                "mass_fraction must lie in (0, 1], got {}",
                self.mass_fraction
            )));
        }
        self.mode_count()?;
        Ok(())
    }

    pub fn mode_count(&self) -> Result<ModeCount, CliError> {
        match &self.modes {
            ModesSpec::Count(0) => Err(CliError::Config("N must be positive".into())),
            ModesSpec::Count(n) => Ok(ModeCount::Fixed(*n)),
            ModesSpec::Keyword(k) if k == "auto" => Ok(ModeCount::Auto {
                fraction: self.mass_fraction,
            }),
            ModesSpec::Keyword(k) => Err(CliError::Config(format!(
                "N must be an integer or \"auto\", got {k:?}"
            ))),
        }
    }

    pub fn weight(&self, n: usize) -> Result<RealMatrix, CliError> {
        let spec = self
            .pi
            .as_ref()
            .ok_or_else(|| CliError::Config("Pi is required for this subcommand".into()))?;
        let pi = spec.to_matrix("Pi")?;
        check_weight(&pi, n)?;
        Ok(pi)
    }

    /// Canonical JSON echo; keys sorted, no whitespace.
    pub fn echo(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// SHA-256 of the canonical echo.
    pub fn content_hash(&self) -> String {
        let text = serde_json::to_string(&self.echo()).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Parses `key=value`; the value is JSON if it parses, a string otherwise.
pub fn parse_override(raw: &str) -> Result<(String, Value), CliError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {raw:?} is not key=value")))?;
    if key.is_empty() {
        return Err(CliError::Config(format!("override {raw:?} has an empty key")));
    }
    let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.into()));
    Ok((key.to_string(), value))
}

fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !node.is_object() {
            return Err(CliError::Config(format!(
                "override {key:?}: {} is not an object",
                parts[..i].join(".")
            )));
        }
        let map = node.as_object_mut().unwrap();
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_patch_nested_keys() {
        let mut doc = serde_json::json!({"model": {"theta": {"rows": 2}}});
        set_path(&mut doc, "model.theta.rows", Value::from(4)).unwrap();
        set_path(&mut doc, "T", Value::from(2.5)).unwrap();
        assert_eq!(doc["model"]["theta"]["rows"], 4);
        assert_eq!(doc["T"], 2.5);
        assert!(set_path(&mut doc, "T.x", Value::from(1)).is_err());
    }

    #[test]
    fn override_values_fall_back_to_strings() {
        assert_eq!(parse_override("N=auto").unwrap().1, Value::from("auto"));
        assert_eq!(parse_override("N=3").unwrap().1, Value::from(3));
        assert!(parse_override("N").is_err());
    }

    #[test]
    fn matrix_layouts_agree() {
        let nested: MatrixSpec =
            serde_json::from_str(r#"{"rows":2,"cols":2,"data":[[1,2],[3,4]]}"#).unwrap();
        let flat: MatrixSpec =
            serde_json::from_str(r#"{"rows":2,"cols":2,"data":[1,2,3,4]}"#).unwrap();
        let m = nested.to_matrix("x").unwrap();
        assert_eq!(m, flat.to_matrix("x").unwrap());
        assert_eq!(m[(0, 1)], 2.0);
        let bad: MatrixSpec =
            serde_json::from_str(r#"{"rows":2,"cols":2,"data":[1,2,3]}"#).unwrap();
        assert!(bad.to_matrix("x").is_err());
    }

    #[test]
    fn defaults_and_hash() {
        let a = RunConfig::load(None, &[]).unwrap();
        assert_eq!(a.model, ModelSpec::default());
        assert_eq!(a.mode_count().unwrap(), ModeCount::Auto { fraction: 0.999 });
        let b = RunConfig::load(None, &[("seed".into(), Value::from(1))]).unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash(), RunConfig::load(None, &[]).unwrap().content_hash());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::load(None, &[("grdi".into(), Value::from(3))]).is_err());
        assert!(RunConfig::load(None, &[("N".into(), Value::from("many"))]).is_err());
    }
}
