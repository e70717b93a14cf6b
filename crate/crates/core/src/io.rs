//! JSON documents for grid functions, matrices and oracle sidecars.
//!
//! A grid function is `{"dim", "min", "max", "shape", "values"}` with values
//! flattened row-major; a matrix is `{"dim", "entries"}` holding the upper
//! triangle row-major. Numbers are written in shortest round-trip form and
//! parsed exactly, so write-then-read reproduces every value bit for bit.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::corpus::OracleFunction;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::matrix::SymMatrix;

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::Format(e.to_string()))
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn read_function(path: impl AsRef<Path>) -> Result<GridFunction> {
    from_json(&read_text(path.as_ref())?)
}

pub fn write_function(path: impl AsRef<Path>, f: &GridFunction) -> Result<()> {
    write_text(path.as_ref(), &to_json(f)?)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<SymMatrix> {
    from_json(&read_text(path.as_ref())?)
}

pub fn write_matrix(path: impl AsRef<Path>, m: &SymMatrix) -> Result<()> {
    write_text(path.as_ref(), &to_json(m)?)
}

pub fn read_oracle(path: impl AsRef<Path>) -> Result<OracleFunction> {
    from_json(&read_text(path.as_ref())?)
}

pub fn write_oracle(path: impl AsRef<Path>, f: &OracleFunction) -> Result<()> {
    write_text(path.as_ref(), &to_json(f)?)
}
