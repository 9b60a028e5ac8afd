//! Self-contained JSON reports.
//!
//! Field order is fixed by the struct definitions, so identical runs produce
//! identical documents apart from the trailing timing record.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::algebra::LieAlgebra;
use crate::error::Result;

#[derive(Clone, Debug, Serialize)]
pub struct CommandEcho {
    pub name: String,
    pub args: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub reference: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub threads: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report<T: Serialize> {
    pub command: CommandEcho,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
    pub results: T,
    pub warnings: Vec<String>,
    pub timing: Timing,
}

impl<T: Serialize> Report<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest_file(role: &str, path: &Path) -> Result<InputDigest> {
    let bytes = std::fs::read(path)?;
    Ok(InputDigest { role: role.into(), reference: path.display().to_string(), sha256: sha256_hex(&bytes) })
}

/// Digest of an algebra reference. Built-in algebras are hashed through
/// their canonical file form.
pub fn digest_algebra(role: &str, reference: &str, relative_to: Option<&Path>) -> Result<InputDigest> {
    if reference.starts_with("builtin:") {
        let alg = LieAlgebra::load(reference, None)?;
        let canonical = serde_json::to_vec(&alg.to_file()).expect("algebra files serialize");
        return Ok(InputDigest { role: role.into(), reference: reference.into(), sha256: sha256_hex(&canonical) });
    }
    let path = match relative_to {
        Some(dir) if Path::new(reference).is_relative() => dir.join(reference),
        _ => Path::new(reference).to_path_buf(),
    };
    digest_file(role, &path)
}
