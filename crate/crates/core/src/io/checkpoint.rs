//! Checkpoints: a JSON manifest plus one little-endian `f64` sidecar per field.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::PerturbationState;
use crate::spectral::{make_grid, ScalarField, SpectralGrid};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldEntry {
    pub name: String,
    /// Sidecar file name, relative to the manifest.
    pub file: String,
    pub offset: u64,
    /// Payload length in bytes.
    pub length: u64,
    /// Hex SHA-256 of the payload.
    pub sha256: String,
    /// Always `"f64le"`, row-major `n x n`.
    pub dtype: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub n: usize,
    pub half_length: f64,
    pub alpha: f64,
    pub tau: f64,
    pub fields: Vec<FieldEntry>,
}

/// A loaded checkpoint.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub state: PerturbationState,
    pub alpha: f64,
    pub manifest: Manifest,
}

fn encode(f: &ScalarField) -> Vec<u8> {
    let mut out = Vec::with_capacity(f.values().len() * 8);
    for v in f.values().iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write `<dir>/<stem>.json` and its sidecars; returns the manifest path.
pub fn save_checkpoint(state: &PerturbationState, alpha: f64, dir: &Path, stem: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let g = state.grid();
    let mut fields = Vec::new();
    for (name, f) in [("b", &state.b), ("w_tilde", &state.w_tilde)] {
        let bytes = encode(f);
        let file = format!("{stem}.{name}.bin");
        std::fs::write(dir.join(&file), &bytes)?;
        fields.push(FieldEntry {
            name: name.to_string(),
            file,
            offset: 0,
            length: bytes.len() as u64,
            sha256: digest(&bytes),
            dtype: "f64le".to_string(),
        });
    }
    let manifest = Manifest {
        format_version: CHECKPOINT_FORMAT_VERSION,
        n: g.n(),
        half_length: g.half_length(),
        alpha,
        tau: state.tau,
        fields,
    };
    let path = dir.join(format!("{stem}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

fn read_field(dir: &Path, entry: &FieldEntry, grid: &SpectralGrid) -> Result<ScalarField> {
    if entry.dtype != "f64le" {
        return Err(Error::Corrupt(format!("field {}: unknown dtype {:?}", entry.name, entry.dtype)));
    }
    let n = grid.n();
    let expected = (n * n * 8) as u64;
    if entry.length != expected {
        return Err(Error::Corrupt(format!(
            "field {}: manifest length {} does not match n = {n}",
            entry.name, entry.length
        )));
    }
    let raw = std::fs::read(dir.join(&entry.file))?;
    let end = entry.offset + entry.length;
    if (raw.len() as u64) < end {
        return Err(Error::Corrupt(format!(
            "field {}: payload truncated ({} of {end} bytes)",
            entry.name,
            raw.len()
        )));
    }
    let bytes = &raw[entry.offset as usize..end as usize];
    if digest(bytes) != entry.sha256 {
        return Err(Error::Corrupt(format!("field {}: hash mismatch", entry.name)));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let arr = Array2::from_shape_vec((n, n), values).expect("length checked");
    ScalarField::new(grid, arr)
}

/// Parse a manifest without touching the payload.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == CHECKPOINT_FORMAT_VERSION as u64 => Ok(serde_json::from_value(value)?),
        Some(v) => Err(Error::UnsupportedVersion(v as u32)),
        None => Err(Error::Corrupt("manifest has no format_version".into())),
    }
}

/// Load a checkpoint, building its grid from the manifest.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let manifest = read_manifest(path)?;
    let grid = make_grid(manifest.n, manifest.half_length)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let find = |name: &str| {
        manifest
            .fields
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| Error::Corrupt(format!("manifest lacks field {name}")))
    };
    let b = read_field(dir, find("b")?, &grid)?;
    let w = read_field(dir, find("w_tilde")?, &grid)?;
    Ok(Checkpoint {
        state: PerturbationState::new(b, w, manifest.tau)?,
        alpha: manifest.alpha,
        manifest,
    })
}

/// Load a checkpoint for a run on `grid`; a different resolution or box is an error.
pub fn load_checkpoint_for(path: &Path, grid: &SpectralGrid) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let n = value.get("n").and_then(|v| v.as_u64());
    let l = value.get("half_length").and_then(|v| v.as_f64());
    if n != Some(grid.n() as u64) || l != Some(grid.half_length()) {
        return Err(Error::GridMismatch(format!(
            "checkpoint has n = {n:?}, L = {l:?}; run expects n = {}, L = {}",
            grid.n(),
            grid.half_length()
        )));
    }
    load_checkpoint(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(n: usize) -> PerturbationState {
        let g = make_grid(n, 16.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut f = || ScalarField::new(&g, Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0))).unwrap();
        PerturbationState::new(f().scale(1e-3), f(), 0.123456789).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let s = random_state(32);
        let p = save_checkpoint(&s, 1.5, dir.path(), "ck").unwrap();
        let c = load_checkpoint(&p).unwrap();
        assert_eq!(c.alpha, 1.5);
        assert_eq!(c.state.tau.to_bits(), s.tau.to_bits());
        for (a, b) in c.state.b.values().iter().zip(s.b.values()).chain(c.state.w_tilde.values().iter().zip(s.w_tilde.values())) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(c.state.grid().coords(), s.grid().coords());
    }

    #[test]
    fn corruption_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let s = random_state(32);
        let p = save_checkpoint(&s, 1.0, dir.path(), "ck").unwrap();
        let side = dir.path().join("ck.w_tilde.bin");
        let bytes = std::fs::read(&side).unwrap();
        std::fs::write(&side, &bytes[..bytes.len() - 100]).unwrap();
        assert!(matches!(load_checkpoint(&p), Err(Error::Corrupt(m)) if m.contains("truncated")));
        let mut flipped = bytes.clone();
        flipped[17] ^= 1;
        std::fs::write(&side, &flipped).unwrap();
        assert!(matches!(load_checkpoint(&p), Err(Error::Corrupt(m)) if m.contains("hash")));
    }

    #[test]
    fn version_and_grid_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let s = random_state(32);
        let p = save_checkpoint(&s, 1.0, dir.path(), "ck").unwrap();
        let g64 = make_grid(64, 16.0).unwrap();
        assert!(matches!(load_checkpoint_for(&p, &g64), Err(Error::GridMismatch(_))));
        assert!(load_checkpoint_for(&p, s.grid()).is_ok());
        let text = std::fs::read_to_string(&p).unwrap().replace("\"format_version\": 1", "\"format_version\": 7");
        std::fs::write(&p, text).unwrap();
        assert!(matches!(load_checkpoint(&p), Err(Error::UnsupportedVersion(7))));
    }
}
