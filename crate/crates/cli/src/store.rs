//! On-disk dataset layout.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/samples/<id>.f64    raw field, little-endian f64, (t, y, x) row-major
//! <dir>/samples/<id>.json   sidecar metadata
//! ```

use crate::error::{data, CliError, Result};
use pdeid_core::solver::SolverConfig;
use pdeid_core::{ClassId, GridField, PdeSpec, TermLabels};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;

pub const SAMPLE_FORMAT: &str = "pdeid-sample/1";
pub const DATASET_FORMAT: &str = "pdeid-dataset/1";
pub const SAMPLE_DIR: &str = "samples";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub format: String,
    pub id: String,
    pub class_id: ClassId,
    pub spec: PdeSpec,
    pub labels: TermLabels,
    /// `[nt, ny, nx]`
    pub shape: [usize; 3],
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub class_id: ClassId,
    pub data: String,
    pub data_sha256: String,
    pub meta: String,
    pub meta_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub seed: u64,
    pub classes: Vec<ClassId>,
    pub solver: SolverConfig,
    pub samples: Vec<ManifestEntry>,
    /// SHA-256 over `"<id> <data_sha256> <meta_sha256>\n"` for every sample in order.
    pub content_hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(data(path.display()))?;
    Ok(sha256_hex(&bytes))
}

pub fn content_hash(entries: &[ManifestEntry]) -> String {
    let mut h = Sha256::new();
    for e in entries {
        h.update(format!("{} {} {}\n", e.id, e.data_sha256, e.meta_sha256).as_bytes());
    }
    hex::encode(h.finalize())
}

pub fn field_bytes(field: &GridField) -> Vec<u8> {
    let mut out = Vec::with_capacity(field.values().len() * 8);
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s.into_bytes()
}

/// Writes the field and its sidecar under `<dir>/samples/`.
pub fn write_sample(dir: &Path, meta: &SampleMeta, field: &GridField) -> Result<ManifestEntry> {
    let data_rel = format!("{SAMPLE_DIR}/{}.f64", meta.id);
    let meta_rel = format!("{SAMPLE_DIR}/{}.json", meta.id);
    let raw = field_bytes(field);
    let side = to_json_bytes(meta);
    fs::write(dir.join(&data_rel), &raw).map_err(data(&data_rel))?;
    fs::write(dir.join(&meta_rel), &side).map_err(data(&meta_rel))?;
    Ok(ManifestEntry {
        id: meta.id.clone(),
        class_id: meta.class_id,
        data: data_rel,
        data_sha256: sha256_hex(&raw),
        meta: meta_rel,
        meta_sha256: sha256_hex(&side),
    })
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(data(path.display()))?;
    let m: DatasetManifest = serde_json::from_str(&text).map_err(data(path.display()))?;
    if m.format != DATASET_FORMAT {
        return Err(CliError::Data(format!(
            "{}: unsupported format '{}'",
            path.display(),
            m.format
        )));
    }
    if content_hash(&m.samples) != m.content_hash {
        return Err(CliError::Data(format!(
            "{}: content hash does not match its sample list",
            path.display()
        )));
    }
    Ok(m)
}

/// Loads one sample, checking both files against the manifest hashes.
pub fn load_sample(dir: &Path, entry: &ManifestEntry) -> Result<(SampleMeta, GridField)> {
    let corrupt = |what: &str| CliError::Data(format!("sample {}: {what}", entry.id));
    let side =
        fs::read(dir.join(&entry.meta)).map_err(|e| corrupt(&format!("{}: {e}", entry.meta)))?;
    if sha256_hex(&side) != entry.meta_sha256 {
        return Err(corrupt("metadata hash mismatch"));
    }
    let meta: SampleMeta = serde_json::from_slice(&side).map_err(|e| corrupt(&e.to_string()))?;
    if meta.format != SAMPLE_FORMAT || meta.id != entry.id {
        return Err(corrupt("metadata does not describe this sample"));
    }
    let raw =
        fs::read(dir.join(&entry.data)).map_err(|e| corrupt(&format!("{}: {e}", entry.data)))?;
    if sha256_hex(&raw) != entry.data_sha256 {
        return Err(corrupt("data hash mismatch"));
    }
    let [nt, ny, nx] = meta.shape;
    if raw.len() != nt * ny * nx * 8 {
        return Err(corrupt("data size does not match shape"));
    }
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let field = GridField::new(values, nt, ny, nx, meta.dt).map_err(|e| corrupt(&e.to_string()))?;
    Ok((meta, field))
}
