//! On-disk embedding cache.
//!
//! One file per (model, text hash) under `<dir>/<model>/`, holding a 16-byte
//! header (`BTXV` magic, format version, dimension, reserved) followed by
//! little-endian `f32` values. Each model directory also carries a
//! `manifest.json`. Files are written to a temporary name and renamed into
//! place, so readers never observe partial entries.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CACHE_MAGIC: [u8; 4] = *b"BTXV";
const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct Manifest {
    model_id: String,
    dimension: usize,
    format: String,
    header_bytes: usize,
    hash: String,
}

#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    root: PathBuf,
}

fn sanitize(model_id: &str) -> String {
    model_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' || c == '_' { c } else { '_' })
        .collect()
}

impl EmbeddingCache {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn model_dir(&self, model_id: &str) -> PathBuf {
        self.root.join(sanitize(model_id))
    }

    pub fn entry_path(&self, model_id: &str, hash: u64) -> PathBuf {
        self.model_dir(model_id).join(format!("{hash:016x}.vec"))
    }

    pub fn get(&self, model_id: &str, hash: u64) -> Result<Option<Vec<f32>>> {
        let path = self.entry_path(model_id, hash);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        decode_entry(&bytes).map(Some).map_err(|msg| {
            Error::Schema(format!("corrupt cache entry {}: {msg}", path.display()))
        })
    }

    pub fn put(&self, model_id: &str, hash: u64, values: &[f32]) -> Result<()> {
        let dir = self.model_dir(model_id);
        fs::create_dir_all(&dir)?;
        self.ensure_manifest(&dir, model_id, values.len())?;
        let mut bytes = Vec::with_capacity(HEADER_LEN + 4 * values.len());
        bytes.extend_from_slice(&CACHE_MAGIC);
        bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        bytes.extend_from_slice(&(values.len() as u32).to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        atomic_write(&self.entry_path(model_id, hash), &bytes)
    }

    fn ensure_manifest(&self, dir: &Path, model_id: &str, dimension: usize) -> Result<()> {
        let path = dir.join("manifest.json");
        if path.exists() {
            return Ok(());
        }
        let manifest = Manifest {
            model_id: model_id.to_string(),
            dimension,
            format: "f32le".to_string(),
            header_bytes: HEADER_LEN,
            hash: "fnv1a64-nfc".to_string(),
        };
        atomic_write(&path, serde_json::to_string_pretty(&manifest)?.as_bytes())
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "tmp{}-{}",
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn decode_entry(bytes: &[u8]) -> std::result::Result<Vec<f32>, String> {
    if bytes.len() < HEADER_LEN || bytes[..4] != CACHE_MAGIC {
        return Err("bad magic".to_string());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    if word(4) != FORMAT_VERSION {
        return Err(format!("unsupported version {}", word(4)));
    }
    let dim = word(8) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 4 * dim {
        return Err(format!("expected {dim} values, found {} bytes", body.len()));
    }
    Ok(body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
}
