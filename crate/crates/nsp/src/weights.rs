//! Weight files: a JSON manifest next to a raw little-endian `f32` blob.

use std::fs;
use std::path::{Path, PathBuf};

use nsp_core::activation::{ActivationKind, CombinedScale};
use nsp_core::annet::{Architecture, LayerSpec, Shape, TrainingStage, WeightMeta, WeightStore};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub layer: usize,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: usize,
    /// Number of `f32` values.
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub architecture: String,
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
    pub activation: Option<ActivationKind>,
    pub calibration: CombinedScale,
    pub input_rate: f64,
    pub seed: u64,
    pub stages: Vec<TrainingStage>,
    /// Blob file name, relative to the manifest.
    pub blob: String,
    pub dtype: String,
    pub tensors: Vec<TensorEntry>,
}

/// Blob path belonging to a manifest path (`weights.json` → `weights.bin`).
pub fn blob_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

/// Weights rounded to the precision they are stored with.
pub fn round_to_f32(store: &WeightStore) -> WeightStore {
    let mut out = store.clone();
    for t in &mut out.tensors {
        for w in t.iter_mut() {
            *w = *w as f32 as f64;
        }
    }
    out
}

pub fn manifest_for(store: &WeightStore, blob: &str) -> Result<Manifest> {
    let dims = store.arch.weight_dims()?;
    let mut tensors = Vec::new();
    let mut offset = 0;
    for (layer, (t, shape)) in store.tensors.iter().zip(dims).enumerate() {
        if t.is_empty() {
            continue;
        }
        tensors.push(TensorEntry { layer, shape, offset, len: t.len() });
        offset += 4 * t.len();
    }
    Ok(Manifest {
        version: FORMAT_VERSION,
        architecture: store.arch.fingerprint(),
        input: store.arch.input,
        layers: store.arch.layers.clone(),
        activation: store.meta.activation(),
        calibration: store.meta.scale,
        input_rate: store.meta.input_rate,
        seed: store.meta.init_seed,
        stages: store.meta.stages.clone(),
        blob: blob.to_string(),
        dtype: "f32-le".into(),
        tensors,
    })
}

pub fn save_weights(store: &WeightStore, manifest_path: &Path) -> Result<()> {
    store.validate()?;
    let blob = blob_path(manifest_path);
    let blob_name = blob.file_name().and_then(|n| n.to_str()).unwrap_or("weights.bin").to_string();
    let manifest = manifest_for(store, &blob_name)?;
    let mut bytes = Vec::new();
    for t in &store.tensors {
        for &w in t {
            bytes.extend_from_slice(&(w as f32).to_le_bytes());
        }
    }
    fs::write(&blob, &bytes).map_err(io_err(&blob))?;
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|source| Error::Json { path: manifest_path.into(), source })?;
    fs::write(manifest_path, json + "\n").map_err(io_err(manifest_path))
}

pub fn load_weights(manifest_path: &Path) -> Result<WeightStore> {
    let text = fs::read_to_string(manifest_path).map_err(io_err(manifest_path))?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|source| Error::Json { path: manifest_path.into(), source })?;
    let bad = |message: String| Error::Format { path: manifest_path.into(), message };
    if m.version != FORMAT_VERSION {
        return Err(bad(format!("unsupported manifest version {}", m.version)));
    }
    if m.dtype != "f32-le" {
        return Err(bad(format!("unsupported dtype `{}`", m.dtype)));
    }
    let arch = Architecture { input: m.input, layers: m.layers.clone() };
    if arch.fingerprint() != m.architecture {
        return Err(bad(format!("layers describe `{}` but the manifest says `{}`", arch.fingerprint(), m.architecture)));
    }
    let blob = manifest_path.parent().unwrap_or(Path::new(".")).join(&m.blob);
    let bytes = fs::read(&blob).map_err(io_err(&blob))?;
    let dims = arch.weight_dims()?;
    let mut tensors: Vec<Vec<f64>> = dims.iter().map(|_| Vec::new()).collect();
    for e in &m.tensors {
        let want = dims.get(e.layer).ok_or_else(|| bad(format!("tensor for missing layer {}", e.layer)))?;
        if *want != e.shape || e.len != e.shape.iter().product::<usize>() {
            return Err(bad(format!("layer {} tensor shape {:?} does not match {:?}", e.layer, e.shape, want)));
        }
        let end = e.offset + 4 * e.len;
        if end > bytes.len() {
            return Err(Error::Truncated { path: blob.clone(), expected: end, actual: bytes.len() });
        }
        tensors[e.layer] = bytes[e.offset..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
    }
    let meta = WeightMeta { scale: m.calibration, input_rate: m.input_rate, init_seed: m.seed, stages: m.stages };
    let store = WeightStore { arch, tensors, meta };
    store.validate()?;
    Ok(store)
}

/// Loads weights and checks they belong to `arch`.
pub fn load_weights_for(manifest_path: &Path, arch: &Architecture) -> Result<WeightStore> {
    let store = load_weights(manifest_path)?;
    if store.arch != *arch {
        return Err(Error::Incompatible { expected: arch.fingerprint(), found: store.arch.fingerprint() });
    }
    Ok(store)
}
