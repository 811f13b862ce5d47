//! JSON/CSV emitters and run records.

use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{io_err, Error, Result};

pub fn to_json<T: Serialize>(value: &T, path: &Path) -> Result<String> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(|source| Error::Json { path: path.into(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value, path)?).map_err(io_err(path))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.into(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let csv_err = |source| Error::Csv { path: path.into(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<std::result::Result<Vec<T>, _>>().map_err(csv_err)
}

/// SHA-256 (hex) of the compact JSON form of `config`, leaving out the
/// output directory so reruns elsewhere hash the same.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let mut value = serde_json::to_value(config).expect("configuration serialises");
    if let Some(obj) = value.as_object_mut() {
        obj.remove("out");
    }
    let bytes = serde_json::to_vec(&value).expect("configuration serialises");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
struct Metrics<'a, R: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config_hash: String,
    results: &'a R,
}

#[derive(Debug, Serialize)]
struct Timing {
    wall_seconds: f64,
}

/// Writes `config.json`, `metrics.json` and, separately, `timing.json`, so
/// that `metrics.json` is identical across reruns of the same config.
pub fn write_run<C: Serialize, R: Serialize>(
    out: &Path,
    command: &str,
    seed: u64,
    config: &C,
    results: &R,
    wall: Duration,
) -> Result<()> {
    write_json(&out.join("config.json"), config)?;
    let metrics = Metrics {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config_hash: config_hash(config),
        results,
    };
    write_json(&out.join("metrics.json"), &metrics)?;
    write_json(&out.join("timing.json"), &Timing { wall_seconds: wall.as_secs_f64() })
}
