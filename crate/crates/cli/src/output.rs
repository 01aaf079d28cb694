use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bboxer::{serialize_trace, ParamVector, Trace};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// What `replay` checks a trace against.
#[derive(Debug, Serialize, Deserialize)]
pub struct FinalRecord {
    pub algorithm_id: String,
    pub seed: u64,
    pub initial: Vec<f64>,
    pub final_x: Vec<f64>,
    pub sha256: String,
}

pub fn digest(x: &ParamVector) -> String {
    Sha256::digest(x.to_le_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write(path, bytes)
}

/// Writes `<prefix>.trace.json` and `<prefix>.final.json`.
pub fn write_run(prefix: &Path, trace: &Trace, initial: &ParamVector, final_x: &ParamVector) -> Result<()> {
    write(&with_suffix(prefix, ".trace.json"), serialize_trace(trace)?)?;
    let record = FinalRecord {
        algorithm_id: trace.algorithm_id.clone(),
        seed: trace.seed,
        initial: initial.as_slice().to_vec(),
        final_x: final_x.as_slice().to_vec(),
        sha256: digest(final_x),
    };
    write_json(&with_suffix(prefix, ".final.json"), &record)
}

pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let records = std::iter::once(header.iter().map(|h| h.to_string()).collect()).chain(rows.iter().cloned());
    for record in records {
        w.write_record(&record).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("fields are UTF-8")
}

/// Prints to stdout, or writes to `out` when given.
pub fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
