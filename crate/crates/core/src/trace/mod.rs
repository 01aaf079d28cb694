//! The ask/tell/compare contract, the compression trace, and data-free replay.
//!
//! A run of [`run_bboxer`] alternates `ask` (a candidate point), `compare`
//! (an oracle turns data into one integer in `1..=k`) and `tell` (the only
//! call that feeds information back to the optimizer). The sequence of
//! `(k, choice)` pairs is the [`Trace`]; together with the seed, the
//! algorithm and the budget it determines the final point, which is what
//! [`replay`] reconstructs without touching any data.

pub mod combinatorics;
mod compare;
mod oracle;
mod run;

use std::collections::BTreeMap;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{BboxError, Result};

pub(crate) use compare::subset_cases;
pub use compare::{decide_by_losses, Candidate, Comparison};
pub use oracle::{ComparisonOracle, ObjectiveOracle, ScriptedOracle};
pub use run::{replay, replay_choices, run_bboxer, run_bboxer_observed, RunOutput};

pub const TRACE_SCHEMA_VERSION: u32 = 1;
pub const TRACE_EXTENSION: &str = ".trace.json";

/// A search point. Dimension is fixed for a run; entries are always finite.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(BboxError::InvalidArgument(format!("non-finite entry at index {i}")));
        }
        Ok(Self(values))
    }

    /// Returns `None` when any entry is NaN or infinite.
    pub fn checked(values: Vec<f64>) -> Option<Self> {
        values.iter().all(|v| v.is_finite()).then_some(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        assert!(value.is_finite());
        Self(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Bitwise equality, distinguishing `0.0` from `-0.0`.
    pub fn bits_eq(&self, other: &Self) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.0.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl<'de> Deserialize<'de> for ParamVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        ParamVector::new(values).map_err(serde::de::Error::custom)
    }
}

/// One step of the compression trace: `choice` is 1-based in `1..=k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChoiceRecord {
    pub k: u32,
    pub choice: u32,
}

impl ChoiceRecord {
    pub fn new(k: u32, choice: u32) -> Result<Self> {
        let rec = Self { k, choice };
        rec.validate(0)?;
        Ok(rec)
    }

    fn validate(&self, step: usize) -> Result<()> {
        if self.k == 0 || self.choice == 0 || self.choice > self.k {
            return Err(BboxError::ChoiceOutOfRange {
                step,
                choice: self.choice,
                k: self.k,
            });
        }
        Ok(())
    }

    pub fn bits(&self) -> f64 {
        f64::from(self.k).log2()
    }
}

pub type AlgorithmConfig = BTreeMap<String, serde_json::Value>;

/// The compression bottleneck of one run. Field order is the canonical
/// on-disk order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub schema_version: u32,
    pub seed: u64,
    pub algorithm_id: String,
    pub algorithm_config: AlgorithmConfig,
    pub budget: usize,
    pub rng_id: String,
    pub records: Vec<ChoiceRecord>,
    pub recommendation_index: Option<usize>,
    pub bits: f64,
}

impl Trace {
    pub fn is_complete(&self) -> bool {
        self.records.len() == self.budget
    }

    /// `log2` of the product of all recorded branching factors.
    pub fn log2_product(&self) -> f64 {
        trace_bits(self)
    }

    pub fn choices(&self) -> Vec<u32> {
        self.records.iter().map(|r| r.choice).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != TRACE_SCHEMA_VERSION {
            return Err(BboxError::Validation(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        if self.budget == 0 {
            return Err(BboxError::Validation("budget must be positive".into()));
        }
        if self.records.len() > self.budget {
            return Err(BboxError::Validation(format!(
                "{} records exceed budget {}",
                self.records.len(),
                self.budget
            )));
        }
        for (i, r) in self.records.iter().enumerate() {
            r.validate(i + 1).map_err(|e| BboxError::Validation(e.to_string()))?;
        }
        if let Some(idx) = self.recommendation_index {
            if idx == 0 || idx > self.records.len() {
                return Err(BboxError::Validation(format!(
                    "recommendation_index {idx} outside recorded steps"
                )));
            }
        }
        let bits = trace_bits(self);
        if !self.bits.is_finite() || (self.bits - bits).abs() > 1e-9 * bits.max(1.0) {
            return Err(BboxError::Validation(format!(
                "stored bits {} disagree with records ({bits})",
                self.bits
            )));
        }
        Ok(())
    }
}

/// Information budget of a trace: `Σ log2 k_i`.
pub fn trace_bits(trace: &Trace) -> f64 {
    records_bits(&trace.records)
}

pub fn records_bits(records: &[ChoiceRecord]) -> f64 {
    records.iter().map(ChoiceRecord::bits).sum()
}

pub fn serialize_trace(trace: &Trace) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(trace)?;
    out.push(b'\n');
    Ok(out)
}

/// Parses and validates a trace file. Syntax errors report the byte offset.
pub fn deserialize_trace(bytes: &[u8]) -> Result<Trace> {
    let trace: Trace = serde_json::from_slice(bytes).map_err(|e| BboxError::Parse {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    trace.validate()?;
    Ok(trace)
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start = bytes
        .split_inclusive(|&b| b == b'\n')
        .take(line - 1)
        .map(<[u8]>::len)
        .sum::<usize>();
    (line_start + column.saturating_sub(1)).min(bytes.len())
}
