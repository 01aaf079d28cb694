use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::model::{Matrix, TensorModel};
use crate::error::{BboxError, Result};

pub const DEFAULT_CONSTANT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModifierKind {
    /// `W .* exp(c X)`, one value per entry.
    Full,
    /// `W .* exp(c u v^T)`, `u` of length rows then `v` of length cols.
    LowRank1,
    /// `W .* exp(c 1 v^T)`, one value per column shared by all rows.
    Broadcast,
}

impl ModifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModifierKind::Full => "full",
            ModifierKind::LowRank1 => "lowrank1",
            ModifierKind::Broadcast => "broadcast",
        }
    }

    fn len(self, m: &Matrix) -> usize {
        match self {
            ModifierKind::Full => m.rows * m.cols,
            ModifierKind::LowRank1 => m.rows + m.cols,
            ModifierKind::Broadcast => m.cols,
        }
    }
}

impl fmt::Display for ModifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModifierKind {
    type Err = BboxError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ModifierKind::Full),
            "lowrank1" => Ok(ModifierKind::LowRank1),
            "broadcast" => Ok(ModifierKind::Broadcast),
            _ => Err(BboxError::InvalidArgument(format!(
                "unknown modifier `{s}` (valid: full, lowrank1, broadcast)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModifierSpec {
    pub kind: ModifierKind,
    pub targets: Vec<String>,
    pub constant: f64,
}

impl ModifierSpec {
    pub fn new(kind: ModifierKind, targets: &[&str]) -> Self {
        Self {
            kind,
            targets: targets.iter().map(|t| t.to_string()).collect(),
            constant: DEFAULT_CONSTANT,
        }
    }

    pub fn with_constant(mut self, constant: f64) -> Self {
        self.constant = constant;
        self
    }

    /// Search-space dimension for `model`.
    pub fn dimension(&self, model: &TensorModel) -> Result<usize> {
        if self.targets.is_empty() {
            return Err(BboxError::InvalidArgument("modifier has no target tensors".into()));
        }
        self.targets.iter().map(|t| Ok(self.kind.len(model.tensor(t)?))).sum()
    }
}

fn scale(m: &mut Matrix, kind: ModifierKind, c: f64, x: &[f64]) {
    let (rows, cols) = (m.rows, m.cols);
    for r in 0..rows {
        for j in 0..cols {
            let e = match kind {
                ModifierKind::Full => x[r * cols + j],
                ModifierKind::LowRank1 => x[r] * x[rows + j],
                ModifierKind::Broadcast => x[j],
            };
            m.data[r * cols + j] *= (c * e).exp();
        }
    }
}

/// A copy of `m0` with the targets rescaled by `x`, split across targets
/// in order. `m0` itself is never touched.
pub fn modified(m0: &TensorModel, x: &[f64], spec: &ModifierSpec) -> Result<TensorModel> {
    let mut out = m0.clone();
    let mut offset = 0;
    for name in &spec.targets {
        let tensor = out
            .tensors
            .get_mut(name)
            .ok_or_else(|| BboxError::Dimension(format!("model has no tensor `{name}`")))?;
        let n = spec.kind.len(tensor);
        if offset + n > x.len() {
            return Err(BboxError::Dimension(format!(
                "tensor `{name}` needs {n} values at offset {offset}, x has {}",
                x.len()
            )));
        }
        scale(tensor, spec.kind, spec.constant, &x[offset..offset + n]);
        offset += n;
    }
    if offset != x.len() {
        let last = spec.targets.last().map_or("", String::as_str);
        return Err(BboxError::Dimension(format!(
            "x has {} values but targets end at `{last}` after {offset}",
            x.len()
        )));
    }
    Ok(out)
}
