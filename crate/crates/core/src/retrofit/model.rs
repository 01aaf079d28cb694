use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dataset::LabeledDataset;
use crate::error::{BboxError, Result};
use crate::rng::stream;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(BboxError::Dimension(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self * v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn bits_eq(&self, other: &Matrix) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    LinearSoftmax,
    Mlp2,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::LinearSoftmax => "linear-softmax",
            ModelKind::Mlp2 => "mlp2",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = BboxError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear-softmax" => Ok(ModelKind::LinearSoftmax),
            "mlp2" => Ok(ModelKind::Mlp2),
            _ => Err(BboxError::InvalidArgument(format!(
                "unknown model `{s}` (valid: linear-softmax, mlp2)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub features: usize,
    pub hidden: usize,
    pub classes: usize,
}

/// A small classifier made of named tensors.
///
/// `linear-softmax`: scores `weight * x + bias`, with `weight` classes x
/// features and `bias` 1 x classes.
/// `mlp2`: `h = tanh(layer0 * x) .* norm0`, scores `layer1 * h`; `layer0` is
/// hidden x features, `layer1` classes x hidden, `norm0` 1 x hidden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorModel {
    pub kind: ModelKind,
    pub tensors: BTreeMap<String, Matrix>,
}

/// Deterministic toy model. Linear weights start positive (uniform in
/// [0.1, 1]) so that multiplicative updates can reorder class scores.
pub fn make_toy_model(kind: ModelKind, dims: ModelDims, seed: u64) -> Result<TensorModel> {
    if dims.features == 0 || dims.classes == 0 || (kind == ModelKind::Mlp2 && dims.hidden == 0) {
        return Err(BboxError::InvalidArgument(format!(
            "model dimensions must be positive: {dims:?}"
        )));
    }
    let mut rng = stream(seed, &format!("model/{kind}"));
    let mut tensors = BTreeMap::new();
    match kind {
        ModelKind::LinearSoftmax => {
            let w = Matrix::from_fn(dims.classes, dims.features, |_, _| rng.random_range(0.1..1.0));
            tensors.insert("weight".to_string(), w);
            tensors.insert("bias".to_string(), Matrix::filled(1, dims.classes, 0.0));
        }
        ModelKind::Mlp2 => {
            let s0 = 1.0 / (dims.features as f64).sqrt();
            let s1 = 1.0 / (dims.hidden as f64).sqrt();
            let l0 = Matrix::from_fn(dims.hidden, dims.features, |_, _| rng.random_range(-s0..s0));
            let l1 = Matrix::from_fn(dims.classes, dims.hidden, |_, _| rng.random_range(-s1..s1));
            tensors.insert("layer0".to_string(), l0);
            tensors.insert("layer1".to_string(), l1);
            tensors.insert("norm0".to_string(), Matrix::filled(1, dims.hidden, 1.0));
        }
    }
    Ok(TensorModel { kind, tensors })
}

impl TensorModel {
    pub fn tensor(&self, name: &str) -> Result<&Matrix> {
        self.tensors
            .get(name)
            .ok_or_else(|| BboxError::Dimension(format!("model has no tensor `{name}`")))
    }

    pub fn input_dim(&self) -> usize {
        match self.kind {
            ModelKind::LinearSoftmax => self.tensors["weight"].cols,
            ModelKind::Mlp2 => self.tensors["layer0"].cols,
        }
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        match self.kind {
            ModelKind::LinearSoftmax => {
                let bias = &self.tensors["bias"].data;
                let mut s = self.tensors["weight"].mul_vec(x);
                for (v, b) in s.iter_mut().zip(bias) {
                    *v += b;
                }
                s
            }
            ModelKind::Mlp2 => {
                let norm = &self.tensors["norm0"].data;
                let h: Vec<f64> = self.tensors["layer0"]
                    .mul_vec(x)
                    .into_iter()
                    .zip(norm)
                    .map(|(a, g)| a.tanh() * g)
                    .collect();
                self.tensors["layer1"].mul_vec(&h)
            }
        }
    }

    /// Arg-max class; the lowest index wins ties.
    pub fn predict(&self, x: &[f64]) -> usize {
        let s = self.scores(x);
        let mut best = 0;
        for (i, v) in s.iter().enumerate() {
            if *v > s[best] {
                best = i;
            }
        }
        best
    }

    /// Mean 0/1 misclassification.
    pub fn empirical_loss(&self, data: &LabeledDataset) -> f64 {
        let wrong = data.examples().filter(|(x, y)| self.predict(x) != *y).count();
        wrong as f64 / data.len() as f64
    }

    pub fn bits_eq(&self, other: &TensorModel) -> bool {
        self.kind == other.kind
            && self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|((n1, a), (n2, b))| n1 == n2 && a.bits_eq(b))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> ModelDims {
        ModelDims {
            features: 4,
            hidden: 6,
            classes: 3,
        }
    }

    #[test]
    fn construction_is_deterministic() {
        for kind in [ModelKind::LinearSoftmax, ModelKind::Mlp2] {
            let a = make_toy_model(kind, dims(), 5).unwrap();
            let b = make_toy_model(kind, dims(), 5).unwrap();
            assert!(a.bits_eq(&b));
            assert!(!a.bits_eq(&make_toy_model(kind, dims(), 6).unwrap()));
        }
    }

    #[test]
    fn tensor_shapes() {
        let m = make_toy_model(ModelKind::Mlp2, dims(), 0).unwrap();
        assert_eq!((m.tensors["layer0"].rows, m.tensors["layer0"].cols), (6, 4));
        assert_eq!((m.tensors["layer1"].rows, m.tensors["layer1"].cols), (3, 6));
        assert_eq!((m.tensors["norm0"].rows, m.tensors["norm0"].cols), (1, 6));
        assert_eq!(m.scores(&[0.0; 4]).len(), 3);
    }

    #[test]
    fn zero_dims_are_rejected() {
        let bad = ModelDims { features: 0, ..dims() };
        assert!(make_toy_model(ModelKind::LinearSoftmax, bad, 0).is_err());
    }

    #[test]
    fn ties_predict_lowest_index() {
        let mut m = make_toy_model(ModelKind::LinearSoftmax, dims(), 0).unwrap();
        m.tensors.insert("weight".into(), Matrix::filled(3, 4, 1.0));
        assert_eq!(m.predict(&[1.0, 2.0, 3.0, 4.0]), 0);
    }

    #[test]
    fn snapshot_round_trip() {
        let m = make_toy_model(ModelKind::Mlp2, dims(), 3).unwrap();
        let back = TensorModel::from_json(&m.to_json().unwrap()).unwrap();
        assert!(m.bits_eq(&back));
    }
}
