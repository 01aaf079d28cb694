use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BboxError, Result};
use crate::rng::{standard_normal, stream};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if features.is_empty() {
            return Err(BboxError::InvalidArgument("dataset must not be empty".into()));
        }
        if features.len() != labels.len() {
            return Err(BboxError::Dimension(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let d = features[0].len();
        if let Some(i) = features.iter().position(|f| f.len() != d) {
            return Err(BboxError::Dimension(format!(
                "row {i} has {} features, expected {d}",
                features[i].len()
            )));
        }
        if features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(BboxError::InvalidArgument("features must be finite".into()));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn examples(&self) -> impl Iterator<Item = (&[f64], usize)> {
        self.features.iter().map(Vec::as_slice).zip(self.labels.iter().copied())
    }

    /// Copy with example `i` replaced.
    pub fn with_example(&self, i: usize, features: Vec<f64>, label: usize) -> Result<Self> {
        if i >= self.len() {
            return Err(BboxError::InvalidArgument(format!("example {i} out of range")));
        }
        let mut out = self.clone();
        out.features[i] = features;
        out.labels[i] = label;
        Self::new(out.features, out.labels)
    }

    /// Copy with examples reordered: row `j` of the result is row `order[j]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if order.len() != self.len()
            || order
                .iter()
                .any(|&i| i >= seen.len() || std::mem::replace(&mut seen[i], true))
        {
            return Err(BboxError::InvalidArgument("order is not a permutation".into()));
        }
        Self::new(
            order.iter().map(|&i| self.features[i].clone()).collect(),
            order.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    /// Bitwise equality.
    pub fn bits_eq(&self, other: &Self) -> bool {
        self.labels == other.labels
            && self.features.len() == other.features.len()
            && self
                .features
                .iter()
                .flatten()
                .zip(other.features.iter().flatten())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..self.dim()).map(|j| format!("f{j}")).collect();
        header.push("label".into());
        out.write_record(&header)?;
        for (x, y) in self.examples() {
            let mut row: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
            row.push(y.to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        let header = reader.headers()?.clone();
        let d = header.len().saturating_sub(1);
        let expected: Vec<String> = (0..d).map(|j| format!("f{j}")).chain(["label".to_string()]).collect();
        if header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(BboxError::Validation(format!(
                "dataset header must be f0..f{},label",
                d.saturating_sub(1)
            )));
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let parse_err = |what: &str| BboxError::Validation(format!("row {}: bad {what}", i + 1));
            let x = rec
                .iter()
                .take(d)
                .map(|v| v.trim().parse::<f64>().map_err(|_| parse_err("feature")))
                .collect::<Result<Vec<_>>>()?;
            let y = rec[d].trim().parse::<usize>().map_err(|_| parse_err("label"))?;
            features.push(x);
            labels.push(y);
        }
        Self::new(features, labels)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Gaussian clusters. Class `c` is centred at `separation * e_{c mod d}`,
/// negated for `c` in `d..2d`, and so on alternately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub clusters: usize,
    pub dim: usize,
    pub size: usize,
    pub spread: f64,
    pub separation: f64,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            clusters: 3,
            dim: 4,
            size: 2000,
            spread: 1.0,
            separation: 2.0,
            seed: 7,
        }
    }
}

impl ClusterConfig {
    pub fn center(&self, c: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let sign = if (c / self.dim).is_multiple_of(2) { 1.0 } else { -1.0 };
        v[c % self.dim] = sign * self.separation;
        v
    }

    pub fn generate(&self) -> Result<LabeledDataset> {
        if self.clusters == 0 || self.dim == 0 || self.size == 0 {
            return Err(BboxError::InvalidArgument(format!(
                "cluster config must be positive: {self:?}"
            )));
        }
        let mut rng = stream(self.seed, "dataset");
        let centers: Vec<Vec<f64>> = (0..self.clusters).map(|c| self.center(c)).collect();
        let mut features = Vec::with_capacity(self.size);
        let mut labels = Vec::with_capacity(self.size);
        for _ in 0..self.size {
            let c = rng.random_range(0..self.clusters);
            let x = standard_normal(&mut rng, self.dim)
                .into_iter()
                .zip(&centers[c])
                .map(|(z, m)| m + self.spread * z)
                .collect();
            features.push(x);
            labels.push(c);
        }
        LabeledDataset::new(features, labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let data = ClusterConfig {
            size: 50,
            ..ClusterConfig::default()
        }
        .generate()
        .unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("f0,f1,f2,f3,label\n"));
        assert!(LabeledDataset::read_csv(buf.as_slice()).unwrap().bits_eq(&data));
    }

    #[test]
    fn bad_header_is_rejected() {
        let csv = "a,b,label\n1,2,0\n";
        assert!(LabeledDataset::read_csv(csv.as_bytes()).is_err());
        let csv = "f0,label\n1,x\n";
        assert!(LabeledDataset::read_csv(csv.as_bytes()).is_err());
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = ClusterConfig::default();
        assert!(cfg.generate().unwrap().bits_eq(&cfg.generate().unwrap()));
        let other = ClusterConfig { seed: 8, ..cfg };
        assert!(!cfg.generate().unwrap().bits_eq(&other.generate().unwrap()));
    }

    #[test]
    fn permutation_is_validated() {
        let d = LabeledDataset::new(vec![vec![1.0], vec![2.0]], vec![0, 1]).unwrap();
        assert_eq!(d.permuted(&[1, 0]).unwrap().labels(), &[1, 0]);
        assert!(d.permuted(&[0, 0]).is_err());
    }

    #[test]
    fn centers_alternate_sign() {
        let cfg = ClusterConfig {
            clusters: 4,
            dim: 2,
            ..ClusterConfig::default()
        };
        assert_eq!(cfg.center(1), vec![0.0, 2.0]);
        assert_eq!(cfg.center(2), vec![-2.0, 0.0]);
    }
}
