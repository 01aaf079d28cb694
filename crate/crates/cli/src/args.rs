use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use bboxer::retrofit::{
    make_toy_model, ClusterConfig, LabeledDataset, ModelDims, ModelKind, ModifierKind, ModifierSpec, TensorModel,
    DEFAULT_CONSTANT,
};
use bboxer::rng::derive_seed;
use bboxer::trace::AlgorithmConfig;
use bboxer::{AlgorithmId, AlgorithmSpec};
use clap::Args;

pub fn parse_algo(s: &str) -> Result<AlgorithmId, String> {
    s.parse().map_err(|e: bboxer::BboxError| e.to_string())
}

fn parse_with<T: std::str::FromStr<Err = bboxer::BboxError>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: bboxer::BboxError| e.to_string())
}

pub fn parse_model(s: &str) -> Result<ModelKind, String> {
    parse_with(s)
}

pub fn parse_modifier(s: &str) -> Result<ModifierKind, String> {
    parse_with(s)
}

#[derive(Debug, Args)]
pub struct AlgoArgs {
    /// Algorithm id.
    #[arg(long, value_parser = parse_algo)]
    pub algo: AlgorithmId,
    /// Algorithm settings as a JSON object, e.g. '{"sigma": 0.5}'.
    #[arg(long)]
    pub config: Option<String>,
}

impl AlgoArgs {
    pub fn spec(&self) -> Result<AlgorithmSpec> {
        let config: AlgorithmConfig = match &self.config {
            Some(text) => serde_json::from_str(text).context("--config must be a JSON object")?,
            None => AlgorithmConfig::new(),
        };
        Ok(AlgorithmSpec::with_config(self.algo, config)?)
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Training data CSV (columns f0..f{d-1},label). Generated when absent.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Held-out data CSV. Generated when absent and --train is not given.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub clusters: usize,
    #[arg(long, default_value_t = 4)]
    pub features: usize,
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u64).range(1..))]
    pub size: u64,
    #[arg(long, default_value_t = 1.0)]
    pub spread: f64,
    #[arg(long, default_value_t = 2.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 7)]
    pub data_seed: u64,
}

impl DataArgs {
    pub fn cluster_config(&self, seed: u64) -> ClusterConfig {
        ClusterConfig {
            clusters: self.clusters,
            dim: self.features,
            size: self.size as usize,
            spread: self.spread,
            separation: self.separation,
            seed,
        }
    }

    pub fn train(&self) -> Result<LabeledDataset> {
        match &self.train {
            Some(path) => LabeledDataset::load(path).with_context(|| format!("reading {}", path.display())),
            None => Ok(self.cluster_config(self.data_seed).generate()?),
        }
    }

    pub fn test(&self) -> Result<Option<LabeledDataset>> {
        match (&self.test, &self.train) {
            (Some(path), _) => Ok(Some(
                LabeledDataset::load(path).with_context(|| format!("reading {}", path.display()))?,
            )),
            (None, Some(_)) => Ok(None),
            (None, None) => Ok(Some(
                self.cluster_config(derive_seed(self.data_seed, "test")).generate()?,
            )),
        }
    }
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Toy model architecture.
    #[arg(long, default_value = "linear-softmax", value_parser = parse_model)]
    pub model: ModelKind,
    /// Load the initial model from a JSON snapshot instead.
    #[arg(long)]
    pub model_file: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0)]
    pub model_seed: u64,
    #[arg(long, default_value = "full", value_parser = parse_modifier)]
    pub modifier: ModifierKind,
    /// Comma-separated tensor names. Defaults to every weight matrix.
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_CONSTANT)]
    pub constant: f64,
}

impl ModelArgs {
    pub fn model(&self, data: &LabeledDataset) -> Result<TensorModel> {
        if let Some(path) = &self.model_file {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return Ok(TensorModel::from_json(&text)?);
        }
        let dims = ModelDims {
            features: data.dim(),
            hidden: self.hidden,
            classes: data.num_classes(),
        };
        Ok(make_toy_model(self.model, dims, self.model_seed)?)
    }

    pub fn modifier(&self, model: &TensorModel) -> Result<ModifierSpec> {
        let targets: Vec<String> = if self.targets.is_empty() {
            match model.kind {
                ModelKind::LinearSoftmax => vec!["weight".into()],
                ModelKind::Mlp2 => vec!["layer0".into(), "layer1".into()],
            }
        } else {
            self.targets.clone()
        };
        if !(self.constant.is_finite() && self.constant > 0.0) {
            bail!("--constant must be positive");
        }
        let names: Vec<&str> = targets.iter().map(String::as_str).collect();
        let spec = ModifierSpec::new(self.modifier, &names).with_constant(self.constant);
        spec.dimension(model)?;
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
pub struct SeedRange(pub Vec<u64>);

/// `a..b` (exclusive) or `a..=b`.
pub fn parse_seed_range(s: &str) -> Result<SeedRange, String> {
    let bad = || format!("expected a seed range like 0..5 or 0..=4, got `{s}`");
    let (a, b, inclusive) = if let Some((a, b)) = s.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = s.split_once("..") {
        (a, b, false)
    } else {
        return Err(bad());
    };
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().parse().map_err(|_| bad())?;
    let seeds: Vec<u64> = if inclusive { (a..=b).collect() } else { (a..b).collect() };
    if seeds.is_empty() {
        return Err(format!("seed range `{s}` is empty"));
    }
    Ok(SeedRange(seeds))
}
