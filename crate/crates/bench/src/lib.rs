//! Shared fixtures for the criterion benches.

use bboxer::objectives::Objective;
use bboxer::retrofit::{make_toy_model, ClusterConfig, LabeledDataset, ModelDims, ModelKind, TensorModel};
use bboxer::trace::{ObjectiveOracle, RunOutput};
use bboxer::{run_bboxer, AlgorithmSpec, ParamVector};

pub fn sphere_run(spec: &AlgorithmSpec, dim: usize, budget: usize, seed: u64) -> RunOutput {
    let mut oracle = ObjectiveOracle::new(|x: &ParamVector| Objective::Sphere.eval(x.as_slice()));
    run_bboxer(spec, &ParamVector::filled(dim, 1.0), &mut oracle, budget, seed).expect("valid run")
}

/// Generated clusters and a matching model.
pub fn toy_problem(kind: ModelKind, size: usize) -> (TensorModel, LabeledDataset) {
    let data = ClusterConfig {
        size,
        ..ClusterConfig::default()
    }
    .generate()
    .expect("valid config");
    let dims = ModelDims {
        features: data.dim(),
        hidden: 6,
        classes: data.num_classes(),
    };
    (make_toy_model(kind, dims, 0).expect("valid dims"), data)
}
