//! Retrofitting toy classifiers through multiplicative tensor modifiers.

mod dataset;
mod model;
mod modifier;
mod oracle;
mod pipeline;

pub use dataset::{ClusterConfig, LabeledDataset};
pub use model::{make_toy_model, Matrix, ModelDims, ModelKind, TensorModel};
pub use modifier::{modified, ModifierKind, ModifierSpec, DEFAULT_CONSTANT};
pub use oracle::{
    candidate_loss, majority_choice, thread_cap, worst_case_tally, Adversary, PreferenceOracle, RetrofitOracle,
    VoteRecord,
};
pub use pipeline::{retrofit, RetrofitOutcome};
