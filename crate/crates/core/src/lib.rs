//! Comparison-based retrofitting of trained models with a bounded
//! information channel to the data.
//!
//! Optimizers never see losses: each step is reduced to a choice among
//! `k` outcomes, and the run is fully determined by the seed plus the
//! recorded choices. That record ([`trace::Trace`]) is both the audit log and
//! the quantity the overfitting bounds in [`bounds`] are stated in.

pub mod bounds;
pub mod error;
pub mod objectives;
pub mod optimizers;
pub mod retrofit;
pub mod rng;
pub mod robustness;
pub mod trace;

pub use error::{BboxError, Result};
pub use optimizers::{build_optimizer, AlgorithmId, AlgorithmSpec, Optimizer};
pub use trace::{
    decide_by_losses, deserialize_trace, replay, run_bboxer, serialize_trace, Candidate, ChoiceRecord, Comparison,
    ComparisonOracle, ParamVector, Trace,
};
