use std::collections::HashMap;

use super::{decide_by_losses, Comparison, ParamVector};
use crate::error::{BboxError, Result};

/// Turns data into one choice integer per step.
///
/// Implementations may look at anything they like (datasets, user votes,
/// objective values) but must be deterministic for identical inputs and
/// memo state, and only the returned integer leaves the oracle.
pub trait ComparisonOracle {
    /// `step` is 1-based.
    fn compare(&mut self, step: usize, comparison: &Comparison) -> Result<u32>;
}

/// Oracle over a plain objective function (lower is better), memoized by
/// candidate key.
pub struct ObjectiveOracle<F> {
    objective: F,
    memo: HashMap<u64, f64>,
    evaluations: usize,
}

impl<F> ObjectiveOracle<F>
where
    F: FnMut(&ParamVector) -> f64,
{
    pub fn new(objective: F) -> Self {
        Self {
            objective,
            memo: HashMap::new(),
            evaluations: 0,
        }
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }
}

impl<F> ComparisonOracle for ObjectiveOracle<F>
where
    F: FnMut(&ParamVector) -> f64,
{
    fn compare(&mut self, _step: usize, comparison: &Comparison) -> Result<u32> {
        let memo = &mut self.memo;
        let objective = &mut self.objective;
        let evaluations = &mut self.evaluations;
        Ok(decide_by_losses(comparison, |c| {
            *memo.entry(c.key).or_insert_with(|| {
                *evaluations += 1;
                objective(&c.x)
            })
        }))
    }
}

/// Replays a fixed choice sequence, ignoring the candidates entirely.
#[derive(Debug, Clone)]
pub struct ScriptedOracle {
    choices: Vec<u32>,
}

impl ScriptedOracle {
    pub fn new(choices: Vec<u32>) -> Self {
        Self { choices }
    }
}

impl ComparisonOracle for ScriptedOracle {
    fn compare(&mut self, step: usize, _comparison: &Comparison) -> Result<u32> {
        self.choices.get(step - 1).copied().ok_or(BboxError::TruncatedTrace {
            records: self.choices.len(),
            budget: step,
        })
    }
}
