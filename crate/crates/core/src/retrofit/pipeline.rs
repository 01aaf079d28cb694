use super::dataset::LabeledDataset;
use super::model::TensorModel;
use super::modifier::{modified, ModifierSpec};
use super::oracle::RetrofitOracle;
use crate::error::Result;
use crate::optimizers::AlgorithmSpec;
use crate::trace::{run_bboxer, Comparison, ComparisonOracle, ParamVector, RunOutput};

/// Everything a retrofitting run produced, including what the oracle saw.
#[derive(Debug, Clone)]
pub struct RetrofitOutcome {
    pub run: RunOutput,
    pub model: TensorModel,
    pub initial_loss: f64,
    pub best_so_far: Vec<f64>,
    /// Distinct candidates evaluated, in evaluation order.
    pub evaluated: Vec<ParamVector>,
    /// The comparison asked at each step.
    pub comparisons: Vec<Comparison>,
}

struct Recording<'o, 'a> {
    inner: &'o mut RetrofitOracle<'a>,
    log: Vec<Comparison>,
}

impl ComparisonOracle for Recording<'_, '_> {
    fn compare(&mut self, step: usize, comparison: &Comparison) -> Result<u32> {
        self.log.push(comparison.clone());
        self.inner.compare(step, comparison)
    }
}

/// Retrofits `m0` on `data`, starting from the identity modification.
pub fn retrofit(
    m0: &TensorModel,
    modifier: &ModifierSpec,
    algorithm: &AlgorithmSpec,
    data: &LabeledDataset,
    budget: usize,
    seed: u64,
) -> Result<RetrofitOutcome> {
    let x0 = ParamVector::zeros(modifier.dimension(m0)?);
    let mut oracle = RetrofitOracle::new(m0, modifier, data)?;
    let initial_loss = oracle.initial_loss()?;
    let mut recording = Recording {
        inner: &mut oracle,
        log: Vec::with_capacity(budget),
    };
    let run = run_bboxer(algorithm, &x0, &mut recording, budget, seed)?;
    let comparisons = recording.log;
    let model = modified(m0, run.final_x.as_slice(), modifier)?;
    Ok(RetrofitOutcome {
        run,
        model,
        initial_loss,
        best_so_far: oracle.best_so_far().to_vec(),
        evaluated: oracle.evaluated().to_vec(),
        comparisons,
    })
}
