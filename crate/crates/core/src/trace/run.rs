use super::{records_bits, ChoiceRecord, ComparisonOracle, ParamVector, Trace, TRACE_SCHEMA_VERSION};
use crate::error::{BboxError, Result};
use crate::optimizers::{build_optimizer, AlgorithmSpec, Optimizer};
use crate::rng::RNG_ID;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_x: ParamVector,
    pub trace: Trace,
}

/// Runs the retrofitting loop: `budget` rounds of ask, compare, tell, then
/// recommend.
pub fn run_bboxer(
    spec: &AlgorithmSpec,
    initial: &ParamVector,
    oracle: &mut dyn ComparisonOracle,
    budget: usize,
    seed: u64,
) -> Result<RunOutput> {
    run_bboxer_observed(spec, initial, oracle, budget, seed, &mut |_, _| {})
}

/// Like [`run_bboxer`], calling `observer(step, optimizer)` after every
/// `tell`. The observer sees the optimizer read-only and cannot feed
/// anything back into the run.
pub fn run_bboxer_observed(
    spec: &AlgorithmSpec,
    initial: &ParamVector,
    oracle: &mut dyn ComparisonOracle,
    budget: usize,
    seed: u64,
    observer: &mut dyn FnMut(usize, &dyn Optimizer),
) -> Result<RunOutput> {
    if budget == 0 {
        return Err(BboxError::ZeroBudget);
    }
    let mut opt = build_optimizer(spec, initial, budget, seed)?;
    let mut records = Vec::with_capacity(budget);
    for step in 1..=budget {
        opt.ask().map_err(|e| match e {
            BboxError::NonFinite { .. } => BboxError::NonFinite { step },
            other => other,
        })?;
        let comparison = opt.comparison()?;
        let k = comparison.num_cases();
        let choice = oracle.compare(step, &comparison)?;
        if choice == 0 || choice > k {
            return Err(BboxError::ChoiceOutOfRange { step, choice, k });
        }
        opt.tell(choice)?;
        records.push(ChoiceRecord { k, choice });
        observer(step, opt.as_ref());
    }
    let final_x = opt.recommend()?;
    let trace = Trace {
        schema_version: TRACE_SCHEMA_VERSION,
        seed,
        algorithm_id: spec.id.as_str().to_string(),
        algorithm_config: spec.config.clone(),
        budget,
        rng_id: RNG_ID.to_string(),
        bits: records_bits(&records),
        records,
        recommendation_index: opt.recommendation_index(),
    };
    Ok(RunOutput { final_x, trace })
}

/// Rebuilds the final point from the trace alone.
pub fn replay(trace: &Trace, initial: &ParamVector) -> Result<ParamVector> {
    if !trace.is_complete() {
        return Err(BboxError::TruncatedTrace {
            records: trace.records.len(),
            budget: trace.budget,
        });
    }
    if trace.rng_id != RNG_ID {
        return Err(BboxError::Validation(format!(
            "trace uses rng `{}`, this build provides `{RNG_ID}`",
            trace.rng_id
        )));
    }
    let spec = AlgorithmSpec::parse(&trace.algorithm_id, trace.algorithm_config.clone())?;
    let mut opt = build_optimizer(&spec, initial, trace.budget, trace.seed)?;
    for (i, rec) in trace.records.iter().enumerate() {
        let step = i + 1;
        opt.ask()?;
        let k = opt.comparison()?.num_cases();
        if rec.k != k {
            return Err(BboxError::CorruptTrace {
                step,
                reason: format!("recorded k={} but the algorithm reports k={k}", rec.k),
            });
        }
        if rec.choice == 0 || rec.choice > k {
            return Err(BboxError::CorruptTrace {
                step,
                reason: format!("choice {} outside 1..={k}", rec.choice),
            });
        }
        opt.tell(rec.choice)?;
    }
    if opt.recommendation_index() != trace.recommendation_index {
        return Err(BboxError::CorruptTrace {
            step: trace.budget,
            reason: "recommendation index does not match the replayed run".into(),
        });
    }
    opt.recommend()
}

/// Drives an optimizer with an arbitrary choice sequence (no oracle), as
/// used when enumerating every reachable output. Returns the recommendation
/// and the records the optimizer reported along the way.
pub fn replay_choices(
    spec: &AlgorithmSpec,
    initial: &ParamVector,
    budget: usize,
    seed: u64,
    choices: &[u32],
) -> Result<(ParamVector, Vec<ChoiceRecord>)> {
    if budget == 0 {
        return Err(BboxError::ZeroBudget);
    }
    if choices.len() != budget {
        return Err(BboxError::TruncatedTrace {
            records: choices.len(),
            budget,
        });
    }
    let mut opt = build_optimizer(spec, initial, budget, seed)?;
    let mut records = Vec::with_capacity(budget);
    for (i, &choice) in choices.iter().enumerate() {
        opt.ask()?;
        let k = opt.comparison()?.num_cases();
        if choice == 0 || choice > k {
            return Err(BboxError::ChoiceOutOfRange { step: i + 1, choice, k });
        }
        opt.tell(choice)?;
        records.push(ChoiceRecord { k, choice });
    }
    Ok((opt.recommend()?, records))
}
