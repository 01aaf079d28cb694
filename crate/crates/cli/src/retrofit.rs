use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use bboxer::bounds::{max_budget_bennett, max_budget_hoeffding};
use bboxer::retrofit::retrofit;
use bboxer::ParamVector;
use clap::Args;
use serde::Serialize;

use crate::args::{AlgoArgs, DataArgs, ModelArgs};
use crate::output::{csv, num, with_suffix, write, write_json, write_run};

#[derive(Debug, Args)]
pub struct RetrofitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub algo: AlgoArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..), required_unless_present = "budget_from_bounds")]
    pub budget: Option<u64>,
    /// Largest budget whose overfitting risk stays within --delta at --eps.
    #[arg(long, conflicts_with = "budget", requires = "eps")]
    pub budget_from_bounds: bool,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    /// Use the Bennett form with this loss standard deviation.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the training (and generated test) data as CSV.
    #[arg(long)]
    pub save_data: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Summary {
    algorithm_id: String,
    seed: u64,
    budget: usize,
    modifier_dimension: usize,
    train_size: usize,
    bits: f64,
    initial_train_loss: f64,
    final_train_loss: f64,
    initial_test_loss: Option<f64>,
    final_test_loss: Option<f64>,
    generalization_gap: Option<f64>,
}

pub fn run(args: &RetrofitArgs) -> Result<()> {
    let spec = args.algo.spec()?;
    let train = args.data.train()?;
    let test = args.data.test()?;
    let m0 = args.model.model(&train)?;
    let modifier = args.model.modifier(&m0)?;
    if m0.input_dim() != train.dim() {
        bail!("model expects {} features, data has {}", m0.input_dim(), train.dim());
    }
    let budget = match args.budget {
        Some(b) => b as usize,
        None => {
            let eps = args.eps.context("--budget-from-bounds needs --eps")?;
            let s = train.len() as u64;
            let bound = match args.sigma {
                Some(sigma) => max_budget_bennett(s, eps, sigma, args.delta)?,
                None => max_budget_hoeffding(s, eps, args.delta)?,
            };
            if bound.budget == 0 {
                bail!(
                    "no positive budget keeps the risk within delta={} at eps={eps} with s={s}",
                    args.delta
                );
            }
            bound.budget as usize
        }
    };
    let outcome = retrofit(&m0, &modifier, &spec, &train, budget, args.seed)?;
    let dimension = outcome.run.final_x.dim();
    write_run(
        &args.out,
        &outcome.run.trace,
        &ParamVector::zeros(dimension),
        &outcome.run.final_x,
    )?;
    write(&with_suffix(&args.out, ".model.json"), outcome.model.to_json()? + "\n")?;
    let rows: Vec<Vec<String>> = outcome
        .best_so_far
        .iter()
        .enumerate()
        .map(|(i, v)| vec![(i + 1).to_string(), num(*v)])
        .collect();
    write(
        &with_suffix(&args.out, ".summary.csv"),
        csv(&["step", "best_train_loss"], &rows),
    )?;
    if args.save_data {
        train.save(&with_suffix(&args.out, ".train.csv"))?;
        if let Some(t) = &test {
            t.save(&with_suffix(&args.out, ".test.csv"))?;
        }
    }
    let final_train = outcome.model.empirical_loss(&train);
    let final_test = test.as_ref().map(|t| outcome.model.empirical_loss(t));
    let summary = Summary {
        algorithm_id: spec.id.to_string(),
        seed: args.seed,
        budget,
        modifier_dimension: dimension,
        train_size: train.len(),
        bits: outcome.run.trace.bits,
        initial_train_loss: outcome.initial_loss,
        final_train_loss: final_train,
        initial_test_loss: test.as_ref().map(|t| m0.empirical_loss(t)),
        final_test_loss: final_test,
        generalization_gap: final_test.map(|t| (t - final_train).abs()),
    };
    write_json(&with_suffix(&args.out, ".summary.json"), &summary)?;
    println!(
        "{} budget={budget} train {} -> {}{}",
        spec.id,
        summary.initial_train_loss,
        final_train,
        final_test.map(|t| format!(" test {t}")).unwrap_or_default()
    );
    Ok(())
}
