use std::path::{Path, PathBuf};

use anyhow::Result;
use bboxer::objectives::Objective;
use bboxer::trace::{run_bboxer_observed, ObjectiveOracle};
use bboxer::{AlgorithmSpec, ParamVector};
use clap::Args;
use rayon::prelude::*;

use crate::args::{parse_seed_range, AlgoArgs, SeedRange};
use crate::output::{csv, num, with_suffix, write, write_run};

fn parse_objective(s: &str) -> Result<Objective, String> {
    s.parse().map_err(|e: bboxer::BboxError| e.to_string())
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub algo: AlgoArgs,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub dim: u64,
    /// sphere, rastrigin or ellipsoid-1e4.
    #[arg(long, value_parser = parse_objective)]
    pub objective: Objective,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub budget: u64,
    /// Every coordinate of the starting point.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub x0: f64,
    #[arg(long, default_value_t = 0, conflicts_with = "seeds")]
    pub seed: u64,
    /// Seed range such as 0..5; writes one set of files per seed plus a summary.
    #[arg(long, value_parser = parse_seed_range)]
    pub seeds: Option<SeedRange>,
    /// Output prefix.
    #[arg(long)]
    pub out: PathBuf,
}

struct SeedResult {
    seed: u64,
    final_value: f64,
    bits: f64,
}

fn run_one(args: &OptimizeArgs, spec: &AlgorithmSpec, seed: u64, prefix: &Path) -> Result<SeedResult> {
    let objective = args.objective;
    let initial = ParamVector::filled(args.dim as usize, args.x0);
    let mut oracle = ObjectiveOracle::new(|x: &ParamVector| objective.eval(x.as_slice()));
    let mut rows = Vec::with_capacity(args.budget as usize);
    let out = run_bboxer_observed(
        spec,
        &initial,
        &mut oracle,
        args.budget as usize,
        seed,
        &mut |step, opt| {
            let value = opt
                .recommend()
                .map(|x| num(objective.eval(x.as_slice())))
                .unwrap_or_default();
            rows.push(vec![step.to_string(), value]);
        },
    )?;
    write_run(prefix, &out.trace, &initial, &out.final_x)?;
    write(&with_suffix(prefix, ".csv"), csv(&["step", "incumbent"], &rows))?;
    Ok(SeedResult {
        seed,
        final_value: objective.eval(out.final_x.as_slice()),
        bits: out.trace.bits,
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

pub fn run(args: &OptimizeArgs) -> Result<()> {
    let spec = args.algo.spec()?;
    let Some(SeedRange(seeds)) = &args.seeds else {
        let r = run_one(args, &spec, args.seed, &args.out)?;
        println!("{} seed={} final={} bits={}", spec.id, r.seed, r.final_value, r.bits);
        return Ok(());
    };
    let results: Vec<SeedResult> = seeds
        .par_iter()
        .map(|&seed| run_one(args, &spec, seed, &with_suffix(&args.out, &format!(".seed{seed}"))))
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| vec![r.seed.to_string(), num(r.final_value), num(r.bits)])
        .collect();
    let mut values: Vec<f64> = results.iter().map(|r| r.final_value).collect();
    let med = median(&mut values);
    let mut text = csv(&["seed", "final_value", "bits"], &rows);
    text.push_str(&format!("median,{},\n", num(med)));
    write(&with_suffix(&args.out, ".summary.csv"), text)?;
    println!("{} seeds={} median_final={med}", spec.id, results.len());
    Ok(())
}
