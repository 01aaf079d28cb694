use std::path::PathBuf;

use anyhow::Result;
use bboxer::bounds::{bound_report, reference_budget_specs, BranchingProfile, DeviationSpec};
use bboxer::optimizers::output_bits_bound;
use clap::{ArgGroup, Args, ValueEnum};

use crate::args::parse_algo;
use crate::output::{csv, emit, num};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    /// The five s=8000, delta=1/2 budget examples.
    #[value(alias = "paper-e7")]
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["preset", "s"])))]
pub struct BoundsArgs {
    #[arg(long, value_enum, conflicts_with_all = ["s", "eps"])]
    pub preset: Option<Preset>,
    /// Dataset sizes.
    #[arg(long, value_delimiter = ',', requires = "eps")]
    pub s: Vec<u64>,
    /// Deviation tolerances.
    #[arg(long, value_delimiter = ',', requires = "s")]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    /// Loss standard deviation; switches from Hoeffding to Bennett.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Count reachable states as k^steps.
    #[arg(long, requires = "steps", conflicts_with = "algo")]
    pub k: Option<u32>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Count reachable states with this algorithm's bound at --steps and --dim.
    #[arg(long, value_parser = parse_algo, requires = "steps")]
    pub algo: Option<bboxer::AlgorithmId>,
    #[arg(long, default_value_t = 10)]
    pub dim: usize,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn table(format: Format, header: &[&str], rows: &[Vec<String>]) -> String {
    if format == Format::Csv {
        return csv(header, rows);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].len())
                .chain([header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

fn preset(args: &BoundsArgs) -> Result<String> {
    let rows: Vec<Vec<String>> = reference_budget_specs()
        .iter()
        .map(|(spec, expected)| {
            let b = spec.max_budget()?;
            Ok(vec![
                spec.s.to_string(),
                spec.epsilon.to_string(),
                spec.sigma.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
                spec.delta.to_string(),
                if spec.sigma.is_some() { "bennett" } else { "hoeffding" }.to_string(),
                format!("{:.4}", b.raw),
                b.budget.to_string(),
                expected.to_string(),
            ])
        })
        .collect::<Result<_>>()?;
    Ok(table(
        args.format,
        &[
            "s",
            "eps",
            "sigma",
            "delta",
            "inequality",
            "raw",
            "max_budget",
            "expected",
        ],
        &rows,
    ))
}

fn grid(args: &BoundsArgs) -> Result<String> {
    let profile = match (args.k, args.algo, args.steps) {
        (Some(k), _, Some(steps)) => Some(BranchingProfile::uniform(k, steps)),
        (None, Some(id), Some(steps)) => {
            let bits = output_bits_bound(&bboxer::AlgorithmSpec::new(id), steps, args.dim)?;
            Some(BranchingProfile::from_log2(bits, steps))
        }
        _ => None,
    };
    let mut rows = Vec::new();
    for &s in &args.s {
        for &epsilon in &args.eps {
            let spec = DeviationSpec {
                s,
                epsilon,
                delta: args.delta,
                sigma: args.sigma,
            };
            let flags = spec.validate()?;
            let budget = spec.max_budget()?;
            let risk = match &profile {
                Some(p) => {
                    let r = bound_report(&spec, p)?;
                    vec![num(r.state_count_log2), num(r.overfit_risk), r.vacuous.to_string()]
                }
                None => vec![String::new(); 3],
            };
            let mut row = vec![
                s.to_string(),
                num(epsilon),
                num(args.delta),
                args.sigma.map(num).unwrap_or_default(),
                num(spec.delta_one()?),
                if budget.feasible {
                    budget.budget.to_string()
                } else {
                    "infeasible".into()
                },
            ];
            row.extend(risk);
            row.push(flags.join("; "));
            rows.push(row);
        }
    }
    Ok(table(
        args.format,
        &[
            "s",
            "eps",
            "delta",
            "sigma",
            "delta_one",
            "max_budget",
            "log2_states",
            "risk",
            "vacuous",
            "flags",
        ],
        &rows,
    ))
}

pub fn run(args: &BoundsArgs) -> Result<()> {
    let text = match args.preset {
        Some(Preset::Reference) => preset(args)?,
        None => grid(args)?,
    };
    emit(&text, args.out.as_deref())
}
