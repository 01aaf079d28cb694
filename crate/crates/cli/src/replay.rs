use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use bboxer::{deserialize_trace, replay, ParamVector};
use clap::Args;

use crate::output::{digest, FinalRecord};

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub trace: PathBuf,
    /// Final-point record; defaults to the trace path with `.final.json`.
    #[arg(long = "final")]
    pub final_record: Option<PathBuf>,
}

pub fn run(args: &ReplayArgs) -> Result<()> {
    let record_path = match &args.final_record {
        Some(p) => p.clone(),
        None => {
            let name = args.trace.to_string_lossy();
            match name.strip_suffix(".trace.json") {
                Some(stem) => PathBuf::from(format!("{stem}.final.json")),
                None => bail!("cannot derive the final record from {name}; pass --final"),
            }
        }
    };
    let bytes = fs::read(&args.trace).with_context(|| format!("reading {}", args.trace.display()))?;
    let trace = deserialize_trace(&bytes).with_context(|| format!("loading {}", args.trace.display()))?;
    let text = fs::read_to_string(&record_path).with_context(|| format!("reading {}", record_path.display()))?;
    let record: FinalRecord =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", record_path.display()))?;
    let initial = ParamVector::new(record.initial.clone())?;
    let x = replay(&trace, &initial).context("replay failed")?;
    let hash = digest(&x);
    if hash != record.sha256 {
        bail!("MISMATCH: replayed {hash}, recorded {}", record.sha256);
    }
    println!(
        "VERIFIED {} steps={} bits={} sha256={hash}",
        trace.algorithm_id, trace.budget, trace.bits
    );
    Ok(())
}
