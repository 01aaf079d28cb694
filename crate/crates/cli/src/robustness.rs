use std::path::PathBuf;

use anyhow::Result;
use bboxer::rng::derive_seed;
use bboxer::robustness::{
    extraction_test, flip_report, flipping_relabel, preserving_pairs, privacy_invariance_test,
    simulate_poisoned_retrofit, AdversaryKind, AttackSpec, Invariance, PairKind, RunConfig,
};
use bboxer::{AlgorithmId, AlgorithmSpec};
use clap::{Args, Subcommand};

use crate::args::{parse_algo, AlgoArgs, DataArgs, ModelArgs};
use crate::output::{csv, emit, num, opt};

fn parse_adversary(s: &str) -> Result<AdversaryKind, String> {
    s.parse().map_err(|e: bboxer::BboxError| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum RobustnessCommand {
    /// Divergence of whole runs under per-round vote flipping.
    Poison(PoisonArgs),
    /// Single-round majority flip rate against its exact value and bounds.
    Flip(FlipArgs),
    /// Retrofits on comparison-preserving dataset pairs and checks invariance.
    Privacy(PrivacyArgs),
    /// Checks whether final models tell a family of datasets apart.
    Extract(ExtractArgs),
}

#[derive(Debug, Args)]
pub struct PoisonArgs {
    /// Voters per round.
    #[arg(long)]
    pub n: u64,
    /// Votes the adversary may flip per round.
    #[arg(long)]
    pub k: u64,
    /// Rounds (the run budget).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub b: u64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Probability that a single voter prefers the challenger.
    #[arg(long, default_value_t = 0.5)]
    pub f0: f64,
    #[arg(long, default_value = "worst-case", value_parser = parse_adversary)]
    pub adversary: AdversaryKind,
    #[arg(long, default_value = "onefifth", value_parser = parse_algo)]
    pub algo: AlgorithmId,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FlipArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub k: u64,
    #[arg(long, default_value_t = 0.5)]
    pub f0: f64,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Setup {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub algo: AlgoArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub budget: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PrivacyArgs {
    #[command(flatten)]
    pub setup: Setup,
    /// Pairs to build of each kind.
    #[arg(long, default_value_t = 10)]
    pub per_kind: usize,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub setup: Setup,
    /// Number of distinct generated datasets.
    #[arg(long, default_value_t = 17, value_parser = clap::value_parser!(u64).range(1..))]
    pub datasets: u64,
}

fn poison(a: &PoisonArgs) -> Result<()> {
    let attack = AttackSpec {
        n: a.n,
        k: a.k,
        b: a.b as usize,
        adversary: a.adversary,
    };
    let r = simulate_poisoned_retrofit(&AlgorithmSpec::new(a.algo), a.dim, a.f0, &attack, a.trials, a.seed)?;
    let row = vec![
        a.algo.to_string(),
        a.n.to_string(),
        a.k.to_string(),
        a.b.to_string(),
        num(a.f0),
        a.adversary.to_string(),
        r.trials.to_string(),
        num(r.paper_bound),
        num(r.corrected_bound),
        r.vacuous.to_string(),
        opt(r.round_flip_prob),
        opt(r.prediction),
        opt(r.union_prediction),
        r.divergent.to_string(),
        num(r.rate),
        num(r.se),
    ];
    let header = [
        "algo",
        "n",
        "k",
        "b",
        "f0",
        "adversary",
        "trials",
        "paper_bound",
        "corrected_bound",
        "vacuous",
        "exact_round",
        "exact",
        "union",
        "divergent",
        "empirical",
        "se",
    ];
    emit(&csv(&header, &[row]), a.out.as_deref())
}

fn flip(a: &FlipArgs) -> Result<()> {
    let r = flip_report(a.n, a.f0, a.k, a.trials, a.seed)?;
    let row = vec![
        r.n.to_string(),
        r.k.to_string(),
        num(r.f0),
        r.trials.to_string(),
        num(r.paper_bound),
        num(r.corrected_bound),
        r.vacuous.to_string(),
        num(r.exact_flip_prob),
        num(r.exact_decision_prob),
        num(r.empirical_flip_rate),
        num(r.se),
    ];
    let header = [
        "n",
        "k",
        "f0",
        "trials",
        "paper_bound",
        "corrected_bound",
        "vacuous",
        "exact",
        "exact_decision",
        "empirical",
        "se",
    ];
    emit(&csv(&header, &[row]), a.out.as_deref())
}

fn kind_name(kind: PairKind) -> &'static str {
    match kind {
        PairKind::Permuted => "permuted",
        PairKind::Perturbed => "perturbed",
        PairKind::Relabelled => "relabelled",
    }
}

fn privacy(a: &PrivacyArgs) -> Result<()> {
    let s = &a.setup;
    let spec = s.algo.spec()?;
    let data = s.data.train()?;
    let m0 = s.model.model(&data)?;
    let modifier = s.model.modifier(&m0)?;
    let config = RunConfig {
        m0: &m0,
        modifier: &modifier,
        algorithm: &spec,
        budget: s.budget as usize,
        seed: s.seed,
    };
    let clean = config.run(&data)?;
    let pairs = preserving_pairs(&config, &clean, &data, a.per_kind, derive_seed(s.seed, "privacy"))?;
    let mut rows = Vec::new();
    for (i, (kind, d2)) in pairs.iter().enumerate() {
        let (outcome, step) = match privacy_invariance_test(&config, &data, d2)? {
            Invariance::Identical => ("identical", String::new()),
            Invariance::Divergent { step } => ("divergent", step.to_string()),
        };
        rows.push(vec![
            spec.id.to_string(),
            kind_name(*kind).into(),
            i.to_string(),
            outcome.into(),
            String::new(),
            step,
        ]);
    }
    if let Some((d2, expected)) = flipping_relabel(&config, &clean, &data)? {
        let (outcome, step) = match privacy_invariance_test(&config, &data, &d2)? {
            Invariance::Identical => ("identical", String::new()),
            Invariance::Divergent { step } => ("divergent", step.to_string()),
        };
        rows.push(vec![
            spec.id.to_string(),
            "flipping-relabel".into(),
            pairs.len().to_string(),
            outcome.into(),
            expected.to_string(),
            step,
        ]);
    }
    let header = ["algo", "kind", "index", "outcome", "expected_step", "step"];
    emit(&csv(&header, &rows), s.out.as_deref())
}

fn extract(a: &ExtractArgs) -> Result<()> {
    let s = &a.setup;
    let spec = s.algo.spec()?;
    let datasets = (0..a.datasets)
        .map(|i| {
            let seed = derive_seed(s.data.data_seed, &format!("extract/{i}"));
            Ok(s.data.cluster_config(seed).generate()?)
        })
        .collect::<Result<Vec<_>>>()?;
    let m0 = s.model.model(&datasets[0])?;
    let modifier = s.model.modifier(&m0)?;
    let config = RunConfig {
        m0: &m0,
        modifier: &modifier,
        algorithm: &spec,
        budget: s.budget as usize,
        seed: s.seed,
    };
    let r = extraction_test(&config, &datasets)?;
    let collisions: Vec<String> = r.collisions.iter().map(|(i, j)| format!("{i}-{j}")).collect();
    let row = vec![
        spec.id.to_string(),
        s.budget.to_string(),
        r.datasets.to_string(),
        r.distinct_outputs.to_string(),
        num(r.log2_outputs),
        r.guaranteed_collision.to_string(),
        r.vulnerable.to_string(),
        r.degenerate.to_string(),
        collisions.join(" "),
    ];
    let header = [
        "algo",
        "budget",
        "datasets",
        "distinct_outputs",
        "log2_outputs",
        "guaranteed_collision",
        "vulnerable",
        "degenerate",
        "collisions",
    ];
    emit(&csv(&header, &[row]), s.out.as_deref())
}

pub fn run(cmd: &RobustnessCommand) -> Result<()> {
    match cmd {
        RobustnessCommand::Poison(a) => poison(a),
        RobustnessCommand::Flip(a) => flip(a),
        RobustnessCommand::Privacy(a) => privacy(a),
        RobustnessCommand::Extract(a) => extract(a),
    }
}
