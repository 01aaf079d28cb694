//! Poisoning, privacy and extraction experiments.
//!
//! Every empirical rate here comes with an exact counterpart: binomial
//! enumeration for single-round vote flips, and a closed form over
//! independent rounds for whole runs.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::factorial::ln_binomial;

use crate::bounds::run_poisoning_bound;
use crate::error::{BboxError, Result};
use crate::optimizers::AlgorithmSpec;
use crate::retrofit::{
    candidate_loss, modified, retrofit, worst_case_tally, Adversary, LabeledDataset, ModifierSpec, PreferenceOracle,
    RetrofitOutcome, TensorModel,
};
use crate::rng::{derive_seed, stream};
use crate::trace::{decide_by_losses, run_bboxer, Candidate, ParamVector};

/// Largest `n` summed with exact integer binomial coefficients.
pub const EXACT_LIMIT: u64 = 64;

const CHUNK: u64 = 4096;

fn check_prob(f0: f64) -> Result<()> {
    if (0.0..=1.0).contains(&f0) {
        Ok(())
    } else {
        Err(BboxError::InvalidArgument(format!("probability {f0} outside [0, 1]")))
    }
}

fn exact_binomial(n: u64, x: u64) -> u128 {
    let mut c: u128 = 1;
    for i in 0..x.min(n - x) as u128 {
        c = c * (n as u128 - i) / (i + 1);
    }
    c
}

/// `P(Bin(n, p) = x)`.
fn binomial_pmf(n: u64, p: f64, x: u64) -> f64 {
    if p == 0.0 || p == 1.0 {
        let certain = if p == 0.0 { 0 } else { n };
        return if x == certain { 1.0 } else { 0.0 };
    }
    if n <= EXACT_LIMIT {
        exact_binomial(n, x) as f64 * p.powi(x as i32) * (1.0 - p).powi((n - x) as i32)
    } else {
        (ln_binomial(n, x) + x as f64 * p.ln() + (n - x) as f64 * (1.0 - p).ln()).exp()
    }
}

/// Sum of `P(Bin(n, p) = x)` over the given counts.
fn binomial_mass(n: u64, p: f64, xs: impl Iterator<Item = u64>) -> f64 {
    if p == 0.5 && n <= EXACT_LIMIT {
        let total: u128 = xs.map(|x| exact_binomial(n, x)).sum();
        return total as f64 / 2f64.powi(n as i32);
    }
    xs.map(|x| binomial_pmf(n, p, x)).sum::<f64>().min(1.0)
}

/// Counts `x` in the closed interval `[n/2 - k, n/2 + k]`.
fn flip_interval(n: u64, k: u64) -> std::ops::RangeInclusive<u64> {
    // 2x >= n - 2k and 2x <= n + 2k
    let lo = (n.saturating_sub(2 * k)).div_ceil(2);
    let hi = ((n + 2 * k) / 2).min(n);
    lo..=hi
}

/// Probability that the vote count lands within `k` of a tie:
/// `P(n/2 - k <= Bin(n, f0) <= n/2 + k)`.
pub fn exact_flip_prob(n: u64, f0: f64, k: u64) -> Result<f64> {
    if n == 0 || k > n {
        return Err(BboxError::InvalidArgument(format!(
            "need n >= 1 and k <= n, got n={n} k={k}"
        )));
    }
    check_prob(f0)?;
    let range = flip_interval(n, k);
    if *range.start() == 0 && *range.end() == n {
        return Ok(1.0);
    }
    Ok(binomial_mass(n, f0, range))
}

/// Probability that `k` worst-case flips change the majority decision.
/// With ties going to the challenger this is `n/2 - k <= count < n/2 + k`,
/// which drops the top end of the [`exact_flip_prob`] interval when `n` is
/// even.
pub fn exact_decision_flip_prob(n: u64, f0: f64, k: u64) -> Result<f64> {
    if n == 0 || k > n {
        return Err(BboxError::InvalidArgument(format!(
            "need n >= 1 and k <= n, got n={n} k={k}"
        )));
    }
    check_prob(f0)?;
    let flips = flip_interval(n, k).filter(|&c| worst_case_tally(n, c, k) != c);
    Ok(binomial_mass(n, f0, flips))
}

/// Binomial standard error of a rate.
pub fn standard_error(rate: f64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    (rate * (1.0 - rate) / trials as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlipReport {
    pub n: u64,
    pub k: u64,
    pub f0: f64,
    pub trials: u64,
    /// Share of rounds where the worst-case adversary changed the majority.
    pub empirical_flip_rate: f64,
    pub se: f64,
    pub exact_flip_prob: f64,
    pub exact_decision_prob: f64,
    pub paper_bound: f64,
    pub corrected_bound: f64,
    pub vacuous: bool,
}

/// Monte-Carlo single-round flip rate against its exact values.
/// Trials are drawn in fixed chunks, each from its own stream, so the result
/// does not depend on the thread count.
pub fn flip_report(n: u64, f0: f64, k: u64, trials: u64, seed: u64) -> Result<FlipReport> {
    let bound = run_poisoning_bound(1, n, k)?;
    let exact_flip = exact_flip_prob(n, f0, k)?;
    let exact_decision = exact_decision_flip_prob(n, f0, k)?;
    let votes = Binomial::new(n, f0).map_err(|e| BboxError::InvalidArgument(e.to_string()))?;
    let chunks = trials.div_ceil(CHUNK);
    let flips: u64 = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, &format!("flip/{i}"));
            let len = CHUNK.min(trials - i * CHUNK);
            (0..len)
                .filter(|_| {
                    let c = votes.sample(&mut rng);
                    worst_case_tally(n, c, k) != c
                })
                .count() as u64
        })
        .sum();
    let rate = if trials == 0 { 0.0 } else { flips as f64 / trials as f64 };
    Ok(FlipReport {
        n,
        k,
        f0,
        trials,
        empirical_flip_rate: rate,
        se: standard_error(rate, trials),
        exact_flip_prob: exact_flip,
        exact_decision_prob: exact_decision,
        paper_bound: bound.stated,
        corrected_bound: bound.corrected,
        vacuous: bound.vacuous,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryKind {
    WorstCase,
    Random,
}

impl FromStr for AdversaryKind {
    type Err = BboxError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "worst-case" => Ok(AdversaryKind::WorstCase),
            "random" => Ok(AdversaryKind::Random),
            _ => Err(BboxError::InvalidArgument(format!(
                "unknown adversary `{s}` (valid: worst-case, random)"
            ))),
        }
    }
}

impl fmt::Display for AdversaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdversaryKind::WorstCase => "worst-case",
            AdversaryKind::Random => "random",
        })
    }
}

/// `k` of the `n` votes in each of `b` rounds may be flipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttackSpec {
    pub n: u64,
    pub k: u64,
    pub b: usize,
    pub adversary: AdversaryKind,
}

impl AttackSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k > self.n {
            return Err(BboxError::InvalidArgument(format!(
                "need n >= 1 and k <= n, got n={} k={}",
                self.n, self.k
            )));
        }
        if self.b == 0 {
            return Err(BboxError::ZeroBudget);
        }
        Ok(())
    }

    fn adversary(&self) -> Adversary {
        match self.adversary {
            AdversaryKind::WorstCase => Adversary::WorstCase { k: self.k },
            AdversaryKind::Random => Adversary::Random { k: self.k },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoisonReport {
    pub trials: u64,
    pub divergent: u64,
    pub rate: f64,
    pub se: f64,
    /// Per-round probability that the adversary changes the decision.
    pub round_flip_prob: Option<f64>,
    /// `1 - (1 - q)^b` for independent rounds.
    pub prediction: Option<f64>,
    /// `b q`.
    pub union_prediction: Option<f64>,
    pub paper_bound: f64,
    pub corrected_bound: f64,
    pub vacuous: bool,
}

/// Runs `algorithm` twice per trial from the origin of a `dim`-dimensional
/// space, once with clean votes and once under `attack`, and counts trials
/// whose final points differ bitwise. Every voter prefers the challenger
/// with probability `f0`. Both runs of a trial share the optimizer seed and
/// the vote streams.
pub fn simulate_poisoned_retrofit(
    algorithm: &AlgorithmSpec,
    dim: usize,
    f0: f64,
    attack: &AttackSpec,
    trials: u64,
    seed: u64,
) -> Result<PoisonReport> {
    attack.validate()?;
    check_prob(f0)?;
    let x0 = ParamVector::zeros(dim);
    let run = |trial: u64| -> Result<bool> {
        let s = derive_seed(seed, &format!("poison/{trial}"));
        let prefer = |_: &Candidate, _: &Candidate| f0;
        let mut clean = PreferenceOracle::new(attack.n, prefer, s)?;
        let mut dirty = PreferenceOracle::new(attack.n, prefer, s)?.with_adversary(attack.adversary());
        let a = run_bboxer(algorithm, &x0, &mut clean, attack.b, s)?;
        let b = run_bboxer(algorithm, &x0, &mut dirty, attack.b, s)?;
        Ok(!a.final_x.bits_eq(&b.final_x))
    };
    let outcomes: Vec<bool> = (0..trials).into_par_iter().map(run).collect::<Result<_>>()?;
    let divergent = outcomes.iter().filter(|&&d| d).count() as u64;
    let rate = if trials == 0 {
        0.0
    } else {
        divergent as f64 / trials as f64
    };
    let bound = run_poisoning_bound(attack.b as u64, attack.n, attack.k)?;
    let q = match attack.adversary {
        AdversaryKind::WorstCase => Some(exact_decision_flip_prob(attack.n, f0, attack.k)?),
        AdversaryKind::Random => None,
    };
    Ok(PoisonReport {
        trials,
        divergent,
        rate,
        se: standard_error(rate, trials),
        round_flip_prob: q,
        prediction: q.map(|q| 1.0 - (1.0 - q).powi(attack.b as i32)),
        union_prediction: q.map(|q| attack.b as f64 * q),
        paper_bound: bound.stated,
        corrected_bound: bound.corrected,
        vacuous: bound.vacuous,
    })
}

/// A retrofitting setup whose data-dependence is under test.
#[derive(Debug, Clone)]
pub struct RunConfig<'a> {
    pub m0: &'a TensorModel,
    pub modifier: &'a ModifierSpec,
    pub algorithm: &'a AlgorithmSpec,
    pub budget: usize,
    pub seed: u64,
}

impl RunConfig<'_> {
    pub fn run(&self, data: &LabeledDataset) -> Result<RetrofitOutcome> {
        retrofit(self.m0, self.modifier, self.algorithm, data, self.budget, self.seed)
    }

    fn candidate_model(&self, x: &ParamVector) -> Result<TensorModel> {
        modified(self.m0, x.as_slice(), self.modifier)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum Invariance {
    Identical,
    /// First step (1-based) whose choice differs.
    Divergent {
        step: usize,
    },
}

/// Runs the same configuration on both datasets and compares the traces and
/// final models.
pub fn privacy_invariance_test(config: &RunConfig, d1: &LabeledDataset, d2: &LabeledDataset) -> Result<Invariance> {
    let a = config.run(d1)?;
    let b = config.run(d2)?;
    if let Some(i) = a
        .run
        .trace
        .records
        .iter()
        .zip(&b.run.trace.records)
        .position(|(r1, r2)| r1 != r2)
    {
        return Ok(Invariance::Divergent { step: i + 1 });
    }
    if !a.model.bits_eq(&b.model) {
        return Err(BboxError::Protocol(
            "identical traces gave different final models".into(),
        ));
    }
    Ok(Invariance::Identical)
}

/// First step of a recorded run whose comparison `data` would decide
/// differently, or `None` when every recorded choice stands.
pub fn predicted_divergence(
    config: &RunConfig,
    clean: &RetrofitOutcome,
    data: &LabeledDataset,
) -> Result<Option<usize>> {
    let mut memo = std::collections::HashMap::new();
    for (i, (cmp, rec)) in clean.comparisons.iter().zip(&clean.run.trace.records).enumerate() {
        let mut err = None;
        let choice = decide_by_losses(cmp, |c| {
            *memo.entry(c.key).or_insert_with(|| {
                candidate_loss(config.m0, config.modifier, data, c.x.as_slice()).unwrap_or_else(|e| {
                    err = Some(e);
                    f64::NAN
                })
            })
        });
        if let Some(e) = err {
            return Err(e);
        }
        if choice != rec.choice {
            return Ok(Some(i + 1));
        }
    }
    Ok(None)
}

/// `d` with its examples shuffled.
pub fn permuted_copy(d: &LabeledDataset, seed: u64) -> Result<LabeledDataset> {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.shuffle(&mut stream(seed, "permute"));
    d.permuted(&order)
}

/// `d` with feature `j` of example `i` moved by `delta`, halved until no
/// evaluated candidate changes its prediction on that example. Returns the
/// dataset and the shift used, or `None` if no shift above `1e-12` works.
pub fn margin_perturbed_copy(
    config: &RunConfig,
    clean: &RetrofitOutcome,
    d: &LabeledDataset,
    i: usize,
    j: usize,
    delta: f64,
) -> Result<Option<(LabeledDataset, f64)>> {
    if i >= d.len() || j >= d.dim() {
        return Err(BboxError::InvalidArgument(format!(
            "example {i} feature {j} out of range"
        )));
    }
    let models = candidate_models(config, clean)?;
    let x = d.features()[i].to_vec();
    let before: Vec<usize> = models.iter().map(|m| m.predict(&x)).collect();
    let mut shift = delta;
    while shift.abs() > 1e-12 {
        let mut moved = x.clone();
        moved[j] += shift;
        if moved[j] != x[j] && models.iter().zip(&before).all(|(m, &p)| m.predict(&moved) == p) {
            let label = d.labels()[i];
            return Ok(Some((d.with_example(i, moved, label)?, shift)));
        }
        shift *= 0.5;
    }
    Ok(None)
}

/// `d` with example `i` relabelled so that every evaluated candidate's
/// error count moves by the same amount (usually zero), which keeps every
/// comparison.
pub fn relabelled_copy(
    config: &RunConfig,
    clean: &RetrofitOutcome,
    d: &LabeledDataset,
    i: usize,
) -> Result<Option<LabeledDataset>> {
    let models = candidate_models(config, clean)?;
    let (x, y) = (&d.features()[i], d.labels()[i]);
    let predictions: Vec<usize> = models.iter().map(|m| m.predict(x)).collect();
    let classes = config.m0.scores(x).len();
    let shift = |p: usize, c: usize| i32::from(p == y) - i32::from(p == c);
    let uniform = |c: &usize| predictions.iter().all(|&p| shift(p, *c) == shift(predictions[0], *c));
    match (0..classes).filter(|&c| c != y).find(uniform) {
        Some(c) => Ok(Some(d.with_example(i, x.clone(), c)?)),
        None => Ok(None),
    }
}

fn candidate_models(config: &RunConfig, clean: &RetrofitOutcome) -> Result<Vec<TensorModel>> {
    let mut models = vec![config.m0.clone()];
    for x in &clean.evaluated {
        models.push(config.candidate_model(x)?);
    }
    Ok(models)
}

/// Pair kinds that keep every comparison outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Permuted,
    Perturbed,
    Relabelled,
}

/// Builds up to `per_kind` comparison-preserving variants of `d` of each
/// kind, using the candidates of the clean run on `d`.
pub fn preserving_pairs(
    config: &RunConfig,
    clean: &RetrofitOutcome,
    d: &LabeledDataset,
    per_kind: usize,
    seed: u64,
) -> Result<Vec<(PairKind, LabeledDataset)>> {
    let mut out = Vec::new();
    for p in 0..per_kind {
        out.push((
            PairKind::Permuted,
            permuted_copy(d, derive_seed(seed, &format!("pair/{p}")))?,
        ));
    }
    let mut rng = stream(seed, "pairs");
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.shuffle(&mut rng);
    let mut perturbed = 0;
    for &i in &order {
        if perturbed == per_kind {
            break;
        }
        let j = rng.random_range(0..d.dim());
        let delta = if rng.random_bool(0.5) { 0.5 } else { -0.5 };
        if let Some((d2, _)) = margin_perturbed_copy(config, clean, d, i, j, delta)? {
            out.push((PairKind::Perturbed, d2));
            perturbed += 1;
        }
    }
    let mut relabelled = 0;
    for &i in &order {
        if relabelled == per_kind {
            break;
        }
        if let Some(d2) = relabelled_copy(config, clean, d, i)? {
            out.push((PairKind::Relabelled, d2));
            relabelled += 1;
        }
    }
    Ok(out)
}

/// A single relabelling that changes some comparison of the clean run,
/// with the step it should diverge at.
pub fn flipping_relabel(
    config: &RunConfig,
    clean: &RetrofitOutcome,
    d: &LabeledDataset,
) -> Result<Option<(LabeledDataset, usize)>> {
    let classes = config.m0.scores(&d.features()[0]).len();
    for i in 0..d.len() {
        for c in (0..classes).filter(|&c| c != d.labels()[i]) {
            let d2 = d.with_example(i, d.features()[i].clone(), c)?;
            if let Some(step) = predicted_divergence(config, clean, &d2)? {
                return Ok(Some((d2, step)));
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractionReport {
    pub datasets: usize,
    pub distinct_outputs: usize,
    /// `(i, j)`: dataset `j` produced the same final model as the earlier
    /// dataset `i`.
    pub collisions: Vec<(usize, usize)>,
    /// An injective output-to-dataset map exists on this family.
    pub vulnerable: bool,
    /// Only one dataset, so injectivity is trivial.
    pub degenerate: bool,
    /// `log2` of the largest branching product over the runs.
    pub log2_outputs: f64,
    /// More datasets than reachable outputs.
    pub guaranteed_collision: bool,
}

/// Retrofits on each dataset with identical settings and checks whether the
/// final models tell the datasets apart.
pub fn extraction_test(config: &RunConfig, datasets: &[LabeledDataset]) -> Result<ExtractionReport> {
    if datasets.is_empty() {
        return Err(BboxError::InvalidArgument("no datasets".into()));
    }
    for (j, dj) in datasets.iter().enumerate() {
        if let Some(i) = datasets[..j].iter().position(|di| di.bits_eq(dj)) {
            return Err(BboxError::InvalidArgument(format!(
                "datasets {i} and {j} are identical"
            )));
        }
    }
    let outcomes: Vec<RetrofitOutcome> = datasets.par_iter().map(|d| config.run(d)).collect::<Result<_>>()?;
    let mut collisions = Vec::new();
    let mut representatives: Vec<usize> = Vec::new();
    for (j, o) in outcomes.iter().enumerate() {
        match representatives.iter().find(|&&i| outcomes[i].model.bits_eq(&o.model)) {
            Some(&i) => collisions.push((i, j)),
            None => representatives.push(j),
        }
    }
    let log2_outputs = outcomes.iter().map(|o| o.run.trace.log2_product()).fold(0.0, f64::max);
    Ok(ExtractionReport {
        datasets: datasets.len(),
        distinct_outputs: representatives.len(),
        vulnerable: collisions.is_empty(),
        collisions,
        degenerate: datasets.len() == 1,
        log2_outputs,
        guaranteed_collision: (datasets.len() as f64).log2() > log2_outputs,
    })
}
