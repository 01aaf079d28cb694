use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use super::dataset::LabeledDataset;
use super::model::TensorModel;
use super::modifier::{modified, ModifierSpec};
use crate::error::{BboxError, Result};
use crate::rng::stream;
use crate::trace::{decide_by_losses, Candidate, Comparison, ComparisonOracle, ParamVector};

/// Evaluation thread cap from `BBOXER_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("BBOXER_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

pub fn candidate_loss(m0: &TensorModel, spec: &ModifierSpec, data: &LabeledDataset, x: &[f64]) -> Result<f64> {
    Ok(modified(m0, x, spec)?.empirical_loss(data))
}

/// Answers comparisons by the empirical loss of the modified model. Each
/// candidate is evaluated once; population comparisons are evaluated in
/// parallel.
pub struct RetrofitOracle<'a> {
    m0: &'a TensorModel,
    spec: &'a ModifierSpec,
    data: &'a LabeledDataset,
    memo: HashMap<u64, f64>,
    evaluated: Vec<ParamVector>,
    best: f64,
    history: Vec<f64>,
    pool: Option<rayon::ThreadPool>,
}

impl<'a> RetrofitOracle<'a> {
    pub fn new(m0: &'a TensorModel, spec: &'a ModifierSpec, data: &'a LabeledDataset) -> Result<Self> {
        let dim = spec.dimension(m0)?;
        if data.dim() != m0.input_dim() {
            return Err(BboxError::Dimension(format!(
                "dataset has {} features, model expects {}",
                data.dim(),
                m0.input_dim()
            )));
        }
        let pool = match thread_cap() {
            Some(n) => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| BboxError::InvalidArgument(format!("thread pool: {e}")))?,
            ),
            None => None,
        };
        let best = candidate_loss(m0, spec, data, &vec![0.0; dim])?;
        Ok(Self {
            m0,
            spec,
            data,
            memo: HashMap::new(),
            evaluated: Vec::new(),
            best,
            history: Vec::new(),
            pool,
        })
    }

    /// Loss of the unmodified model.
    pub fn initial_loss(&self) -> Result<f64> {
        candidate_loss(self.m0, self.spec, self.data, &vec![0.0; self.spec.dimension(self.m0)?])
    }

    /// Lowest loss seen after each step (starting from the unmodified model).
    pub fn best_so_far(&self) -> &[f64] {
        &self.history
    }

    /// Every distinct candidate evaluated, in evaluation order.
    pub fn evaluated(&self) -> &[ParamVector] {
        &self.evaluated
    }

    pub fn evaluations(&self) -> usize {
        self.evaluated.len()
    }

    fn evaluate(&mut self, fresh: Vec<&Candidate>) -> Result<()> {
        let (m0, spec, data) = (self.m0, self.spec, self.data);
        let eval = |c: &&Candidate| candidate_loss(m0, spec, data, &c.x);
        let losses: Vec<Result<f64>> = match (&self.pool, fresh.len()) {
            (_, 0) => Vec::new(),
            (_, 1) => vec![eval(&fresh[0])],
            (Some(pool), _) => pool.install(|| fresh.par_iter().map(eval).collect()),
            (None, _) => fresh.par_iter().map(eval).collect(),
        };
        // memo updates happen in candidate order on this thread
        for (c, loss) in fresh.into_iter().zip(losses) {
            let loss = loss?;
            self.memo.insert(c.key, loss);
            self.evaluated.push(c.x.clone());
            self.best = self.best.min(loss);
        }
        Ok(())
    }
}

impl ComparisonOracle for RetrofitOracle<'_> {
    fn compare(&mut self, _step: usize, comparison: &Comparison) -> Result<u32> {
        let mut fresh: Vec<&Candidate> = Vec::new();
        for c in comparison.candidates() {
            if !self.memo.contains_key(&c.key) && !fresh.iter().any(|f| f.key == c.key) {
                fresh.push(c);
            }
        }
        self.evaluate(fresh)?;
        let choice = decide_by_losses(comparison, |c| self.memo[&c.key]);
        self.history.push(self.best);
        Ok(choice)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adversary {
    /// Flips up to `k` votes whenever that changes the majority.
    WorstCase { k: u64 },
    /// Flips `k` votes chosen uniformly at random.
    Random { k: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VoteRecord {
    pub step: usize,
    pub n: u64,
    /// Votes for the challenger before any tampering.
    pub count: u64,
    /// Votes for the challenger after tampering.
    pub tallied: u64,
    pub choice: u32,
}

/// `1` (challenger) when at least half of the `n` votes favor it.
pub fn majority_choice(n: u64, count: u64) -> u32 {
    if 2 * count >= n {
        1
    } else {
        2
    }
}

/// Tally after a worst-case adversary with `k` flips.
pub fn worst_case_tally(n: u64, count: u64, k: u64) -> u64 {
    let flipped = if majority_choice(n, count) == 1 {
        count - k.min(count)
    } else {
        count + k.min(n - count)
    };
    if majority_choice(n, flipped) != majority_choice(n, count) {
        flipped
    } else {
        count
    }
}

fn random_tally(n: u64, count: u64, k: u64, rng: &mut impl Rng) -> u64 {
    let (mut ones, mut rest) = (count, n);
    let mut tally = count;
    for _ in 0..k.min(n) {
        if rng.random_range(0..rest) < ones {
            ones -= 1;
            tally -= 1;
        } else {
            tally += 1;
        }
        rest -= 1;
    }
    tally
}

/// Majority vote of `n` simulated users per pairwise comparison. Each user
/// prefers the challenger with probability `f0(challenger, incumbent)`.
/// Votes of step `i` come from the stream `(seed, "votes/{i}")`, so a clean
/// and a tampered run see the same votes at the same step.
pub struct PreferenceOracle<F> {
    n: u64,
    f0: F,
    seed: u64,
    adversary: Option<Adversary>,
    votes: Vec<VoteRecord>,
}

impl<F> PreferenceOracle<F>
where
    F: FnMut(&Candidate, &Candidate) -> f64,
{
    pub fn new(n: u64, f0: F, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(BboxError::InvalidArgument("need at least one voter".into()));
        }
        Ok(Self {
            n,
            f0,
            seed,
            adversary: None,
            votes: Vec::new(),
        })
    }

    pub fn with_adversary(mut self, adversary: Adversary) -> Self {
        self.adversary = Some(adversary);
        self
    }

    pub fn votes(&self) -> &[VoteRecord] {
        &self.votes
    }
}

impl<F> ComparisonOracle for PreferenceOracle<F>
where
    F: FnMut(&Candidate, &Candidate) -> f64,
{
    fn compare(&mut self, step: usize, comparison: &Comparison) -> Result<u32> {
        let Comparison::Pairwise { challenger, incumbent } = comparison else {
            return Err(BboxError::Protocol(
                "preference votes only answer pairwise comparisons".into(),
            ));
        };
        let p = (self.f0)(challenger, incumbent);
        if !(0.0..=1.0).contains(&p) {
            return Err(BboxError::InvalidArgument(format!(
                "preference probability {p} outside [0, 1]"
            )));
        }
        let mut rng = stream(self.seed, &format!("votes/{step}"));
        let count = Binomial::new(self.n, p)
            .map_err(|e| BboxError::InvalidArgument(e.to_string()))?
            .sample(&mut rng);
        let tallied = match self.adversary {
            None => count,
            Some(Adversary::WorstCase { k }) => worst_case_tally(self.n, count, k),
            Some(Adversary::Random { k }) => {
                let mut rng = stream(self.seed, &format!("adversary/{step}"));
                random_tally(self.n, count, k, &mut rng)
            }
        };
        let choice = majority_choice(self.n, tallied);
        self.votes.push(VoteRecord {
            step,
            n: self.n,
            count,
            tallied,
            choice,
        });
        Ok(choice)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::ParamVector;

    fn pair() -> Comparison {
        Comparison::Pairwise {
            challenger: Candidate::new(1, ParamVector::zeros(1)),
            incumbent: Candidate::new(0, ParamVector::zeros(1)),
        }
    }

    #[test]
    fn unanimous_preference() {
        let mut o = PreferenceOracle::new(7, |_: &Candidate, _: &Candidate| 1.0, 0).unwrap();
        for step in 1..20 {
            assert_eq!(o.compare(step, &pair()).unwrap(), 1);
        }
    }

    #[test]
    fn even_split_goes_to_challenger() {
        assert_eq!(majority_choice(4, 2), 1);
        assert_eq!(majority_choice(4, 1), 2);
        assert_eq!(majority_choice(5, 2), 2);
    }

    #[test]
    fn worst_case_only_flips_close_votes() {
        // n = 10, k = 1: counts 4 and 5 can be flipped
        let flips: Vec<u64> = (0..=10).filter(|&c| worst_case_tally(10, c, 1) != c).collect();
        assert_eq!(flips, vec![4, 5]);
        assert_eq!(worst_case_tally(100, 70, 50), 20);
        assert_eq!(worst_case_tally(10, 5, 0), 5);
    }

    #[test]
    fn random_adversary_moves_by_at_most_k() {
        let mut rng = stream(0, "t");
        for c in 0..=20 {
            let t = random_tally(20, c, 3, &mut rng);
            assert!(t.abs_diff(c) <= 3);
        }
    }

    #[test]
    fn non_pairwise_comparisons_are_refused() {
        let mut o = PreferenceOracle::new(3, |_: &Candidate, _: &Candidate| 0.5, 0).unwrap();
        assert!(o.compare(1, &Comparison::None).is_err());
    }

    #[test]
    fn same_step_same_votes() {
        let mut a = PreferenceOracle::new(1001, |_: &Candidate, _: &Candidate| 0.5, 9).unwrap();
        let mut b = PreferenceOracle::new(1001, |_: &Candidate, _: &Candidate| 0.5, 9)
            .unwrap()
            .with_adversary(Adversary::WorstCase { k: 1 });
        for step in 1..50 {
            a.compare(step, &pair()).unwrap();
            b.compare(step, &pair()).unwrap();
        }
        let counts = |o: &[VoteRecord]| o.iter().map(|v| v.count).collect::<Vec<_>>();
        assert_eq!(counts(a.votes()), counts(b.votes()));
    }
}
