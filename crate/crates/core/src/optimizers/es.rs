//! (mu, lambda)-ES with diagonal covariance and cumulative step-size
//! adaptation ("dcma").
//!
//! Offspring of a generation are sampled together when the generation
//! starts and asked one per step. Two accountings are available:
//!
//! * `Subset` (default): the first `lambda - 1` steps carry no decision
//!   (`k = 1`); the last step selects the `mu` best as one subset index,
//!   `k = C(lambda, mu)` (times `mu!` with ranked weights).
//! * `Incremental`: every offspring is inserted into a running top-`mu`
//!   ranking, `k = min(j, mu) + 1` for the `j`-th offspring (0-based).

use super::common::{check_choice, gaussian, no_pending, not_started, propose_finite, KeyGen};
use super::{AlgorithmId, Optimizer};
use crate::error::{BboxError, Result};
use crate::rng::Stream;
use crate::trace::combinatorics::{unrank_permutation, unrank_subset};
use crate::trace::{Candidate, Comparison, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightScheme {
    Equal,
    Ranked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsAccounting {
    Subset,
    Incremental,
}

/// `4 + floor(3 ln d)`.
pub fn default_lambda(dim: usize) -> usize {
    4 + (3.0 * (dim.max(1) as f64).ln()).floor() as usize
}

#[derive(Debug, Clone)]
pub struct EsSettings {
    pub lambda: usize,
    pub mu: usize,
    pub weights: WeightScheme,
    pub accounting: EsAccounting,
    pub sigma: f64,
}

impl EsSettings {
    pub fn defaults(dim: usize) -> Self {
        let lambda = default_lambda(dim);
        Self {
            lambda,
            mu: (lambda / 2).max(1),
            weights: WeightScheme::Equal,
            accounting: EsAccounting::Subset,
            sigma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda == 0 || self.mu == 0 || self.mu > self.lambda {
            return Err(BboxError::Config(format!(
                "need 1 <= mu <= lambda, got mu={} lambda={}",
                self.mu, self.lambda
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(BboxError::Config("sigma must be positive".into()));
        }
        let ranked = self.weights == WeightScheme::Ranked;
        match crate::trace::subset_cases(self.lambda, self.mu, ranked) {
            Some(k) if k <= u64::from(u32::MAX) => Ok(()),
            _ => Err(BboxError::Config(format!(
                "branching factor of selecting {} of {} does not fit a 32-bit choice",
                self.mu, self.lambda
            ))),
        }
    }
}

#[derive(Debug, Clone)]
struct Offspring {
    cand: Candidate,
    z: Vec<f64>,
    y: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DiagonalEs {
    settings: EsSettings,
    dim: usize,
    mean: Vec<f64>,
    sigma: f64,
    diag_c: Vec<f64>,
    p_sigma: Vec<f64>,
    p_c: Vec<f64>,
    weights: Vec<f64>,
    mu_eff: f64,
    cs: f64,
    damps: f64,
    cc: f64,
    c1: f64,
    cmu: f64,
    chi_n: f64,
    generation: Vec<Offspring>,
    next: usize,
    ranking: Vec<usize>,
    pending: bool,
    generations: usize,
    told: usize,
    rng: Stream,
    keys: KeyGen,
}

impl DiagonalEs {
    pub fn new(initial: &ParamVector, settings: EsSettings, rng: Stream) -> Result<Self> {
        settings.validate()?;
        let dim = initial.dim();
        let n = dim as f64;
        let mu = settings.mu;
        let raw: Vec<f64> = match settings.weights {
            WeightScheme::Equal => vec![1.0; mu],
            WeightScheme::Ranked => (1..=mu).map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln()).collect(),
        };
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let cs = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let damps = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + cs;
        let cc = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        // separable-CMA learning rates
        let sep = (n + 2.0) / 3.0;
        let c1 = (sep * 2.0 / ((n + 1.3).powi(2) + mu_eff)).min(1.0);
        let cmu = (sep * 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff))
            .max(0.0)
            .min(1.0 - c1);
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        Ok(Self {
            sigma: settings.sigma,
            settings,
            dim,
            mean: initial.as_slice().to_vec(),
            diag_c: vec![1.0; dim],
            p_sigma: vec![0.0; dim],
            p_c: vec![0.0; dim],
            weights,
            mu_eff,
            cs,
            damps,
            cc,
            c1,
            cmu,
            chi_n,
            generation: Vec::new(),
            next: 0,
            ranking: Vec::new(),
            pending: false,
            generations: 0,
            told: 0,
            rng,
            keys: KeyGen::new(),
        })
    }

    pub fn settings(&self) -> &EsSettings {
        &self.settings
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn generations(&self) -> usize {
        self.generations
    }

    fn sample_generation(&mut self) -> Result<()> {
        let mut gen = Vec::with_capacity(self.settings.lambda);
        for _ in 0..self.settings.lambda {
            let mut z = Vec::new();
            let mut y = Vec::new();
            let (mean, sigma, diag_c, dim, rng) = (&self.mean, self.sigma, &self.diag_c, self.dim, &mut self.rng);
            let x = propose_finite(
                || {
                    z = gaussian(rng, dim);
                    y = z.iter().zip(diag_c).map(|(zi, c)| zi * c.sqrt()).collect();
                    mean.iter().zip(&y).map(|(m, yi)| m + sigma * yi).collect()
                },
                self.told + 1,
            )?;
            gen.push(Offspring {
                cand: Candidate::new(self.keys.next_key(), x),
                z,
                y,
            });
        }
        self.generation = gen;
        self.next = 0;
        self.ranking.clear();
        Ok(())
    }

    fn is_last_of_generation(&self) -> bool {
        self.next + 1 == self.settings.lambda
    }

    #[allow(clippy::needless_range_loop)]
    fn finish_generation(&mut self, selected: &[usize]) {
        let n = self.dim;
        let mut y_w = vec![0.0; n];
        let mut z_w = vec![0.0; n];
        for (w, &idx) in self.weights.iter().zip(selected) {
            let o = &self.generation[idx];
            for j in 0..n {
                y_w[j] += w * o.y[j];
                z_w[j] += w * o.z[j];
            }
        }
        for j in 0..n {
            self.mean[j] += self.sigma * y_w[j];
        }
        let cs = self.cs;
        let norm_s = (cs * (2.0 - cs) * self.mu_eff).sqrt();
        for j in 0..n {
            self.p_sigma[j] = (1.0 - cs) * self.p_sigma[j] + norm_s * z_w[j];
        }
        let ps_norm = self.p_sigma.iter().map(|v| v * v).sum::<f64>().sqrt();
        let gens = (self.generations + 1) as f64;
        let h_sigma =
            ps_norm / (1.0 - (1.0 - cs).powf(2.0 * gens)).sqrt() < (1.4 + 2.0 / (n as f64 + 1.0)) * self.chi_n;
        let norm_c = (self.cc * (2.0 - self.cc) * self.mu_eff).sqrt();
        for j in 0..n {
            let h = if h_sigma { 1.0 } else { 0.0 };
            self.p_c[j] = (1.0 - self.cc) * self.p_c[j] + h * norm_c * y_w[j];
        }
        for j in 0..n {
            let rank_mu: f64 = self
                .weights
                .iter()
                .zip(selected)
                .map(|(w, &idx)| w * self.generation[idx].y[j].powi(2))
                .sum();
            self.diag_c[j] =
                (1.0 - self.c1 - self.cmu) * self.diag_c[j] + self.c1 * self.p_c[j].powi(2) + self.cmu * rank_mu;
            self.diag_c[j] = self.diag_c[j].clamp(1e-300, 1e300);
        }
        let exponent = (cs / self.damps) * (ps_norm / self.chi_n - 1.0);
        self.sigma *= exponent.clamp(-1.0, 1.0).exp();
        self.generations += 1;
        self.generation.clear();
        self.next = 0;
        self.ranking.clear();
    }

    fn decode_subset(&self, choice: u32) -> Result<Vec<usize>> {
        let (lambda, mu) = (self.settings.lambda, self.settings.mu);
        let idx = u64::from(choice - 1);
        Ok(match self.settings.weights {
            WeightScheme::Equal => unrank_subset(idx, lambda, mu),
            WeightScheme::Ranked => {
                let f = crate::trace::combinatorics::factorial(mu as u64)
                    .ok_or_else(|| BboxError::Config("mu! overflows".into()))?;
                let subset = unrank_subset(idx / f, lambda, mu);
                unrank_permutation(idx % f, mu).into_iter().map(|p| subset[p]).collect()
            }
        })
    }
}

impl Optimizer for DiagonalEs {
    fn algorithm_id(&self) -> AlgorithmId {
        AlgorithmId::Dcma
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn ask(&mut self) -> Result<ParamVector> {
        if self.generation.is_empty() {
            self.sample_generation()?;
        }
        self.pending = true;
        Ok(self.generation[self.next].cand.x.clone())
    }

    fn comparison(&self) -> Result<Comparison> {
        if !self.pending {
            return Err(no_pending());
        }
        let current = self.generation[self.next].cand.clone();
        Ok(match self.settings.accounting {
            EsAccounting::Subset if self.is_last_of_generation() => Comparison::SelectSubset {
                candidates: self.generation.iter().map(|o| o.cand.clone()).collect(),
                mu: self.settings.mu,
                ranked: self.settings.weights == WeightScheme::Ranked,
            },
            EsAccounting::Subset => Comparison::None,
            EsAccounting::Incremental => Comparison::InsertRank {
                challenger: current,
                ranking: self.ranking.iter().map(|&i| self.generation[i].cand.clone()).collect(),
                capacity: self.settings.mu,
            },
        })
    }

    fn tell(&mut self, choice: u32) -> Result<()> {
        if !self.pending {
            return Err(no_pending());
        }
        let k = self.comparison()?.num_cases();
        check_choice(choice, k, self.told + 1)?;
        self.pending = false;
        self.told += 1;
        let last = self.is_last_of_generation();
        match self.settings.accounting {
            EsAccounting::Subset => {
                if last {
                    let selected = self.decode_subset(choice)?;
                    self.finish_generation(&selected);
                    return Ok(());
                }
            }
            EsAccounting::Incremental => {
                let pos = (choice - 1) as usize;
                if pos < self.settings.mu {
                    self.ranking.insert(pos, self.next);
                    self.ranking.truncate(self.settings.mu);
                }
                if last {
                    let selected = self.ranking.clone();
                    self.finish_generation(&selected);
                    return Ok(());
                }
            }
        }
        self.next += 1;
        Ok(())
    }

    fn recommend(&self) -> Result<ParamVector> {
        if self.told == 0 {
            return Err(not_started());
        }
        ParamVector::checked(self.mean.clone()).ok_or(BboxError::NonFinite { step: self.told })
    }

    fn steps_told(&self) -> usize {
        self.told
    }

    fn recommendation_index(&self) -> Option<usize> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn es(dim: usize, lambda: usize, mu: usize, weights: WeightScheme, accounting: EsAccounting) -> DiagonalEs {
        let settings = EsSettings {
            lambda,
            mu,
            weights,
            accounting,
            sigma: 1.0,
        };
        DiagonalEs::new(&ParamVector::zeros(dim), settings, stream(0, "es")).unwrap()
    }

    #[test]
    fn default_population_size() {
        assert_eq!(default_lambda(10), 10);
        assert_eq!(default_lambda(1), 4);
        assert_eq!(EsSettings::defaults(10).mu, 5);
    }

    #[test]
    fn one_one_degenerates_to_single_case() {
        let mut opt = es(3, 1, 1, WeightScheme::Equal, EsAccounting::Subset);
        opt.ask().unwrap();
        assert_eq!(opt.comparison().unwrap().num_cases(), 1);
        opt.tell(1).unwrap();
        assert_eq!(opt.generations(), 1);
    }

    #[test]
    fn branching_per_generation() {
        for (weights, expected) in [(WeightScheme::Equal, 70), (WeightScheme::Ranked, 1680)] {
            let mut opt = es(5, 8, 4, weights, EsAccounting::Subset);
            let mut ks = Vec::new();
            for _ in 0..16 {
                opt.ask().unwrap();
                let k = opt.comparison().unwrap().num_cases();
                ks.push(k);
                opt.tell(k.min(3)).unwrap();
            }
            let mut want = vec![1; 16];
            want[7] = expected;
            want[15] = expected;
            assert_eq!(ks, want);
        }
    }

    #[test]
    fn incremental_branching_counts() {
        let mut opt = es(5, 6, 2, WeightScheme::Ranked, EsAccounting::Incremental);
        let mut ks = Vec::new();
        for _ in 0..6 {
            opt.ask().unwrap();
            let k = opt.comparison().unwrap().num_cases();
            ks.push(k);
            opt.tell(1).unwrap();
        }
        assert_eq!(ks, vec![1, 2, 3, 3, 3, 3]);
    }

    #[test]
    fn out_of_range_ranking_choice_is_rejected() {
        let mut opt = es(5, 4, 2, WeightScheme::Equal, EsAccounting::Subset);
        for _ in 0..3 {
            opt.ask().unwrap();
            opt.tell(1).unwrap();
        }
        opt.ask().unwrap();
        assert!(opt.tell(7).is_err());
        assert!(opt.tell(6).is_ok());
    }

    #[test]
    fn recommendation_is_the_mean() {
        let mut opt = es(4, 6, 3, WeightScheme::Equal, EsAccounting::Subset);
        for _ in 0..6 {
            opt.ask().unwrap();
            opt.tell(1).unwrap();
        }
        let rec = opt.recommend().unwrap();
        assert_eq!(rec.as_slice(), opt.mean());
        assert!(rec.as_slice().iter().any(|v| *v != 0.0));
    }

    #[test]
    fn oversized_ranked_selection_is_a_config_error() {
        let settings = EsSettings {
            lambda: 40,
            mu: 20,
            weights: WeightScheme::Ranked,
            accounting: EsAccounting::Subset,
            sigma: 1.0,
        };
        assert!(settings.validate().is_err());
    }
}
