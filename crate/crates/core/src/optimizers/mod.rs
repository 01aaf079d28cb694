//! Comparison-based optimizers.
//!
//! Every optimizer speaks the same protocol: [`Optimizer::ask`] proposes a
//! candidate, [`Optimizer::comparison`] states what has to be decided about
//! it, and [`Optimizer::tell`] receives the 1-based outcome. No optimizer
//! ever sees an objective value.

mod bet_and_run;
mod common;
pub mod de;
pub mod discrete;
pub mod es;
pub mod one_fifth;
pub mod pso;

use std::fmt;
use std::str::FromStr;

use serde_json::Value;

pub use bet_and_run::{bet_and_run, BetAndRun, BetAndRunLayout, Phase};
pub use de::{DeSettings, DeVariant, DifferentialEvolution};
pub use discrete::{DiscreteEa, Schedule};
pub use es::{DiagonalEs, EsAccounting, EsSettings, WeightScheme};
pub use one_fifth::OneFifth;
pub use pso::{ParticleSwarm, PsoSettings};

use crate::error::{BboxError, Result};
use crate::rng::stream;
use crate::trace::combinatorics::binomial;
use crate::trace::{subset_cases, AlgorithmConfig, ParamVector, Trace};

pub trait Optimizer: Send {
    fn algorithm_id(&self) -> AlgorithmId;
    fn dimension(&self) -> usize;
    /// Proposes the next candidate. Calling twice without `tell` returns the
    /// same candidate.
    fn ask(&mut self) -> Result<ParamVector>;
    fn comparison(&self) -> Result<crate::trace::Comparison>;
    fn tell(&mut self, choice: u32) -> Result<()>;
    fn recommend(&self) -> Result<ParamVector>;
    /// 1-based step whose candidate `recommend` returns, if it is one.
    fn recommendation_index(&self) -> Option<usize>;
    fn steps_told(&self) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlgorithmId {
    OneFifth,
    Discrete,
    Lengler,
    CoLengler,
    Portfolio,
    FastGa,
    Dcma,
    De,
    DeCtb,
    Pso,
    Triple,
    MultiDisc,
    Bard,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 13] = [
        AlgorithmId::OneFifth,
        AlgorithmId::Discrete,
        AlgorithmId::Lengler,
        AlgorithmId::CoLengler,
        AlgorithmId::Portfolio,
        AlgorithmId::FastGa,
        AlgorithmId::Dcma,
        AlgorithmId::De,
        AlgorithmId::DeCtb,
        AlgorithmId::Pso,
        AlgorithmId::Triple,
        AlgorithmId::MultiDisc,
        AlgorithmId::Bard,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmId::OneFifth => "onefifth",
            AlgorithmId::Discrete => "discrete",
            AlgorithmId::Lengler => "lengler",
            AlgorithmId::CoLengler => "colengler",
            AlgorithmId::Portfolio => "portfolio",
            AlgorithmId::FastGa => "fastga",
            AlgorithmId::Dcma => "dcma",
            AlgorithmId::De => "de",
            AlgorithmId::DeCtb => "de-ctb",
            AlgorithmId::Pso => "pso",
            AlgorithmId::Triple => "triple",
            AlgorithmId::MultiDisc => "multidisc",
            AlgorithmId::Bard => "bard",
        }
    }

    pub fn valid_ids() -> String {
        Self::ALL.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(", ")
    }

    /// Sub-algorithms and default `alpha` of the bet-and-run composites.
    pub fn bet_and_run_parts(self) -> Option<(Vec<AlgorithmId>, f64)> {
        match self {
            AlgorithmId::Triple => Some((vec![AlgorithmId::OneFifth; 3], 0.5)),
            AlgorithmId::MultiDisc => Some((vec![AlgorithmId::Discrete; 3], 1.0)),
            AlgorithmId::Bard => Some((vec![AlgorithmId::De, AlgorithmId::Dcma], 1.0)),
            _ => None,
        }
    }

    fn keys(self) -> &'static [(&'static str, Kind)] {
        use Kind::*;
        match self {
            AlgorithmId::OneFifth => &[("sigma", Positive)],
            AlgorithmId::Discrete | AlgorithmId::Portfolio => &[],
            AlgorithmId::Lengler => &[("lengler_c", Positive)],
            AlgorithmId::CoLengler => &[("lengler_c", Positive), ("crossover", Unit)],
            AlgorithmId::FastGa => &[("beta", Positive)],
            AlgorithmId::Dcma => &[
                ("sigma", Positive),
                ("lambda", Count),
                ("mu", Count),
                ("weights", Choice(&["equal", "ranked"])),
                ("accounting", Choice(&["subset", "incremental"])),
            ],
            AlgorithmId::De | AlgorithmId::DeCtb => &[
                ("population", Count),
                ("f", Finite),
                ("cr", Unit),
                ("init_scale", NonNegative),
            ],
            AlgorithmId::Pso => &[
                ("swarm", Count),
                ("inertia", Finite),
                ("cognitive", Finite),
                ("social", Finite),
                ("gbest_accounting", Flag),
                ("init_scale", NonNegative),
            ],
            AlgorithmId::Triple | AlgorithmId::MultiDisc | AlgorithmId::Bard => &[("alpha", Alpha), ("restart", Flag)],
        }
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgorithmId {
    type Err = BboxError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| BboxError::UnknownAlgorithm(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Positive,
    NonNegative,
    Finite,
    Unit,
    Alpha,
    Count,
    Flag,
    Choice(&'static [&'static str]),
}

impl Kind {
    fn check(self, key: &str, v: &Value) -> Result<()> {
        let bad = |what: &str| Err(BboxError::Config(format!("`{key}` must be {what}, got {v}")));
        match self {
            Kind::Flag => match v {
                Value::Bool(_) => Ok(()),
                _ => bad("a boolean"),
            },
            Kind::Choice(options) => match v.as_str() {
                Some(s) if options.contains(&s) => Ok(()),
                _ => bad(&format!("one of {}", options.join("|"))),
            },
            Kind::Count => match v.as_u64() {
                Some(n) if n >= 1 => Ok(()),
                _ => bad("a positive integer"),
            },
            _ => {
                let Some(x) = v.as_f64().filter(|x| x.is_finite()) else {
                    return bad("a finite number");
                };
                let ok = match self {
                    Kind::Positive => x > 0.0,
                    Kind::NonNegative => x >= 0.0,
                    Kind::Unit => (0.0..=1.0).contains(&x),
                    Kind::Alpha => x > 0.0 && x <= 1.0,
                    _ => true,
                };
                if ok {
                    Ok(())
                } else {
                    bad(match self {
                        Kind::Positive => "positive",
                        Kind::NonNegative => "non-negative",
                        Kind::Unit => "in [0, 1]",
                        _ => "in (0, 1]",
                    })
                }
            }
        }
    }
}

/// An algorithm id together with its (validated) configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSpec {
    pub id: AlgorithmId,
    pub config: AlgorithmConfig,
}

impl AlgorithmSpec {
    pub fn new(id: AlgorithmId) -> Self {
        Self {
            id,
            config: AlgorithmConfig::new(),
        }
    }

    pub fn parse(id: &str, config: AlgorithmConfig) -> Result<Self> {
        Self::with_config(id.parse()?, config)
    }

    /// Rejects unknown keys and ill-typed values.
    pub fn with_config(id: AlgorithmId, config: AlgorithmConfig) -> Result<Self> {
        let allowed = id.keys();
        for (key, value) in &config {
            match allowed.iter().find(|(k, _)| k == key) {
                Some((_, kind)) => kind.check(key, value)?,
                None => {
                    let names: Vec<&str> = allowed.iter().map(|(k, _)| *k).collect();
                    return Err(BboxError::Config(format!(
                        "unknown key `{key}` for `{id}` (accepted: {})",
                        if names.is_empty() {
                            "none".to_string()
                        } else {
                            names.join(", ")
                        }
                    )));
                }
            }
        }
        Ok(Self { id, config })
    }

    pub fn set(mut self, key: &str, value: impl Into<Value>) -> Result<Self> {
        self.config.insert(key.to_string(), value.into());
        Self::with_config(self.id, self.config)
    }

    fn f64_or(&self, key: &str, default: f64) -> f64 {
        self.config.get(key).and_then(Value::as_f64).unwrap_or(default)
    }

    fn usize_or(&self, key: &str, default: usize) -> usize {
        self.config
            .get(key)
            .and_then(Value::as_u64)
            .map_or(default, |v| v as usize)
    }

    fn bool_or(&self, key: &str, default: bool) -> bool {
        self.config.get(key).and_then(Value::as_bool).unwrap_or(default)
    }

    fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.config.get(key).and_then(Value::as_str).unwrap_or(default)
    }

    pub fn es_settings(&self, dim: usize) -> EsSettings {
        let mut s = EsSettings::defaults(dim);
        s.lambda = self.usize_or("lambda", s.lambda);
        s.mu = self.usize_or("mu", (s.lambda / 2).max(1));
        s.sigma = self.f64_or("sigma", s.sigma);
        if self.str_or("weights", "equal") == "ranked" {
            s.weights = WeightScheme::Ranked;
        }
        if self.str_or("accounting", "subset") == "incremental" {
            s.accounting = EsAccounting::Incremental;
        }
        s
    }

    pub fn de_settings(&self) -> DeSettings {
        let d = DeSettings::default();
        DeSettings {
            population: self.usize_or("population", d.population),
            f: self.f64_or("f", d.f),
            cr: self.f64_or("cr", d.cr),
            init_scale: self.f64_or("init_scale", d.init_scale),
        }
    }

    pub fn pso_settings(&self) -> PsoSettings {
        let d = PsoSettings::default();
        PsoSettings {
            swarm: self.usize_or("swarm", d.swarm),
            inertia: self.f64_or("inertia", d.inertia),
            cognitive: self.f64_or("cognitive", d.cognitive),
            social: self.f64_or("social", d.social),
            gbest_accounting: self.bool_or("gbest_accounting", d.gbest_accounting),
            init_scale: self.f64_or("init_scale", d.init_scale),
        }
    }

    /// `alpha` and `restart` of a bet-and-run composite.
    pub fn bet_and_run_settings(&self) -> Option<(Vec<AlgorithmId>, f64, bool)> {
        let (subs, alpha) = self.id.bet_and_run_parts()?;
        Some((subs, self.f64_or("alpha", alpha), self.bool_or("restart", false)))
    }
}

/// Builds a fresh optimizer. All randomness comes from `seed`.
pub fn build_optimizer(
    spec: &AlgorithmSpec,
    initial: &ParamVector,
    budget: usize,
    seed: u64,
) -> Result<Box<dyn Optimizer>> {
    if budget == 0 {
        return Err(BboxError::ZeroBudget);
    }
    if initial.dim() == 0 {
        return Err(BboxError::Dimension(
            "search space must have at least one coordinate".into(),
        ));
    }
    let rng = stream(seed, &format!("optimizer/{}", spec.id));
    let schedule = |s| Box::new(DiscreteEa::new(spec.id, s, None, initial, budget, rng.clone()));
    Ok(match spec.id {
        AlgorithmId::OneFifth => Box::new(OneFifth::new(initial, spec.f64_or("sigma", 1.0), rng)),
        AlgorithmId::Discrete => schedule(Schedule::Discrete),
        AlgorithmId::Portfolio => schedule(Schedule::Portfolio),
        AlgorithmId::Lengler => schedule(Schedule::Lengler {
            c: spec.f64_or("lengler_c", discrete::DEFAULT_LENGLER_C),
        }),
        AlgorithmId::FastGa => schedule(Schedule::FastGa {
            beta: spec.f64_or("beta", discrete::DEFAULT_FASTGA_BETA),
        }),
        AlgorithmId::CoLengler => Box::new(DiscreteEa::new(
            spec.id,
            Schedule::Lengler {
                c: spec.f64_or("lengler_c", discrete::DEFAULT_LENGLER_C),
            },
            Some(spec.f64_or("crossover", discrete::DEFAULT_CROSSOVER)),
            initial,
            budget,
            rng,
        )),
        AlgorithmId::Dcma => Box::new(DiagonalEs::new(initial, spec.es_settings(initial.dim()), rng)?),
        AlgorithmId::De => Box::new(DifferentialEvolution::new(
            DeVariant::Rand1,
            spec.de_settings(),
            initial,
            rng,
        )?),
        AlgorithmId::DeCtb => Box::new(DifferentialEvolution::new(
            DeVariant::CurrentToBest,
            spec.de_settings(),
            initial,
            rng,
        )?),
        AlgorithmId::Pso => Box::new(ParticleSwarm::new(spec.pso_settings(), initial, rng)?),
        AlgorithmId::Triple | AlgorithmId::MultiDisc | AlgorithmId::Bard => {
            let (_, alpha, restart) = spec.bet_and_run_settings().expect("composite id");
            Box::new(bet_and_run(spec.id, alpha, restart, initial, budget, seed)?)
        }
    })
}

/// log2 of the number of distinct outputs a trace can stand for.
///
/// For single algorithms this is the trace's `bits`. For bet-and-run the
/// racing sub-runs are alternatives, not a product: the count is
/// `sum_i N_i` times the finishing phase, and the selection record itself
/// adds nothing.
pub fn output_bits(trace: &Trace) -> Result<f64> {
    let spec = AlgorithmSpec::parse(&trace.algorithm_id, trace.algorithm_config.clone())?;
    let Some((subs, alpha, _)) = spec.bet_and_run_settings() else {
        return Ok(trace.bits);
    };
    let layout = BetAndRunLayout::new(subs.len(), alpha, trace.budget)?;
    let bits_of =
        |r: std::ops::Range<usize>| -> f64 { trace.records[r].iter().map(|rec| f64::from(rec.k).log2()).sum() };
    let sub_bits: Vec<f64> = layout.sub_ranges().into_iter().map(bits_of).collect();
    Ok(log2_sum_exp2(&sub_bits) + bits_of(layout.finishing_range()))
}

/// `log2(sum_i 2^{x_i})` without overflow.
pub fn log2_sum_exp2(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp2()).sum::<f64>().log2()
}

/// Worst-case value of [`output_bits`] for `spec` run on `budget` steps in
/// dimension `dim`: what the branching table allows, independent of the
/// particular choices made.
pub fn output_bits_bound(spec: &AlgorithmSpec, budget: usize, dim: usize) -> Result<f64> {
    let b = budget as f64;
    Ok(match spec.id {
        AlgorithmId::OneFifth
        | AlgorithmId::Discrete
        | AlgorithmId::Lengler
        | AlgorithmId::CoLengler
        | AlgorithmId::Portfolio
        | AlgorithmId::FastGa
        | AlgorithmId::De => b,
        AlgorithmId::DeCtb => b * 3f64.log2(),
        AlgorithmId::Pso => {
            if spec.pso_settings().gbest_accounting {
                b * 3f64.log2()
            } else {
                b
            }
        }
        AlgorithmId::Dcma => {
            let s = spec.es_settings(dim);
            let ranked = s.weights == WeightScheme::Ranked;
            match s.accounting {
                EsAccounting::Subset => {
                    let k = subset_cases(s.lambda, s.mu, ranked)
                        .ok_or_else(|| BboxError::Config("selection count overflows".into()))?;
                    (budget / s.lambda) as f64 * (k as f64).log2()
                }
                EsAccounting::Incremental => (0..budget)
                    .map(|t| (((t % s.lambda).min(s.mu) + 1) as f64).log2())
                    .sum(),
            }
        }
        AlgorithmId::Triple | AlgorithmId::MultiDisc | AlgorithmId::Bard => {
            let (subs, alpha, _) = spec.bet_and_run_settings().expect("composite id");
            let layout = BetAndRunLayout::new(subs.len(), alpha, budget)?;
            let mut sub_bits = Vec::new();
            for (id, r) in subs.iter().zip(layout.sub_ranges()) {
                sub_bits.push(output_bits_bound(&AlgorithmSpec::new(*id), r.len(), dim)?);
            }
            // the finishing phase may continue any sub-run
            let finish = layout.finishing_range().len();
            let mut finish_bits: f64 = 0.0;
            for id in &subs {
                finish_bits = finish_bits.max(output_bits_bound(&AlgorithmSpec::new(*id), finish.max(1), dim)?);
            }
            if finish == 0 {
                finish_bits = 0.0;
            }
            log2_sum_exp2(&sub_bits) + finish_bits
        }
    })
}

/// Number of `mu`-subsets of `lambda` offspring.
pub fn es_generation_cases(lambda: usize, mu: usize) -> Option<u64> {
    binomial(lambda as u64, mu as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn ids_round_trip() {
        for id in AlgorithmId::ALL {
            assert_eq!(id.as_str().parse::<AlgorithmId>().unwrap(), id);
        }
        let err = "cma".parse::<AlgorithmId>().unwrap_err().to_string();
        assert!(err.contains("de-ctb"), "{err}");
    }

    #[test]
    fn unknown_and_ill_typed_keys_are_rejected() {
        let cfg = |k: &str, v: Value| AlgorithmConfig::from([(k.to_string(), v)]);
        assert!(AlgorithmSpec::parse("onefifth", cfg("sigma", json!(0.5))).is_ok());
        assert!(AlgorithmSpec::parse("onefifth", cfg("sigmaa", json!(0.5))).is_err());
        assert!(AlgorithmSpec::parse("onefifth", cfg("sigma", json!(-1))).is_err());
        assert!(AlgorithmSpec::parse("discrete", cfg("sigma", json!(1))).is_err());
        assert!(AlgorithmSpec::parse("dcma", cfg("weights", json!("ranked"))).is_ok());
        assert!(AlgorithmSpec::parse("dcma", cfg("weights", json!("log"))).is_err());
        assert!(AlgorithmSpec::parse("triple", cfg("alpha", json!(0))).is_err());
        assert!(AlgorithmSpec::parse("pso", cfg("gbest_accounting", json!(1))).is_err());
    }

    #[test]
    fn every_algorithm_builds() {
        let x0 = ParamVector::filled(4, 1.0);
        for id in AlgorithmId::ALL {
            let opt = build_optimizer(&AlgorithmSpec::new(id), &x0, 30, 1).unwrap();
            assert_eq!(opt.algorithm_id(), id);
            assert_eq!(opt.dimension(), 4);
        }
    }

    #[test]
    fn zero_budget_and_empty_space_fail() {
        let spec = AlgorithmSpec::new(AlgorithmId::OneFifth);
        assert!(matches!(
            build_optimizer(&spec, &ParamVector::zeros(2), 0, 0),
            Err(BboxError::ZeroBudget)
        ));
        assert!(matches!(
            build_optimizer(&spec, &ParamVector::zeros(0), 5, 0),
            Err(BboxError::Dimension(_))
        ));
    }

    #[test]
    fn log_sum_matches_direct_sum() {
        let v = log2_sum_exp2(&[3.0, 3.0, 2.0]);
        assert!((v - 20f64.log2()).abs() < 1e-12);
        assert!((log2_sum_exp2(&[1000.0, 1000.0]) - 1001.0).abs() < 1e-9);
    }

    #[test]
    fn multidisc_bound_at_150() {
        let spec = AlgorithmSpec::new(AlgorithmId::MultiDisc);
        let bits = output_bits_bound(&spec, 150, 5).unwrap();
        // sub-runs of 50, 50 and 49 steps
        assert!((bits - (2f64.powi(50) * 2.5).log2()).abs() < 1e-9);
        assert!(bits <= (3.0 * 2f64.powi(50)).log2());
    }
}
