//! Closed-form overfitting bounds for comparison-limited optimization.
//!
//! Everything is computed in log-space and exponentiated last, so state
//! counts like `2^(10^6)` never overflow. Probabilities above one are
//! returned raw and flagged as vacuous rather than clamped.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use statrs::function::factorial::ln_binomial;

use crate::error::{BboxError, Result};
use crate::trace::combinatorics::binomial;
use crate::trace::ChoiceRecord;

/// Deviation risk of one fixed model: `2 exp(-2 s eps^2)`.
pub fn hoeffding_delta(s: u64, epsilon: f64) -> f64 {
    2.0 * (-2.0 * s as f64 * epsilon * epsilon).exp()
}

/// `h1(l) = (1 + 1/l) ln(1 + l) - 1`.
pub fn h1(lambda: f64) -> f64 {
    if lambda.abs() < 1e-3 {
        // sum_{n>=2} (-1)^n l^(n-1) / (n (n-1))
        let mut sum = 0.0;
        let mut pow = 1.0;
        for n in 2..40 {
            pow *= lambda;
            let term = pow / (n * (n - 1)) as f64;
            sum += if n % 2 == 0 { term } else { -term };
            if term.abs() < 1e-300 {
                break;
            }
        }
        sum
    } else {
        (1.0 + 1.0 / lambda) * lambda.ln_1p() - 1.0
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(BboxError::InvalidArgument(format!(
            "sigma must be positive, got {sigma}"
        )))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(BboxError::InvalidArgument(format!(
            "delta must lie in (0, 1], got {delta}"
        )))
    }
}

/// `ln` of the Bennett deviation risk.
pub fn bennett_ln_delta(s: u64, epsilon: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(LN_2 - s as f64 * epsilon * h1(epsilon / (sigma * sigma)))
}

/// Deviation risk with variance information: `2 exp(-s eps h1(eps / sigma^2))`.
pub fn bennett_delta(s: u64, epsilon: f64, sigma: f64) -> Result<f64> {
    Ok(bennett_ln_delta(s, epsilon, sigma)?.exp())
}

/// Branching factors of a run, kept as `sum log2 k_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchingProfile {
    pub log2_states: f64,
    pub steps: usize,
}

impl BranchingProfile {
    pub fn from_factors(ks: &[u32]) -> Result<Self> {
        if ks.contains(&0) {
            return Err(BboxError::InvalidArgument("branching factors must be >= 1".into()));
        }
        Ok(Self {
            log2_states: ks.iter().map(|&k| f64::from(k).log2()).sum(),
            steps: ks.len(),
        })
    }

    pub fn from_records(records: &[ChoiceRecord]) -> Self {
        Self {
            log2_states: records.iter().map(|r| f64::from(r.k).log2()).sum(),
            steps: records.len(),
        }
    }

    /// `k` at each of `steps` steps.
    pub fn uniform(k: u32, steps: usize) -> Self {
        Self {
            log2_states: steps as f64 * f64::from(k.max(1)).log2(),
            steps,
        }
    }

    /// `generations` generations of `per_generation` outcomes, 1 elsewhere.
    pub fn generational(per_generation: u64, generations: usize, steps: usize) -> Self {
        Self {
            log2_states: generations as f64 * (per_generation.max(1) as f64).log2(),
            steps,
        }
    }

    pub fn from_log2(log2_states: f64, steps: usize) -> Self {
        Self { log2_states, steps }
    }

    /// Geometric mean of the factors, `exp(sum ln k_i / b)`.
    pub fn avg_branching(&self) -> Result<f64> {
        if self.steps == 0 {
            return Err(BboxError::InvalidArgument("empty branching profile".into()));
        }
        Ok((self.log2_states / self.steps as f64).exp2())
    }
}

/// Worst case over seeds: the largest state count among per-seed profiles.
pub fn sup_over_seeds(profiles: &[BranchingProfile]) -> Result<BranchingProfile> {
    profiles
        .iter()
        .copied()
        .max_by(|a, b| a.log2_states.total_cmp(&b.log2_states))
        .ok_or_else(|| BboxError::InvalidArgument("no profiles given".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Risk {
    pub ln: f64,
    pub raw: f64,
    pub clamped: f64,
    pub vacuous: bool,
}

impl Risk {
    pub fn from_ln(ln: f64) -> Self {
        let raw = ln.exp();
        Self {
            ln,
            raw,
            clamped: raw.min(1.0),
            vacuous: ln > 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverfitRisk {
    /// `N * delta_1`: risk that the selected output deviates.
    pub selected: Risk,
    /// `b * N * delta_1`: risk that any iterate deviates.
    pub any_iterate: Risk,
}

pub fn overfit_risk(delta_one: f64, profile: &BranchingProfile) -> Result<OverfitRisk> {
    if profile.steps == 0 {
        return Err(BboxError::InvalidArgument("empty branching profile".into()));
    }
    let ln = profile.log2_states * LN_2 + delta_one.ln();
    Ok(OverfitRisk {
        selected: Risk::from_ln(ln),
        any_iterate: Risk::from_ln(ln + (profile.steps as f64).ln()),
    })
}

/// `2 (prod k_i) exp(-2 s eps^2)`.
pub fn corollary_risk(s: u64, epsilon: f64, profile: &BranchingProfile) -> Risk {
    Risk::from_ln(LN_2 + profile.log2_states * LN_2 - 2.0 * s as f64 * epsilon * epsilon)
}

/// Random search chooses once among `b` points: risk `b * delta_1`.
pub fn random_search_risk(delta_one: f64, budget: usize) -> Risk {
    Risk::from_ln((budget as f64).ln() + delta_one.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetBound {
    /// Largest budget with `2^b delta_1 <= delta`; 0 when infeasible.
    pub budget: u64,
    /// Unfloored right-hand side.
    pub raw: f64,
    pub feasible: bool,
}

impl BudgetBound {
    fn from_raw(raw: f64) -> Self {
        let feasible = raw >= 0.0;
        Self {
            budget: if feasible { raw.floor() as u64 } else { 0 },
            raw,
            feasible,
        }
    }
}

/// `floor((ln delta + 2 s eps^2) / ln 2 - 1)`.
pub fn max_budget_hoeffding(s: u64, epsilon: f64, delta: f64) -> Result<BudgetBound> {
    check_delta(delta)?;
    Ok(BudgetBound::from_raw(
        (delta.ln() + 2.0 * s as f64 * epsilon * epsilon) / LN_2 - 1.0,
    ))
}

/// `floor(s eps h1(eps / sigma^2) / ln 2 + ln delta / ln 2 - 1)`.
pub fn max_budget_bennett(s: u64, epsilon: f64, sigma: f64, delta: f64) -> Result<BudgetBound> {
    check_delta(delta)?;
    check_sigma(sigma)?;
    let h = h1(epsilon / (sigma * sigma));
    Ok(BudgetBound::from_raw(
        s as f64 * epsilon * h / LN_2 + delta.ln() / LN_2 - 1.0,
    ))
}

/// log2 of `sum_i 2^{c_i}`: outputs of independent sub-runs of which one is
/// kept.
pub fn bet_and_run_states(sub_log2_counts: &[f64]) -> Result<f64> {
    if sub_log2_counts.is_empty() {
        return Err(BboxError::InvalidArgument("no sub-runs given".into()));
    }
    Ok(crate::optimizers::log2_sum_exp2(sub_log2_counts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    OnePlusLambda,
    MuCommaLambda,
    MuPlusLambda,
    De,
    DeCtb,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::OnePlusLambda => "one_plus_lambda",
            StrategyKind::MuCommaLambda => "mu_comma_lambda",
            StrategyKind::MuPlusLambda => "mu_plus_lambda",
            StrategyKind::De => "de",
            StrategyKind::DeCtb => "de_ctb",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = BboxError;

    fn from_str(s: &str) -> Result<Self> {
        [
            StrategyKind::OnePlusLambda,
            StrategyKind::MuCommaLambda,
            StrategyKind::MuPlusLambda,
            StrategyKind::De,
            StrategyKind::DeCtb,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| BboxError::InvalidArgument(format!("unknown strategy kind `{s}`")))
    }
}

fn log2_binomial(n: u64, k: u64) -> f64 {
    match binomial(n, k) {
        Some(c) if c < (1 << 52) => (c as f64).log2(),
        _ => ln_binomial(n, k) / LN_2,
    }
}

/// log2 of the number of reachable states of a population strategy.
///
/// * `one_plus_lambda`: `(lambda + 1)^((b - 1) / lambda)`
/// * `mu_comma_lambda`: `C(lambda, mu)^((b - mu) / lambda)`
/// * `mu_plus_lambda`: `C(lambda + mu, mu)^((b - mu) / lambda)`
/// * `de`, `de_ctb`: `2^b`, `3^b`
pub fn strategy_state_counts(kind: StrategyKind, mu: u64, lambda: u64, budget: u64) -> Result<f64> {
    let b = budget as f64;
    let population = || -> Result<()> {
        if mu == 0 || lambda == 0 || mu > lambda {
            return Err(BboxError::InvalidArgument(format!(
                "need 1 <= mu <= lambda, got mu={mu} lambda={lambda}"
            )));
        }
        if budget < mu {
            return Err(BboxError::InvalidArgument(format!("budget {budget} below mu={mu}")));
        }
        Ok(())
    };
    Ok(match kind {
        StrategyKind::OnePlusLambda => {
            if lambda == 0 || budget == 0 {
                return Err(BboxError::InvalidArgument("lambda and budget must be positive".into()));
            }
            (b - 1.0) / lambda as f64 * ((lambda + 1) as f64).log2()
        }
        StrategyKind::MuCommaLambda => {
            population()?;
            (b - mu as f64) / lambda as f64 * log2_binomial(lambda, mu)
        }
        StrategyKind::MuPlusLambda => {
            population()?;
            (b - mu as f64) / lambda as f64 * log2_binomial(lambda + mu, mu)
        }
        StrategyKind::De => b,
        StrategyKind::DeCtb => b * 3f64.log2(),
    })
}

/// Deviation parameters of a bound query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationSpec {
    pub s: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub sigma: Option<f64>,
}

impl DeviationSpec {
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.s == 0 {
            return Err(BboxError::InvalidArgument("dataset size must be positive".into()));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(BboxError::InvalidArgument("epsilon must be positive".into()));
        }
        check_delta(self.delta)?;
        let mut flags = Vec::new();
        if self.epsilon > 1.0 {
            flags.push("epsilon > 1 for [0,1] losses".to_string());
        }
        if let Some(sigma) = self.sigma {
            check_sigma(sigma)?;
            if sigma * sigma > 0.25 {
                flags.push("sigma^2 > 1/4 for [0,1] losses".to_string());
            }
        }
        Ok(flags)
    }

    pub fn delta_one(&self) -> Result<f64> {
        match self.sigma {
            Some(sigma) => bennett_delta(self.s, self.epsilon, sigma),
            None => Ok(hoeffding_delta(self.s, self.epsilon)),
        }
    }

    pub fn max_budget(&self) -> Result<BudgetBound> {
        match self.sigma {
            Some(sigma) => max_budget_bennett(self.s, self.epsilon, sigma, self.delta),
            None => max_budget_hoeffding(self.s, self.epsilon, self.delta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub spec: DeviationSpec,
    pub delta_one: f64,
    pub state_count_log2: f64,
    pub overfit_risk_raw: f64,
    pub overfit_risk: f64,
    pub vacuous: bool,
    pub max_budget: Option<u64>,
    pub flags: Vec<String>,
}

pub fn bound_report(spec: &DeviationSpec, profile: &BranchingProfile) -> Result<BoundReport> {
    let flags = spec.validate()?;
    let delta_one = spec.delta_one()?;
    let risk = overfit_risk(delta_one, profile)?.selected;
    let budget = spec.max_budget()?;
    Ok(BoundReport {
        spec: *spec,
        delta_one,
        state_count_log2: profile.log2_states,
        overfit_risk_raw: risk.raw,
        overfit_risk: risk.clamped,
        vacuous: risk.vacuous,
        max_budget: budget.feasible.then_some(budget.budget),
        flags,
    })
}

/// The five `s = 8000`, `delta = 1/2` budget examples: one Hoeffding and
/// four Bennett, with their expected integer budgets.
pub fn reference_budget_specs() -> [(DeviationSpec, u64); 5] {
    let spec = |epsilon, sigma| DeviationSpec {
        s: 8000,
        epsilon,
        delta: 0.5,
        sigma,
    };
    [
        (spec(0.01, Some(0.06)), 91),
        (spec(0.04, None), 34),
        (spec(0.04, Some(0.3)), 88),
        (spec(0.06, Some(0.3)), 189),
        (spec(0.1, Some(0.3)), 482),
    ]
}

/// Single-round vote-flip probability bound: `(2k + 1) / sqrt(2 n pi)` as
/// stated, and twice that (sound, since the largest binomial point mass is
/// about `2 / sqrt(2 n pi)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlipBound {
    pub stated: f64,
    pub corrected: f64,
    pub vacuous: bool,
}

pub fn single_round_flip_bound(n: u64, k: u64) -> Result<FlipBound> {
    if n == 0 || k > n {
        return Err(BboxError::InvalidArgument(format!(
            "need n >= 1 and k <= n, got n={n} k={k}"
        )));
    }
    let stated = (2 * k + 1) as f64 / (2.0 * n as f64 * PI).sqrt();
    Ok(FlipBound {
        stated,
        corrected: 2.0 * stated,
        vacuous: stated >= 1.0,
    })
}

/// Union over `b` rounds.
pub fn run_poisoning_bound(b: u64, n: u64, k: u64) -> Result<FlipBound> {
    let one = single_round_flip_bound(n, k)?;
    let stated = b as f64 * one.stated;
    Ok(FlipBound {
        stated,
        corrected: b as f64 * one.corrected,
        vacuous: stated > 1.0,
    })
}

/// `delta` of the (0, delta) differential privacy guarantee: `3b / sqrt(2 n pi)`.
pub fn privacy_delta(b: u64, n: u64) -> Result<f64> {
    Ok(run_poisoning_bound(b, n, 1)?.stated)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn hoeffding_examples() {
        assert_eq!(hoeffding_delta(123, 0.0), 2.0);
        assert!(rel(hoeffding_delta(8000, 0.01), 2.0 * (-1.6f64).exp()) < 1e-15);
        assert!((hoeffding_delta(8000, 0.01) - 0.40379).abs() < 1e-5);
        assert!(hoeffding_delta(9000, 0.01) < hoeffding_delta(8000, 0.01));
    }

    #[test]
    fn h1_values() {
        let e1 = std::f64::consts::E - 1.0;
        assert!(rel(h1(e1), 1.0 / e1) < 1e-14);
        assert!((h1(e1) - 0.58198).abs() < 1e-5);
        assert!(rel(h1(1e-6), 0.5e-6) < 1e-6);
        // both branches agree near the switch
        let l = 1e-3;
        let direct = (1.0 + 1.0 / l) * f64::ln_1p(l) - 1.0;
        assert!(rel(h1(0.999e-3), direct) < 1e-2);
        assert!(rel(h1(l * 0.9999999), h1(l)) < 1e-5);
    }

    #[test]
    fn bennett_exponent() {
        let ln = bennett_ln_delta(8000, 0.01, 0.06).unwrap();
        // exponent s eps h1(eps/sigma^2) ~ 64.6
        assert!((LN_2 - ln - 64.61).abs() < 0.01);
        assert!(bennett_delta(8000, 0.01, 0.0).is_err());
    }

    #[test]
    fn reference_budgets_reproduce() {
        for (spec, expected) in reference_budget_specs() {
            assert_eq!(spec.max_budget().unwrap().budget, expected, "{spec:?}");
        }
    }

    #[test]
    fn infeasible_budgets() {
        let b = max_budget_hoeffding(8000, 0.0, 0.5).unwrap();
        assert!(!b.feasible);
        assert_eq!(b.budget, 0);
        let b = max_budget_bennett(8000, 0.01, 1e6, 0.5).unwrap();
        assert!(!b.feasible);
        assert!(max_budget_hoeffding(8000, 0.04, 0.0).is_err());
        assert!(max_budget_hoeffding(8000, 0.04, 1.5).is_err());
    }

    #[test]
    fn hoeffding_budget_is_linear_in_s() {
        let one = max_budget_hoeffding(8000, 0.04, 0.5).unwrap().raw;
        let two = max_budget_hoeffding(16000, 0.04, 0.5).unwrap().raw;
        assert!(rel(two + 2.0, 2.0 * (one + 2.0)) < 1e-12);
    }

    #[test]
    fn risk_examples() {
        let flat = overfit_risk(0.3, &BranchingProfile::uniform(1, 40)).unwrap();
        assert!(rel(flat.selected.raw, 0.3) < 1e-14);
        let r = corollary_risk(8000, 0.1, &BranchingProfile::uniform(2, 150));
        let direct = 2.0 * (150.0 * LN_2 - 160.0).exp();
        assert!(rel(r.raw, direct) < 1e-12);
        assert!(rel(r.raw, 9.298e-25) < 1e-3);
        assert!(rel(random_search_risk(0.01, 50).raw, 0.5) < 1e-12);
        assert!(
            overfit_risk(0.5, &BranchingProfile::uniform(2, 10))
                .unwrap()
                .selected
                .vacuous
        );
    }

    #[test]
    fn bet_and_run_state_examples() {
        let v = bet_and_run_states(&[50.0; 3]).unwrap();
        assert!((v - 51.58496).abs() < 1e-5);
        assert_eq!(bet_and_run_states(&[17.5]).unwrap(), 17.5);
        assert!(bet_and_run_states(&[]).is_err());
        let geo = BranchingProfile::from_log2(v, 150).avg_branching().unwrap();
        assert!((geo - 1.26918).abs() < 1e-5);
    }

    #[test]
    fn strategy_examples() {
        let s = |k, mu, lambda, b| strategy_state_counts(k, mu, lambda, b).unwrap();
        assert!((s(StrategyKind::OnePlusLambda, 1, 1, 151) - 150.0).abs() < 1e-12);
        assert!((s(StrategyKind::MuCommaLambda, 4, 8, 84) - 10.0 * 70f64.log2()).abs() < 1e-12);
        assert!((s(StrategyKind::MuCommaLambda, 4, 8, 84) - 61.29).abs() < 0.01);
        assert_eq!(s(StrategyKind::De, 0, 0, 100), 100.0);
        assert!((s(StrategyKind::DeCtb, 0, 0, 100) - 158.496).abs() < 1e-3);
        assert!((s(StrategyKind::MuPlusLambda, 2, 4, 10) - 2.0 * 15f64.log2()).abs() < 1e-12);
        assert!("mu_slash_lambda".parse::<StrategyKind>().is_err());
        assert!(strategy_state_counts(StrategyKind::MuCommaLambda, 5, 4, 100).is_err());
    }

    #[test]
    fn average_branching_examples() {
        assert_eq!(BranchingProfile::uniform(2, 30).avg_branching().unwrap(), 2.0);
        assert_eq!(BranchingProfile::uniform(1, 30).avg_branching().unwrap(), 1.0);
        assert!(BranchingProfile::from_factors(&[]).unwrap().avg_branching().is_err());
        assert!(BranchingProfile::from_factors(&[2, 0]).is_err());
    }

    #[test]
    fn flip_bound_examples() {
        let b = single_round_flip_bound(1_000_000, 1).unwrap();
        assert!(rel(b.stated, 1.1968e-3) < 1e-4);
        assert!(single_round_flip_bound(4, 4).unwrap().vacuous);
        let small = single_round_flip_bound(5, 1).unwrap();
        assert!((small.stated - 0.53524).abs() < 1e-5);
        assert!((small.corrected - 1.07047).abs() < 1e-5);
        let run = run_poisoning_bound(150, 1_000_000, 1).unwrap();
        assert!((run.stated - 0.17952).abs() < 1e-5);
        assert_eq!(run_poisoning_bound(0, 10, 1).unwrap().stated, 0.0);
        let twice = run_poisoning_bound(300, 1_000_000, 1).unwrap().stated;
        assert!(rel(twice, 2.0 * run.stated) < 1e-15);
        assert_eq!(privacy_delta(150, 1_000_000).unwrap(), run.stated);
        assert_eq!(privacy_delta(0, 7).unwrap(), 0.0);
    }

    #[test]
    fn sup_over_seeds_takes_the_worst_profile() {
        let p = [BranchingProfile::uniform(2, 10), BranchingProfile::uniform(3, 10)];
        assert_eq!(sup_over_seeds(&p).unwrap(), p[1]);
    }
}
