//! Discrete-inspired (1+1)-EAs: each coordinate is redrawn from N(0, 1)
//! with a schedule-dependent probability.

use rand::Rng;
use rand_distr::StandardNormal;

use super::common::{check_choice, no_pending, not_started, KeyGen};
use super::{AlgorithmId, Optimizer};
use crate::error::{BboxError, Result};
use crate::rng::Stream;
use crate::trace::{Candidate, Comparison, ParamVector};

pub const DEFAULT_LENGLER_C: f64 = 0.5;
pub const DEFAULT_FASTGA_BETA: f64 = 1.5;
pub const DEFAULT_CROSSOVER: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// Fixed `1/d`.
    Discrete,
    /// `max(1/d, c/(i+1))`.
    Lengler { c: f64 },
    /// Uniform on `(0, 1]`, redrawn every step.
    Portfolio,
    /// `alpha/d` with `P(alpha) ∝ alpha^-beta` on `1..=max(1, d/2)`.
    FastGa { beta: f64 },
}

/// Mutation probability for step `i` (1-based) of `budget` in dimension `dim`.
pub fn schedule_p(schedule: &Schedule, i: usize, budget: usize, dim: usize, rng: &mut Stream) -> f64 {
    let _ = budget;
    let d = dim.max(1) as f64;
    match schedule {
        Schedule::Discrete => 1.0 / d,
        Schedule::Lengler { c } => (c / (i as f64 + 1.0)).max(1.0 / d).min(1.0),
        Schedule::Portfolio => 1.0 - rng.random::<f64>(),
        Schedule::FastGa { beta } => {
            let support = (dim / 2).max(1);
            let alpha = sample_power_law(support, *beta, rng);
            (alpha as f64 / d).min(1.0)
        }
    }
}

fn sample_power_law(support: usize, beta: f64, rng: &mut Stream) -> usize {
    let total: f64 = (1..=support).map(|a| (a as f64).powf(-beta)).sum();
    let mut u = rng.random::<f64>() * total;
    for a in 1..=support {
        u -= (a as f64).powf(-beta);
        if u < 0.0 {
            return a;
        }
    }
    support
}

/// Redraws each coordinate with probability `p`, repeating until the child
/// differs from the parent.
pub fn discrete_mutation(parent: &[f64], p: f64, rng: &mut Stream) -> Vec<f64> {
    loop {
        let child: Vec<f64> = parent
            .iter()
            .map(|&v| {
                if rng.random::<f64>() < p {
                    rng.sample(StandardNormal)
                } else {
                    v
                }
            })
            .collect();
        if differs(&child, parent) {
            return child;
        }
    }
}

fn differs(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).any(|(x, y)| x.to_bits() != y.to_bits())
}

#[derive(Debug, Clone)]
pub struct DiscreteEa {
    id: AlgorithmId,
    schedule: Schedule,
    crossover: Option<f64>,
    budget: usize,
    current: Candidate,
    rng: Stream,
    keys: KeyGen,
    pending: Option<Candidate>,
    told: usize,
    accepted_at: Option<usize>,
}

impl DiscreteEa {
    pub fn new(
        id: AlgorithmId,
        schedule: Schedule,
        crossover: Option<f64>,
        initial: &ParamVector,
        budget: usize,
        rng: Stream,
    ) -> Self {
        Self {
            id,
            schedule,
            crossover,
            budget,
            current: Candidate::new(0, initial.clone()),
            rng,
            keys: KeyGen::new(),
            pending: None,
            told: 0,
            accepted_at: None,
        }
    }

    fn propose(&mut self) -> Vec<f64> {
        let parent = self.current.x.as_slice();
        let p = schedule_p(&self.schedule, self.told + 1, self.budget, parent.len(), &mut self.rng);
        loop {
            let mut child = discrete_mutation(parent, p, &mut self.rng);
            if let Some(rate) = self.crossover {
                for (c, &x) in child.iter_mut().zip(parent) {
                    if self.rng.random::<f64>() < rate {
                        *c = x;
                    }
                }
            }
            if differs(&child, parent) {
                return child;
            }
        }
    }
}

impl Optimizer for DiscreteEa {
    fn algorithm_id(&self) -> AlgorithmId {
        self.id
    }

    fn dimension(&self) -> usize {
        self.current.x.dim()
    }

    fn ask(&mut self) -> Result<ParamVector> {
        if let Some(p) = &self.pending {
            return Ok(p.x.clone());
        }
        // N(0,1) redraws are always finite.
        let x = ParamVector::checked(self.propose()).ok_or(BboxError::NonFinite { step: self.told + 1 })?;
        let cand = Candidate::new(self.keys.next_key(), x);
        self.pending = Some(cand.clone());
        Ok(cand.x)
    }

    fn comparison(&self) -> Result<Comparison> {
        Ok(Comparison::Pairwise {
            challenger: self.pending.clone().ok_or_else(no_pending)?,
            incumbent: self.current.clone(),
        })
    }

    fn tell(&mut self, choice: u32) -> Result<()> {
        check_choice(choice, 2, self.told + 1)?;
        let child = self.pending.take().ok_or_else(no_pending)?;
        self.told += 1;
        if choice == 1 {
            self.current = child;
            self.accepted_at = Some(self.told);
        }
        Ok(())
    }

    fn recommend(&self) -> Result<ParamVector> {
        if self.told == 0 {
            return Err(not_started());
        }
        Ok(self.current.x.clone())
    }

    fn recommendation_index(&self) -> Option<usize> {
        self.accepted_at
    }

    fn steps_told(&self) -> usize {
        self.told
    }
}
