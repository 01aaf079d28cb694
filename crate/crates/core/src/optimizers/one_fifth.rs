//! (1+1)-ES with the one-fifth success rule.

use super::common::{check_choice, gaussian, no_pending, not_started, propose_finite, KeyGen};
use super::{AlgorithmId, Optimizer};
use crate::error::Result;
use crate::rng::Stream;
use crate::trace::{Candidate, Comparison, ParamVector};

/// Step-size factor after a failure. Four failures cancel one success.
pub const FAILURE_FACTOR: f64 = 0.840_896_415_253_714_6; // 2^(-1/4)
pub const SUCCESS_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    ChildWins,
    ParentWins,
}

impl Outcome {
    pub fn from_choice(choice: u32) -> Self {
        if choice == 1 {
            Outcome::ChildWins
        } else {
            Outcome::ParentWins
        }
    }
}

/// Applies one comparison outcome to the step size.
pub fn update_sigma(sigma: f64, outcome: Outcome) -> f64 {
    match outcome {
        Outcome::ChildWins => sigma * SUCCESS_FACTOR,
        Outcome::ParentWins => sigma * FAILURE_FACTOR,
    }
}

#[derive(Debug, Clone)]
pub struct OneFifth {
    current: Candidate,
    sigma: f64,
    rng: Stream,
    keys: KeyGen,
    pending: Option<Candidate>,
    told: usize,
    accepted_at: Option<usize>,
}

impl OneFifth {
    pub fn new(initial: &ParamVector, sigma: f64, rng: Stream) -> Self {
        Self {
            current: Candidate::new(0, initial.clone()),
            sigma,
            rng,
            keys: KeyGen::new(),
            pending: None,
            told: 0,
            accepted_at: None,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn current(&self) -> &ParamVector {
        &self.current.x
    }
}

impl Optimizer for OneFifth {
    fn algorithm_id(&self) -> AlgorithmId {
        AlgorithmId::OneFifth
    }

    fn dimension(&self) -> usize {
        self.current.x.dim()
    }

    fn ask(&mut self) -> Result<ParamVector> {
        if let Some(p) = &self.pending {
            return Ok(p.x.clone());
        }
        let (x, sigma, rng) = (&self.current.x, self.sigma, &mut self.rng);
        let proposal = propose_finite(
            || {
                gaussian(rng, x.dim())
                    .into_iter()
                    .zip(x.iter())
                    .map(|(z, xi)| xi + sigma * z)
                    .collect()
            },
            self.told + 1,
        )?;
        let cand = Candidate::new(self.keys.next_key(), proposal);
        self.pending = Some(cand.clone());
        Ok(cand.x)
    }

    fn comparison(&self) -> Result<Comparison> {
        let challenger = self.pending.clone().ok_or_else(no_pending)?;
        Ok(Comparison::Pairwise {
            challenger,
            incumbent: self.current.clone(),
        })
    }

    fn tell(&mut self, choice: u32) -> Result<()> {
        check_choice(choice, 2, self.told + 1)?;
        let child = self.pending.take().ok_or_else(no_pending)?;
        self.told += 1;
        let outcome = Outcome::from_choice(choice);
        if outcome == Outcome::ChildWins {
            self.current = child;
            self.accepted_at = Some(self.told);
        }
        self.sigma = update_sigma(self.sigma, outcome);
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
