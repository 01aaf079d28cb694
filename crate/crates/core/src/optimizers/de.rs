//! Differential evolution with binomial crossover.
//!
//! Targets are visited round-robin, one trial per step. `Rand1` compares the
//! trial against its target only (`k = 2`); `CurrentToBest` also tracks the
//! population best and uses a three-way outcome (`k = 3`).

use rand::Rng;

use super::common::{check_choice, gaussian, no_pending, not_started, propose_finite, KeyGen};
use super::{AlgorithmId, Optimizer};
use crate::error::{BboxError, Result};
use crate::rng::Stream;
use crate::trace::{Candidate, Comparison, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeVariant {
    Rand1,
    CurrentToBest,
}

#[derive(Debug, Clone)]
pub struct DeSettings {
    pub population: usize,
    pub f: f64,
    pub cr: f64,
    pub init_scale: f64,
}

impl Default for DeSettings {
    fn default() -> Self {
        Self {
            population: 30,
            f: 0.8,
            cr: 0.5,
            init_scale: 1.0,
        }
    }
}

impl DeSettings {
    fn validate(&self, variant: DeVariant) -> Result<()> {
        let min = match variant {
            DeVariant::Rand1 => 4,
            DeVariant::CurrentToBest => 3,
        };
        if self.population < min {
            return Err(BboxError::Config(format!(
                "population must be at least {min}, got {}",
                self.population
            )));
        }
        if !(0.0..=1.0).contains(&self.cr) {
            return Err(BboxError::Config(format!("cr must lie in [0, 1], got {}", self.cr)));
        }
        if !self.f.is_finite() || !self.init_scale.is_finite() || self.init_scale < 0.0 {
            return Err(BboxError::Config("f and init_scale must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DifferentialEvolution {
    variant: DeVariant,
    settings: DeSettings,
    pop: Vec<Candidate>,
    best: usize,
    best_at: Option<usize>,
    last_improved: Option<(usize, usize)>,
    pending: Option<Candidate>,
    told: usize,
    rng: Stream,
    keys: KeyGen,
}

impl DifferentialEvolution {
    pub fn new(variant: DeVariant, settings: DeSettings, initial: &ParamVector, mut rng: Stream) -> Result<Self> {
        settings.validate(variant)?;
        let mut keys = KeyGen::new();
        let mut pop = vec![Candidate::new(0, initial.clone())];
        for _ in 1..settings.population {
            let x = propose_finite(
                || {
                    gaussian(&mut rng, initial.dim())
                        .into_iter()
                        .zip(initial.iter())
                        .map(|(z, x)| x + settings.init_scale * z)
                        .collect()
                },
                1,
            )?;
            pop.push(Candidate::new(keys.next_key(), x));
        }
        Ok(Self {
            variant,
            settings,
            pop,
            best: 0,
            best_at: None,
            last_improved: None,
            pending: None,
            told: 0,
            rng,
            keys,
        })
    }

    pub fn population(&self) -> &[Candidate] {
        &self.pop
    }

    fn target(&self) -> usize {
        self.told % self.pop.len()
    }

    fn distinct(&mut self, exclude: &[usize], n: usize) -> Vec<usize> {
        let mut picked = Vec::with_capacity(n);
        while picked.len() < n {
            let r = self.rng.random_range(0..self.pop.len());
            if !exclude.contains(&r) && !picked.contains(&r) {
                picked.push(r);
            }
        }
        picked
    }

    fn trial(&mut self) -> Vec<f64> {
        let t = self.target();
        let dim = self.pop[t].x.dim();
        let f = self.settings.f;
        let mutant: Vec<f64> = match self.variant {
            DeVariant::Rand1 => {
                let r = self.distinct(&[t], 3);
                (0..dim)
                    .map(|j| self.pop[r[0]].x[j] + f * (self.pop[r[1]].x[j] - self.pop[r[2]].x[j]))
                    .collect()
            }
            DeVariant::CurrentToBest => {
                let r = self.distinct(&[t], 2);
                let b = self.best;
                (0..dim)
                    .map(|j| {
                        let xt = self.pop[t].x[j];
                        xt + f * (self.pop[b].x[j] - xt) + f * (self.pop[r[0]].x[j] - self.pop[r[1]].x[j])
                    })
                    .collect()
            }
        };
        let jrand = self.rng.random_range(0..dim.max(1));
        (0..dim)
            .map(|j| {
                if j == jrand || self.rng.random::<f64>() < self.settings.cr {
                    mutant[j]
                } else {
                    self.pop[t].x[j]
                }
            })
            .collect()
    }
}

impl Optimizer for DifferentialEvolution {
    fn algorithm_id(&self) -> AlgorithmId {
        match self.variant {
            DeVariant::Rand1 => AlgorithmId::De,
            DeVariant::CurrentToBest => AlgorithmId::DeCtb,
        }
    }

    fn dimension(&self) -> usize {
        self.pop[0].x.dim()
    }

    fn ask(&mut self) -> Result<ParamVector> {
        if let Some(p) = &self.pending {
            return Ok(p.x.clone());
        }
        let mut draw = Vec::new();
        for _ in 0..2 {
            draw = self.trial();
            if draw.iter().all(|v| v.is_finite()) {
                break;
            }
        }
        let x = ParamVector::checked(draw).ok_or(BboxError::NonFinite { step: self.told + 1 })?;
        let cand = Candidate::new(self.keys.next_key(), x);
        self.pending = Some(cand.clone());
        Ok(cand.x)
    }

    fn comparison(&self) -> Result<Comparison> {
        let challenger = self.pending.clone().ok_or_else(no_pending)?;
        let parent = self.pop[self.target()].clone();
        Ok(match self.variant {
            DeVariant::Rand1 => Comparison::Pairwise {
                challenger,
                incumbent: parent,
            },
            DeVariant::CurrentToBest => Comparison::ThreeWay {
                challenger,
                parent,
                best: self.pop[self.best].clone(),
            },
        })
    }

    fn tell(&mut self, choice: u32) -> Result<()> {
        let k = match self.variant {
            DeVariant::Rand1 => 2,
            DeVariant::CurrentToBest => 3,
        };
        check_choice(choice, k, self.told + 1)?;
        let trial = self.pending.take().ok_or_else(no_pending)?;
        let t = self.target();
        self.told += 1;
        match (self.variant, choice) {
            (DeVariant::Rand1, 1) => {
                self.pop[t] = trial;
                self.last_improved = Some((t, self.told));
            }
            (DeVariant::CurrentToBest, 1) => {
                self.pop[t] = trial;
                self.best = t;
                self.best_at = Some(self.told);
            }
            (DeVariant::CurrentToBest, 2) => {
                self.pop[t] = trial;
                if t == self.best {
                    self.best_at = Some(self.told);
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn recommend(&self) -> Result<ParamVector> {
        if self.told == 0 {
            return Err(not_started());
        }
        let idx = match self.variant {
            DeVariant::Rand1 => self.last_improved.map_or(0, |(i, _)| i),
            DeVariant::CurrentToBest => self.best,
        };
        Ok(self.pop[idx].x.clone())
    }

    fn recommendation_index(&self) -> Option<usize> {
        match self.variant {
            DeVariant::Rand1 => self.last_improved.map(|(_, s)| s),
            DeVariant::CurrentToBest => self.best_at,
        }
    }

    fn steps_told(&self) -> usize {
        self.told
    }
}
