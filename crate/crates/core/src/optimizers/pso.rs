//! Particle swarm. Particles move in turn, one per step.
//!
//! By default the new position is compared with the swarm's global best
//! (`k = 2`): a win makes it both the particle's personal best and the global
//! best, a loss changes nothing. With `gbest_accounting` it is compared with
//! the particle's personal best and the global best (`k = 3`), so personal
//! bests also improve on their own.

use rand::Rng;

use super::common::{check_choice, gaussian, no_pending, not_started, propose_finite, KeyGen};
use super::{AlgorithmId, Optimizer};
use crate::error::{BboxError, Result};
use crate::rng::Stream;
use crate::trace::{Candidate, Comparison, ParamVector};

#[derive(Debug, Clone)]
pub struct PsoSettings {
    pub swarm: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub gbest_accounting: bool,
    pub init_scale: f64,
}

impl Default for PsoSettings {
    fn default() -> Self {
        Self {
            swarm: 40,
            inertia: 0.729,
            cognitive: 1.49,
            social: 1.49,
            gbest_accounting: false,
            init_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
struct Particle {
    position: Vec<f64>,
    velocity: Vec<f64>,
    pbest: Candidate,
}

#[derive(Debug, Clone)]
pub struct ParticleSwarm {
    settings: PsoSettings,
    particles: Vec<Particle>,
    gbest: usize,
    gbest_at: Option<usize>,
    pending: Option<Candidate>,
    told: usize,
    rng: Stream,
    keys: KeyGen,
}

impl ParticleSwarm {
    pub fn new(settings: PsoSettings, initial: &ParamVector, mut rng: Stream) -> Result<Self> {
        if settings.swarm == 0 {
            return Err(BboxError::Config("swarm must be at least 1".into()));
        }
        let coeffs = [
            settings.inertia,
            settings.cognitive,
            settings.social,
            settings.init_scale,
        ];
        if coeffs.iter().any(|c| !c.is_finite()) || settings.init_scale < 0.0 {
            return Err(BboxError::Config("swarm coefficients must be finite".into()));
        }
        let dim = initial.dim();
        let mut keys = KeyGen::new();
        let mut particles = Vec::with_capacity(settings.swarm);
        for i in 0..settings.swarm {
            let pbest = if i == 0 {
                Candidate::new(0, initial.clone())
            } else {
                let x = propose_finite(
                    || {
                        gaussian(&mut rng, dim)
                            .into_iter()
                            .zip(initial.iter())
                            .map(|(z, x)| x + settings.init_scale * z)
                            .collect()
                    },
                    1,
                )?;
                Candidate::new(keys.next_key(), x)
            };
            let velocity = gaussian(&mut rng, dim)
                .into_iter()
                .map(|z| 0.5 * settings.init_scale * z)
                .collect();
            particles.push(Particle {
                position: pbest.x.as_slice().to_vec(),
                velocity,
                pbest,
            });
        }
        Ok(Self {
            settings,
            particles,
            gbest: 0,
            gbest_at: None,
            pending: None,
            told: 0,
            rng,
            keys,
        })
    }

    fn current(&self) -> usize {
        self.told % self.particles.len()
    }

    fn k(&self) -> u32 {
        if self.settings.gbest_accounting {
            3
        } else {
            2
        }
    }

    fn step_particle(&mut self) -> (Vec<f64>, Vec<f64>) {
        let p = self.current();
        let s = &self.settings;
        let part = &self.particles[p];
        let g = &self.particles[self.gbest].pbest.x;
        let mut pos = part.position.clone();
        let mut vel = part.velocity.clone();
        for j in 0..pos.len() {
            let r1: f64 = self.rng.random();
            let r2: f64 = self.rng.random();
            vel[j] =
                s.inertia * vel[j] + s.cognitive * r1 * (part.pbest.x[j] - pos[j]) + s.social * r2 * (g[j] - pos[j]);
            pos[j] += vel[j];
        }
        (pos, vel)
    }
}

impl Optimizer for ParticleSwarm {
    fn algorithm_id(&self) -> AlgorithmId {
        AlgorithmId::Pso
    }

    fn dimension(&self) -> usize {
        self.particles[0].position.len()
    }

    fn ask(&mut self) -> Result<ParamVector> {
        if let Some(c) = &self.pending {
            return Ok(c.x.clone());
        }
        let mut moved = self.step_particle();
        if moved.0.iter().any(|v| !v.is_finite()) {
            moved = self.step_particle();
        }
        let (pos, vel) = moved;
        let x = ParamVector::checked(pos.clone()).ok_or(BboxError::NonFinite { step: self.told + 1 })?;
        let p = self.current();
        self.particles[p].position = pos;
        self.particles[p].velocity = vel;
        let cand = Candidate::new(self.keys.next_key(), x);
        self.pending = Some(cand.clone());
        Ok(cand.x)
    }

    fn comparison(&self) -> Result<Comparison> {
        let challenger = self.pending.clone().ok_or_else(no_pending)?;
        let best = self.particles[self.gbest].pbest.clone();
        Ok(if self.settings.gbest_accounting {
            Comparison::ThreeWay {
                challenger,
                parent: self.particles[self.current()].pbest.clone(),
                best,
            }
        } else {
            Comparison::Pairwise {
                challenger,
                incumbent: best,
            }
        })
    }

    fn tell(&mut self, choice: u32) -> Result<()> {
        check_choice(choice, self.k(), self.told + 1)?;
        let cand = self.pending.take().ok_or_else(no_pending)?;
        let p = self.current();
        self.told += 1;
        let improves_pbest = if self.settings.gbest_accounting {
            choice <= 2
        } else {
            choice == 1
        };
        if improves_pbest {
            self.particles[p].pbest = cand;
        }
        let new_gbest = choice == 1 || (improves_pbest && p == self.gbest);
        if new_gbest {
            self.gbest = p;
            self.gbest_at = Some(self.told);
        }
        Ok(())
    }

    fn recommend(&self) -> Result<ParamVector> {
        if self.told == 0 {
            return Err(not_started());
        }
        Ok(self.particles[self.gbest].pbest.x.clone())
    }

    fn recommendation_index(&self) -> Option<usize> {
        self.gbest_at
    }

    fn steps_told(&self) -> usize {
        self.told
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::trace::decide_by_losses;

    fn sphere(c: &Candidate) -> f64 {
        c.x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn zero_coefficients_freeze_the_swarm() {
        let settings = PsoSettings {
            swarm: 4,
            inertia: 0.0,
            cognitive: 0.0,
            social: 0.0,
            ..PsoSettings::default()
        };
        let init = ParamVector::filled(3, 2.0);
        let mut opt = ParticleSwarm::new(settings, &init, stream(0, "pso")).unwrap();
        let starts: Vec<Vec<f64>> = opt.particles.iter().map(|p| p.position.clone()).collect();
        for step in 0..12 {
            let x = opt.ask().unwrap();
            assert_eq!(x.as_slice(), starts[step % 4].as_slice());
            let choice = decide_by_losses(&opt.comparison().unwrap(), sphere);
            opt.tell(choice).unwrap();
        }
    }

    #[test]
    fn gbest_accounting_uses_three_outcomes() {
        let settings = PsoSettings {
            swarm: 5,
            gbest_accounting: true,
            ..PsoSettings::default()
        };
        let mut opt = ParticleSwarm::new(settings, &ParamVector::zeros(2), stream(1, "pso")).unwrap();
        opt.ask().unwrap();
        assert_eq!(opt.comparison().unwrap().num_cases(), 3);
        assert!(opt.tell(4).is_err());
        opt.tell(3).unwrap();
        assert_eq!(opt.recommendation_index(), None);
    }

    #[test]
    fn recommendation_is_the_global_best() {
        let mut opt = ParticleSwarm::new(PsoSettings::default(), &ParamVector::zeros(2), stream(1, "pso")).unwrap();
        opt.ask().unwrap();
        opt.tell(2).unwrap();
        let x = opt.ask().unwrap();
        opt.tell(1).unwrap();
        opt.ask().unwrap();
        opt.tell(2).unwrap();
        assert!(opt.recommend().unwrap().bits_eq(&x));
        assert_eq!(opt.recommendation_index(), Some(2));
    }
}
