//! Bet-and-run: independent sub-runs race on equal budgets, one selection
//! step picks the winner, and the winner uses up whatever budget is left.
//!
//! Step layout for `k` sub-runs, `alpha` and budget `b`, with
//! `s = floor(alpha * b / k)` and `r = b - k * s`:
//!
//! * `r >= 1`: sub-runs of `s` steps, the selection step, then `r - 1`
//!   finishing steps.
//! * `r == 0`: the selection step is taken from the last sub-run, which
//!   gets `s - 1` steps.
//!
//! Either way the trace has exactly `b` records.

use std::ops::Range;

use super::common::{check_choice, no_pending, not_started};
use super::{build_optimizer, AlgorithmId, AlgorithmSpec, Optimizer};
use crate::error::{BboxError, Result};
use crate::rng::derive_seed;
use crate::trace::{Candidate, Comparison, ParamVector};

const KEY_SHIFT: u32 = 48;
const SELECTION_NS: u64 = 0xFFFF;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BetAndRunLayout {
    pub sub_budgets: Vec<usize>,
    pub finishing: usize,
}

impl BetAndRunLayout {
    pub fn new(k: usize, alpha: f64, budget: usize) -> Result<Self> {
        if k < 2 {
            return Err(BboxError::Config(format!(
                "bet-and-run needs at least 2 sub-runs, got {k}"
            )));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(BboxError::Config(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        let s = (alpha * budget as f64 / k as f64).floor() as usize;
        if s == 0 {
            return Err(BboxError::Config(format!(
                "sub-run budget floor({alpha}*{budget}/{k}) is zero"
            )));
        }
        let rest = budget - k * s;
        let mut sub_budgets = vec![s; k];
        let finishing = if rest >= 1 {
            rest - 1
        } else {
            if s < 2 {
                return Err(BboxError::Config(format!(
                    "budget {budget} leaves no step for the winner selection"
                )));
            }
            sub_budgets[k - 1] = s - 1;
            0
        };
        Ok(Self { sub_budgets, finishing })
    }

    pub fn k(&self) -> usize {
        self.sub_budgets.len()
    }

    /// 0-based record ranges of the sub-runs.
    pub fn sub_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.sub_budgets
            .iter()
            .map(|&n| {
                let r = start..start + n;
                start += n;
                r
            })
            .collect()
    }

    /// 0-based index of the selection record.
    pub fn selection_index(&self) -> usize {
        self.sub_budgets.iter().sum()
    }

    pub fn finishing_range(&self) -> Range<usize> {
        let start = self.selection_index() + 1;
        start..start + self.finishing
    }

    pub fn total(&self) -> usize {
        self.selection_index() + 1 + self.finishing
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Racing(usize),
    Selection,
    Finishing,
    Done,
}

pub struct BetAndRun {
    id: AlgorithmId,
    layout: BetAndRunLayout,
    specs: Vec<AlgorithmSpec>,
    subs: Vec<Box<dyn Optimizer>>,
    /// Global step number of each local step, per sub-run.
    steps: Vec<Vec<usize>>,
    restart_seed: Option<u64>,
    finisher: Option<(Box<dyn Optimizer>, Vec<usize>)>,
    winner: Option<usize>,
    selection: Option<Vec<Candidate>>,
    told: usize,
}

/// Builds the bet-and-run composite `id`. Sub-run `i` is seeded with
/// `derive_seed(seed, "bet-and-run/sub/{i}")`. With `restart` the finishing
/// phase starts a fresh instance of the winner's algorithm from the winner's
/// recommendation instead of continuing its adapted state.
pub fn bet_and_run(
    id: AlgorithmId,
    alpha: f64,
    restart: bool,
    initial: &ParamVector,
    budget: usize,
    seed: u64,
) -> Result<BetAndRun> {
    let (ids, _) = id
        .bet_and_run_parts()
        .ok_or_else(|| BboxError::Config(format!("`{id}` is not a bet-and-run composite")))?;
    let layout = BetAndRunLayout::new(ids.len(), alpha, budget)?;
    let specs: Vec<AlgorithmSpec> = ids.into_iter().map(AlgorithmSpec::new).collect();
    let mut subs = Vec::with_capacity(specs.len());
    for (i, (spec, &b)) in specs.iter().zip(&layout.sub_budgets).enumerate() {
        let sub_seed = derive_seed(seed, &format!("bet-and-run/sub/{i}"));
        subs.push(build_optimizer(spec, initial, b, sub_seed)?);
    }
    Ok(BetAndRun {
        id,
        steps: vec![Vec::new(); subs.len()],
        subs,
        specs,
        layout,
        restart_seed: restart.then(|| derive_seed(seed, "finish")),
        finisher: None,
        winner: None,
        selection: None,
        told: 0,
    })
}

fn namespaced(cmp: Comparison, ns: u64) -> Comparison {
    let tag = |c: Candidate| Candidate::new((ns << KEY_SHIFT) | c.key, c.x);
    let tag_all = |v: Vec<Candidate>| v.into_iter().map(tag).collect();
    match cmp {
        Comparison::None => Comparison::None,
        Comparison::Pairwise { challenger, incumbent } => Comparison::Pairwise {
            challenger: tag(challenger),
            incumbent: tag(incumbent),
        },
        Comparison::ThreeWay {
            challenger,
            parent,
            best,
        } => Comparison::ThreeWay {
            challenger: tag(challenger),
            parent: tag(parent),
            best: tag(best),
        },
        Comparison::SelectBest { candidates } => Comparison::SelectBest {
            candidates: tag_all(candidates),
        },
        Comparison::SelectSubset { candidates, mu, ranked } => Comparison::SelectSubset {
            candidates: tag_all(candidates),
            mu,
            ranked,
        },
        Comparison::InsertRank {
            challenger,
            ranking,
            capacity,
        } => Comparison::InsertRank {
            challenger: tag(challenger),
            ranking: tag_all(ranking),
            capacity,
        },
    }
}

impl BetAndRun {
    pub fn layout(&self) -> &BetAndRunLayout {
        &self.layout
    }

    pub fn winner(&self) -> Option<usize> {
        self.winner
    }

    pub fn phase(&self) -> Phase {
        let t = self.told;
        let sel = self.layout.selection_index();
        if t < sel {
            let i = self
                .layout
                .sub_ranges()
                .iter()
                .position(|r| r.contains(&t))
                .expect("racing step inside a sub-run");
            Phase::Racing(i)
        } else if t == sel {
            Phase::Selection
        } else if t < self.layout.total() {
            Phase::Finishing
        } else {
            Phase::Done
        }
    }

    /// The optimizer that owns finishing steps, with its namespace.
    fn finishing(&mut self) -> (&mut dyn Optimizer, u64) {
        let w = self.winner.expect("winner chosen before finishing");
        match &mut self.finisher {
            Some((opt, _)) => (opt.as_mut(), self.subs.len() as u64 + 1),
            None => (self.subs[w].as_mut(), w as u64 + 1),
        }
    }

    fn finishing_ref(&self) -> (&dyn Optimizer, u64) {
        let w = self.winner.expect("winner chosen before finishing");
        match &self.finisher {
            Some((opt, _)) => (opt.as_ref(), self.subs.len() as u64 + 1),
            None => (self.subs[w].as_ref(), w as u64 + 1),
        }
    }

    fn select(&mut self, winner: usize) -> Result<()> {
        self.winner = Some(winner);
        if let (Some(seed), true) = (self.restart_seed, self.layout.finishing > 0) {
            let start = self.subs[winner].recommend()?;
            let fresh = build_optimizer(&self.specs[winner], &start, self.layout.finishing, seed)?;
            self.finisher = Some((fresh, Vec::new()));
        }
        Ok(())
    }
}

impl Optimizer for BetAndRun {
    fn algorithm_id(&self) -> AlgorithmId {
        self.id
    }

    fn dimension(&self) -> usize {
        self.subs[0].dimension()
    }

    fn ask(&mut self) -> Result<ParamVector> {
        match self.phase() {
            Phase::Racing(i) => self.subs[i].ask(),
            Phase::Selection => {
                if self.selection.is_none() {
                    let mut cands = Vec::with_capacity(self.subs.len());
                    for (i, sub) in self.subs.iter().enumerate() {
                        cands.push(Candidate::new((SELECTION_NS << KEY_SHIFT) | i as u64, sub.recommend()?));
                    }
                    self.selection = Some(cands);
                }
                Ok(self.selection.as_ref().expect("just set")[0].x.clone())
            }
            Phase::Finishing => self.finishing().0.ask(),
            Phase::Done => Err(BboxError::Protocol("budget exhausted".into())),
        }
    }

    fn comparison(&self) -> Result<Comparison> {
        match self.phase() {
            Phase::Racing(i) => Ok(namespaced(self.subs[i].comparison()?, i as u64 + 1)),
            Phase::Selection => Ok(Comparison::SelectBest {
                candidates: self.selection.clone().ok_or_else(no_pending)?,
            }),
            Phase::Finishing => {
                let (opt, ns) = self.finishing_ref();
                Ok(namespaced(opt.comparison()?, ns))
            }
            Phase::Done => Err(no_pending()),
        }
    }

    fn tell(&mut self, choice: u32) -> Result<()> {
        let step = self.told + 1;
        match self.phase() {
            Phase::Racing(i) => {
                self.subs[i].tell(choice)?;
                self.steps[i].push(step);
            }
            Phase::Selection => {
                check_choice(choice, self.subs.len() as u32, step)?;
                self.selection.take().ok_or_else(no_pending)?;
                self.select((choice - 1) as usize)?;
            }
            Phase::Finishing => {
                self.finishing().0.tell(choice)?;
                let w = self.winner.expect("winner chosen");
                match &mut self.finisher {
                    Some((_, steps)) => steps.push(step),
                    None => self.steps[w].push(step),
                }
            }
            Phase::Done => return Err(BboxError::Protocol("budget exhausted".into())),
        }
        self.told += 1;
        Ok(())
    }

    fn recommend(&self) -> Result<ParamVector> {
        if self.told == 0 {
            return Err(not_started());
        }
        match (self.winner, &self.finisher) {
            (Some(_), Some((opt, _))) if opt.steps_told() > 0 => opt.recommend(),
            (Some(w), _) => self.subs[w].recommend(),
            (None, _) => {
                let last = self.steps.iter().rposition(|s| !s.is_empty()).unwrap_or(0);
                self.subs[last].recommend()
            }
        }
    }

    fn recommendation_index(&self) -> Option<usize> {
        let w = self.winner?;
        let winner_index = || {
            self.subs[w]
                .recommendation_index()
                .map(|local| self.steps[w][local - 1])
        };
        match &self.finisher {
            Some((opt, steps)) if opt.steps_told() > 0 => match opt.recommendation_index() {
                Some(local) => Some(steps[local - 1]),
                None if opt.algorithm_id() == AlgorithmId::Dcma => None,
                None => winner_index(),
            },
            _ => winner_index(),
        }
    }

    fn steps_told(&self) -> usize {
        self.told
    }
}
