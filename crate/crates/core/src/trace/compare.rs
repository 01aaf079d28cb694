use super::combinatorics::{binomial, factorial, rank_permutation, rank_subset};
use super::ParamVector;

/// A point submitted for comparison. `key` is stable for the lifetime of a
/// run so oracles can memoize evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub key: u64,
    pub x: ParamVector,
}

impl Candidate {
    pub fn new(key: u64, x: ParamVector) -> Self {
        Self { key, x }
    }
}

/// What the oracle has to decide at the current step.
///
/// The variant fixes the branching factor `k` and the meaning of each
/// choice. Ties always favor the newer candidate.
#[derive(Debug, Clone, PartialEq)]
pub enum Comparison {
    /// No data-dependent decision; `k = 1`.
    None,
    /// `1`: challenger at least as good as incumbent, `2`: incumbent better.
    Pairwise {
        challenger: Candidate,
        incumbent: Candidate,
    },
    /// `1`: challenger at least as good as `best` (new best),
    /// `2`: at least as good as `parent` but worse than `best`,
    /// `3`: worse than `parent`.
    ThreeWay {
        challenger: Candidate,
        parent: Candidate,
        best: Candidate,
    },
    /// `i`: candidate `i - 1` is the best; ties go to the higher index.
    SelectBest { candidates: Vec<Candidate> },
    /// Choice minus one is the colex rank of the `mu` selected indices,
    /// times `mu!` plus the Lehmer rank of their order when `ranked`.
    SelectSubset {
        candidates: Vec<Candidate>,
        mu: usize,
        ranked: bool,
    },
    /// `p`: the challenger is inserted at position `p - 1` of `ranking`
    /// (best first). With a full ranking, `ranking.len() + 1` means rejected.
    InsertRank {
        challenger: Candidate,
        ranking: Vec<Candidate>,
        capacity: usize,
    },
}

impl Comparison {
    /// Branching factor. Saturates at `u32::MAX`; optimizers validate their
    /// configuration so real comparisons never get there.
    pub fn num_cases(&self) -> u32 {
        let k: u64 = match self {
            Comparison::None => 1,
            Comparison::Pairwise { .. } => 2,
            Comparison::ThreeWay { .. } => 3,
            Comparison::SelectBest { candidates } => candidates.len() as u64,
            Comparison::SelectSubset { candidates, mu, ranked } => {
                subset_cases(candidates.len(), *mu, *ranked).unwrap_or(u64::MAX)
            }
            Comparison::InsertRank { ranking, .. } => ranking.len() as u64 + 1,
        };
        u32::try_from(k).unwrap_or(u32::MAX)
    }

    pub fn candidates(&self) -> Vec<&Candidate> {
        match self {
            Comparison::None => vec![],
            Comparison::Pairwise { challenger, incumbent } => vec![challenger, incumbent],
            Comparison::ThreeWay {
                challenger,
                parent,
                best,
            } => vec![challenger, parent, best],
            Comparison::SelectBest { candidates } | Comparison::SelectSubset { candidates, .. } => {
                candidates.iter().collect()
            }
            Comparison::InsertRank {
                challenger, ranking, ..
            } => std::iter::once(challenger).chain(ranking).collect(),
        }
    }
}

pub(crate) fn subset_cases(lambda: usize, mu: usize, ranked: bool) -> Option<u64> {
    let c = binomial(lambda as u64, mu as u64)?;
    if ranked {
        c.checked_mul(factorial(mu as u64)?)
    } else {
        Some(c)
    }
}

fn key(loss: f64) -> f64 {
    if loss.is_nan() {
        f64::INFINITY
    } else {
        loss
    }
}

/// Reference decision rule for oracles that can score candidates (lower is
/// better). Only the returned choice ever reaches the optimizer.
pub fn decide_by_losses<F>(comparison: &Comparison, mut loss: F) -> u32
where
    F: FnMut(&Candidate) -> f64,
{
    match comparison {
        Comparison::None => 1,
        Comparison::Pairwise { challenger, incumbent } => {
            if key(loss(challenger)) <= key(loss(incumbent)) {
                1
            } else {
                2
            }
        }
        Comparison::ThreeWay {
            challenger,
            parent,
            best,
        } => {
            let c = key(loss(challenger));
            if c <= key(loss(best)) {
                1
            } else if c <= key(loss(parent)) {
                2
            } else {
                3
            }
        }
        Comparison::SelectBest { candidates } => {
            let losses: Vec<f64> = candidates.iter().map(|c| key(loss(c))).collect();
            let mut best = 0;
            for (i, &l) in losses.iter().enumerate() {
                if l <= losses[best] {
                    best = i;
                }
            }
            best as u32 + 1
        }
        Comparison::SelectSubset { candidates, mu, ranked } => {
            let losses: Vec<f64> = candidates.iter().map(|c| key(loss(c))).collect();
            let order = rank_order(&losses);
            let selected = &order[..*mu];
            let mut sorted = selected.to_vec();
            sorted.sort_unstable();
            let mut rank = rank_subset(&sorted);
            if *ranked {
                let perm: Vec<usize> = selected.iter().map(|s| sorted.binary_search(s).unwrap_or(0)).collect();
                rank = rank * factorial(*mu as u64).unwrap_or(1) + rank_permutation(&perm);
            }
            u32::try_from(rank + 1).unwrap_or(u32::MAX)
        }
        Comparison::InsertRank {
            challenger, ranking, ..
        } => {
            let c = key(loss(challenger));
            let ahead = ranking.iter().filter(|r| key(loss(r)) < c).count();
            ahead as u32 + 1
        }
    }
}

/// Indices sorted best first; equal losses put the newer (higher) index first.
pub(crate) fn rank_order(losses: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]).then(b.cmp(&a)));
    order
}

#[cfg(test)]
mod tests {
    use super::super::combinatorics::{unrank_permutation, unrank_subset};
    use super::*;

    fn cand(key: u64, v: f64) -> Candidate {
        Candidate::new(key, ParamVector::new(vec![v]).unwrap())
    }

    fn by_value(c: &Candidate) -> f64 {
        c.x[0]
    }

    #[test]
    fn pairwise_prefers_strictly_better_and_ties_to_challenger() {
        let better = Comparison::Pairwise {
            challenger: cand(1, 0.1),
            incumbent: cand(0, 0.5),
        };
        assert_eq!(decide_by_losses(&better, by_value), 1);
        let tie = Comparison::Pairwise {
            challenger: cand(1, 0.5),
            incumbent: cand(0, 0.5),
        };
        assert_eq!(decide_by_losses(&tie, by_value), 1);
        let worse = Comparison::Pairwise {
            challenger: cand(1, 0.9),
            incumbent: cand(0, 0.5),
        };
        assert_eq!(decide_by_losses(&worse, by_value), 2);
    }

    #[test]
    fn three_way_outcomes() {
        let mk = |c| Comparison::ThreeWay {
            challenger: cand(9, c),
            parent: cand(1, 0.5),
            best: cand(2, 0.2),
        };
        assert_eq!(decide_by_losses(&mk(0.1), by_value), 1);
        assert_eq!(decide_by_losses(&mk(0.2), by_value), 1);
        assert_eq!(decide_by_losses(&mk(0.3), by_value), 2);
        assert_eq!(decide_by_losses(&mk(0.6), by_value), 3);
    }

    #[test]
    fn select_best_tie_goes_to_newer() {
        let c = Comparison::SelectBest {
            candidates: vec![cand(0, 0.3), cand(1, 0.1), cand(2, 0.1)],
        };
        assert_eq!(c.num_cases(), 3);
        assert_eq!(decide_by_losses(&c, by_value), 3);
    }

    #[test]
    fn subset_branching_factors() {
        let cands: Vec<Candidate> = (0..8).map(|i| cand(i, i as f64)).collect();
        let eq = Comparison::SelectSubset {
            candidates: cands.clone(),
            mu: 4,
            ranked: false,
        };
        assert_eq!(eq.num_cases(), 70);
        let ranked = Comparison::SelectSubset {
            candidates: cands,
            mu: 4,
            ranked: true,
        };
        assert_eq!(ranked.num_cases(), 1680);
    }

    // Brute force: sort the synthetic losses by hand, decode the choice and
    // compare against the mu lowest.
    #[test]
    fn subset_choice_decodes_to_mu_lowest() {
        let losses = [0.7, 0.1, 0.9, 0.3, 0.3, 0.05, 0.8, 0.6];
        let cands: Vec<Candidate> = losses.iter().enumerate().map(|(i, &l)| cand(i as u64, l)).collect();
        for ranked in [false, true] {
            let c = Comparison::SelectSubset {
                candidates: cands.clone(),
                mu: 4,
                ranked,
            };
            let choice = decide_by_losses(&c, by_value) - 1;
            let (subset_rank, perm_rank) = if ranked {
                (u64::from(choice) / 24, u64::from(choice) % 24)
            } else {
                (u64::from(choice), 0)
            };
            let subset = unrank_subset(subset_rank, 8, 4);
            // lowest four: 5 (0.05), 1 (0.1), then the tie 3/4 at 0.3 with 4 first, then 3
            assert_eq!(subset, vec![1, 3, 4, 5]);
            if ranked {
                let perm = unrank_permutation(perm_rank, 4);
                let order: Vec<usize> = perm.iter().map(|&p| subset[p]).collect();
                assert_eq!(order, vec![5, 1, 4, 3]);
            }
        }
    }

    #[test]
    fn insert_rank_position() {
        let c = Comparison::InsertRank {
            challenger: cand(9, 0.25),
            ranking: vec![cand(1, 0.1), cand(2, 0.25), cand(3, 0.4)],
            capacity: 3,
        };
        assert_eq!(c.num_cases(), 4);
        // tie with 0.25 goes ahead of the older entry
        assert_eq!(decide_by_losses(&c, by_value), 2);
    }

    #[test]
    fn nan_loss_is_worst() {
        let c = Comparison::Pairwise {
            challenger: cand(1, 0.0),
            incumbent: cand(0, 0.0),
        };
        let choice = decide_by_losses(&c, |cd| if cd.key == 1 { f64::NAN } else { 1.0 });
        assert_eq!(choice, 2);
    }
}
