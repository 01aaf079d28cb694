use std::collections::HashSet;

use bboxer::objectives::Objective;
use bboxer::optimizers::{output_bits, output_bits_bound, BetAndRunLayout, EsAccounting};
use bboxer::trace::{replay_choices, ObjectiveOracle, ScriptedOracle};
use bboxer::{
    build_optimizer, deserialize_trace, replay, run_bboxer, serialize_trace, AlgorithmId, AlgorithmSpec, BboxError,
    ParamVector, Trace,
};
use proptest::prelude::*;

fn x0(dim: usize) -> ParamVector {
    ParamVector::filled(dim, 0.7)
}

fn run(spec: &AlgorithmSpec, objective: Objective, dim: usize, budget: usize, seed: u64) -> bboxer::trace::RunOutput {
    let mut oracle = ObjectiveOracle::new(|x: &ParamVector| objective.eval(x.as_slice()));
    run_bboxer(spec, &x0(dim), &mut oracle, budget, seed).unwrap()
}

#[test]
fn replay_reproduces_every_run() {
    for id in AlgorithmId::ALL {
        let spec = AlgorithmSpec::new(id);
        for seed in 0..5 {
            for budget in [10, 150] {
                let out = run(&spec, Objective::Rastrigin, 6, budget, seed);
                let bytes = serialize_trace(&out.trace).unwrap();
                let back = deserialize_trace(&bytes).unwrap();
                assert_eq!(back, out.trace);
                let x = replay(&back, &x0(6)).unwrap();
                assert!(x.bits_eq(&out.final_x), "{id} seed {seed} budget {budget}");
            }
        }
    }
}

#[test]
fn damaged_traces_are_rejected() {
    let spec = AlgorithmSpec::new(AlgorithmId::DeCtb);
    let out = run(&spec, Objective::Sphere, 3, 20, 1);

    let mut short = out.trace.clone();
    short.records.pop();
    assert!(matches!(replay(&short, &x0(3)), Err(BboxError::TruncatedTrace { .. })));

    let mut bad_choice = out.trace.clone();
    bad_choice.records[4].choice = 3;
    bad_choice.records[5].k = 3;
    bad_choice.records[5].choice = 4;
    assert!(matches!(
        replay(&bad_choice, &x0(3)),
        Err(BboxError::CorruptTrace { step: 6, .. })
    ));

    let mut bad_k = out.trace.clone();
    bad_k.records[2].k = 2;
    bad_k.records[2].choice = 1;
    assert!(matches!(
        replay(&bad_k, &x0(3)),
        Err(BboxError::CorruptTrace { step: 3, .. })
    ));

    let mut rng_swap = out.trace.clone();
    rng_swap.rng_id = "pcg64".into();
    assert!(replay(&rng_swap, &x0(3)).is_err());
}

#[test]
fn strictly_increasing_transforms_leave_the_trace_alone() {
    for id in AlgorithmId::ALL {
        let spec = AlgorithmSpec::new(id);
        let mut plain = ObjectiveOracle::new(|x: &ParamVector| Objective::Ellipsoid.eval(x.as_slice()));
        let mut warped = ObjectiveOracle::new(|x: &ParamVector| {
            let f = Objective::Ellipsoid.eval(x.as_slice());
            (f.sqrt() + 3.0).ln()
        });
        let a = run_bboxer(&spec, &x0(4), &mut plain, 80, 2).unwrap();
        let b = run_bboxer(&spec, &x0(4), &mut warped, 80, 2).unwrap();
        assert_eq!(a.trace, b.trace, "{id}");
        assert!(a.final_x.bits_eq(&b.final_x));
    }
}

/// The rule each single optimizer must follow for the `k` at step `t`
/// (0-based) of its own run.
fn expected_k(id: AlgorithmId, dim: usize, t: usize) -> u32 {
    match id {
        AlgorithmId::DeCtb => 3,
        AlgorithmId::Dcma => {
            let s = AlgorithmSpec::new(id).es_settings(dim);
            assert_eq!(s.accounting, EsAccounting::Subset);
            if t % s.lambda == s.lambda - 1 {
                binom(s.lambda as u64, s.mu as u64) as u32
            } else {
                1
            }
        }
        _ => 2,
    }
}

fn binom(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn branching_factors_follow_the_table() {
    let (dim, budget) = (5, 300);
    for id in AlgorithmId::ALL {
        let spec = AlgorithmSpec::new(id);
        for seed in 0..3 {
            let out = run(&spec, Objective::Sphere, dim, budget, seed);
            let ks: Vec<u32> = out.trace.records.iter().map(|r| r.k).collect();
            let bits = output_bits(&out.trace).unwrap();
            let gm = (bits / budget as f64).exp2();
            let bound = output_bits_bound(&spec, budget, dim).unwrap();
            assert!(bits <= bound + 1e-9, "{id}: {bits} > {bound}");
            match id.bet_and_run_parts() {
                None => {
                    for (t, &k) in ks.iter().enumerate() {
                        assert_eq!(k, expected_k(id, dim, t), "{id} seed {seed} step {}", t + 1);
                    }
                    let table = match id {
                        AlgorithmId::DeCtb => 3.0,
                        AlgorithmId::Dcma => {
                            let s = spec.es_settings(dim);
                            (binom(s.lambda as u64, s.mu as u64) as f64).powf(1.0 / s.lambda as f64)
                        }
                        _ => 2.0,
                    };
                    assert!(gm <= table + 1e-9, "{id}: {gm}");
                }
                Some((subs, alpha)) => {
                    let layout = BetAndRunLayout::new(subs.len(), alpha, budget).unwrap();
                    for (i, r) in layout.sub_ranges().into_iter().enumerate() {
                        for (t, g) in r.enumerate() {
                            assert_eq!(ks[g], expected_k(subs[i], dim, t), "{id} sub {i}");
                        }
                    }
                    assert_eq!(ks[layout.selection_index()], subs.len() as u32);
                    let racing: f64 = layout.sub_ranges().iter().map(|r| r.len() as f64).fold(0.0, f64::max);
                    if subs.iter().all(|s| *s == subs[0]) {
                        // sum rule over k racers: at most k * 2^{longest}
                        let racing_bits = bits - layout.finishing_range().len() as f64;
                        assert!(racing_bits <= (subs.len() as f64).log2() + racing + 1e-9, "{id}");
                    }
                }
            }
        }
    }
}

#[test]
fn racing_bound_for_triple_and_multidisc_at_300() {
    // (3 * 2^{b/3})^{1/b} for the racing phase
    for (id, racing_steps) in [(AlgorithmId::MultiDisc, 300usize), (AlgorithmId::Triple, 150)] {
        let spec = AlgorithmSpec::new(id);
        let out = run(&spec, Objective::Sphere, 5, 300, 0);
        let (subs, alpha) = id.bet_and_run_parts().unwrap();
        let layout = BetAndRunLayout::new(subs.len(), alpha, 300).unwrap();
        let racing_bits = output_bits(&out.trace).unwrap() - layout.finishing_range().len() as f64;
        let allowed = 3f64.log2() + racing_steps as f64 / 3.0;
        assert!(racing_bits <= allowed + 1e-9, "{id}: {racing_bits} vs {allowed}");
    }
}

/// Every choice sequence the optimizer accepts, found by re-running prefixes.
fn all_sequences(spec: &AlgorithmSpec, dim: usize, budget: usize) -> Vec<Vec<u32>> {
    let next_k = |prefix: &[u32]| -> u32 {
        let mut opt = build_optimizer(spec, &x0(dim), budget, 9).unwrap();
        for &c in prefix {
            opt.ask().unwrap();
            opt.tell(c).unwrap();
        }
        opt.ask().unwrap();
        opt.comparison().unwrap().num_cases()
    };
    let mut done = Vec::new();
    let mut stack = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        if prefix.len() == budget {
            done.push(prefix);
            continue;
        }
        for c in 1..=next_k(&prefix) {
            let mut p = prefix.clone();
            p.push(c);
            stack.push(p);
        }
    }
    done
}

fn distinct_outputs(spec: &AlgorithmSpec, dim: usize, budget: usize) -> (usize, usize) {
    let seqs = all_sequences(spec, dim, budget);
    let outputs: HashSet<Vec<u8>> = seqs
        .iter()
        .map(|s| replay_choices(spec, &x0(dim), budget, 9, s).unwrap().0.to_le_bytes())
        .collect();
    (seqs.len(), outputs.len())
}

#[test]
fn reachable_outputs_respect_the_counting_bound() {
    let small_es = AlgorithmSpec::new(AlgorithmId::Dcma)
        .set("lambda", 4)
        .unwrap()
        .set("mu", 2)
        .unwrap();
    let cases = [
        (AlgorithmSpec::new(AlgorithmId::OneFifth), 7),
        (AlgorithmSpec::new(AlgorithmId::Discrete), 6),
        (AlgorithmSpec::new(AlgorithmId::De), 6),
        (AlgorithmSpec::new(AlgorithmId::DeCtb), 5),
        (AlgorithmSpec::new(AlgorithmId::Pso), 6),
        (small_es, 8),
        (AlgorithmSpec::new(AlgorithmId::Triple), 8),
        (AlgorithmSpec::new(AlgorithmId::MultiDisc), 7),
    ];
    for (spec, budget) in cases {
        let (sequences, outputs) = distinct_outputs(&spec, 3, budget);
        let bound = output_bits_bound(&spec, budget, 3).unwrap().exp2();
        assert!(outputs as f64 <= bound + 1e-9, "{}: {outputs} > {bound}", spec.id);
        assert!(outputs <= sequences);
        assert!(outputs >= 2, "{}", spec.id);
    }
}

#[test]
fn bet_and_run_collapses_losing_branches() {
    // 3 racers of 1 step, selection, 4 finishing steps: sum rule gives
    // (2 + 2 + 2) * 2^4 = 96 outputs although 2^3 * 3 * 2^4 sequences exist
    let spec = AlgorithmSpec::new(AlgorithmId::Triple);
    let (sequences, outputs) = distinct_outputs(&spec, 3, 8);
    assert_eq!(sequences, 384);
    assert!(outputs <= 96, "{outputs}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn any_choice_sequence_replays(id_index in 0usize..13, seed in 0u64..1000, raw in prop::collection::vec(1u32..50, 30)) {
        let id = AlgorithmId::ALL[id_index];
        let spec = AlgorithmSpec::new(id);
        let mut opt = build_optimizer(&spec, &x0(3), raw.len(), seed).unwrap();
        let mut choices = Vec::new();
        for r in &raw {
            opt.ask().unwrap();
            let k = opt.comparison().unwrap().num_cases();
            let c = (r - 1) % k + 1;
            opt.tell(c).unwrap();
            choices.push(c);
        }
        let expected = opt.recommend().unwrap();
        let out = run_bboxer(&spec, &x0(3), &mut ScriptedOracle::new(choices), raw.len(), seed).unwrap();
        prop_assert!(out.final_x.bits_eq(&expected));
        let trace: Trace = deserialize_trace(&serialize_trace(&out.trace).unwrap()).unwrap();
        prop_assert!(replay(&trace, &x0(3)).unwrap().bits_eq(&expected));
    }
}
