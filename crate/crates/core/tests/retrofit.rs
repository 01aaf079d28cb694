use bboxer::bounds::max_budget_hoeffding;
use bboxer::retrofit::{
    candidate_loss, make_toy_model, modified, ClusterConfig, LabeledDataset, Matrix, ModelDims, ModelKind,
    ModifierKind, ModifierSpec, RetrofitOracle, TensorModel,
};
use bboxer::trace::{run_bboxer_observed, ComparisonOracle};
use bboxer::{run_bboxer, AlgorithmId, AlgorithmSpec, Candidate, Comparison, ParamVector};
use proptest::prelude::*;

fn linear(features: usize, classes: usize, seed: u64) -> TensorModel {
    let dims = ModelDims {
        features,
        hidden: 0,
        classes,
    };
    make_toy_model(ModelKind::LinearSoftmax, dims, seed).unwrap()
}

fn mlp(seed: u64) -> TensorModel {
    let dims = ModelDims {
        features: 4,
        hidden: 6,
        classes: 3,
    };
    make_toy_model(ModelKind::Mlp2, dims, seed).unwrap()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || ((a - b) / b.abs().max(a.abs())).abs() <= tol
}

#[test]
fn zero_vector_is_exact_identity() {
    let m = mlp(1);
    for kind in [ModifierKind::Full, ModifierKind::LowRank1, ModifierKind::Broadcast] {
        let spec = ModifierSpec::new(kind, &["layer0", "layer1", "norm0"]);
        let d = spec.dimension(&m).unwrap();
        assert!(modified(&m, &vec![0.0; d], &spec).unwrap().bits_eq(&m), "{kind}");
    }
}

#[test]
fn broadcast_doubles_first_column() {
    let m = linear(4, 3, 2);
    let spec = ModifierSpec::new(ModifierKind::Broadcast, &["weight"]);
    let x = [2f64.ln() / 0.01, 0.0, 0.0, 0.0];
    let out = modified(&m, &x, &spec).unwrap();
    let (w0, w1) = (&m.tensors["weight"], &out.tensors["weight"]);
    for r in 0..w0.rows {
        assert!(rel_close(w1.get(r, 0), 2.0 * w0.get(r, 0), 1e-12));
        for c in 1..w0.cols {
            assert_eq!(w1.get(r, c).to_bits(), w0.get(r, c).to_bits());
        }
    }
}

#[test]
fn broadcast_on_both_mlp_layers_has_expected_dimension() {
    let m = mlp(0);
    let spec = ModifierSpec::new(ModifierKind::Broadcast, &["layer0", "layer1"]);
    assert_eq!(spec.dimension(&m).unwrap(), 4 + 6);
}

proptest! {
    #[test]
    fn modifiers_compose(xs in prop::collection::vec(-50.0f64..50.0, 42), ys in prop::collection::vec(-50.0f64..50.0, 42)) {
        let m = mlp(3);
        for (kind, targets) in [
            (ModifierKind::Full, vec!["layer0", "layer1"]),
            (ModifierKind::Broadcast, vec!["layer0", "layer1", "norm0"]),
        ] {
            let spec = ModifierSpec::new(kind, &targets);
            let d = spec.dimension(&m).unwrap();
            let (x, y) = (&xs[..d], &ys[..d]);
            let sum: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
            let twice = modified(&modified(&m, x, &spec).unwrap(), y, &spec).unwrap();
            let once = modified(&m, &sum, &spec).unwrap();
            for (name, t) in &once.tensors {
                for (a, b) in t.data.iter().zip(&twice.tensors[name].data) {
                    prop_assert!(rel_close(*a, *b, 1e-12), "{} {} vs {}", name, a, b);
                }
            }
        }
    }

    #[test]
    fn initial_model_is_never_mutated(x in prop::collection::vec(-100.0f64..100.0, 15)) {
        let m = mlp(4);
        let snapshot = m.to_json().unwrap();
        let spec = ModifierSpec::new(ModifierKind::Full, &["layer1", "norm0"]);
        for _ in 0..3 {
            let d = spec.dimension(&m).unwrap();
            let _ = modified(&m, &x[..d.min(x.len())], &spec);
        }
        prop_assert_eq!(m.to_json().unwrap(), snapshot);
    }
}

/// Loss reimplemented directly from the tensors.
#[allow(clippy::needless_range_loop)]
fn reference_loss(m: &TensorModel, data: &LabeledDataset) -> f64 {
    let w = &m.tensors["weight"];
    let b = &m.tensors["bias"];
    let mut wrong = 0usize;
    for (x, y) in data.features().iter().zip(data.labels()) {
        let mut best = (f64::NEG_INFINITY, 0usize);
        for c in 0..w.rows {
            let mut s = b.data[c];
            for j in 0..w.cols {
                s += w.data[c * w.cols + j] * x[j];
            }
            if s > best.0 {
                best = (s, c);
            }
        }
        if best.1 != *y {
            wrong += 1;
        }
    }
    wrong as f64 / data.len() as f64
}

#[test]
fn loss_matches_independent_reimplementation() {
    let data = ClusterConfig {
        seed: 7,
        size: 2000,
        ..ClusterConfig::default()
    }
    .generate()
    .unwrap();
    let m = linear(4, 3, 11);
    let loss = m.empirical_loss(&data);
    assert!((loss - reference_loss(&m, &data)).abs() <= 1e-12);
    assert!((0.0..=1.0).contains(&loss));
}

#[test]
fn trivial_losses() {
    // constant majority class on a balanced two-class set
    let data = LabeledDataset::new(vec![vec![1.0], vec![-1.0], vec![2.0], vec![-2.0]], vec![0, 1, 0, 1]).unwrap();
    let mut constant = linear(1, 2, 0);
    constant.tensors.insert("weight".into(), Matrix::filled(2, 1, 0.0));
    assert_eq!(constant.empirical_loss(&data), 0.5);
    let mut separator = constant.clone();
    separator
        .tensors
        .insert("weight".into(), Matrix::new(2, 1, vec![1.0, -1.0]).unwrap());
    assert_eq!(separator.empirical_loss(&data), 0.0);
}

fn oracle_choice(cmp: &Comparison, losses: &[(u64, f64)]) -> u32 {
    bboxer::decide_by_losses(cmp, |c| losses.iter().find(|(k, _)| *k == c.key).unwrap().1)
}

#[test]
fn best_so_far_oracle_decisions() {
    let data = ClusterConfig {
        size: 300,
        ..ClusterConfig::default()
    }
    .generate()
    .unwrap();
    let m = linear(4, 3, 5);
    let spec = ModifierSpec::new(ModifierKind::Broadcast, &["weight"]);
    let mut oracle = RetrofitOracle::new(&m, &spec, &data).unwrap();
    let cand = |key, v: f64| Candidate::new(key, ParamVector::new(vec![v, 0.0, -v, 0.0]).unwrap());
    let loss = |c: &Candidate| candidate_loss(&m, &spec, &data, &c.x).unwrap();
    let cs: Vec<Candidate> = (0..6).map(|i| cand(i + 1, 40.0 * i as f64 - 100.0)).collect();
    let losses: Vec<(u64, f64)> = cs.iter().map(|c| (c.key, loss(c))).collect();
    let pair = Comparison::Pairwise {
        challenger: cs[0].clone(),
        incumbent: cs[1].clone(),
    };
    assert_eq!(oracle.compare(1, &pair).unwrap(), oracle_choice(&pair, &losses));
    let tie = Comparison::Pairwise {
        challenger: cs[2].clone(),
        incumbent: Candidate::new(99, cs[2].x.clone()),
    };
    assert_eq!(oracle.compare(2, &tie).unwrap(), 1);
    let subset = Comparison::SelectSubset {
        candidates: cs.clone(),
        mu: 3,
        ranked: false,
    };
    assert_eq!(oracle.compare(3, &subset).unwrap(), oracle_choice(&subset, &losses));
    // 6 distinct keys plus the tie's twin
    assert_eq!(oracle.evaluations(), 7);
}

#[test]
fn best_so_far_is_monotone_for_every_algorithm() {
    let data = ClusterConfig {
        size: 400,
        ..ClusterConfig::default()
    }
    .generate()
    .unwrap();
    let m = mlp(2);
    let spec = ModifierSpec::new(ModifierKind::Broadcast, &["layer0", "layer1"]);
    let x0 = ParamVector::zeros(spec.dimension(&m).unwrap());
    for id in AlgorithmId::ALL {
        let mut oracle = RetrofitOracle::new(&m, &spec, &data).unwrap();
        let initial = oracle.initial_loss().unwrap();
        let mut steps = 0;
        run_bboxer_observed(&AlgorithmSpec::new(id), &x0, &mut oracle, 60, 1, &mut |_, _| steps += 1).unwrap();
        let h = oracle.best_so_far();
        assert_eq!(h.len(), 60, "{id}");
        assert_eq!(steps, 60);
        assert!(h[0] <= initial);
        assert!(h.windows(2).all(|w| w[1] <= w[0]), "{id}");
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    0.5 * (v[(n - 1) / 2] + v[n / 2])
}

#[test]
fn onefifth_fits_separable_clusters() {
    let data = ClusterConfig {
        size: 600,
        spread: 0.3,
        ..ClusterConfig::default()
    }
    .generate()
    .unwrap();
    let spec = ModifierSpec::new(ModifierKind::Full, &["weight"]);
    let losses: Vec<f64> = (0..10)
        .map(|seed| {
            let m = linear(4, 3, seed);
            let x0 = ParamVector::zeros(spec.dimension(&m).unwrap());
            let mut oracle = RetrofitOracle::new(&m, &spec, &data).unwrap();
            let out = run_bboxer(&AlgorithmSpec::new(AlgorithmId::OneFifth), &x0, &mut oracle, 500, seed).unwrap();
            candidate_loss(&m, &spec, &data, &out.final_x).unwrap()
        })
        .collect();
    assert!(median(losses.clone()) < 0.1, "{losses:?}");
}

#[test]
fn budget_from_bounds_keeps_generalization_gap_small() {
    let (s, eps) = (2000, 0.05);
    let budget = max_budget_hoeffding(s as u64, eps, 0.5).unwrap().budget as usize;
    assert_eq!(budget, 12);
    let mut within = 0;
    let mut learned = 0;
    for seed in 0..20u64 {
        let train = ClusterConfig {
            size: s,
            seed: 1000 + seed,
            ..ClusterConfig::default()
        }
        .generate()
        .unwrap();
        let test = ClusterConfig {
            size: s,
            seed: 5000 + seed,
            ..ClusterConfig::default()
        }
        .generate()
        .unwrap();
        let m = linear(4, 3, seed);
        let spec = ModifierSpec::new(ModifierKind::Full, &["weight"]);
        let x0 = ParamVector::zeros(spec.dimension(&m).unwrap());
        let mut oracle = RetrofitOracle::new(&m, &spec, &train).unwrap();
        let out = run_bboxer(
            &AlgorithmSpec::new(AlgorithmId::OneFifth),
            &x0,
            &mut oracle,
            budget,
            seed,
        )
        .unwrap();
        let fin = modified(&m, &out.final_x, &spec).unwrap();
        let (tr, te) = (fin.empirical_loss(&train), fin.empirical_loss(&test));
        if (tr - te).abs() <= eps {
            within += 1;
        }
        if tr <= m.empirical_loss(&train) {
            learned += 1;
        }
    }
    assert!(within >= 19, "{within}/20 within eps");
    assert!(learned >= 18, "{learned}/20 improved");
}
