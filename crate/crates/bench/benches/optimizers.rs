use bboxer::bounds::{hoeffding_delta, max_budget_bennett, overfit_risk, BranchingProfile};
use bboxer::retrofit::{retrofit, ModelKind, ModifierKind, ModifierSpec};
use bboxer::robustness::exact_flip_prob;
use bboxer::{deserialize_trace, replay, serialize_trace, AlgorithmId, AlgorithmSpec, ParamVector};
use bboxer_bench::{sphere_run, toy_problem};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn ask_tell(c: &mut Criterion) {
    let mut group = c.benchmark_group("sphere_dim10_b300");
    for id in [
        AlgorithmId::OneFifth,
        AlgorithmId::Dcma,
        AlgorithmId::De,
        AlgorithmId::Pso,
        AlgorithmId::Triple,
    ] {
        let spec = AlgorithmSpec::new(id);
        group.bench_with_input(BenchmarkId::from_parameter(id), &spec, |b, spec| {
            b.iter(|| sphere_run(spec, 10, 300, black_box(1)))
        });
    }
    group.finish();
}

fn trace_roundtrip(c: &mut Criterion) {
    let out = sphere_run(&AlgorithmSpec::new(AlgorithmId::Dcma), 10, 1000, 3);
    let bytes = serialize_trace(&out.trace).unwrap();
    let x0 = ParamVector::filled(10, 1.0);
    c.bench_function("trace_serialize_1000", |b| {
        b.iter(|| serialize_trace(black_box(&out.trace)).unwrap())
    });
    c.bench_function("trace_parse_and_replay_1000", |b| {
        b.iter(|| replay(&deserialize_trace(black_box(&bytes)).unwrap(), &x0).unwrap())
    });
}

fn retrofit_loop(c: &mut Criterion) {
    let mut group = c.benchmark_group("retrofit_s2000_b60");
    group.sample_size(20);
    for kind in [ModelKind::LinearSoftmax, ModelKind::Mlp2] {
        let (m0, data) = toy_problem(kind, 2000);
        let targets: &[&str] = match kind {
            ModelKind::LinearSoftmax => &["weight"],
            ModelKind::Mlp2 => &["layer0", "layer1"],
        };
        let modifier = ModifierSpec::new(ModifierKind::Full, targets);
        let spec = AlgorithmSpec::new(AlgorithmId::OneFifth);
        group.bench_function(kind.as_str(), |b| {
            b.iter(|| retrofit(&m0, &modifier, &spec, &data, 60, black_box(0)).unwrap())
        });
    }
    group.finish();
}

fn bounds(c: &mut Criterion) {
    c.bench_function("max_budget_bennett", |b| {
        b.iter(|| max_budget_bennett(black_box(8000), 0.01, 0.06, 0.5).unwrap())
    });
    let profile = BranchingProfile::uniform(2, 150);
    c.bench_function("overfit_risk", |b| {
        b.iter(|| overfit_risk(hoeffding_delta(black_box(8000), 0.1), &profile).unwrap())
    });
    c.bench_function("exact_flip_prob_n10000", |b| {
        b.iter(|| exact_flip_prob(black_box(10_000), 0.5, 1).unwrap())
    });
}

criterion_group!(benches, ask_tell, trace_roundtrip, retrofit_loop, bounds);
criterion_main!(benches);
