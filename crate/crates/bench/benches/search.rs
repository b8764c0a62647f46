use criterion::{criterion_group, criterion_main, Criterion};
use handforge_core::hand::{Finger, HandTemplate, ThumbBase};
use handforge_core::kapandji::run_kapandji;
use handforge_core::opposability::{
    evaluate_opposability, sample_workspace, OpposabilityConfig, WorkspaceGrid,
};
use handforge_core::selection::{evaluate_candidate, EvaluationSettings};
use handforge_core::{IkSettings, SiteName};

fn search(c: &mut Criterion) {
    let template = HandTemplate::reference();
    let base = ThumbBase::new(12.0, 2.0, -5.0, 45.0);
    let hand = template.build(base).unwrap();

    let mut group = c.benchmark_group("search");
    group.sample_size(10);
    group.bench_function("sample thumb pulp workspace", |b| {
        b.iter(|| {
            let mut grid = WorkspaceGrid::for_hand(&hand, 2.0).unwrap();
            sample_workspace(&mut grid, &hand, Finger::Thumb, SiteName::Pulp, 3.0).unwrap();
            grid
        })
    });
    group.bench_function("opposability", |b| {
        b.iter(|| evaluate_opposability(&hand, &OpposabilityConfig::default()).unwrap())
    });
    group.bench_function("kapandji test", |b| {
        b.iter(|| run_kapandji(&hand, &IkSettings::default()).unwrap())
    });
    group.bench_function("evaluate one candidate", |b| {
        b.iter(|| evaluate_candidate(&template, base, &EvaluationSettings::default()))
    });
    group.finish();
}

criterion_group!(benches, search);
criterion_main!(benches);
