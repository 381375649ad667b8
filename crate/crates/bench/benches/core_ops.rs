use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use tddsynth_bench::{classified, filter, replace_for, traces, tree_pair};
use tddsynth_core::{apply_replace, build_schedule, classify, make_patch, merge_equivalent};

fn scheduling(c: &mut Criterion) {
    let mut g = c.benchmark_group("schedule");
    for tests in [100, 1000] {
        let t = traces(tests, tests / 2, 12, 7);
        let (rdgs, entries) = classified(&t);
        g.bench_with_input(BenchmarkId::from_parameter(tests), &tests, |b, _| {
            b.iter(|| {
                let merged = merge_equivalent(black_box(&entries)).unwrap();
                build_schedule(&merged, &rdgs).unwrap()
            })
        });
    }
    g.finish();
}

fn classification(c: &mut Criterion) {
    let t = traces(200, 400, 40, 11);
    let f = filter();
    c.bench_function("classify/200x40", |b| {
        b.iter(|| {
            t.iter()
                .map(|tr| classify(black_box(tr), &f).classes.len())
                .sum::<usize>()
        })
    });
}

fn patching(c: &mut Criterion) {
    let (old, new) = tree_pair(20, 500);
    c.bench_function("make_patch/20x500", |b| {
        b.iter(|| make_patch(black_box(&old), black_box(&new)))
    });
    let sol = replace_for(&old, &new);
    c.bench_function("apply_replace/20x500", |b| {
        b.iter(|| apply_replace(black_box(&old), black_box(&sol)).unwrap())
    });
}

criterion_group!(benches, scheduling, classification, patching);
criterion_main!(benches);
