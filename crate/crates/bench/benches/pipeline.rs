use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use torvol_bench::fixture;
use torvol_core::cochain::{build_complex, cohomology};
use torvol_core::mv::{self, Decomposition};
use torvol_core::numlin::{self, CMatrix};
use torvol_core::reps::sample_connected_sum;
use torvol_core::rng;
use torvol_core::symplectic::gram;
use torvol_core::torsion::torsion;

fn sampling(c: &mut Criterion) {
    c.bench_function("sample_connected_sum/k=2", |b| {
        let mut r = rng::seeded(1);
        b.iter(|| sample_connected_sum(2, &mut r).unwrap())
    });
}

fn per_genus(c: &mut Criterion) {
    let mut group = c.benchmark_group("surface");
    for genus in [2usize, 4, 6] {
        let f = fixture(genus, 3);
        group.bench_with_input(BenchmarkId::new("cohomology", genus), &f, |b, f| {
            b.iter(|| cohomology(&build_complex(black_box(&f.rep)).unwrap(), 1e-9).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("torsion", genus), &f, |b, f| {
            b.iter(|| torsion(&f.complex, black_box(&f.coh.reps)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("gram_pfaffian", genus), &f, |b, f| {
            b.iter(|| gram(&f.coh, black_box(&f.rep)).unwrap())
        });
    }
    group.finish();
}

fn pfaffian(c: &mut Criterion) {
    let mut group = c.benchmark_group("pfaffian");
    for n in [6usize, 18, 42] {
        let a = numlin::random_matrix(&mut rng::seeded(n as u64), n, n);
        let w: CMatrix = &a - a.transpose();
        group.bench_with_input(BenchmarkId::from_parameter(n), &w, |b, w| b.iter(|| numlin::pfaffian(w).unwrap()));
    }
    group.finish();
}

fn gluing(c: &mut Criterion) {
    let f = fixture(4, 5);
    let dec = Decomposition::separating(2, 2).unwrap();
    c.bench_function("verify_gluing/separating", |b| {
        let mut r = rng::seeded(2);
        b.iter(|| mv::verify_gluing(&dec, &f.rep, &mut r, 1e-8).unwrap())
    });
    c.bench_function("main_trial/k=2", |b| b.iter(|| mv::run_trial(2, 7, black_box(0)).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = sampling, per_genus, pfaffian, gluing
}
criterion_main!(benches);
