use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use quasicorr::cyclefunc::{peak_alphabet, random_zero_sum_cycle};
use quasicorr::rng::SeededRng;
use quasicorr::scheme::TAU;
use quasicorr::{bombieri_taylor, generate_patch, preset, sum_as_bragg, HullPoint, Window};
use quasicorr_bench::{fibonacci_patch, fibonacci_table};
use std::hint::black_box;

fn patch_generation(c: &mut Criterion) {
    let s = preset("fibonacci").unwrap();
    let w = Window::interval(0.0, TAU).unwrap();
    let hull = HullPoint::new(vec![0.1], vec![0.3]);
    let mut g = c.benchmark_group("generate_patch");
    for r in [1e3, 1e4] {
        g.bench_with_input(BenchmarkId::from_parameter(r), &r, |b, &r| {
            b.iter(|| generate_patch(&s, &w, &hull, black_box(r)).unwrap())
        });
    }
    g.finish();
}

fn amplitudes(c: &mut Criterion) {
    let p = fibonacci_patch(1e4);
    c.bench_function("bombieri_taylor/1e4", |b| b.iter(|| bombieri_taylor(&p, black_box(&[4.9597])).unwrap()));
}

fn cycles(c: &mut Criterion) {
    let t = fibonacci_table(8.0);
    let alpha = peak_alphabet(&t, 12);
    let mut rng = SeededRng::new(1);
    let words: Vec<_> = (0..64).filter_map(|i| random_zero_sum_cycle(&t, &alpha, 4 + i % 8, &mut rng)).collect();
    c.bench_function("cycle/reduce", |b| {
        b.iter(|| words.iter().map(|w| w.reduce().len()).sum::<usize>())
    });
    let targets: Vec<_> = words.iter().map(|w| &w.entries()[0] + &w.entries()[1]).collect();
    c.bench_function("sum_as_bragg/n2", |b| {
        b.iter(|| targets.iter().filter(|x| sum_as_bragg(&t, x, 2).is_some()).count())
    });
}

criterion_group!(benches, patch_generation, amplitudes, cycles);
criterion_main!(benches);
