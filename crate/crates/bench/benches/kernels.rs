use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lamkit_core::amalgam::{enumerate_amalgam_words, Amalgam};
use lamkit_core::curves::derive_intersection_matrix;
use lamkit_core::dynamics::{
    iterate, min_pairwise_distance, sample_weights, uniform_angles, CircleChart,
};
use lamkit_core::flat_surface::{build_double_polygon, cylinder_decomposition, Direction};
use lamkit_core::obstruction::genericity_sample;
use lamkit_core::real::Precision;

fn surfaces(c: &mut Criterion) {
    let p = Precision::default();
    let mut group = c.benchmark_group("surface");
    for g in [2usize, 4, 6] {
        group.bench_with_input(BenchmarkId::new("build", g), &g, |b, &g| {
            b.iter(|| build_double_polygon(black_box(g), p).unwrap())
        });
        let s = build_double_polygon(g, p).unwrap();
        group.bench_with_input(BenchmarkId::new("vertical_cylinders", g), &s, |b, s| {
            b.iter(|| cylinder_decomposition(black_box(s), Direction::Vertical).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("intersection_matrix", g), &s, |b, s| {
            b.iter(|| derive_intersection_matrix(black_box(s)).unwrap())
        });
    }
    group.finish();
}

fn dynamics(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w = sample_weights(&mut rng, 5, 3);
    c.bench_function("iterate_1e4_n5", |b| {
        b.iter(|| iterate(black_box(&w), 10_000).unwrap())
    });

    let p = Precision::default();
    let chart = CircleChart::new(&build_double_polygon(3, p).unwrap()).unwrap();
    let angles = uniform_angles(180, p);
    c.bench_function("circle_map_180_pairwise", |b| {
        b.iter(|| min_pairwise_distance(black_box(&chart), &angles).unwrap())
    });
    c.bench_function("genericity_g4_1000", |b| {
        b.iter(|| genericity_sample(4, 1000, black_box(3), None, p).unwrap())
    });
}

fn amalgam(c: &mut Criterion) {
    let g = Amalgam::for_genus(2).unwrap();
    let words = enumerate_amalgam_words(2, 1, 3);
    c.bench_function("britton_reduce_small_words", |b| {
        b.iter(|| {
            words
                .iter()
                .map(|w| g.britton_reduce(black_box(w)).len())
                .sum::<usize>()
        })
    });
}

criterion_group!(benches, surfaces, dynamics, amalgam);
criterion_main!(benches);
