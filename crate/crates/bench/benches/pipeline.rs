use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use pcdiff_bench::{random_cloud, random_dpm};
use pcdiff_core::data::{gen_lines, gen_shapes};
use pcdiff_core::translation::{dpm_decode, dpm_encode, translate};

fn bench_generators(c: &mut Criterion) {
    c.bench_function("gen_lines_100x256", |b| {
        b.iter(|| gen_lines(black_box(100), 256, 1, true).unwrap())
    });
    c.bench_function("gen_shapes_100x256", |b| {
        b.iter(|| gen_shapes(black_box(100), 256, 1, true, 0.05).unwrap())
    });
}

fn bench_translation(c: &mut Criterion) {
    let dpm = random_dpm(64, 5);
    let cloud = random_cloud(256, 3, 7);

    c.bench_function("dpm_encode_T64_N256", |b| {
        b.iter(|| dpm_encode(black_box(&dpm), &cloud, 9).unwrap())
    });

    let (z, enc) = dpm_encode(&dpm, &cloud, 9).unwrap();
    c.bench_function("dpm_decode_T64_N256", |b| {
        b.iter(|| dpm_decode(black_box(&dpm), &z, &enc).unwrap())
    });

    let other = random_dpm(64, 6);
    c.bench_function("translate_T64_N256", |b| {
        b.iter(|| translate(black_box(&dpm), &other, &cloud, 11).unwrap())
    });
}

criterion_group!(benches, bench_generators, bench_translation);
criterion_main!(benches);
