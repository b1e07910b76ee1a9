use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use pcdiff_bench::random_cloud;
use pcdiff_core::kernels::{linear_act, matmul_at_b, Act};
use pcdiff_core::metrics::{chamfer, jsd_sets};
use pcdiff_core::rng::Rng;

fn bench_linear_act(c: &mut Criterion) {
    let (m, k, n) = (16384, 76, 48);
    let mut rng = Rng::new(1);
    let a: Vec<f32> = (0..m * k).map(|_| rng.normal_f32()).collect();
    let b: Vec<f32> = (0..k * n).map(|_| rng.normal_f32()).collect();
    let bias = vec![0.1f32; n];
    let mut out = vec![0.0f32; m * n];
    c.bench_function("linear_act_16384x76x48", |bench| {
        bench.iter(|| {
            linear_act(
                black_box(&a),
                black_box(&b),
                &bias,
                m,
                k,
                n,
                Act::Leaky(0.1),
                &mut out,
            )
        })
    });
    let mut grad = vec![0.0f32; k * n];
    c.bench_function("matmul_at_b_16384x76x48", |bench| {
        bench.iter(|| matmul_at_b(black_box(&a), black_box(&out), m, k, n, &mut grad))
    });
}

fn bench_metrics(c: &mut Criterion) {
    let a = random_cloud(256, 3, 2);
    let b = random_cloud(256, 3, 3);
    c.bench_function("chamfer_256x256", |bench| {
        bench.iter(|| chamfer(black_box(&a), black_box(&b)).unwrap())
    });

    let set_a: Vec<_> = (0..50).map(|i| random_cloud(256, 3, 100 + i)).collect();
    let set_b: Vec<_> = (0..50).map(|i| random_cloud(256, 3, 200 + i)).collect();
    c.bench_function("jsd_sets_50x256_res28", |bench| {
        bench.iter(|| jsd_sets(black_box(&set_a), black_box(&set_b), 28).unwrap())
    });
}

criterion_group!(benches, bench_linear_act, bench_metrics);
criterion_main!(benches);
