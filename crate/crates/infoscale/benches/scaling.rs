//! Compares the batched multiscale computation (data-parallel over
//! scales with the default `parallel` feature) against an explicit
//! sequential per-scale loop. Run with `--no-default-features` to time
//! the fallback path of the batched version as well.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use infoscale::{
    ar_to_ss, arfi_to_ar, multiscale_storage, storage_at_scale, ArfiModel, DEFAULT_FIR_ORDER,
};

fn bench_multiscale(c: &mut Criterion) {
    let model = ArfiModel::from_poles(&[(0.8, 0.1)], 0.4, 1.0).unwrap();
    let q = 50;
    let mut group = c.benchmark_group("multiscale_storage");
    group.sample_size(10);
    for tau_max in [10usize, 25, 50] {
        let taus: Vec<usize> = (1..=tau_max).collect();
        group.bench_with_input(BenchmarkId::new("batched", tau_max), &taus, |b, taus| {
            b.iter(|| multiscale_storage(&model, q, DEFAULT_FIR_ORDER, taus).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", tau_max), &taus, |b, taus| {
            let poly = arfi_to_ar(&model, q);
            let ss = ar_to_ss(&poly, model.sigma2_e()).unwrap();
            b.iter(|| {
                taus.iter()
                    .map(|&tau| storage_at_scale(&ss, DEFAULT_FIR_ORDER, tau).unwrap())
                    .collect::<Vec<_>>()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_multiscale);
criterion_main!(benches);
