//! Rayon pool against a single worker on the main workloads. Build without
//! the `parallel` feature and run `sample_table/1-thread` alone for the
//! plain sequential path.

use std::f64::consts::PI;

use canonsys::forward;
use canonsys::inverse;
use canonsys::model::{normalize_trace, GridConfig};
use canonsys::oracles;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let threads = rayon::current_num_threads();
    let mut out = vec![("1-thread".to_string(), rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap())];
    if threads > 1 {
        out.push((format!("{threads}-threads"), rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()));
    }
    out
}

fn bench(c: &mut Criterion) {
    let (hn, _) = normalize_trace(&oracles::step_fixture(1.2, 1.0).unwrap()).unwrap();
    let a = forward::exponential_type(&hn, hn.ell());
    let mu = forward::spectral_measure(&hn, 200.0).unwrap();
    let cfg = GridConfig::with_samples(a, 128, 200.0, 33, 65).unwrap();

    let mut g = c.benchmark_group("sample_table");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_with_input(BenchmarkId::from_parameter(&name), &pool, |b, pool| {
            b.iter(|| pool.install(|| inverse::sample_table(&mu, mu.herglotz_c, &cfg, 128).unwrap()))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("spectral_measure");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_with_input(BenchmarkId::from_parameter(&name), &pool, |b, pool| {
            b.iter(|| pool.install(|| forward::spectral_measure(&hn, 400.0 * PI).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
