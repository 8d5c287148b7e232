use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use wbary_bench::gaussian_instance;
use wbary_core::area_convex::{am_prox, de_config, AmProblem, DeState};
use wbary_core::area_convex::de::de_iteration;
use wbary_core::ibp::{ibp_barycenter, IbpConfig};
use wbary_core::mirror_prox::{mp_config, mp_iteration, MpState, Scaling};
use wbary_core::operator::duality_gap;
use wbary_core::{PrimalPoint, DualPoint, RunOptions};

fn per_iteration(c: &mut Criterion) {
    let mut group = c.benchmark_group("iteration");
    for &n in &[25usize, 50, 100] {
        let prob = gaussian_instance(10, n).unwrap();
        let mp = mp_config(&prob, 0.05, Scaling::Derived).unwrap();
        group.bench_with_input(BenchmarkId::new("mirror_prox", n), &n, |b, _| {
            let mut state = MpState::initial(n, 10);
            b.iter(|| mp_iteration(black_box(&mut state), &mp, &prob).unwrap());
        });
        let de = de_config(&prob, 0.25, Default::default()).unwrap();
        group.bench_with_input(BenchmarkId::new("dual_extrapolation", n), &n, |b, _| {
            let mut state = DeState::initial(n, 10, 1.0).unwrap();
            b.iter(|| de_iteration(black_box(&mut state), &de, &prob).unwrap());
        });
        let x = PrimalPoint::uniform(n, 10);
        let y = DualPoint::zeros(n, 10);
        group.bench_with_input(BenchmarkId::new("duality_gap", n), &n, |b, _| {
            b.iter(|| duality_gap(black_box(&x), &y, &prob).unwrap());
        });
        group.bench_with_input(BenchmarkId::new("am_sweeps_x20", n), &n, |b, _| {
            let am = AmProblem::zeros(n, 10);
            b.iter(|| am_prox(black_box(&am), 20, 1.0).unwrap());
        });
    }
    group.finish();
}

fn ibp_runs(c: &mut Criterion) {
    let prob = gaussian_instance(10, 100).unwrap();
    let mut group = c.benchmark_group("ibp_100_iters");
    group.sample_size(20);
    for stabilized in [false, true] {
        let cfg = IbpConfig::new(0.01, 100, stabilized);
        let opts = RunOptions::new().with_log_stride(100);
        group.bench_function(if stabilized { "log_domain" } else { "kernel" }, |b| {
            b.iter(|| ibp_barycenter(black_box(&prob), &cfg, &opts).unwrap());
        });
    }
    group.finish();
}

criterion_group!(benches, per_iteration, ibp_runs);
criterion_main!(benches);
