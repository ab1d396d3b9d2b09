use chaoscert::exec::Exec;
use chaoscert::horseshoe::{build_strips_from_flow, certify, periodic_points, CertifyConfig, SearchConfig};
use chaoscert::models::{make_affine_model, make_synthetic_halfperiod, make_two_orbit_layout};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::sync::Arc;

fn modes() -> [(&'static str, Exec); 2] {
    [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)]
}

fn certify_bench(c: &mut Criterion) {
    let mut g = c.benchmark_group("certify");
    g.sample_size(10);
    let (affine, affine_sys) = make_affine_model(0.1).unwrap();
    let (b, b_sys) = make_two_orbit_layout().unwrap();
    for (name, exec) in modes() {
        let cfg = CertifyConfig { exec, n_random_substrips: 16, ..CertifyConfig::default() };
        g.bench_with_input(BenchmarkId::new("affine_A", name), &cfg, |bch, cfg| bch.iter(|| certify(&affine, &affine_sys, cfg)));
        g.bench_with_input(BenchmarkId::new("two_orbit_B", name), &cfg, |bch, cfg| bch.iter(|| certify(&b, &b_sys, cfg)));
    }
    g.finish();
}

fn periodic_bench(c: &mut Criterion) {
    let mut g = c.benchmark_group("periodic_points_n6");
    g.sample_size(10);
    let (map, sys) = make_affine_model(0.1).unwrap();
    for (name, exec) in modes() {
        let cert = certify(&map, &sys, &CertifyConfig { exec, ..CertifyConfig::default() });
        g.bench_function(name, |bch| bch.iter(|| periodic_points(&cert, &map, &sys, 6).unwrap()));
    }
    g.finish();
}

fn strip_search_bench(c: &mut Criterion) {
    let mut g = c.benchmark_group("build_strips_synthetic");
    g.sample_size(10);
    let fam = Arc::new(make_synthetic_halfperiod(0.1).unwrap());
    for (name, exec) in modes() {
        let mut cfg = SearchConfig::default();
        cfg.certify.exec = exec;
        g.bench_function(name, |bch| bch.iter(|| build_strips_from_flow(fam.clone(), &cfg).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, certify_bench, periodic_bench, strip_search_bench);
criterion_main!(benches);
