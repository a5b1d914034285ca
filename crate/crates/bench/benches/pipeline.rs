use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;
use trade_topology::hclust::average_linkage;
use trade_topology::metrics::ccc_of_network;
use trade_topology::shockprop::run_to_steady;
use trade_topology::stats::ks_exact;
use trade_topology::{CondensedDistances, CountryCode, EconomyState, ShockConfig, TradeNetwork};

fn codes(n: usize) -> Vec<CountryCode> {
    (0..n)
        .map(|i| {
            format!(
                "{}{}X",
                (b'A' + (i / 26) as u8) as char,
                (b'A' + (i % 26) as u8) as char
            )
            .parse()
            .unwrap()
        })
        .collect()
}

fn symmetric(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.random_range(0.0..1e9);
            w[i * n + j] = v;
            w[j * n + i] = v;
        }
    }
    w
}

fn linkage(c: &mut Criterion) {
    let mut group = c.benchmark_group("average_linkage");
    for n in [50, 100, 200] {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let vals: Vec<f64> = (0..n * (n - 1) / 2)
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        let d = CondensedDistances::new(n, vals).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &d, |b, d| {
            b.iter(|| average_linkage(black_box(d)))
        });
    }
    group.finish();
}

fn ccc(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 150;
    let net = TradeNetwork::from_dense(2000, codes(n), symmetric(&mut rng, n)).unwrap();
    c.bench_function("ccc_of_network/150", |b| {
        b.iter(|| ccc_of_network(black_box(&net)))
    });
}

fn shock(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 50;
    let gdp: Vec<f64> = (0..n).map(|_| rng.random_range(50.0..150.0)).collect();
    let trade = symmetric(&mut rng, n);
    let scale = 0.25 * gdp.iter().sum::<f64>() / trade.iter().sum::<f64>();
    let exports: Vec<f64> = trade.iter().map(|w| w * scale).collect();
    let names = codes(n);
    let state = EconomyState::new(names.clone(), gdp, exports).unwrap();
    let config = ShockConfig::new(names[0].clone(), 0.054);
    c.bench_function("run_to_steady/50", |b| {
        b.iter(|| run_to_steady(black_box(&state), &config))
    });
}

fn ks(c: &mut Criterion) {
    let a = [0.61, 0.72, 0.55, 0.80, 0.67, 0.59, 0.74];
    let b = [0.70, 0.83, 0.66, 0.91, 0.77, 0.69, 0.85];
    c.bench_function("ks_exact/7v7", |bench| {
        bench.iter(|| ks_exact(black_box(&a), black_box(&b)))
    });
}

criterion_group!(benches, linkage, ccc, shock, ks);
criterion_main!(benches);
