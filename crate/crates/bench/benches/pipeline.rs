// SPDX-License-Identifier: Apache-2.0

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use blockfuzz::hdl::{critical_path, emit, optimize, DEFAULT_LEVELS};
use blockfuzz::interp::{make_stimulus, simulate};
use blockfuzz::{generate_default, BlockCatalog, Dialect, GenerationConfig};

fn generation(c: &mut Criterion) {
    let cat = BlockCatalog::standard();
    let mut g = c.benchmark_group("generate");
    for n in [35, 100, 200] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            let mut seed = 0;
            b.iter(|| {
                seed += 1;
                generate_default(&GenerationConfig::with_seed(seed, n), &cat).unwrap()
            })
        });
    }
    g.finish();
}

fn lowering(c: &mut Criterion) {
    let cat = BlockCatalog::standard();
    let m = generate_default(&GenerationConfig::with_seed(7, 100), &cat).unwrap();
    c.bench_function("critical_path/100", |b| {
        b.iter(|| critical_path(black_box(&m), &cat))
    });
    c.bench_function("optimize/100", |b| {
        b.iter(|| optimize(black_box(&m), DEFAULT_LEVELS, &cat))
    });
    let mut g = c.benchmark_group("emit/100");
    for d in Dialect::ALL {
        g.bench_function(d.to_string(), |b| {
            b.iter(|| emit(black_box(&m), d, &cat).unwrap())
        });
    }
    g.finish();
}

fn interpretation(c: &mut Criterion) {
    let cat = BlockCatalog::standard();
    let m = generate_default(&GenerationConfig::with_seed(7, 100), &cat).unwrap();
    let s = make_stimulus(&m, &cat, 7, 256);
    c.bench_function("simulate/100x256", |b| {
        b.iter(|| simulate(black_box(&m), &s, &cat))
    });
}

criterion_group!(benches, generation, lowering, interpretation);
criterion_main!(benches);
