// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

use std::hint::black_box;

use amp_core::check::check;
use amp_core::simnet::{measure, run, SimConfig, Topology};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn simulate(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate_10_heights");
    g.sample_size(10);
    for (name, cfg) in [
        ("direct_n4", SimConfig::baseline(4, 1)),
        ("direct_n7", SimConfig::baseline(7, 2)),
        (
            "relay_n16",
            SimConfig {
                topology: Topology::Relay,
                ..SimConfig::baseline(16, 5)
            },
        ),
    ] {
        g.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| run(black_box(cfg)).unwrap())
        });
    }
    g.finish();
}

fn analyze(c: &mut Criterion) {
    let trace = run(&SimConfig::baseline(7, 2)).unwrap();
    c.bench_function("check_n7", |b| b.iter(|| check(black_box(&trace))));
    c.bench_function("measure_n7", |b| {
        b.iter(|| measure(black_box(&trace)).unwrap())
    });
}

criterion_group!(benches, simulate, analyze);
criterion_main!(benches);
