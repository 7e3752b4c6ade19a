// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

use std::hint::black_box;

use amp_bench::{certificate, payloads};
use amp_core::amp::{self, CommitRules, Limits};
use amp_core::crypto::SignatureScheme;
use amp_core::types::Height;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn sound_ids(c: &mut Criterion) {
    let mut g = c.benchmark_group("sound_ids");
    for n in [4usize, 16, 31, 64] {
        let (cert, _) = certificate(SignatureScheme::KeyedSha256, n, 64);
        g.bench_with_input(BenchmarkId::from_parameter(n), &cert, |b, cert| {
            b.iter(|| amp::sound_ids(black_box(cert), (n - 1) / 3))
        });
    }
    g.finish();
}

fn valid_commit(c: &mut Criterion) {
    let mut g = c.benchmark_group("valid_commit");
    for (name, scheme) in [
        ("ed25519", SignatureScheme::Ed25519),
        ("keyed-sha256", SignatureScheme::KeyedSha256),
    ] {
        for n in [4usize, 31] {
            let (cert, registry) = certificate(scheme, n, 16);
            let rules = CommitRules::new(&registry, Limits::default());
            g.bench_with_input(BenchmarkId::new(name, n), &cert, |b, cert| {
                b.iter(|| assert!(amp::valid_commit(black_box(cert), Height(2), &rules)))
            });
        }
    }
    g.finish();
}

fn sort(c: &mut Criterion) {
    let mut g = c.benchmark_group("sort");
    for (count, txs) in [(4usize, 16usize), (16, 64), (64, 64)] {
        let ps = payloads(count, txs);
        g.bench_with_input(
            BenchmarkId::new("payloads_x_txs", format!("{count}x{txs}")),
            &ps,
            |b, ps| b.iter(|| amp::sort(black_box(ps))),
        );
    }
    g.finish();
}

criterion_group!(benches, sound_ids, valid_commit, sort);
criterion_main!(benches);
