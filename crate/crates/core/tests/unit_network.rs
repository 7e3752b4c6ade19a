// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Unit tests for `amp_core::simnet::network`.

use amp_core::simnet::network::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn post_gst_delays_are_bounded_by_delta() {
    let m = DelayModel {
        gst: 100,
        delta: 10,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for now in 100..400 {
        let d = m.arrival(now, &mut rng) - now;
        assert!((1..=10).contains(&d));
    }
}

#[test]
fn pre_gst_delays_respect_the_horizon() {
    let m = DelayModel {
        gst: 1000,
        delta: 10,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut long = 0;
    for now in 0..1000 {
        let at = m.arrival(now, &mut rng);
        assert!(at > now && at <= 1100);
        if at - now > 10 {
            long += 1;
        }
    }
    assert!(long > 100, "pre-GST delays should often exceed delta");
}

#[test]
fn relay_graph_is_connected_with_logarithmic_diameter() {
    for n in [1usize, 2, 4, 8, 16, 31, 64] {
        let g = RelayGraph::new(n, &mut ChaCha8Rng::seed_from_u64(n as u64));
        let dia = g.diameter();
        assert!(dia < u32::MAX, "n={n} disconnected");
        assert!(
            dia as usize <= 2 * ceil_log2(n).max(1),
            "n={n} diameter {dia}"
        );
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    let h = g.next_hop(a, b);
                    assert!(g.neighbors(a).contains(&h));
                    assert_eq!(g.distance(h, b) + 1, g.distance(a, b));
                }
            }
        }
    }
}

#[test]
fn ceil_log2_values() {
    assert_eq!(
        [1, 2, 3, 4, 5, 8, 9, 31].map(ceil_log2),
        [0, 1, 2, 2, 3, 3, 4, 5]
    );
}
