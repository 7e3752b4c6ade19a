// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Link delays under partial synchrony, and the relay topology.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Partial-synchrony delay model. Before GST, delays are drawn from a wide
/// range but every message arrives by `gst + 10Δ`; from GST on, delays are
/// uniform in `[1, Δ]`.
#[derive(Clone, Copy, Debug)]
pub struct DelayModel {
    pub gst: u64,
    pub delta: u64,
}

impl DelayModel {
    pub const PRE_GST_HORIZON_DELTAS: u64 = 10;

    /// Delivery time of a message sent at `now` over one link.
    pub fn arrival(&self, now: u64, rng: &mut ChaCha8Rng) -> u64 {
        if now >= self.gst {
            return now + rng.gen_range(1..=self.delta);
        }
        let horizon = self.gst + Self::PRE_GST_HORIZON_DELTAS * self.delta;
        let d = if rng.gen_bool(0.5) {
            rng.gen_range(1..=self.delta)
        } else {
            rng.gen_range(1..=20 * self.delta)
        };
        (now + d).min(horizon).max(now + 1)
    }
}

/// Ring plus random chords over the validators: connected, degree about
/// `2·⌈log₂ n⌉`, diameter `O(log n)` with high probability.
#[derive(Clone, Debug)]
pub struct RelayGraph {
    adjacency: Vec<Vec<usize>>,
    /// `next_hop[a][b]`: neighbor of `a` on a shortest path to `b`.
    next_hop: Vec<Vec<usize>>,
    distance: Vec<Vec<u32>>,
}

impl RelayGraph {
    pub fn new(n: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        let link = |sets: &mut Vec<BTreeSet<usize>>, a: usize, b: usize| {
            if a != b {
                sets[a].insert(b);
                sets[b].insert(a);
            }
        };
        if n > 1 {
            for a in 0..n {
                link(&mut sets, a, (a + 1) % n);
            }
        }
        let chords = ceil_log2(n).saturating_sub(1);
        let others: Vec<usize> = (0..n).collect();
        for a in 0..n {
            for b in others
                .choose_multiple(rng, chords.min(n.saturating_sub(1)) + 1)
                .filter(|b| **b != a)
                .take(chords)
            {
                link(&mut sets, a, *b);
            }
        }
        let adjacency: Vec<Vec<usize>> =
            sets.into_iter().map(|s| s.into_iter().collect()).collect();
        let mut next_hop = vec![vec![usize::MAX; n]; n];
        let mut distance = vec![vec![u32::MAX; n]; n];
        for dst in 0..n {
            // BFS from the destination gives every node's next hop toward it.
            distance[dst][dst] = 0;
            next_hop[dst][dst] = dst;
            let mut queue = VecDeque::from([dst]);
            while let Some(u) = queue.pop_front() {
                for &w in &adjacency[u] {
                    if distance[w][dst] == u32::MAX {
                        distance[w][dst] = distance[u][dst] + 1;
                        next_hop[w][dst] = u;
                        queue.push_back(w);
                    }
                }
            }
        }
        RelayGraph {
            adjacency,
            next_hop,
            distance,
        }
    }

    pub fn neighbors(&self, a: usize) -> &[usize] {
        &self.adjacency[a]
    }

    pub fn next_hop(&self, from: usize, to: usize) -> usize {
        self.next_hop[from][to]
    }

    pub fn distance(&self, from: usize, to: usize) -> u32 {
        self.distance[from][to]
    }

    pub fn diameter(&self) -> u32 {
        self.distance.iter().flatten().copied().max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }
}

pub fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}
