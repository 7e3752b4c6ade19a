// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Payload dissemination: best-effort broadcast from proposers, and
//! validator-to-validator retransmission of decided payloads that a
//! validator is missing.

use std::collections::{BTreeMap, BTreeSet};

use crate::encoding::{tag, Encode, Writer};
use crate::types::{Payload, PayloadId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DisseminationMsg {
    Payload(Payload),
    RetransmitRequest { ids: BTreeSet<PayloadId> },
    RetransmitResponse(Payload),
}

impl DisseminationMsg {
    pub fn kind(&self) -> &'static str {
        match self {
            DisseminationMsg::Payload(_) => "PAYLOAD",
            DisseminationMsg::RetransmitRequest { .. } => "RETRANSMIT_REQUEST",
            DisseminationMsg::RetransmitResponse(_) => "RETRANSMIT_RESPONSE",
        }
    }
}

impl Encode for DisseminationMsg {
    fn encode_to(&self, w: &mut Writer) {
        match self {
            DisseminationMsg::Payload(p) => p.encode_to(w),
            DisseminationMsg::RetransmitRequest { ids } => {
                w.u8(tag::RETRANSMIT_REQUEST);
                w.u32(ids.len() as u32);
                for id in ids {
                    w.digest(&id.0);
                }
            }
            DisseminationMsg::RetransmitResponse(p) => {
                w.u8(tag::RETRANSMIT_RESPONSE);
                p.encode_to(w);
            }
        }
    }
}

/// Which of the requested ids a validator can serve from its store.
pub fn answer_request<'a>(
    ids: &BTreeSet<PayloadId>,
    lookup: impl Fn(&PayloadId) -> Option<&'a Payload>,
) -> Vec<DisseminationMsg> {
    ids.iter()
        .filter_map(lookup)
        .map(|p| DisseminationMsg::RetransmitResponse(p.clone()))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Backoff {
    next_at: u64,
    interval: u64,
}

/// Tracks outstanding retransmission requests. Each id is re-requested from
/// all validators after `2Δ`, then after doubling intervals up to a cap,
/// until the payload arrives.
#[derive(Clone, Debug)]
pub struct Retransmitter {
    initial: u64,
    cap: u64,
    outstanding: BTreeMap<PayloadId, Backoff>,
}

impl Retransmitter {
    /// Cap on the re-request interval, in multiples of Δ.
    pub const CAP_DELTAS: u64 = 32;

    pub fn new(delta: u64) -> Self {
        let delta = delta.max(1);
        Retransmitter {
            initial: 2 * delta,
            cap: Self::CAP_DELTAS * delta,
            outstanding: BTreeMap::new(),
        }
    }

    /// Registers missing ids; returns those not already outstanding, which
    /// should be requested right away.
    pub fn request(
        &mut self,
        ids: impl IntoIterator<Item = PayloadId>,
        now: u64,
    ) -> BTreeSet<PayloadId> {
        let mut fresh = BTreeSet::new();
        for id in ids {
            if let std::collections::btree_map::Entry::Vacant(e) = self.outstanding.entry(id) {
                e.insert(Backoff {
                    next_at: now + self.initial,
                    interval: self.initial,
                });
                fresh.insert(id);
            }
        }
        fresh
    }

    /// Marks an id as received. Returns whether it was outstanding.
    pub fn received(&mut self, id: &PayloadId) -> bool {
        self.outstanding.remove(id).is_some()
    }

    /// Ids whose re-request time has come; their intervals are doubled.
    pub fn due(&mut self, now: u64) -> BTreeSet<PayloadId> {
        let mut ids = BTreeSet::new();
        for (id, b) in self.outstanding.iter_mut() {
            if b.next_at <= now {
                b.interval = (b.interval * 2).min(self.cap);
                b.next_at = now + b.interval;
                ids.insert(*id);
            }
        }
        ids
    }

    pub fn next_deadline(&self) -> Option<u64> {
        self.outstanding.values().map(|b| b.next_at).min()
    }

    pub fn outstanding(&self) -> impl Iterator<Item = &PayloadId> {
        self.outstanding.keys()
    }

    pub fn is_idle(&self) -> bool {
        self.outstanding.is_empty()
    }
}
