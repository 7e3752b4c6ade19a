// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Latency and message-complexity measurement over a complete trace.
//!
//! Latency is reported as a raw causal chain per (validator, finalized
//! payload): the sequence of message deliveries, each enabling the next,
//! from the payload's dissemination to the decision that finalized it:
//!
//! 1. `PAYLOAD` delivered to an attester,
//! 2. the attester's `PRECOMMIT` of height `H-1` (carrying the id) delivered to the assembler of `H`,
//! 3. the assembler's `PROPOSAL` of `H` delivered to a prevoter,
//! 4. that `PREVOTE` delivered to a precommitter,
//! 5. that `PRECOMMIT` of `H` delivered to the finalizing validator,
//!
//! plus `RETRANSMIT_REQUEST` and `RETRANSMIT_RESPONSE` when the finalizing
//! validator had to fetch the payload.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::consensus::assembler_for;
use crate::encoding::Decode;
use crate::types::*;

use super::trace::{Event, MsgKind, Trace, Via};

#[derive(Debug, thiserror::Error)]
pub enum MeasureError {
    #[error("trace is incomplete: {0}")]
    Incomplete(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainStep {
    pub label: String,
    pub uid: u64,
    pub from: NodeId,
    pub to: NodeId,
    pub sent: u64,
    pub delivered: u64,
    pub hops: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepChain {
    pub validator: ValidatorId,
    pub height: Height,
    pub payload_id: PayloadId,
    /// The payload reached every correct validator before it cast its
    /// precommit at `height - 1`.
    pub early: bool,
    pub retransmitted: bool,
    /// Empty when no complete causal chain was found.
    pub steps: Vec<ChainStep>,
}

impl StepChain {
    /// Number of steps, or `None` when no complete chain was found.
    pub fn step_count(&self) -> Option<usize> {
        (!self.steps.is_empty()).then_some(self.steps.len())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeightMetrics {
    pub height: u64,
    pub decide_round: Option<u32>,
    /// Median chain length over payloads finalized at this height.
    pub steps_to_finalize: Option<u32>,
    pub msgs: u64,
    pub bytes: u64,
    pub payloads_finalized: u64,
    /// Transactions appearing more than once in the block.
    pub duplicates: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub heights: Vec<HeightMetrics>,
    pub chains: Vec<StepChain>,
    /// Per message kind: (messages, bytes), over all heights.
    pub by_kind: BTreeMap<MsgKind, (u64, u64)>,
    /// Mean link-level messages per height over heights `1..=max_heights`.
    pub messages_per_height: f64,
    pub bytes_per_height: f64,
}

impl ComplexityReport {
    pub fn median_steps(&self) -> Option<u32> {
        median(
            self.chains
                .iter()
                .filter_map(|c| c.step_count().map(|l| l as u32))
                .collect(),
        )
    }
}

fn median(mut v: Vec<u32>) -> Option<u32> {
    if v.is_empty() {
        return None;
    }
    v.sort_unstable();
    Some(v[v.len() / 2])
}

#[derive(Clone, Copy)]
struct Cast {
    node: NodeId,
    t: u64,
}

/// (time, uid, value) of a prevote.
type PrevoteAt = (u64, u64, Option<ValueId>);
/// (time, uid, value, extension ids) of a precommit.
type PrecommitAt<'t> = (u64, u64, Option<ValueId>, Option<&'t Vec<PayloadId>>);

/// Indexes over the trace used to reconstruct chains.
struct Index<'t> {
    n: usize,
    cast: BTreeMap<u64, Cast>,
    /// (recipient, uid) → (first delivery time, link sender, hops).
    delivered: BTreeMap<(NodeId, u64), (u64, NodeId, u32)>,
    propose: BTreeMap<(Height, Round), (NodeId, u64, u64)>,
    prevote: BTreeMap<(NodeId, Height, Round), PrevoteAt>,
    precommit: BTreeMap<(NodeId, Height, Round), PrecommitAt<'t>>,
    quorum: BTreeMap<(NodeId, Height), u64>,
    accepted: BTreeMap<(NodeId, PayloadId), (u64, Via)>,
    requests: Vec<(NodeId, u64, u64, &'t Vec<PayloadId>)>,
    responds: Vec<(NodeId, u64, u64, NodeId, PayloadId)>,
}

impl<'t> Index<'t> {
    fn build(trace: &'t Trace) -> Self {
        let mut ix = Index {
            n: trace.header.config.n,
            cast: BTreeMap::new(),
            delivered: BTreeMap::new(),
            propose: BTreeMap::new(),
            prevote: BTreeMap::new(),
            precommit: BTreeMap::new(),
            quorum: BTreeMap::new(),
            accepted: BTreeMap::new(),
            requests: Vec::new(),
            responds: Vec::new(),
        };
        for rec in &trace.records {
            let (node, t) = (rec.node, rec.t);
            let c = Cast { node, t };
            match &rec.event {
                Event::Deliver {
                    from, uid, hops, ..
                } => {
                    ix.delivered
                        .entry((node, *uid))
                        .or_insert((t, *from, *hops));
                }
                Event::Propose { uid, h, r, .. } => {
                    ix.cast.insert(*uid, c);
                    ix.propose.entry((*h, *r)).or_insert((node, *uid, t));
                }
                Event::Prevote {
                    uid,
                    h,
                    r,
                    value_id,
                } => {
                    ix.cast.insert(*uid, c);
                    ix.prevote.insert((node, *h, *r), (*uid, t, *value_id));
                }
                Event::Precommit {
                    uid,
                    h,
                    r,
                    value_id,
                    ids,
                } => {
                    ix.cast.insert(*uid, c);
                    ix.precommit
                        .insert((node, *h, *r), (*uid, t, *value_id, ids.as_ref()));
                }
                Event::Broadcast { uid, .. } => {
                    ix.cast.insert(*uid, c);
                }
                Event::Request { uid, ids } => {
                    ix.cast.insert(*uid, c);
                    ix.requests.push((node, *uid, t, ids));
                }
                Event::Respond {
                    uid,
                    to,
                    payload_id,
                } => {
                    ix.cast.insert(*uid, c);
                    ix.responds.push((node, *uid, t, *to, *payload_id));
                }
                Event::Quorum { h, .. } => {
                    ix.quorum.entry((node, *h)).or_insert(t);
                }
                Event::PayloadAccepted {
                    payload_id, via, ..
                } => {
                    ix.accepted.entry((node, *payload_id)).or_insert((t, *via));
                }
                _ => {}
            }
        }
        ix
    }

    fn step(&self, label: &str, uid: u64, to: NodeId) -> Option<ChainStep> {
        let cast = self.cast.get(&uid)?;
        let (delivered, _, hops) = *self.delivered.get(&(to, uid))?;
        Some(ChainStep {
            label: label.to_string(),
            uid,
            from: cast.node,
            to,
            sent: cast.t,
            delivered,
            hops,
        })
    }

    /// The earliest delivery to `to`, no later than `deadline`, of a
    /// broadcast carrying `payload`.
    fn payload_step(
        &self,
        to: NodeId,
        payload: PayloadId,
        deadline: u64,
        uid_of: &BTreeMap<PayloadId, Vec<u64>>,
    ) -> Option<ChainStep> {
        uid_of
            .get(&payload)?
            .iter()
            .filter_map(|u| self.step("PAYLOAD", *u, to))
            .filter(|s| s.delivered <= deadline)
            .min_by_key(|s| s.delivered)
    }

    #[allow(clippy::too_many_arguments)]
    fn chain(
        &self,
        v: NodeId,
        h: Height,
        r_d: Round,
        x: ValueId,
        value: &CertValue,
        p: PayloadId,
        payload_uids: &BTreeMap<PayloadId, Vec<u64>>,
    ) -> Vec<ChainStep> {
        let Some(cert) = value.as_commit() else {
            return Vec::new();
        };
        let assembler = NodeId::Validator(assembler_for(h, r_d, self.n));
        let Some(&(_, prop_uid, prop_t)) = self.propose.get(&(h, r_d)) else {
            return Vec::new();
        };
        let quorum_t = self.quorum.get(&(v, h)).copied().unwrap_or(u64::MAX);

        // Steps 1-2: an attester other than the assembler had the payload
        // before precommitting, and its precommit reached the assembler
        // before the proposal was cast.
        let attesters = cert
            .precommits
            .iter()
            .filter(|pc| pc.extension.as_ref().is_some_and(|e| e.ids.contains(&p)))
            .map(|pc| NodeId::Validator(pc.signer))
            .filter(|a| *a != assembler);
        let mut head = None;
        for a in attesters {
            let Some(&(pc_uid, pc_t, _, _)) = self.precommit.get(&(a, cert.height, cert.round))
            else {
                continue;
            };
            let Some(s2) = self
                .step("PRECOMMIT(h-1)", pc_uid, assembler)
                .filter(|s| s.delivered <= prop_t)
            else {
                continue;
            };
            let Some(s1) = self.payload_step(a, p, pc_t, payload_uids) else {
                continue;
            };
            head = Some((s1, s2));
            break;
        }
        let Some((s1, s2)) = head else {
            return Vec::new();
        };

        // Steps 3-5.
        let mut tail = None;
        'outer: for b in (0..self.n as u32)
            .map(NodeId::validator)
            .filter(|b| *b != assembler)
        {
            let Some(&(pv_uid, pv_t, Some(pv))) = self.prevote.get(&(b, h, r_d)) else {
                continue;
            };
            if pv != x {
                continue;
            }
            let Some(s3) = self
                .step("PROPOSAL", prop_uid, b)
                .filter(|s| s.delivered <= pv_t)
            else {
                continue;
            };
            for c in (0..self.n as u32)
                .map(NodeId::validator)
                .filter(|c| *c != b && *c != v)
            {
                let Some(&(pc_uid, pc_t, Some(pcv), _)) = self.precommit.get(&(c, h, r_d)) else {
                    continue;
                };
                if pcv != x {
                    continue;
                }
                let Some(s4) = self
                    .step("PREVOTE", pv_uid, c)
                    .filter(|s| s.delivered <= pc_t)
                else {
                    continue;
                };
                let Some(s5) = self
                    .step("PRECOMMIT(h)", pc_uid, v)
                    .filter(|s| s.delivered <= quorum_t)
                else {
                    continue;
                };
                tail = Some((s3, s4, s5));
                break 'outer;
            }
        }
        let Some((s3, s4, s5)) = tail else {
            return Vec::new();
        };
        let mut steps = vec![s1, s2, s3, s4, s5];

        if let Some((_, Via::Retransmit)) = self.accepted.get(&(v, p)) {
            let resp = self
                .responds
                .iter()
                .filter(|(_, _, _, to, id)| *to == v && *id == p)
                .filter_map(|(w, uid, t, _, _)| {
                    Some((*w, *t, self.step("RETRANSMIT_RESPONSE", *uid, v)?))
                })
                .min_by_key(|(_, _, s)| s.delivered);
            let Some((w, resp_t, s7)) = resp else {
                return Vec::new();
            };
            let req = self
                .requests
                .iter()
                .filter(|(node, _, _, ids)| *node == v && ids.contains(&p))
                .filter_map(|(_, uid, _, _)| self.step("RETRANSMIT_REQUEST", *uid, w))
                .filter(|s| s.delivered <= resp_t)
                .max_by_key(|s| s.delivered);
            let Some(s6) = req else { return Vec::new() };
            steps.push(s6);
            steps.push(s7);
        }
        steps
    }
}

pub fn measure(trace: &Trace) -> Result<ComplexityReport, MeasureError> {
    if !trace.is_complete() {
        return Err(MeasureError::Incomplete(
            trace
                .footer
                .reason
                .clone()
                .unwrap_or_else(|| "unknown".into()),
        ));
    }
    let max_h = trace.header.config.max_heights;
    let correct: BTreeSet<NodeId> = trace
        .header
        .correct_validators
        .iter()
        .map(|v| NodeId::Validator(*v))
        .collect();
    let ix = Index::build(trace);

    let mut msgs: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    let mut by_kind: BTreeMap<MsgKind, (u64, u64)> = BTreeMap::new();
    let mut payload_uids: BTreeMap<PayloadId, Vec<u64>> = BTreeMap::new();
    for rec in &trace.records {
        match &rec.event {
            Event::Send { msg, bytes, h, .. } => {
                let e = msgs.entry(*h).or_default();
                e.0 += 1;
                e.1 += bytes;
                let k = by_kind.entry(*msg).or_default();
                k.0 += 1;
                k.1 += bytes;
            }
            Event::Broadcast {
                uid, payload_id, ..
            } => payload_uids.entry(*payload_id).or_default().push(*uid),
            _ => {}
        }
    }

    let mut chains = Vec::new();
    let mut decide_round: BTreeMap<u64, u32> = BTreeMap::new();
    let mut finalized: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    let mut decides: BTreeMap<(NodeId, Height), (Round, ValueId, CertValue)> = BTreeMap::new();
    for rec in &trace.records {
        if !correct.contains(&rec.node) {
            continue;
        }
        match &rec.event {
            Event::Decide {
                h,
                r,
                value_id,
                value,
                ..
            } => {
                decide_round.entry(h.0).or_insert(r.0);
                let v = CertValue::decode(value).unwrap_or(CertValue::Empty);
                decides.insert((rec.node, *h), (*r, *value_id, v));
            }
            Event::Finalize {
                h,
                payload_ids,
                txs,
                ..
            } => {
                let dup = txs.len() as u64 - txs.iter().collect::<BTreeSet<_>>().len() as u64;
                finalized
                    .entry(h.0)
                    .or_insert((payload_ids.len() as u64, dup));
                let Some((r_d, x, value)) = decides.get(&(rec.node, *h)) else {
                    continue;
                };
                let v_id = rec.node.as_validator().expect("validator");
                for p in payload_ids {
                    let steps = ix.chain(rec.node, *h, *r_d, *x, value, *p, &payload_uids);
                    let early = h.0 >= 2
                        && correct.iter().all(|c| {
                            let Some((t, Via::Broadcast)) = ix.accepted.get(&(*c, *p)) else {
                                return false;
                            };
                            let prev = Height(h.0 - 1);
                            let first_pc = ix
                                .precommit
                                .range((*c, prev, Round(0))..=(*c, prev, Round(u32::MAX)))
                                .map(|(_, (_, t, _, _))| *t)
                                .min();
                            first_pc.is_some_and(|pc_t| *t < pc_t)
                        });
                    let retransmitted =
                        matches!(ix.accepted.get(&(rec.node, *p)), Some((_, Via::Retransmit)));
                    chains.push(StepChain {
                        validator: v_id,
                        height: *h,
                        payload_id: *p,
                        early,
                        retransmitted,
                        steps,
                    });
                }
            }
            _ => {}
        }
    }

    let heights: Vec<HeightMetrics> = (1..=max_h)
        .map(|h| {
            let (m, b) = msgs.get(&h).copied().unwrap_or_default();
            let (payloads, dups) = finalized.get(&h).copied().unwrap_or_default();
            let steps = median(
                chains
                    .iter()
                    .filter(|c| c.height.0 == h)
                    .filter_map(|c| c.step_count().map(|l| l as u32))
                    .collect(),
            );
            HeightMetrics {
                height: h,
                decide_round: decide_round.get(&h).copied(),
                steps_to_finalize: steps,
                msgs: m,
                bytes: b,
                payloads_finalized: payloads,
                duplicates: dups,
            }
        })
        .collect();
    let total_msgs: u64 = heights.iter().map(|h| h.msgs).sum();
    let total_bytes: u64 = heights.iter().map(|h| h.bytes).sum();
    Ok(ComplexityReport {
        heights,
        chains,
        by_kind,
        messages_per_height: total_msgs as f64 / max_h as f64,
        bytes_per_height: total_bytes as f64 / max_h as f64,
    })
}
