// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Deterministic discrete-event simulation of validators and proposers.
//!
//! Events are processed in `(time, sender, per-sender sequence)` order and
//! every random choice comes from streams seeded by the config, so a
//! `(config, seed)` pair always yields the same trace.

pub mod adversary;
pub mod config;
pub mod measure;
pub mod network;
mod node;
pub mod trace;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::amp::{AmpState, DeliverOutcome};
use crate::consensus::{Consensus, ConsensusMsg, Output, TimeoutKind, Timer};
use crate::crypto::{self, validator_keys};
use crate::dissemination::{answer_request, DisseminationMsg, Retransmitter};
use crate::encoding::Encode;
use crate::types::*;

pub use adversary::{AdversarySpec, Behavior};
pub use config::{ConfigError, PayloadTrigger, SimConfig, Topology};
pub use measure::{measure, ComplexityReport, HeightMetrics, MeasureError};
pub use trace::{
    Event, MsgKind, Record, Trace, TraceFooter, TraceHeader, TraceStatus, TxSummary, Via,
};

use network::{DelayModel, RelayGraph};
use node::{PayloadFactory, ProposerNode, ValidatorApp, ValidatorNode};

/// Runs one scenario to completion or until its time budget is exhausted.
pub fn run(config: &SimConfig) -> Result<Trace, ConfigError> {
    config.validate()?;
    Ok(Sim::new(config).run())
}

#[derive(Clone, Debug)]
enum NetMsg {
    Consensus(ConsensusMsg),
    Dissemination(DisseminationMsg),
}

#[derive(Debug)]
struct Packet {
    uid: u64,
    origin: usize,
    kind: MsgKind,
    bytes: u64,
    /// Height the traffic is accounted to.
    h: u64,
    msg: NetMsg,
}

#[derive(Clone, Copy, Debug)]
enum Route {
    /// Point-to-point link to the final recipient.
    Direct,
    /// Flooded over the relay graph to every validator.
    Flood,
    /// Routed hop by hop to one validator over the relay graph.
    Unicast(usize),
}

#[derive(Debug)]
enum Pending {
    Deliver {
        from: usize,
        to: usize,
        packet: Arc<Packet>,
        hops: u32,
        route: Route,
    },
    Timer {
        v: usize,
        timer: Timer,
    },
    Retransmit {
        v: usize,
    },
    ProposerTick {
        p: usize,
        periodic: bool,
    },
    Crash {
        rank: usize,
    },
    Restart {
        rank: usize,
    },
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    n: usize,
    now: u64,
    queue: BTreeMap<(u64, usize, u64), Pending>,
    seq: Vec<u64>,
    net_rng: ChaCha8Rng,
    delays: DelayModel,
    relay: Option<RelayGraph>,
    /// Relay topology: validators each proposer is attached to.
    entry: Vec<Vec<usize>>,
    validators: Vec<ValidatorNode>,
    proposers: Vec<ProposerNode>,
    correct: Vec<bool>,
    records: Vec<Record>,
    next_uid: u64,
    /// One past the highest height any correct validator has reached a quorum for.
    frontier: u64,
    /// Highest height started by any correct validator.
    started: u64,
    quorum_t: Vec<BTreeMap<Height, u64>>,
    header: TraceHeader,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a SimConfig) -> Self {
        let n = cfg.n;
        let (keys, registry) = validator_keys(cfg.signature_scheme, cfg.seed, n);
        let registry = Arc::new(registry);
        let mut net_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6e65_7477_6f72_6b00);
        let relay = (cfg.topology == Topology::Relay).then(|| RelayGraph::new(n, &mut net_rng));
        let fanout = network::ceil_log2(n).max(1);
        let entry = (0..cfg.proposer_count)
            .map(|p| (0..fanout).map(|k| (p * 7 + k * n / fanout) % n).collect())
            .collect();
        let validators = keys
            .into_iter()
            .enumerate()
            .map(|(i, key)| {
                let id = ValidatorId(i as u32);
                let behavior = cfg.behavior_of(NodeId::Validator(id)).cloned();
                ValidatorNode {
                    consensus: Consensus::new(id, key, registry.clone(), cfg.consensus_config()),
                    app: ValidatorApp {
                        amp: AmpState::new(cfg.amp_config(), registry.clone(), u64::from(id.0) + 1),
                        behavior,
                        aged: Vec::new(),
                    },
                    retransmitter: Retransmitter::new(cfg.delta),
                    retransmit_at: None,
                    crashed: false,
                    finalized: 0,
                    seen: BTreeSet::new(),
                }
            })
            .collect();
        let proposers = (0..cfg.proposer_count as u32)
            .map(|p| ProposerNode {
                factory: PayloadFactory::new(cfg, p),
                crashed: false,
                junk_count: 0,
            })
            .collect();
        let correct_validators = cfg.correct_validators();
        let mut correct = vec![false; n];
        for v in &correct_validators {
            correct[v.index()] = true;
        }
        let header = TraceHeader {
            format: trace::TRACE_FORMAT.to_string(),
            hash_scheme: crypto::HASH_SCHEME.to_string(),
            signature_scheme: cfg.signature_scheme,
            config_digest: cfg.digest(),
            seed: cfg.seed,
            correct_validators,
            correct_proposers: cfg.correct_proposers(),
            public_keys: registry.keys.clone(),
            config: cfg.clone(),
        };
        Sim {
            cfg,
            n,
            now: 0,
            queue: BTreeMap::new(),
            seq: vec![0; n + cfg.proposer_count],
            net_rng,
            delays: DelayModel {
                gst: cfg.gst,
                delta: cfg.delta,
            },
            relay,
            entry,
            validators,
            proposers,
            correct,
            records: Vec::new(),
            next_uid: 0,
            frontier: 1,
            started: 0,
            quorum_t: vec![BTreeMap::new(); n],
            header,
        }
    }

    fn node_id(&self, rank: usize) -> NodeId {
        if rank < self.n {
            NodeId::validator(rank as u32)
        } else {
            NodeId::Proposer((rank - self.n) as u32)
        }
    }

    fn record(&mut self, rank: usize, event: Event) {
        let i = self.records.len() as u64;
        let node = self.node_id(rank);
        self.records.push(Record {
            i,
            t: self.now,
            node,
            event,
        });
    }

    fn schedule(&mut self, at: u64, sender: usize, ev: Pending) {
        let s = self.seq[sender];
        self.seq[sender] += 1;
        self.queue.insert((at, sender, s), ev);
    }

    fn uid(&mut self) -> u64 {
        self.next_uid += 1;
        self.next_uid
    }

    fn done(&self) -> bool {
        (0..self.n)
            .filter(|v| self.correct[*v])
            .all(|v| self.validators[v].finalized >= self.cfg.max_heights)
    }

    fn run(mut self) -> Trace {
        for p in 0..self.proposers.len() {
            if self.cfg.payload_trigger == PayloadTrigger::Interval {
                let offset = 1
                    + (p as u64 * self.cfg.payload_interval)
                        / self.cfg.proposer_count.max(1) as u64;
                self.schedule(
                    offset,
                    self.n + p,
                    Pending::ProposerTick { p, periodic: true },
                );
            }
        }
        for a in &self.cfg.adversaries {
            if let Behavior::Crash {
                at_time,
                restart_at,
            } = a.behavior
            {
                let rank = match a.target {
                    NodeId::Validator(v) => v.index(),
                    NodeId::Proposer(p) => self.n + p as usize,
                };
                self.schedule(at_time, rank, Pending::Crash { rank });
                if let Some(t) = restart_at {
                    self.schedule(t, rank, Pending::Restart { rank });
                }
            }
        }
        for v in 0..self.n {
            let node = &mut self.validators[v];
            let out = node.consensus.start_height(Height::FIRST, &mut node.app);
            self.apply(v, out, None);
        }

        let mut reason = None;
        let status = loop {
            if self.done() {
                break TraceStatus::Complete;
            }
            let Some(((at, _, _), ev)) = self.queue.pop_first() else {
                reason = Some("no pending events".to_string());
                break TraceStatus::Incomplete;
            };
            if at > self.cfg.time_budget {
                reason = Some(format!("time budget {} exhausted", self.cfg.time_budget));
                break TraceStatus::Incomplete;
            }
            self.now = at;
            self.handle(ev);
        };
        let footer = TraceFooter {
            status,
            events: self.records.len() as u64,
            end_time: self.now,
            reason,
        };
        Trace {
            header: self.header,
            records: self.records,
            footer,
        }
    }

    fn handle(&mut self, ev: Pending) {
        match ev {
            Pending::Deliver {
                from,
                to,
                packet,
                hops,
                route,
            } => self.deliver(from, to, packet, hops, route),
            Pending::Timer { v, timer } => {
                if self.validators[v].crashed {
                    return;
                }
                let node = &mut self.validators[v];
                let out = node.consensus.handle_timeout(timer, &mut node.app);
                if !out.is_empty() {
                    self.record(
                        v,
                        Event::Timeout {
                            kind: timer.kind,
                            h: timer.height,
                            r: timer.round,
                        },
                    );
                }
                self.apply(v, out, None);
            }
            Pending::Retransmit { v } => {
                if self.validators[v].retransmit_at != Some(self.now) {
                    return;
                }
                self.validators[v].retransmit_at = None;
                if self.validators[v].crashed {
                    return;
                }
                let due = self.validators[v].retransmitter.due(self.now);
                self.send_request(v, due);
                self.arm_retransmit(v);
            }
            Pending::ProposerTick { p, periodic } => {
                if periodic {
                    self.schedule(
                        self.now + self.cfg.payload_interval,
                        self.n + p,
                        Pending::ProposerTick { p, periodic },
                    );
                }
                if !self.proposers[p].crashed {
                    self.propose_payloads(p);
                }
            }
            Pending::Crash { rank } => {
                self.record(rank, Event::Crash {});
                if rank < self.n {
                    self.validators[rank].crashed = true;
                } else {
                    self.proposers[rank - self.n].crashed = true;
                }
            }
            Pending::Restart { rank } => {
                self.record(rank, Event::Restart {});
                if rank >= self.n {
                    self.proposers[rank - self.n].crashed = false;
                    return;
                }
                let node = &mut self.validators[rank];
                node.crashed = false;
                // Timers that fired while down were lost; re-arm all of them
                // for the current round. Stale ones are ignored.
                let (h, r) = (node.consensus.height(), node.consensus.round());
                let after = self.cfg.consensus_config().timeouts.duration(r);
                for kind in [
                    TimeoutKind::Propose,
                    TimeoutKind::Prevote,
                    TimeoutKind::Precommit,
                    TimeoutKind::Commit,
                ] {
                    self.schedule(
                        self.now + after,
                        rank,
                        Pending::Timer {
                            v: rank,
                            timer: Timer {
                                kind,
                                height: h,
                                round: r,
                            },
                        },
                    );
                }
                self.arm_retransmit(rank);
            }
        }
    }

    // ---- network -------------------------------------------------------

    fn packet(&mut self, origin: usize, msg: NetMsg) -> Arc<Packet> {
        let (kind, bytes, h) = match &msg {
            NetMsg::Consensus(m) => {
                let kind = match m {
                    ConsensusMsg::Proposal(_) => MsgKind::Proposal,
                    ConsensusMsg::Prevote(_) => MsgKind::Prevote,
                    ConsensusMsg::Precommit(_) => MsgKind::Precommit,
                };
                (kind, m.encode().len() as u64, m.height().0)
            }
            NetMsg::Dissemination(d) => {
                let kind = match d {
                    DisseminationMsg::Payload(_) => MsgKind::Payload,
                    DisseminationMsg::RetransmitRequest { .. } => MsgKind::RetransmitRequest,
                    DisseminationMsg::RetransmitResponse(_) => MsgKind::RetransmitResponse,
                };
                (kind, d.encode().len() as u64, self.frontier)
            }
        };
        let uid = self.uid();
        Arc::new(Packet {
            uid,
            origin,
            kind,
            bytes,
            h,
            msg,
        })
    }

    fn transmit(&mut self, from: usize, to: usize, packet: &Arc<Packet>, hops: u32, route: Route) {
        let at = self.delays.arrival(self.now, &mut self.net_rng);
        let to_id = self.node_id(to);
        self.record(
            from,
            Event::Send {
                to: to_id,
                uid: packet.uid,
                msg: packet.kind,
                bytes: packet.bytes,
                h: packet.h,
            },
        );
        self.schedule(
            at,
            from,
            Pending::Deliver {
                from,
                to,
                packet: packet.clone(),
                hops,
                route,
            },
        );
    }

    /// Sends to every validator in `targets` (never back to the origin).
    fn broadcast(&mut self, from: usize, packet: Arc<Packet>, targets: &[usize]) {
        match &self.relay {
            None => {
                for &t in targets {
                    if t != from {
                        self.transmit(from, t, &packet, 1, Route::Direct);
                    }
                }
            }
            Some(g) => {
                let first: Vec<usize> = if from < self.n {
                    self.validators[from].seen.insert(packet.uid);
                    g.neighbors(from).to_vec()
                } else if targets.len() == self.n {
                    self.entry[from - self.n].clone()
                } else {
                    targets.to_vec()
                };
                for t in first {
                    self.transmit(from, t, &packet, 1, Route::Flood);
                }
            }
        }
    }

    fn unicast(&mut self, from: usize, to: usize, packet: Arc<Packet>) {
        match &self.relay {
            None => self.transmit(from, to, &packet, 1, Route::Direct),
            Some(g) => {
                let hop = g.next_hop(from, to);
                self.transmit(from, hop, &packet, 1, Route::Unicast(to));
            }
        }
    }

    fn deliver(&mut self, from: usize, to: usize, packet: Arc<Packet>, hops: u32, route: Route) {
        let from_id = self.node_id(from);
        if self.validators[to].crashed {
            self.record(
                to,
                Event::Drop {
                    uid: Some(packet.uid),
                    reason: "recipient crashed".into(),
                },
            );
            return;
        }
        match route {
            Route::Direct => {}
            Route::Flood => {
                if !self.validators[to].seen.insert(packet.uid) {
                    self.record(
                        to,
                        Event::Drop {
                            uid: Some(packet.uid),
                            reason: "duplicate relay".into(),
                        },
                    );
                    return;
                }
                let onward: Vec<usize> = self
                    .relay
                    .as_ref()
                    .expect("relay route")
                    .neighbors(to)
                    .iter()
                    .copied()
                    .filter(|w| *w != from)
                    .collect();
                for w in onward {
                    self.transmit(to, w, &packet, hops + 1, Route::Flood);
                }
                if packet.origin == to {
                    return;
                }
            }
            Route::Unicast(dst) if dst != to => {
                self.record(
                    to,
                    Event::Deliver {
                        from: from_id,
                        uid: packet.uid,
                        msg: packet.kind,
                        hops,
                    },
                );
                let hop = self.relay.as_ref().expect("relay route").next_hop(to, dst);
                self.transmit(to, hop, &packet, hops + 1, route);
                return;
            }
            Route::Unicast(_) => {}
        }
        self.record(
            to,
            Event::Deliver {
                from: from_id,
                uid: packet.uid,
                msg: packet.kind,
                hops,
            },
        );
        let origin = packet.origin;
        match &packet.msg {
            NetMsg::Consensus(m) => {
                let node = &mut self.validators[to];
                let out = node.consensus.handle_message(m.clone(), &mut node.app);
                self.apply(to, out, Some(packet.uid));
            }
            NetMsg::Dissemination(DisseminationMsg::Payload(p)) => {
                self.on_payload(to, p, packet.uid)
            }
            NetMsg::Dissemination(DisseminationMsg::RetransmitRequest { ids }) => {
                self.on_request(to, origin, ids, packet.uid)
            }
            NetMsg::Dissemination(DisseminationMsg::RetransmitResponse(p)) => {
                self.on_response(to, p, packet.uid)
            }
        }
    }

    // ---- proposers -------------------------------------------------------

    fn propose_payloads(&mut self, p: usize) {
        let rank = self.n + p;
        let hint = Height(self.frontier);
        let all: Vec<usize> = (0..self.n).collect();
        let behavior = self.cfg.behavior_of(NodeId::Proposer(p as u32)).cloned();
        let payload = self.proposers[p].factory.payload(hint);
        match behavior {
            Some(Behavior::SelectiveDissemination { reach }) => {
                let reach: Vec<usize> = reach.iter().map(|v| *v as usize).collect();
                self.beb(rank, payload, &reach);
            }
            Some(Behavior::EquivocateProposer { split }) => {
                let split: Vec<usize> = split.iter().map(|v| *v as usize).collect();
                let rest: Vec<usize> = all.iter().copied().filter(|v| !split.contains(v)).collect();
                let twin = self.proposers[p].factory.payload(hint);
                self.beb(rank, payload, &split);
                self.beb(rank, twin, &rest);
            }
            Some(Behavior::SpamProposer { rate }) => {
                self.beb(rank, payload, &all);
                for _ in 0..rate {
                    let node = &mut self.proposers[p];
                    node.junk_count += 1;
                    let junk = node.factory.junk(hint, node.junk_count.is_multiple_of(2));
                    self.beb(rank, junk, &all);
                }
            }
            _ => self.beb(rank, payload, &all),
        }
    }

    fn beb(&mut self, rank: usize, payload: Payload, targets: &[usize]) {
        let payload_id = payload.id();
        let txs = TxSummary::of(&payload);
        let packet = self.packet(
            rank,
            NetMsg::Dissemination(DisseminationMsg::Payload(payload)),
        );
        self.record(
            rank,
            Event::Broadcast {
                uid: packet.uid,
                payload_id,
                txs,
            },
        );
        self.broadcast(rank, packet, targets);
    }

    // ---- validators: dissemination ----------------------------------------

    fn on_payload(&mut self, v: usize, p: &Payload, uid: u64) {
        if let NodeId::Proposer(q) = p.proposer {
            if self.cfg.drop_proposers.contains(&q) {
                self.record(
                    v,
                    Event::Drop {
                        uid: Some(uid),
                        reason: "proposer on drop list".into(),
                    },
                );
                return;
            }
        }
        let outcome = self.validators[v].app.amp.on_deliver_payload(p.clone());
        match outcome {
            DeliverOutcome::Accepted(id) | DeliverOutcome::Recovered(id) => {
                self.record(
                    v,
                    Event::PayloadAccepted {
                        payload_id: id,
                        proposer: p.proposer,
                        via: Via::Broadcast,
                        txs: TxSummary::of(p),
                    },
                );
                if matches!(outcome, DeliverOutcome::Recovered(_)) {
                    self.validators[v].retransmitter.received(&id);
                    self.finalize(v);
                }
            }
            DeliverOutcome::Duplicate(_) => self.record(
                v,
                Event::Drop {
                    uid: Some(uid),
                    reason: "duplicate payload".into(),
                },
            ),
            DeliverOutcome::AlreadyOrdered(_) => self.record(
                v,
                Event::Drop {
                    uid: Some(uid),
                    reason: "payload already ordered".into(),
                },
            ),
            DeliverOutcome::Invalid(_) => self.record(
                v,
                Event::Drop {
                    uid: Some(uid),
                    reason: "invalid payload".into(),
                },
            ),
        }
    }

    fn on_request(&mut self, v: usize, requester: usize, ids: &BTreeSet<PayloadId>, uid: u64) {
        let behavior = self.validators[v].app.behavior.clone();
        if matches!(behavior, Some(Behavior::SilentRetransmit {})) {
            self.record(
                v,
                Event::Drop {
                    uid: Some(uid),
                    reason: "silent retransmit".into(),
                },
            );
            return;
        }
        let amp = &self.validators[v].app.amp;
        let mut responses = answer_request(ids, |id| amp.payload(id));
        if matches!(behavior, Some(Behavior::CorruptRetransmit {})) {
            for r in responses.iter_mut() {
                if let DisseminationMsg::RetransmitResponse(p) = r {
                    *p = node::tamper(p);
                }
            }
        }
        for msg in responses {
            let DisseminationMsg::RetransmitResponse(p) = &msg else {
                continue;
            };
            let payload_id = p.id();
            let packet = self.packet(v, NetMsg::Dissemination(msg));
            self.record(
                v,
                Event::Respond {
                    uid: packet.uid,
                    to: self.node_id(requester),
                    payload_id,
                },
            );
            self.unicast(v, requester, packet);
        }
    }

    fn on_response(&mut self, v: usize, p: &Payload, uid: u64) {
        let id = p.id();
        let node = &mut self.validators[v];
        if !node.app.amp.on_retransmitted_payload(p.clone()) {
            self.record(
                v,
                Event::Drop {
                    uid: Some(uid),
                    reason: "unrequested or mismatched payload".into(),
                },
            );
            return;
        }
        node.retransmitter.received(&id);
        self.record(
            v,
            Event::PayloadAccepted {
                payload_id: id,
                proposer: p.proposer,
                via: Via::Retransmit,
                txs: TxSummary::of(p),
            },
        );
        self.finalize(v);
    }

    fn send_request(&mut self, v: usize, ids: BTreeSet<PayloadId>) {
        if ids.is_empty() {
            return;
        }
        let list: Vec<PayloadId> = ids.iter().copied().collect();
        let packet = self.packet(
            v,
            NetMsg::Dissemination(DisseminationMsg::RetransmitRequest { ids }),
        );
        self.record(
            v,
            Event::Request {
                uid: packet.uid,
                ids: list,
            },
        );
        let all: Vec<usize> = (0..self.n).collect();
        self.broadcast(v, packet, &all);
    }

    fn arm_retransmit(&mut self, v: usize) {
        let node = &mut self.validators[v];
        if let Some(d) = node.retransmitter.next_deadline() {
            if node.retransmit_at.is_none_or(|cur| d < cur) {
                node.retransmit_at = Some(d);
                self.schedule(d, v, Pending::Retransmit { v });
            }
        }
    }

    fn finalize(&mut self, v: usize) {
        let blocks = self.validators[v].app.amp.try_finalize();
        for b in blocks {
            self.validators[v].finalized = b.height.0;
            self.record(
                v,
                Event::Finalize {
                    h: b.height,
                    payload_ids: b.payload_ids,
                    txs: b.transactions.iter().map(|t| t.tx_hash()).collect(),
                    digest: b.digest,
                },
            );
        }
    }

    // ---- validators: consensus outputs --------------------------------------

    fn apply(&mut self, v: usize, outputs: Vec<Output>, cause: Option<u64>) {
        for o in outputs {
            match o {
                Output::Broadcast(m) => {
                    let packet = self.packet(v, NetMsg::Consensus(m.clone()));
                    let uid = packet.uid;
                    let ev = match m {
                        ConsensusMsg::Proposal(p) => Event::Propose {
                            uid,
                            h: p.height,
                            r: p.round,
                            value_id: p.value_id(),
                            valid_round: p.valid_round,
                            value: p.value,
                        },
                        ConsensusMsg::Prevote(pv) => Event::Prevote {
                            uid,
                            h: pv.height,
                            r: pv.round,
                            value_id: pv.value_id,
                        },
                        ConsensusMsg::Precommit(pc) => Event::Precommit {
                            uid,
                            h: pc.height,
                            r: pc.round,
                            value_id: pc.value_id,
                            ids: pc.extension.map(|e| e.ids),
                        },
                    };
                    self.record(v, ev);
                    let all: Vec<usize> = (0..self.n).collect();
                    self.broadcast(v, packet, &all);
                }
                Output::Schedule { timer, after } => {
                    self.schedule(self.now + after, v, Pending::Timer { v, timer });
                }
                Output::StartedHeight(h) => {
                    self.record(v, Event::HeightStart { h });
                    let aged = std::mem::take(&mut self.validators[v].app.aged);
                    if !aged.is_empty() {
                        self.record(v, Event::Aged { ids: aged });
                    }
                    if self.correct[v] && h.0 > self.started {
                        self.started = h.0;
                        if self.cfg.payload_trigger == PayloadTrigger::PerHeight {
                            for p in 0..self.proposers.len() {
                                self.schedule(
                                    self.now,
                                    self.n + p,
                                    Pending::ProposerTick { p, periodic: false },
                                );
                            }
                        }
                    }
                }
                Output::StartedRound(h, r) => self.record(v, Event::RoundStart { h, r }),
                Output::Quorum {
                    height,
                    round,
                    value_id,
                } => {
                    self.record(
                        v,
                        Event::Quorum {
                            h: height,
                            r: round,
                            value_id,
                        },
                    );
                    self.quorum_t[v].insert(height, self.now);
                    if self.correct[v] {
                        self.frontier = self.frontier.max(height.0 + 1);
                    }
                }
                Output::Decided(d) => {
                    let missing = self.validators[v].app.amp.missing();
                    self.record(
                        v,
                        Event::Decide {
                            h: d.height,
                            r: d.round,
                            value_id: d.commit.value_id,
                            quorum_t: self.quorum_t[v].get(&d.height).copied().unwrap_or(self.now),
                            value: d.value,
                            commit: d.commit.encode(),
                            missing: missing.iter().copied().collect(),
                        },
                    );
                    let fresh = self.validators[v].retransmitter.request(missing, self.now);
                    self.send_request(v, fresh);
                    self.arm_retransmit(v);
                    self.finalize(v);
                }
                Output::Equivocation {
                    signer,
                    kind,
                    height,
                    round,
                } => self.record(
                    v,
                    Event::Equivocation {
                        signer,
                        kind: kind.to_string(),
                        h: height,
                        r: round,
                    },
                ),
                Output::Rejected { reason, .. } => self.record(
                    v,
                    Event::Drop {
                        uid: cause,
                        reason: reason.to_string(),
                    },
                ),
            }
        }
    }
}
