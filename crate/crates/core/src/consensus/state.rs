// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::*;
use crate::crypto::{KeyPair, PublicKeySet};

#[derive(Default)]
struct RoundVotes {
    proposal: Option<(Proposal, ValueId)>,
    prevotes: BTreeMap<ValidatorId, Option<ValueId>>,
    precommits: BTreeMap<ValidatorId, Precommit>,
    prevote_timer_armed: bool,
    precommit_timer_armed: bool,
    polka_handled: bool,
}

impl RoundVotes {
    fn prevotes_for(&self, v: Option<ValueId>) -> usize {
        self.prevotes.values().filter(|x| **x == v).count()
    }

    fn precommits_for(&self, v: Option<ValueId>) -> usize {
        self.precommits
            .values()
            .filter(|pc| pc.value_id == v)
            .count()
    }

    fn senders(&self) -> BTreeSet<ValidatorId> {
        self.prevotes
            .keys()
            .chain(self.precommits.keys())
            .copied()
            .collect()
    }
}

/// Tendermint state of a single validator.
pub struct Consensus {
    me: ValidatorId,
    key: KeyPair,
    registry: Arc<PublicKeySet>,
    config: ConsensusConfig,

    height: Height,
    round: Round,
    step: Step,
    locked: Option<(Round, Vec<u8>, ValueId)>,
    valid: Option<(Round, Vec<u8>, ValueId)>,
    rounds: BTreeMap<Round, RoundVotes>,
    validity: BTreeMap<ValueId, bool>,
    decision: Option<(Round, Vec<u8>, ValueId)>,
    future: Vec<ConsensusMsg>,
    started: bool,
}

impl Consensus {
    pub fn new(
        me: ValidatorId,
        key: KeyPair,
        registry: Arc<PublicKeySet>,
        config: ConsensusConfig,
    ) -> Self {
        assert_eq!(registry.len(), config.n);
        Consensus {
            me,
            key,
            registry,
            config,
            height: Height::GENESIS,
            round: Round::ZERO,
            step: Step::Propose,
            locked: None,
            valid: None,
            rounds: BTreeMap::new(),
            validity: BTreeMap::new(),
            decision: None,
            future: Vec::new(),
            started: false,
        }
    }

    pub fn id(&self) -> ValidatorId {
        self.me
    }

    pub fn height(&self) -> Height {
        self.height
    }

    pub fn round(&self) -> Round {
        self.round
    }

    /// Messages buffered for heights above the current one.
    pub fn buffered(&self) -> usize {
        self.future.len()
    }

    pub fn step(&self) -> Step {
        self.step
    }

    pub fn locked_round(&self) -> Option<Round> {
        self.locked.as_ref().map(|l| l.0)
    }

    pub fn valid_round(&self) -> Option<Round> {
        self.valid.as_ref().map(|v| v.0)
    }

    fn quorum(&self) -> usize {
        quorum(self.config.n)
    }

    /// Starts height `h` at round 0.
    pub fn start_height(&mut self, h: Height, hooks: &mut impl AppHooks) -> Vec<Output> {
        let mut out = Vec::new();
        self.enter_height(h, hooks, &mut out);
        out
    }

    pub fn handle_message(&mut self, msg: ConsensusMsg, hooks: &mut impl AppHooks) -> Vec<Output> {
        let mut out = Vec::new();
        if !self.started || msg.height() > self.height {
            self.future.push(msg);
            return out;
        }
        if msg.height() < self.height {
            return out;
        }
        self.ingest(msg, hooks, &mut out);
        self.progress(hooks, &mut out);
        out
    }

    pub fn handle_timeout(&mut self, timer: Timer, hooks: &mut impl AppHooks) -> Vec<Output> {
        let mut out = Vec::new();
        if !self.started || timer.height != self.height {
            return out;
        }
        match timer.kind {
            TimeoutKind::Propose if timer.round == self.round && self.step == Step::Propose => {
                self.cast_prevote(None, &mut out);
                self.step = Step::Prevote;
            }
            TimeoutKind::Prevote if timer.round == self.round && self.step == Step::Prevote => {
                self.cast_precommit(None, hooks, &mut out);
                self.step = Step::Precommit;
            }
            TimeoutKind::Precommit if timer.round == self.round && self.step != Step::Decided => {
                self.start_round(timer.round.next(), hooks, &mut out);
            }
            TimeoutKind::Commit if self.step == Step::Decided => {
                self.finish_height(hooks, &mut out);
                return out;
            }
            _ => return out,
        }
        self.progress(hooks, &mut out);
        out
    }

    fn enter_height(&mut self, h: Height, hooks: &mut impl AppHooks, out: &mut Vec<Output>) {
        self.started = true;
        self.height = h;
        self.locked = None;
        self.valid = None;
        self.rounds.clear();
        self.validity.clear();
        self.decision = None;
        hooks.height_started(h);
        out.push(Output::StartedHeight(h));
        self.start_round(Round::ZERO, hooks, out);

        let (now, later): (Vec<_>, Vec<_>) = std::mem::take(&mut self.future)
            .into_iter()
            .partition(|m| m.height() == h);
        self.future = later.into_iter().filter(|m| m.height() > h).collect();
        for msg in now {
            self.ingest(msg, hooks, out);
        }
        self.progress(hooks, out);
    }

    fn start_round(&mut self, r: Round, hooks: &mut impl AppHooks, out: &mut Vec<Output>) {
        self.round = r;
        self.step = Step::Propose;
        out.push(Output::StartedRound(self.height, r));
        if assembler_for(self.height, r, self.config.n) == self.me {
            let (value, valid_round) = match &self.valid {
                Some((vr, v, _)) => (v.clone(), Some(*vr)),
                None => (hooks.get_value(self.height), None),
            };
            let signature =
                self.key
                    .sign(&sign_bytes::proposal(self.height, r, &value, valid_round));
            let proposal = Proposal {
                height: self.height,
                round: r,
                value,
                valid_round,
                signer: self.me,
                signature,
            };
            let vid = proposal.value_id();
            self.round_mut(r).proposal = Some((proposal.clone(), vid));
            out.push(Output::Broadcast(ConsensusMsg::Proposal(proposal)));
        }
        out.push(Output::Schedule {
            timer: Timer {
                kind: TimeoutKind::Propose,
                height: self.height,
                round: r,
            },
            after: self.config.timeouts.duration(r),
        });
    }

    fn finish_height(&mut self, hooks: &mut impl AppHooks, out: &mut Vec<Output>) {
        let (round, value, vid) = self
            .decision
            .clone()
            .expect("decided step without decision");
        let precommits: Vec<Precommit> = self.rounds[&round]
            .precommits
            .values()
            .filter(|pc| pc.value_id == Some(vid))
            .cloned()
            .collect();
        let commit = CommitCertificate {
            height: self.height,
            round,
            value_id: vid,
            precommits,
        };
        hooks.decided(self.height, &value, &commit);
        out.push(Output::Decided(Decision {
            height: self.height,
            round,
            value,
            commit,
        }));
        self.enter_height(self.height.next(), hooks, out);
    }

    fn round_mut(&mut self, r: Round) -> &mut RoundVotes {
        self.rounds.entry(r).or_default()
    }

    fn is_valid(
        &mut self,
        r: Round,
        value: &[u8],
        vid: ValueId,
        hooks: &mut impl AppHooks,
    ) -> bool {
        if let Some(v) = self.validity.get(&vid) {
            return *v;
        }
        let ok = hooks.received_proposal(self.height, r, value);
        self.validity.insert(vid, ok);
        ok
    }

    /// Authenticates and records one message for the current height.
    fn ingest(&mut self, msg: ConsensusMsg, hooks: &mut impl AppHooks, out: &mut Vec<Output>) {
        let (h, r, signer) = (msg.height(), msg.round(), msg.signer());
        if signer == self.me || !self.registry.contains(signer) {
            return;
        }
        if self.step == Step::Decided {
            // Only precommits that can grow the commit certificate matter now.
            let Some((dr, _, dvid)) = &self.decision else {
                return;
            };
            match &msg {
                ConsensusMsg::Precommit(pc) if pc.round == *dr && pc.value_id == Some(*dvid) => {}
                _ => return,
            }
        }
        match msg {
            ConsensusMsg::Proposal(p) => {
                if p.signer != assembler_for(h, r, self.config.n) {
                    out.push(Output::Rejected {
                        from: signer,
                        reason: "proposal from non-assembler",
                    });
                    return;
                }
                let msg = sign_bytes::proposal(h, r, &p.value, p.valid_round);
                if !self.registry.verify(signer, &msg, &p.signature) {
                    out.push(Output::Rejected {
                        from: signer,
                        reason: "bad proposal signature",
                    });
                    return;
                }
                let vid = p.value_id();
                let slot = self.round_mut(r);
                match &slot.proposal {
                    None => slot.proposal = Some((p, vid)),
                    Some((_, existing)) if *existing != vid => out.push(Output::Equivocation {
                        signer,
                        kind: "PROPOSAL",
                        height: h,
                        round: r,
                    }),
                    Some(_) => {}
                }
            }
            ConsensusMsg::Prevote(pv) => {
                if !self.registry.verify(
                    signer,
                    &sign_bytes::prevote(h, r, pv.value_id),
                    &pv.signature,
                ) {
                    out.push(Output::Rejected {
                        from: signer,
                        reason: "bad prevote signature",
                    });
                    return;
                }
                let slot = self.round_mut(r);
                match slot.prevotes.get(&signer) {
                    None => {
                        slot.prevotes.insert(signer, pv.value_id);
                    }
                    Some(v) if *v != pv.value_id => out.push(Output::Equivocation {
                        signer,
                        kind: "PREVOTE",
                        height: h,
                        round: r,
                    }),
                    Some(_) => {}
                }
            }
            ConsensusMsg::Precommit(pc) => {
                if !self.registry.verify(
                    signer,
                    &sign_bytes::precommit(h, r, pc.value_id),
                    &pc.signature,
                ) {
                    out.push(Output::Rejected {
                        from: signer,
                        reason: "bad precommit signature",
                    });
                    return;
                }
                match (&pc.value_id, &pc.extension) {
                    (None, None) => {}
                    (Some(_), Some(ext)) => {
                        if !hooks.verify_vote_extension(&pc, ext) {
                            out.push(Output::Rejected {
                                from: signer,
                                reason: "invalid vote extension",
                            });
                            return;
                        }
                    }
                    _ => {
                        out.push(Output::Rejected {
                            from: signer,
                            reason: "extension presence mismatch",
                        });
                        return;
                    }
                }
                let slot = self.round_mut(r);
                match slot.precommits.get(&signer) {
                    None => {
                        slot.precommits.insert(signer, pc);
                    }
                    Some(existing) if existing.value_id != pc.value_id => {
                        out.push(Output::Equivocation {
                            signer,
                            kind: "PRECOMMIT",
                            height: h,
                            round: r,
                        })
                    }
                    Some(_) => {}
                }
            }
        }
    }

    fn cast_prevote(&mut self, value: Option<ValueId>, out: &mut Vec<Output>) {
        let (h, r) = (self.height, self.round);
        let signature = self.key.sign(&sign_bytes::prevote(h, r, value));
        let me = self.me;
        self.round_mut(r).prevotes.insert(me, value);
        out.push(Output::Broadcast(ConsensusMsg::Prevote(Prevote {
            height: h,
            round: r,
            value_id: value,
            signer: me,
            signature,
        })));
    }

    fn cast_precommit(
        &mut self,
        value: Option<(&[u8], ValueId)>,
        hooks: &mut impl AppHooks,
        out: &mut Vec<Output>,
    ) {
        let (h, r) = (self.height, self.round);
        let vid = value.map(|(_, id)| id);
        let extension = value.map(|(bytes, id)| {
            let mut ids = hooks.extend_vote(h, r, bytes);
            ids.sort();
            ids.dedup();
            let signature = self.key.sign(&sign_bytes::extension(h, r, id, &ids));
            VoteExtension {
                ids,
                signer: self.me,
                signature,
            }
        });
        let pc = Precommit {
            height: h,
            round: r,
            value_id: vid,
            signer: self.me,
            signature: self.key.sign(&sign_bytes::precommit(h, r, vid)),
            extension,
        };
        let me = self.me;
        self.round_mut(r).precommits.insert(me, pc.clone());
        out.push(Output::Broadcast(ConsensusMsg::Precommit(pc)));
    }

    /// Applies every enabled rule until none fires.
    fn progress(&mut self, hooks: &mut impl AppHooks, out: &mut Vec<Output>) {
        loop {
            if self.step == Step::Decided {
                return;
            }
            if self.try_decide(hooks, out) {
                return;
            }
            let fired = self.try_skip_round(hooks, out)
                || self.try_prevote(hooks, out)
                || self.try_polka(hooks, out)
                || self.try_nil_polka(hooks, out)
                || self.try_arm_timers(out);
            if !fired {
                return;
            }
        }
    }

    fn try_decide(&mut self, hooks: &mut impl AppHooks, out: &mut Vec<Output>) -> bool {
        let q = self.quorum();
        let candidates: Vec<(Round, Vec<u8>, ValueId)> = self
            .rounds
            .iter()
            .filter_map(|(r, rv)| {
                let (p, vid) = rv.proposal.as_ref()?;
                (rv.precommits_for(Some(*vid)) >= q).then(|| (*r, p.value.clone(), *vid))
            })
            .collect();
        for (r, value, vid) in candidates {
            if self.is_valid(r, &value, vid, hooks) {
                self.step = Step::Decided;
                self.decision = Some((r, value, vid));
                out.push(Output::Quorum {
                    height: self.height,
                    round: r,
                    value_id: vid,
                });
                out.push(Output::Schedule {
                    timer: Timer {
                        kind: TimeoutKind::Commit,
                        height: self.height,
                        round: r,
                    },
                    after: self.config.grace_window,
                });
                return true;
            }
        }
        false
    }

    fn try_skip_round(&mut self, hooks: &mut impl AppHooks, out: &mut Vec<Output>) -> bool {
        let f = self.config.f;
        let target = self
            .rounds
            .range(self.round.next()..)
            .find(|(_, rv)| rv.senders().len() > f)
            .map(|(r, _)| *r);
        match target {
            Some(r) => {
                self.start_round(r, hooks, out);
                true
            }
            None => false,
        }
    }

    fn try_prevote(&mut self, hooks: &mut impl AppHooks, out: &mut Vec<Output>) -> bool {
        if self.step != Step::Propose {
            return false;
        }
        let r = self.round;
        let Some((p, vid)) = self.rounds.get(&r).and_then(|rv| rv.proposal.clone()) else {
            return false;
        };
        let q = self.quorum();
        let accept = match p.valid_round {
            None => {
                let unlocked = self.locked.as_ref().is_none_or(|(_, _, lv)| *lv == vid);
                self.is_valid(r, &p.value, vid, hooks) && unlocked
            }
            Some(vr) if vr < r => {
                let polka = self
                    .rounds
                    .get(&vr)
                    .is_some_and(|rv| rv.prevotes_for(Some(vid)) >= q);
                if !polka {
                    return false;
                }
                let unlocked = match &self.locked {
                    None => true,
                    Some((lr, _, lv)) => *lr <= vr || *lv == vid,
                };
                self.is_valid(r, &p.value, vid, hooks) && unlocked
            }
            Some(_) => false,
        };
        self.cast_prevote(accept.then_some(vid), out);
        self.step = Step::Prevote;
        true
    }

    fn try_polka(&mut self, hooks: &mut impl AppHooks, out: &mut Vec<Output>) -> bool {
        if self.step < Step::Prevote {
            return false;
        }
        let r = self.round;
        let q = self.quorum();
        let Some(rv) = self.rounds.get(&r) else {
            return false;
        };
        if rv.polka_handled {
            return false;
        }
        let Some((p, vid)) = rv.proposal.clone() else {
            return false;
        };
        if rv.prevotes_for(Some(vid)) < q || !self.is_valid(r, &p.value, vid, hooks) {
            return false;
        }
        self.round_mut(r).polka_handled = true;
        if self.step == Step::Prevote {
            self.locked = Some((r, p.value.clone(), vid));
            self.cast_precommit(Some((&p.value, vid)), hooks, out);
            self.step = Step::Precommit;
        }
        self.valid = Some((r, p.value, vid));
        true
    }

    fn try_nil_polka(&mut self, hooks: &mut impl AppHooks, out: &mut Vec<Output>) -> bool {
        if self.step != Step::Prevote {
            return false;
        }
        let q = self.quorum();
        if self
            .rounds
            .get(&self.round)
            .is_some_and(|rv| rv.prevotes_for(None) >= q)
        {
            self.cast_precommit(None, hooks, out);
            self.step = Step::Precommit;
            return true;
        }
        false
    }

    fn try_arm_timers(&mut self, out: &mut Vec<Output>) -> bool {
        let (h, r, q, step) = (self.height, self.round, self.quorum(), self.step);
        let duration = self.config.timeouts.duration(r);
        let rv = self.round_mut(r);
        if step == Step::Prevote && !rv.prevote_timer_armed && rv.prevotes.len() >= q {
            rv.prevote_timer_armed = true;
            out.push(Output::Schedule {
                timer: Timer {
                    kind: TimeoutKind::Prevote,
                    height: h,
                    round: r,
                },
                after: duration,
            });
            return true;
        }
        if !rv.precommit_timer_armed && rv.precommits.len() >= q {
            rv.precommit_timer_armed = true;
            out.push(Output::Schedule {
                timer: Timer {
                    kind: TimeoutKind::Precommit,
                    height: h,
                    round: r,
                },
                after: duration,
            });
            return true;
        }
        false
    }
}
