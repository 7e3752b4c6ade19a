// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Property checkers over recorded traces.
//!
//! Checkers see only the trace: the header (correct set, public keys,
//! parameters) and the event records. They re-derive everything they need
//! (attestation counts, quorum sizes, transaction order, signature validity)
//! with their own code rather than calling the protocol implementation, so a
//! faulty protocol cannot hide behind a matching faulty check.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::crypto::{self, PublicKey};
use crate::encoding::Decode;
use crate::simnet::trace::{Event, Trace, TxSummary, Via};
use crate::types::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "N-A")]
    NotApplicable,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotApplicable => "N-A",
        }
    }
}

/// A failing slice of the trace: record indices `first..=last`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub first: u64,
    pub last: u64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub status: Status,
    /// Number of property instances examined.
    pub checked: u64,
    pub counterexample: Option<Counterexample>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub complete: bool,
    pub properties: Vec<PropertyResult>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.status != Status::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyResult> {
        self.properties.iter().filter(|p| p.status == Status::Fail)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for p in &self.properties {
            let _ = write!(
                s,
                "{:<24} {:<4} checked={}",
                p.name,
                p.status.as_str(),
                p.checked
            );
            if let Some(c) = &p.counterexample {
                let _ = write!(s, " events={}..={} {}", c.first, c.last, c.reason);
            }
            s.push('\n');
        }
        s
    }
}

pub const PROPERTIES: [&str; 9] = [
    "agreement",
    "termination",
    "validity",
    "bounded_inclusion",
    "monotonicity",
    "retransmission_liveness",
    "certificate_soundness",
    "finalization_order",
    "beb_integrity",
];

/// Evaluates every property on `trace`.
pub fn check(trace: &Trace) -> PropertyReport {
    let v = View::build(trace);
    PropertyReport {
        complete: trace.is_complete(),
        properties: vec![
            v.agreement(),
            v.termination(),
            v.validity(),
            v.bounded_inclusion(),
            v.monotonicity(),
            v.retransmission_liveness(),
            v.certificate_soundness(),
            v.finalization_order(),
            v.beb_integrity(),
        ],
    }
}

struct Outcome {
    name: &'static str,
    checked: u64,
    failure: Option<Counterexample>,
}

impl Outcome {
    fn new(name: &'static str) -> Self {
        Outcome {
            name,
            checked: 0,
            failure: None,
        }
    }

    fn fail(&mut self, first: u64, last: u64, reason: String) {
        if self.failure.is_none() {
            self.failure = Some(Counterexample {
                first: first.min(last),
                last: first.max(last),
                reason,
            });
        }
    }

    fn done(self) -> PropertyResult {
        let status = match (&self.failure, self.checked) {
            (Some(_), _) => Status::Fail,
            (None, 0) => Status::NotApplicable,
            (None, _) => Status::Pass,
        };
        PropertyResult {
            name: self.name.to_string(),
            status,
            checked: self.checked,
            counterexample: self.failure,
        }
    }

    fn not_applicable(name: &'static str) -> PropertyResult {
        PropertyResult {
            name: name.to_string(),
            status: Status::NotApplicable,
            checked: 0,
            counterexample: None,
        }
    }
}

struct Finalized<'t> {
    i: u64,
    payload_ids: &'t [PayloadId],
    txs: &'t [TxHash],
    digest: Digest,
}

struct Decided<'t> {
    i: u64,
    r: Round,
    value_id: ValueId,
    value: &'t [u8],
    commit: &'t [u8],
    missing: &'t [PayloadId],
}

struct PrecommitCast<'t> {
    i: u64,
    value_id: Option<ValueId>,
    ids: Option<&'t [PayloadId]>,
}

/// The trace, indexed by what the checkers ask about.
struct View<'t> {
    trace: &'t Trace,
    n: usize,
    f: usize,
    max_heights: u64,
    correct: BTreeSet<ValidatorId>,
    correct_proposers: BTreeSet<u32>,
    keys: &'t [PublicKey],
    finalized: BTreeMap<ValidatorId, Vec<(Height, Finalized<'t>)>>,
    decided: BTreeMap<(ValidatorId, Height), Decided<'t>>,
    precommits: BTreeMap<(ValidatorId, Height, Round), PrecommitCast<'t>>,
    proposals: BTreeMap<(Height, Round, ValueId), (u64, &'t [u8])>,
    /// payload id → (first record index at a correct validator, transactions).
    accepted: BTreeMap<PayloadId, (u64, &'t [TxSummary])>,
    accepted_at: BTreeMap<(ValidatorId, PayloadId), u64>,
    broadcasts: BTreeMap<(u32, PayloadId), u64>,
    beb_deliveries: Vec<(u64, ValidatorId, u32, PayloadId)>,
}

impl<'t> View<'t> {
    fn build(trace: &'t Trace) -> Self {
        let h = &trace.header;
        let mut v = View {
            trace,
            n: h.config.n,
            f: h.config.f,
            max_heights: h.config.max_heights,
            correct: h.correct_validators.iter().copied().collect(),
            correct_proposers: h.correct_proposers.iter().copied().collect(),
            keys: &h.public_keys,
            finalized: BTreeMap::new(),
            decided: BTreeMap::new(),
            precommits: BTreeMap::new(),
            proposals: BTreeMap::new(),
            accepted: BTreeMap::new(),
            accepted_at: BTreeMap::new(),
            broadcasts: BTreeMap::new(),
            beb_deliveries: Vec::new(),
        };
        for rec in &trace.records {
            if let (NodeId::Proposer(p), Event::Broadcast { payload_id, .. }) =
                (rec.node, &rec.event)
            {
                v.broadcasts.entry((p, *payload_id)).or_insert(rec.i);
            }
            if let Event::Propose {
                h,
                r,
                value_id,
                value,
                ..
            } = &rec.event
            {
                v.proposals
                    .entry((*h, *r, *value_id))
                    .or_insert((rec.i, value));
            }
            let Some(val) = rec.node.as_validator() else {
                continue;
            };
            if !v.correct.contains(&val) {
                continue;
            }
            match &rec.event {
                Event::Finalize {
                    h,
                    payload_ids,
                    txs,
                    digest,
                } => {
                    v.finalized.entry(val).or_default().push((
                        *h,
                        Finalized {
                            i: rec.i,
                            payload_ids,
                            txs,
                            digest: *digest,
                        },
                    ));
                }
                Event::Decide {
                    h,
                    r,
                    value_id,
                    value,
                    commit,
                    missing,
                    ..
                } => {
                    v.decided.entry((val, *h)).or_insert(Decided {
                        i: rec.i,
                        r: *r,
                        value_id: *value_id,
                        value,
                        commit,
                        missing,
                    });
                }
                Event::Precommit {
                    h,
                    r,
                    value_id,
                    ids,
                    ..
                } => {
                    v.precommits.insert(
                        (val, *h, *r),
                        PrecommitCast {
                            i: rec.i,
                            value_id: *value_id,
                            ids: ids.as_deref(),
                        },
                    );
                }
                Event::PayloadAccepted {
                    payload_id,
                    proposer,
                    via,
                    txs,
                } => {
                    v.accepted.entry(*payload_id).or_insert((rec.i, txs));
                    v.accepted_at.entry((val, *payload_id)).or_insert(rec.i);
                    if let (NodeId::Proposer(p), Via::Broadcast) = (proposer, via) {
                        v.beb_deliveries.push((rec.i, val, *p, *payload_id));
                    }
                }
                _ => {}
            }
        }
        v
    }

    fn last_index(&self) -> u64 {
        self.trace.records.len().saturating_sub(1) as u64
    }

    fn quorum(&self) -> usize {
        // More than two thirds of n.
        (0..=self.n).find(|q| 3 * q > 2 * self.n).unwrap_or(self.n)
    }

    fn finalize_at(&self, v: ValidatorId, h: Height) -> Option<&Finalized<'t>> {
        self.finalized
            .get(&v)?
            .iter()
            .find(|(fh, _)| *fh == h)
            .map(|(_, f)| f)
    }

    /// Ids attested by more than `f` distinct signers of `cert`.
    fn recount(&self, cert: &CommitCertificate) -> BTreeSet<PayloadId> {
        let mut seen_signers = BTreeSet::new();
        let mut counts: BTreeMap<PayloadId, usize> = BTreeMap::new();
        for pc in &cert.precommits {
            if !seen_signers.insert(pc.signer) {
                continue;
            }
            if let Some(ext) = &pc.extension {
                for id in ext.ids.iter().collect::<BTreeSet<_>>() {
                    *counts.entry(*id).or_default() += 1;
                }
            }
        }
        counts
            .into_iter()
            .filter(|(_, c)| *c > self.f)
            .map(|(id, _)| id)
            .collect()
    }

    fn verify(&self, signer: ValidatorId, msg: &[u8], sig: &crypto::Signature) -> bool {
        match self.keys.get(signer.index()) {
            Some(pk) => crypto::verify(self.trace.header.signature_scheme, pk, msg, sig),
            None => false,
        }
    }

    /// Why `cert` is not a sound commit certificate for height `h`, if it is not.
    fn certificate_defect(&self, cert: &CommitCertificate, h: Height) -> Option<String> {
        if cert.height != h {
            return Some(format!(
                "certificate is for height {} instead of {}",
                cert.height, h
            ));
        }
        let mut signers = BTreeSet::new();
        for pc in &cert.precommits {
            if (pc.height, pc.round, pc.value_id) != (cert.height, cert.round, Some(cert.value_id))
            {
                return Some(format!(
                    "precommit of {} does not match the certificate",
                    pc.signer
                ));
            }
            if !signers.insert(pc.signer) {
                return Some(format!("duplicate signer {}", pc.signer));
            }
            if !self.verify(
                pc.signer,
                &sign_bytes::precommit(pc.height, pc.round, pc.value_id),
                &pc.signature,
            ) {
                return Some(format!("bad precommit signature from {}", pc.signer));
            }
            let Some(ext) = &pc.extension else {
                return Some(format!("precommit of {} lacks an extension", pc.signer));
            };
            let msg = sign_bytes::extension(pc.height, pc.round, cert.value_id, &ext.ids);
            if ext.signer != pc.signer || !self.verify(pc.signer, &msg, &ext.signature) {
                return Some(format!("bad extension signature from {}", pc.signer));
            }
        }
        if signers.len() < self.quorum() {
            return Some(format!(
                "{} signers, below the quorum of {}",
                signers.len(),
                self.quorum()
            ));
        }
        None
    }

    fn agreement(&self) -> PropertyResult {
        let mut o = Outcome::new("agreement");
        let mut by_height: BTreeMap<Height, (u64, Digest)> = BTreeMap::new();
        for fins in self.finalized.values() {
            for (h, f) in fins {
                o.checked += 1;
                match by_height.get(h) {
                    None => {
                        by_height.insert(*h, (f.i, f.digest));
                    }
                    Some((i, d)) if *d != f.digest => o.fail(
                        *i,
                        f.i,
                        format!(
                            "height {h}: block digests {} and {} differ",
                            d.short(),
                            f.digest.short()
                        ),
                    ),
                    Some(_) => {}
                }
            }
        }
        let mut values: BTreeMap<Height, (u64, ValueId)> = BTreeMap::new();
        for ((_, h), d) in &self.decided {
            match values.get(h) {
                None => {
                    values.insert(*h, (d.i, d.value_id));
                }
                Some((i, x)) if *x != d.value_id => o.fail(
                    *i,
                    d.i,
                    format!(
                        "height {h}: decided values {} and {} differ",
                        x.0.short(),
                        d.value_id.0.short()
                    ),
                ),
                Some(_) => {}
            }
        }
        o.done()
    }

    fn termination(&self) -> PropertyResult {
        let mut o = Outcome::new("termination");
        if !self.trace.is_complete() {
            let reason = self
                .trace
                .footer
                .reason
                .clone()
                .unwrap_or_else(|| "incomplete".into());
            o.fail(
                self.last_index(),
                self.last_index(),
                format!("trace incomplete: {reason}"),
            );
        }
        for v in &self.correct {
            for h in 1..=self.max_heights {
                o.checked += 1;
                if !self.decided.contains_key(&(*v, Height(h))) {
                    o.fail(
                        self.last_index(),
                        self.last_index(),
                        format!("{v} never decided height {h}"),
                    );
                }
            }
        }
        o.done()
    }

    fn validity(&self) -> PropertyResult {
        let mut o = Outcome::new("validity");
        for (v, fins) in &self.finalized {
            for (h, f) in fins {
                let mut allowed = BTreeSet::new();
                for id in f.payload_ids {
                    o.checked += 1;
                    match self.accepted.get(id) {
                        Some((i, txs)) if *i < f.i => allowed.extend(txs.iter().map(|t| t.hash)),
                        _ => o.fail(f.i, f.i, format!("{v} finalized payload {} at height {h} that no correct validator accepted", id.0.short())),
                    }
                }
                if let Some(tx) = f.txs.iter().find(|t| !allowed.contains(t)) {
                    o.fail(
                        f.i,
                        f.i,
                        format!(
                            "{v} finalized transaction {} outside its accepted payloads",
                            tx.0.short()
                        ),
                    );
                }
            }
        }
        o.done()
    }

    /// For each height `h + 1` decided by a correct validator, the value is
    /// the certificate of round `r*` of height `h`. Every id carried in the
    /// round-`r*` precommit extensions of all correct validators must be in
    /// every correct validator's block for `h + 1`.
    fn bounded_inclusion(&self) -> PropertyResult {
        let mut o = Outcome::new("bounded_inclusion");
        let mut done_heights = BTreeSet::new();
        for ((_, h1), d) in &self.decided {
            if h1.0 < 2 || !done_heights.insert(*h1) {
                continue;
            }
            let Ok(CertValue::Commit(cert)) = CertValue::decode(d.value) else {
                continue;
            };
            let h = cert.height;
            let mut common: Option<BTreeSet<PayloadId>> = None;
            let mut first = u64::MAX;
            for v in &self.correct {
                let ids: BTreeSet<PayloadId> = match self.precommits.get(&(*v, h, cert.round)) {
                    Some(PrecommitCast {
                        value_id: Some(_),
                        ids: Some(ids),
                        i,
                    }) => {
                        first = first.min(*i);
                        ids.iter().copied().collect()
                    }
                    _ => BTreeSet::new(),
                };
                common = Some(match common {
                    None => ids,
                    Some(c) => c.intersection(&ids).copied().collect(),
                });
            }
            for id in common.unwrap_or_default() {
                for v in &self.correct {
                    let Some(f) = self.finalize_at(*v, *h1) else {
                        continue;
                    };
                    o.checked += 1;
                    if !f.payload_ids.contains(&id) {
                        o.fail(
                            first,
                            f.i,
                            format!("payload {} attested by all correct validators at height {h} missing from {v}'s block {h1}", id.0.short()),
                        );
                    }
                }
            }
        }
        o.done()
    }

    fn monotonicity(&self) -> PropertyResult {
        let mut o = Outcome::new("monotonicity");
        let mut per: BTreeMap<(ValidatorId, Height), Vec<(Round, &PrecommitCast<'t>)>> =
            BTreeMap::new();
        for ((v, h, r), pc) in &self.precommits {
            if pc.value_id.is_some() {
                per.entry((*v, *h)).or_default().push((*r, pc));
            }
        }
        for ((v, h), casts) in per {
            for (a, (ra, pa)) in casts.iter().enumerate() {
                for (rb, pb) in &casts[a + 1..] {
                    let vid = pb.value_id.expect("non-nil");
                    let Some((_, value)) = self.proposals.get(&(h, *rb, vid)) else {
                        continue;
                    };
                    let sound = match CertValue::decode(value) {
                        Ok(CertValue::Commit(c)) => self.recount(&c),
                        _ => BTreeSet::new(),
                    };
                    o.checked += 1;
                    let later: BTreeSet<&PayloadId> = pb.ids.unwrap_or_default().iter().collect();
                    if let Some(lost) = pa
                        .ids
                        .unwrap_or_default()
                        .iter()
                        .find(|id| !sound.contains(id) && !later.contains(id))
                    {
                        o.fail(
                            pa.i,
                            pb.i,
                            format!("{v} height {h}: id {} attested in round {ra} but not in round {rb}", lost.0.short()),
                        );
                    }
                }
            }
        }
        o.done()
    }

    fn retransmission_liveness(&self) -> PropertyResult {
        if !self.trace.is_complete() {
            return Outcome::not_applicable("retransmission_liveness");
        }
        let mut o = Outcome::new("retransmission_liveness");
        for ((v, h), d) in &self.decided {
            if h.0 > self.max_heights {
                continue;
            }
            o.checked += 1;
            if self.finalize_at(*v, *h).is_none() {
                o.fail(
                    d.i,
                    self.last_index(),
                    format!("{v} decided height {h} but never finalized it"),
                );
            }
            for id in d.missing {
                o.checked += 1;
                if !self.accepted_at.get(&(*v, *id)).is_some_and(|i| *i > d.i) {
                    o.fail(
                        d.i,
                        self.last_index(),
                        format!("{v} never obtained missing payload {}", id.0.short()),
                    );
                }
            }
        }
        o.done()
    }

    fn certificate_soundness(&self) -> PropertyResult {
        let mut o = Outcome::new("certificate_soundness");
        for ((v, h), d) in &self.decided {
            o.checked += 1;
            if value_id_of(d.value) != d.value_id {
                o.fail(
                    d.i,
                    d.i,
                    format!("{v} height {h}: decided value does not hash to its id"),
                );
                continue;
            }
            match CommitCertificate::decode(d.commit) {
                Ok(c) => {
                    if c.value_id != d.value_id || c.round != d.r {
                        o.fail(
                            d.i,
                            d.i,
                            format!(
                                "{v} height {h}: commit certificate is for another value or round"
                            ),
                        );
                    } else if let Some(defect) = self.certificate_defect(&c, *h) {
                        o.fail(
                            d.i,
                            d.i,
                            format!("{v} height {h}: commit certificate unsound: {defect}"),
                        );
                    }
                }
                Err(e) => o.fail(
                    d.i,
                    d.i,
                    format!("{v} height {h}: undecodable commit certificate: {e}"),
                ),
            }
            let sound = match (CertValue::decode(d.value), h.0) {
                (Ok(CertValue::Empty), 1) => BTreeSet::new(),
                (Ok(CertValue::Empty), _) => {
                    o.fail(
                        d.i,
                        d.i,
                        format!("{v} decided the empty certificate at height {h}"),
                    );
                    continue;
                }
                (Ok(CertValue::Commit(c)), _) => {
                    if let Some(defect) = h.prev().and_then(|p| self.certificate_defect(&c, p)) {
                        o.fail(
                            d.i,
                            d.i,
                            format!("{v} height {h}: decided certificate unsound: {defect}"),
                        );
                        continue;
                    }
                    self.recount(&c)
                }
                (Err(e), _) => {
                    o.fail(d.i, d.i, format!("{v} height {h}: undecodable value: {e}"));
                    continue;
                }
            };
            if let Some(f) = self.finalize_at(*v, *h) {
                let ordered: BTreeSet<PayloadId> = f.payload_ids.iter().copied().collect();
                if ordered != sound {
                    o.fail(
                        d.i,
                        f.i,
                        format!(
                            "{v} height {h}: block orders {} payloads, but {} are attested by more than f",
                            ordered.len(),
                            sound.len()
                        ),
                    );
                }
            }
        }
        o.done()
    }

    fn finalization_order(&self) -> PropertyResult {
        let mut o = Outcome::new("finalization_order");
        for (v, fins) in &self.finalized {
            let mut expect = Height::FIRST;
            for (h, f) in fins {
                o.checked += 1;
                if *h != expect {
                    o.fail(
                        f.i,
                        f.i,
                        format!("{v} finalized height {h} when {expect} was next"),
                    );
                }
                expect = h.next();
                let mut keyed: Vec<(std::cmp::Reverse<u64>, PayloadId, TxHash)> = Vec::new();
                let mut known = true;
                for id in f.payload_ids {
                    match self.accepted.get(id) {
                        Some((_, txs)) => keyed
                            .extend(txs.iter().map(|t| (std::cmp::Reverse(t.fee), *id, t.hash))),
                        None => known = false,
                    }
                }
                if !known {
                    continue;
                }
                keyed.sort();
                let expected: Vec<TxHash> = keyed.into_iter().map(|(_, _, t)| t).collect();
                if expected != f.txs {
                    o.fail(f.i, f.i, format!("{v} height {h}: transactions are not in (fee desc, payload id, hash) order"));
                }
            }
        }
        o.done()
    }

    fn beb_integrity(&self) -> PropertyResult {
        let mut o = Outcome::new("beb_integrity");
        for (i, v, p, id) in &self.beb_deliveries {
            if !self.correct_proposers.contains(p) {
                continue;
            }
            o.checked += 1;
            match self.broadcasts.get(&(*p, *id)) {
                Some(b) if b < i => {}
                _ => o.fail(
                    *i,
                    *i,
                    format!(
                        "{v} delivered {} from p{p}, which never broadcast it",
                        id.0.short()
                    ),
                ),
            }
        }
        o.done()
    }
}
