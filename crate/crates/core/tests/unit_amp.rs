// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Unit tests for `amp_core::amp`.

mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use amp_core::amp::*;
use amp_core::consensus::AppHooks;
use amp_core::encoding::Encode;
use amp_core::types::*;
use common::{pid, Fixture};

fn tx(fee: u64, body: &str) -> Transaction {
    Transaction::new(AccountId(0), 0, fee, body.as_bytes().to_vec())
}

fn payload(tag: &str) -> Payload {
    Payload {
        proposer: NodeId::Proposer(0),
        created_height_hint: Height(1),
        transactions: vec![tx(1, tag)],
    }
}

fn state(fx: &Fixture) -> AmpState {
    AmpState::new(AmpConfig::new(4, 1), Arc::new(fx.registry.clone()), 0)
}

#[test]
fn fresh_payload_enters_pending_once() {
    let fx = Fixture::new(4);
    let mut s = state(&fx);
    let p = payload("a");
    assert_eq!(
        s.on_deliver_payload(p.clone()),
        DeliverOutcome::Accepted(p.id())
    );
    assert_eq!(s.pending().len(), 1);
    assert_eq!(
        s.on_deliver_payload(p.clone()),
        DeliverOutcome::Duplicate(p.id())
    );
    assert_eq!(s.pending().len(), 1);
}

#[test]
fn invalid_payload_is_counted_and_dropped() {
    let fx = Fixture::new(4);
    let mut s = state(&fx);
    let p = Payload {
        proposer: NodeId::Proposer(0),
        created_height_hint: Height(1),
        transactions: vec![],
    };
    assert!(matches!(
        s.on_deliver_payload(p),
        DeliverOutcome::Invalid(_)
    ));
    assert!(s.pending().is_empty());
    assert_eq!(s.invalid_payloads(), 1);
}

#[test]
fn extend_vote_skips_sound_ids_of_the_proposal() {
    let fx = Fixture::new(4);
    let mut s = state(&fx);
    let (a, b) = (payload("a"), payload("b"));
    let (ia, ib) = (a.id(), b.id());
    s.on_deliver_payload(a);
    s.on_deliver_payload(b);
    // a is sound in v (two attestations > f = 1); b is not.
    let v = CertValue::Commit(fx.cert(1, &[(0, &[ia]), (1, &[ia]), (2, &[ib])]));
    assert_eq!(s.extend_vote_ids(&v), vec![ib]);
    assert_eq!(s.extend_vote_ids(&CertValue::Empty).len(), 2);
    let v = CertValue::Commit(fx.cert(1, &[(0, &[ia, ib]), (1, &[ia, ib]), (2, &[])]));
    assert!(s.extend_vote_ids(&v).is_empty());
}

#[test]
fn empty_pending_gives_empty_extension() {
    let fx = Fixture::new(4);
    let s = state(&fx);
    assert!(s.extend_vote_ids(&CertValue::Empty).is_empty());
}

#[test]
fn get_value_is_empty_before_first_decision() {
    let fx = Fixture::new(4);
    let s = state(&fx);
    assert_eq!(s.get_value(Height::FIRST), CertValue::Empty);
    assert!(s.sound_ids(&s.get_value(Height::FIRST)).is_empty());
}

#[test]
fn get_value_returns_the_stored_commit() {
    let fx = Fixture::new(4);
    let mut s = state(&fx);
    let commit = fx.cert(4, &[(0, &[]), (1, &[]), (2, &[]), (3, &[])]);
    s.decided(Height(4), &CertValue::Empty, &commit);
    assert_eq!(s.get_value(Height(5)), CertValue::Commit(commit));
}

#[test]
fn decided_removes_ordered_ids_from_pending_even_if_missing() {
    let fx = Fixture::new(4);
    let mut s = state(&fx);
    let a = payload("a");
    s.on_deliver_payload(a.clone());
    let ghost = pid(0x77);
    let v =
        CertValue::Commit(fx.cert(1, &[(0, &[a.id(), ghost]), (1, &[a.id(), ghost]), (2, &[])]));
    let commit = fx.cert(2, &[(0, &[]), (1, &[]), (2, &[])]);
    let missing = s.decided(Height(2), &v, &commit);
    assert_eq!(missing, BTreeSet::from([ghost]));
    assert!(s.pending().is_empty());
    assert_eq!(s.ordered(Height(2)).unwrap().len(), 2);
}

#[test]
fn decision_with_everything_local_requests_nothing() {
    let fx = Fixture::new(4);
    let mut s = state(&fx);
    let a = payload("a");
    s.on_deliver_payload(a.clone());
    let v = CertValue::Commit(fx.cert(1, &[(0, &[a.id()]), (1, &[a.id()]), (2, &[])]));
    assert!(s
        .decided(Height(2), &v, &fx.cert(2, &[(0, &[])]))
        .is_empty());
}

#[test]
fn finalization_waits_for_missing_payload_and_keeps_order() {
    let fx = Fixture::new(4);
    let mut s = state(&fx);
    let (a, b) = (payload("a"), payload("b"));
    let empty_commit = fx.cert(1, &[(0, &[]), (1, &[]), (2, &[])]);
    s.decided(Height(1), &CertValue::Empty, &empty_commit);
    let blocks = s.try_finalize();
    assert_eq!(blocks.len(), 1);
    assert!(blocks[0].transactions.is_empty());
    assert_eq!(s.next(), Height(2));

    let v2 = CertValue::Commit(fx.cert(1, &[(0, &[a.id()]), (1, &[a.id()]), (2, &[])]));
    s.decided(Height(2), &v2, &fx.cert(2, &[(0, &[])]));
    let v3 = CertValue::Commit(fx.cert(2, &[(0, &[b.id()]), (1, &[b.id()]), (2, &[])]));
    s.on_deliver_payload(b.clone());
    s.decided(Height(3), &v3, &fx.cert(3, &[(0, &[])]));
    // Height 2 is missing a, so nothing finalizes even though 3 is complete.
    assert!(s.try_finalize().is_empty());
    assert!(s.on_retransmitted_payload(a.clone()));
    let blocks = s.try_finalize();
    assert_eq!(
        blocks.iter().map(|b| b.height).collect::<Vec<_>>(),
        vec![Height(2), Height(3)]
    );
    assert_eq!(blocks[0].transactions, a.transactions);
    // Replay after finalization: dropped, pending unchanged.
    let before = s.pending().clone();
    assert_eq!(
        s.on_deliver_payload(a.clone()),
        DeliverOutcome::Duplicate(a.id())
    );
    assert_eq!(s.pending(), &before);
}

#[test]
fn unrequested_retransmission_is_ignored() {
    let fx = Fixture::new(4);
    let mut s = state(&fx);
    assert!(!s.on_retransmitted_payload(payload("zzz")));
}

#[test]
fn aging_boundary() {
    let fx = Fixture::new(4);
    let mut s = state(&fx);
    s.start_height(Height(1));
    let old = payload("old");
    s.on_deliver_payload(old.clone());
    s.start_height(Height(3));
    let young = payload("young");
    s.on_deliver_payload(young.clone());
    // 1 + 8 < 10 evicts; 3 + 8 < 10 does not.
    let evicted = s.age_pending(Height(10), 8);
    assert_eq!(evicted, BTreeSet::from([old.id()]));
    assert!(s.pending().contains(&young.id()));
    assert!(
        s.payload(&old.id()).is_some(),
        "evicted payload bytes are retained"
    );
    // Not re-admitted on redelivery.
    assert_eq!(
        s.on_deliver_payload(old.clone()),
        DeliverOutcome::Duplicate(old.id())
    );
}

#[test]
fn aged_id_decided_by_others_still_finalizes() {
    let fx = Fixture::new(4);
    let mut s = state(&fx);
    s.start_height(Height(1));
    let p = payload("p");
    s.on_deliver_payload(p.clone());
    s.age_pending(Height(20), 8);
    assert!(s.pending().is_empty());
    for h in 1..=2 {
        let v = if h == 1 {
            CertValue::Empty
        } else {
            CertValue::Commit(fx.cert(1, &[(1, &[p.id()]), (2, &[p.id()]), (3, &[])]))
        };
        assert!(s
            .decided(Height(h), &v, &fx.cert(h, &[(0, &[])]))
            .is_empty());
    }
    let blocks = s.try_finalize();
    assert_eq!(blocks.len(), 2);
    assert_eq!(blocks[1].payload_ids, vec![p.id()]);
}

#[test]
fn extension_is_capped_oldest_first() {
    let fx = Fixture::new(4);
    let mut cfg = AmpConfig::new(4, 1);
    cfg.limits.max_extension_ids = 2;
    let mut s = AmpState::new(cfg, Arc::new(fx.registry.clone()), 0);
    s.start_height(Height(1));
    let first = payload("first");
    s.on_deliver_payload(first.clone());
    s.start_height(Height(2));
    for t in ["x", "y", "z"] {
        s.on_deliver_payload(payload(t));
    }
    let ids = s.extend_vote_ids(&CertValue::Empty);
    assert_eq!(ids.len(), 2);
    assert!(ids.contains(&first.id()));
}

#[test]
fn received_proposal_rejects_garbage() {
    let fx = Fixture::new(4);
    let mut s = state(&fx);
    assert!(!s.received_proposal(Height(2), Round(0), b"\xff\x00"));
    assert!(s.received_proposal(Height(1), Round(0), &CertValue::Empty.encode()));
}
