// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Unit tests for `amp_core::amp::validate`.

mod common;

use std::collections::BTreeSet;

use amp_core::amp::validate::*;
use amp_core::encoding::Encode;
use amp_core::types::*;
use common::{pid, Fixture};

fn tx(fee: u64, body: &[u8]) -> Transaction {
    Transaction::new(AccountId(1), 0, fee, body.to_vec())
}

#[test]
fn empty_payload_is_invalid() {
    let p = Payload {
        proposer: NodeId::Proposer(0),
        created_height_hint: Height(0),
        transactions: vec![],
    };
    assert!(!valid_payload(&p, &Limits::default()));
}

#[test]
fn oversize_payload_is_invalid() {
    let p = Payload {
        proposer: NodeId::Proposer(0),
        created_height_hint: Height(0),
        transactions: vec![tx(1, &[7u8; 200])],
    };
    let size = p.encode().len();
    assert!(valid_payload(
        &p,
        &Limits {
            max_payload_bytes: size,
            max_extension_ids: 8
        }
    ));
    assert!(!valid_payload(
        &p,
        &Limits {
            max_payload_bytes: size - 1,
            max_extension_ids: 8
        }
    ));
}

#[test]
fn duplicate_tx_in_payload_is_invalid() {
    let p = Payload {
        proposer: NodeId::Proposer(0),
        created_height_hint: Height(0),
        transactions: vec![tx(1, b"a"), tx(2, b"b"), tx(1, b"a")],
    };
    assert!(!valid_payload(&p, &Limits::default()));
}

#[test]
fn well_formed_extension_verifies() {
    let fx = Fixture::new(4);
    let pc = fx.precommit(3, 0, 1, &[pid(1), pid(2)]);
    assert!(verify_vote_extension(
        &fx.registry,
        &pc,
        pc.extension.as_ref().unwrap(),
        &Limits::default()
    ));
}

#[test]
fn extension_from_another_signer_fails() {
    let fx = Fixture::new(4);
    let mut pc = fx.precommit(3, 0, 1, &[pid(1)]);
    let other = fx.precommit(3, 0, 2, &[pid(1)]);
    pc.extension = other.extension;
    assert!(!verify_vote_extension(
        &fx.registry,
        &pc,
        pc.extension.as_ref().unwrap(),
        &Limits::default()
    ));
}

#[test]
fn oversize_or_repeated_extension_fails() {
    let fx = Fixture::new(4);
    let limits = Limits {
        max_payload_bytes: 1024,
        max_extension_ids: 2,
    };
    let pc = fx.precommit(3, 0, 1, &[pid(1), pid(2), pid(3)]);
    assert!(!verify_vote_extension(
        &fx.registry,
        &pc,
        pc.extension.as_ref().unwrap(),
        &limits
    ));
    let pc = fx.precommit(3, 0, 1, &[pid(1), pid(1)]);
    assert!(!verify_vote_extension(
        &fx.registry,
        &pc,
        pc.extension.as_ref().unwrap(),
        &Limits::default()
    ));
}

#[test]
fn certificate_with_quorum_is_valid_for_next_height() {
    let fx = Fixture::new(4);
    let cert = CertValue::Commit(fx.cert(4, &[(0, &[pid(1)]), (1, &[]), (2, &[pid(1)])]));
    let rules = CommitRules::new(&fx.registry, Limits::default());
    assert!(valid_commit(&cert, Height(5), &rules));
    // Wrong height: a certificate for h-2.
    assert!(!valid_commit(&cert, Height(6), &rules));
    assert!(!valid_commit(&cert, Height(4), &rules));
}

#[test]
fn genesis_corner_case() {
    let fx = Fixture::new(4);
    let rules = CommitRules::new(&fx.registry, Limits::default());
    assert!(valid_commit(&CertValue::Empty, Height::FIRST, &rules));
    assert!(!valid_commit(&CertValue::Empty, Height(2), &rules));
    let c0 = CertValue::Commit(fx.cert(0, &[(0, &[]), (1, &[]), (2, &[])]));
    assert!(!valid_commit(&c0, Height::FIRST, &rules));
}

#[test]
fn too_few_or_duplicate_signers_invalidate() {
    let fx = Fixture::new(4);
    let rules = CommitRules::new(&fx.registry, Limits::default());
    let two = CertValue::Commit(fx.cert(4, &[(0, &[]), (1, &[])]));
    assert!(!valid_commit(&two, Height(5), &rules));
    let dup = CertValue::Commit(fx.cert(4, &[(0, &[]), (1, &[]), (1, &[])]));
    assert!(!valid_commit(&dup, Height(5), &rules));
    let relaxed = CommitRules {
        min_precommits: 2,
        ..rules
    };
    assert!(valid_commit(&two, Height(5), &relaxed));
}

#[test]
fn forged_extension_signature_invalidates() {
    let fx = Fixture::new(4);
    let rules = CommitRules::new(&fx.registry, Limits::default());
    let mut cert = fx.cert(4, &[(0, &[pid(1)]), (1, &[pid(1)]), (2, &[pid(1)])]);
    cert.precommits[1].extension.as_mut().unwrap().signature.0[0] ^= 0x80;
    assert!(!valid_commit(&CertValue::Commit(cert), Height(5), &rules));
}

#[test]
fn mixed_rounds_invalidate() {
    let fx = Fixture::new(4);
    let rules = CommitRules::new(&fx.registry, Limits::default());
    let mut cert = fx.cert(4, &[(0, &[]), (1, &[]), (2, &[])]);
    cert.precommits[2] = fx.precommit(4, 1, 2, &[]);
    assert!(!valid_commit(&CertValue::Commit(cert), Height(5), &rules));
}

#[test]
fn sound_ids_counts_strictly_more_than_f() {
    let fx = Fixture::new(4);
    let (a, b) = (pid(0xa), pid(0xb));
    // Oracle: a is attested by v0, v1 (2) and b by v0, v2 (2); both > f = 1.
    let c = CertValue::Commit(fx.cert(1, &[(0, &[a, b]), (1, &[a]), (2, &[b])]));
    assert_eq!(sound_ids(&c, 1), BTreeSet::from([a, b]));
    // a attested once: not > 1.
    let c = CertValue::Commit(fx.cert(1, &[(0, &[a]), (1, &[]), (2, &[])]));
    assert!(sound_ids(&c, 1).is_empty());
    assert_eq!(
        sound_ids_with(&c, SoundThreshold::AtLeast(1)),
        BTreeSet::from([a])
    );
    assert!(sound_ids(&CertValue::Empty, 1).is_empty());
}
