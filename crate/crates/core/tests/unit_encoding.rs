// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Unit tests for `amp_core::encoding`.

use amp_core::crypto::Signature;
use amp_core::crypto::{KeyPair, SignatureScheme};
use amp_core::encoding::*;
use amp_core::types::*;

fn tx(fee: u64, body: &[u8]) -> Transaction {
    Transaction::new(AccountId(1), 0, fee, body.to_vec())
}

fn payload(body: &[u8]) -> Payload {
    Payload {
        proposer: NodeId::Proposer(0),
        created_height_hint: Height(2),
        transactions: vec![tx(5, body), tx(3, b"b")],
    }
}

#[test]
fn one_body_byte_changes_the_encoding() {
    let a = payload(b"hello");
    let b = payload(b"hellp");
    assert_ne!(a.encode(), b.encode());
    assert_ne!(a.id(), b.id());
}

#[test]
fn payload_round_trips() {
    let p = payload(b"x");
    let bytes = p.encode();
    let back = Payload::decode(&bytes).unwrap();
    assert_eq!(back, p);
    assert_eq!(back.encode(), bytes);
}

#[test]
fn trailing_and_truncated_input_is_rejected() {
    let mut bytes = payload(b"x").encode();
    bytes.push(0);
    assert_eq!(Payload::decode(&bytes), Err(DecodeError::TrailingBytes(1)));
    bytes.truncate(bytes.len() - 3);
    assert!(Payload::decode(&bytes).is_err());
}

#[test]
fn wrong_length_id_is_rejected() {
    let key = KeyPair::derive(SignatureScheme::KeyedSha256, 1, ValidatorId(0));
    let ext = VoteExtension {
        ids: vec![PayloadId(Digest([7; 32]))],
        signer: ValidatorId(0),
        signature: key.sign(b"x"),
    };
    let mut bytes = ext.encode();
    // Shrink the first id's length prefix from 32 to 31.
    assert_eq!(&bytes[5..9], &32u32.to_be_bytes());
    bytes[5..9].copy_from_slice(&31u32.to_be_bytes());
    assert!(VoteExtension::decode(&bytes).is_err());
}

#[test]
fn nil_precommit_uses_zero_digest_and_no_extension() {
    let pc = Precommit {
        height: Height(3),
        round: Round(1),
        value_id: None,
        signer: ValidatorId(2),
        signature: Signature(vec![1, 2, 3]),
        extension: None,
    };
    let bytes = pc.encode();
    assert!(bytes.windows(32).any(|w| w == [0u8; 32]));
    assert_eq!(Precommit::decode(&bytes).unwrap(), pc);
}

#[test]
fn empty_certificate_is_a_distinct_value() {
    assert_eq!(CertValue::Empty.encode(), vec![tag::EMPTY_COMMIT]);
    assert_eq!(
        CertValue::decode(&[tag::EMPTY_COMMIT]).unwrap(),
        CertValue::Empty
    );
    assert!(CertValue::decode(&[]).is_err());
}
