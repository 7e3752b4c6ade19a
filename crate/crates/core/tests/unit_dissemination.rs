// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Unit tests for `amp_core::dissemination`.

use std::collections::BTreeSet;

use amp_core::dissemination::*;
use amp_core::types::Digest;
use amp_core::types::{Payload, PayloadId};

fn pid(b: u8) -> PayloadId {
    PayloadId(Digest([b; 32]))
}

#[test]
fn backoff_starts_at_two_delta_and_doubles_to_cap() {
    let mut rt = Retransmitter::new(10);
    assert_eq!(rt.request([pid(1)], 100), BTreeSet::from([pid(1)]));
    assert_eq!(rt.next_deadline(), Some(120));
    assert!(rt.due(119).is_empty());
    let mut now = 120;
    let mut gaps = Vec::new();
    for _ in 0..7 {
        assert_eq!(rt.due(now), BTreeSet::from([pid(1)]));
        let next = rt.next_deadline().unwrap();
        gaps.push(next - now);
        now = next;
    }
    assert_eq!(gaps, vec![40, 80, 160, 320, 320, 320, 320]);
}

#[test]
fn repeated_request_is_not_duplicated() {
    let mut rt = Retransmitter::new(10);
    rt.request([pid(1)], 0);
    assert!(rt.request([pid(1), pid(2)], 5).contains(&pid(2)));
    assert!(!rt.request([pid(1)], 5).contains(&pid(1)));
}

#[test]
fn received_clears_the_id() {
    let mut rt = Retransmitter::new(10);
    rt.request([pid(1)], 0);
    assert!(rt.received(&pid(1)));
    assert!(!rt.received(&pid(1)));
    assert!(rt.is_idle());
    assert_eq!(rt.next_deadline(), None);
}

#[test]
fn answers_only_what_is_held() {
    let held = Payload {
        proposer: amp_core::types::NodeId::Proposer(0),
        created_height_hint: amp_core::types::Height(1),
        transactions: vec![amp_core::types::Transaction::new(
            amp_core::types::AccountId(1),
            0,
            1,
            vec![1],
        )],
    };
    let id = held.id();
    let ids = BTreeSet::from([id, pid(9)]);
    let out = answer_request(&ids, |q| (*q == id).then_some(&held));
    assert_eq!(
        out,
        vec![DisseminationMsg::RetransmitResponse(held.clone())]
    );
}
