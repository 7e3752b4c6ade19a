// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Randomized properties of the encoding, ordering, attestation counting,
//! retransmission schedule and simulator.

use std::collections::BTreeSet;

use amp_core::amp::{self, SoundThreshold};
use amp_core::check::check;
use amp_core::crypto::Signature;
use amp_core::dissemination::Retransmitter;
use amp_core::encoding::{Decode, Encode};
use amp_core::simnet::{run, SimConfig};
use amp_core::types::*;
use proptest::prelude::*;

fn tx_strategy() -> impl Strategy<Value = Transaction> {
    (
        0u64..4,
        0u64..4,
        0u64..4,
        proptest::collection::vec(any::<u8>(), 0..12),
    )
        .prop_map(|(s, n, fee, body)| Transaction::new(AccountId(s), n, fee, body))
}

fn payload_strategy() -> impl Strategy<Value = Payload> {
    (
        0u32..4,
        0u64..20,
        proptest::collection::vec(tx_strategy(), 0..6),
    )
        .prop_map(|(p, h, txs)| Payload {
            proposer: NodeId::Proposer(p),
            created_height_hint: Height(h),
            transactions: txs,
        })
}

fn id(b: u8) -> PayloadId {
    PayloadId(Digest([b; 32]))
}

fn cert(exts: &[Vec<u8>]) -> CertValue {
    let v = ValueId(Digest([1; 32]));
    CertValue::Commit(CommitCertificate {
        height: Height(1),
        round: Round(0),
        value_id: v,
        precommits: exts
            .iter()
            .enumerate()
            .map(|(s, ids)| Precommit {
                height: Height(1),
                round: Round(0),
                value_id: Some(v),
                signer: ValidatorId(s as u32),
                signature: Signature(vec![]),
                extension: Some(VoteExtension {
                    ids: ids.iter().map(|b| id(*b)).collect(),
                    signer: ValidatorId(s as u32),
                    signature: Signature(vec![]),
                }),
            })
            .collect(),
    })
}

proptest! {
    #[test]
    fn payload_encoding_round_trips(p in payload_strategy()) {
        prop_assert_eq!(Payload::decode(&p.encode()).unwrap(), p);
    }

    #[test]
    fn distinct_payloads_have_distinct_encodings(a in payload_strategy(), b in payload_strategy()) {
        prop_assert_eq!(a == b, a.encode() == b.encode());
    }

    #[test]
    fn decoding_arbitrary_bytes_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
        let _ = Payload::decode(&bytes);
        let _ = CertValue::decode(&bytes);
        let _ = CommitCertificate::decode(&bytes);
    }

    #[test]
    fn truncation_is_always_rejected(p in payload_strategy(), cut in 1usize..16) {
        let bytes = p.encode();
        let keep = bytes.len().saturating_sub(cut);
        prop_assert!(Payload::decode(&bytes[..keep]).is_err());
    }

    #[test]
    fn sort_keeps_every_transaction_and_orders_fees(ps in proptest::collection::vec(payload_strategy(), 0..5)) {
        let out = amp::sort(&ps);
        prop_assert_eq!(out.len(), ps.iter().map(|p| p.transactions.len()).sum::<usize>());
        prop_assert!(out.windows(2).all(|w| w[0].priority_fee() >= w[1].priority_fee()));
        let mut rev = ps.clone();
        rev.reverse();
        prop_assert_eq!(amp::sort(&rev), out);
    }

    #[test]
    fn sound_ids_shrink_as_the_threshold_grows(
        exts in proptest::collection::vec(proptest::collection::vec(0u8..6, 0..6), 0..10),
        f in 0usize..4,
    ) {
        let c = cert(&exts);
        let strict = amp::sound_ids(&c, f);
        let loose = amp::validate::sound_ids_with(&c, SoundThreshold::AtLeast(f));
        let next = amp::sound_ids(&c, f + 1);
        prop_assert!(strict.is_subset(&loose));
        prop_assert!(next.is_subset(&strict));
        // Every sound id is listed by more than f signers.
        for pid in &strict {
            let listed = exts.iter().filter(|e| e.iter().any(|b| id(*b) == *pid)).count();
            prop_assert!(listed > f);
        }
    }

    #[test]
    fn retransmission_gaps_start_at_two_delta_and_never_shrink(delta in 1u64..50, rounds in 1usize..12) {
        let mut r = Retransmitter::new(delta);
        let target: BTreeSet<PayloadId> = [id(1)].into();
        let _ = r.request(target.clone(), 0);
        let mut last = 0;
        let mut prev_gap = 0;
        for k in 0..rounds {
            let at = r.next_deadline().unwrap();
            let gap = at - last;
            if k == 0 {
                prop_assert_eq!(gap, 2 * delta);
            }
            prop_assert!(gap >= prev_gap);
            prop_assert_eq!(r.due(at), target.clone());
            prev_gap = gap;
            last = at;
        }
        prop_assert!(r.received(&id(1)));
        prop_assert!(r.is_idle());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_fault_free_runs_pass_every_check(seed in any::<u64>(), gst in prop_oneof![Just(0u64), 0u64..500]) {
        let cfg = SimConfig { gst, ..SimConfig::baseline(4, 1) }.with_seed(seed);
        let trace = run(&cfg).unwrap();
        let report = check(&trace);
        prop_assert!(trace.is_complete());
        prop_assert!(report.passed(), "{}", report.to_text());
    }
}
