// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Inputs shared by the benchmarks in `benches/`.

use amp_core::crypto::{validator_keys, KeyPair, PublicKeySet, SignatureScheme};
use amp_core::types::*;

/// `n` distinct payload ids.
pub fn ids(n: usize) -> Vec<PayloadId> {
    (0..n)
        .map(|i| PayloadId(amp_core::crypto::hash(&(i as u64).to_be_bytes())))
        .collect()
}

/// A signed commit certificate of `n` validators, each attesting `per` ids
/// drawn from a sliding window over a pool of `2 * per` ids.
pub fn certificate(scheme: SignatureScheme, n: usize, per: usize) -> (CertValue, PublicKeySet) {
    let (keys, registry) = validator_keys(scheme, 1, n);
    let pool = ids(2 * per.max(1));
    let value = ValueId(Digest([7; 32]));
    let (h, r) = (Height(1), Round(0));
    let precommits = keys
        .iter()
        .enumerate()
        .map(|(i, key): (usize, &KeyPair)| {
            let mine: Vec<PayloadId> = (0..per).map(|k| pool[(i + k) % pool.len()]).collect();
            let signer = ValidatorId(i as u32);
            Precommit {
                height: h,
                round: r,
                value_id: Some(value),
                signer,
                signature: key.sign(&sign_bytes::precommit(h, r, Some(value))),
                extension: Some(VoteExtension {
                    signature: key.sign(&sign_bytes::extension(h, r, value, &mine)),
                    ids: mine,
                    signer,
                }),
            }
        })
        .collect();
    (
        CertValue::Commit(CommitCertificate {
            height: h,
            round: r,
            value_id: value,
            precommits,
        }),
        registry,
    )
}

/// `count` payloads of `txs` transactions each, fees in `0..4`.
pub fn payloads(count: usize, txs: usize) -> Vec<Payload> {
    (0..count)
        .map(|p| Payload {
            proposer: NodeId::Proposer(p as u32),
            created_height_hint: Height(1),
            transactions: (0..txs)
                .map(|t| {
                    Transaction::new(
                        AccountId(p as u64),
                        t as u64,
                        (p * 31 + t * 7) as u64 % 4,
                        vec![t as u8; 32],
                    )
                })
                .collect(),
        })
        .collect()
}
