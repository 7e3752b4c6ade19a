// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Deterministic block construction from a decided set of payloads.

use std::cmp::Reverse;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::crypto;
use crate::encoding::encode_tx_list;
use crate::types::{Digest, Payload, PayloadId, Transaction};

/// All transactions of `payloads`, by priority fee descending, then payload
/// id ascending, then transaction hash ascending. Transactions that appear in
/// several payloads are kept once per payload. The output does not depend on
/// the order of `payloads`.
pub fn sort<'a>(payloads: impl IntoIterator<Item = &'a Payload>) -> Vec<Transaction> {
    let mut keyed: Vec<(PayloadId, &Transaction)> = payloads
        .into_iter()
        .flat_map(|p| {
            let id = p.id();
            p.transactions.iter().map(move |tx| (id, tx))
        })
        .collect();
    keyed.sort_by_key(|(id, tx)| (Reverse(tx.priority_fee()), *id, tx.tx_hash()));
    keyed.into_iter().map(|(_, tx)| tx.clone()).collect()
}

/// Fee-only ordering whose ties fall out of a per-node shuffle. Exists so the
/// agreement checker can be shown to catch a non-deterministic `sort`.
pub fn sort_with_unstable_ties<'a>(
    payloads: impl IntoIterator<Item = &'a Payload>,
    salt: u64,
) -> Vec<Transaction> {
    let mut txs: Vec<&Transaction> = payloads
        .into_iter()
        .flat_map(|p| p.transactions.iter())
        .collect();
    txs.sort_by_key(|tx| (tx.tx_hash(), Reverse(tx.priority_fee())));
    txs.shuffle(&mut ChaCha8Rng::seed_from_u64(salt));
    txs.sort_by_key(|tx| Reverse(tx.priority_fee()));
    txs.into_iter().cloned().collect()
}

/// Digest of the canonical encoding of a sorted transaction list.
pub fn block_digest(txs: &[Transaction]) -> Digest {
    crypto::hash(&encode_tx_list(txs))
}
