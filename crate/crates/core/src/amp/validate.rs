// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Pure validity predicates: payloads, vote extensions, commit certificates,
//! and the extraction of sound ids from a certificate.

use std::collections::{BTreeMap, BTreeSet};

use crate::consensus::quorum;
use crate::crypto::PublicKeySet;
use crate::encoding::Encode;
use crate::types::*;

/// Resource bounds applied to untrusted inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_payload_bytes: usize,
    pub max_extension_ids: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_payload_bytes: 64 * 1024,
            max_extension_ids: 256,
        }
    }
}

/// Structural payload validation. No account state is consulted.
pub fn valid_payload(p: &Payload, limits: &Limits) -> bool {
    if p.transactions.is_empty() {
        return false;
    }
    if p.encode().len() > limits.max_payload_bytes {
        return false;
    }
    let mut seen = BTreeSet::new();
    p.transactions
        .iter()
        .all(|tx| !tx.body().is_empty() && seen.insert(tx.tx_hash()))
}

/// Checks a vote extension against the precommit carrying it.
pub fn verify_vote_extension(
    registry: &PublicKeySet,
    pc: &Precommit,
    ext: &VoteExtension,
    limits: &Limits,
) -> bool {
    let Some(value_id) = pc.value_id else {
        return false;
    };
    if ext.signer != pc.signer || ext.ids.len() > limits.max_extension_ids {
        return false;
    }
    let distinct: BTreeSet<_> = ext.ids.iter().collect();
    if distinct.len() != ext.ids.len() {
        return false;
    }
    let msg = sign_bytes::extension(pc.height, pc.round, value_id, &ext.ids);
    registry.verify(ext.signer, &msg, &ext.signature)
}

/// Checks a precommit's own signature (not its extension).
pub fn verify_precommit_signature(registry: &PublicKeySet, pc: &Precommit) -> bool {
    registry.verify(
        pc.signer,
        &sign_bytes::precommit(pc.height, pc.round, pc.value_id),
        &pc.signature,
    )
}

/// Everything `valid_commit` needs besides the certificate itself.
#[derive(Clone, Copy, Debug)]
pub struct CommitRules<'a> {
    pub registry: &'a PublicKeySet,
    pub limits: Limits,
    /// Minimum number of distinct signers; a quorum unless deliberately mutated.
    pub min_precommits: usize,
}

impl<'a> CommitRules<'a> {
    pub fn new(registry: &'a PublicKeySet, limits: Limits) -> Self {
        CommitRules {
            registry,
            limits,
            min_precommits: quorum(registry.len()),
        }
    }
}

/// Validates the value proposed for height `h`: the empty certificate at the
/// first height, otherwise a commit certificate for `h - 1`.
pub fn valid_commit(value: &CertValue, h: Height, rules: &CommitRules<'_>) -> bool {
    match value {
        CertValue::Empty => h == Height::FIRST,
        CertValue::Commit(c) => {
            if h <= Height::FIRST || Some(c.height) != h.prev() {
                return false;
            }
            valid_certificate(c, rules)
        }
    }
}

/// Commit-certificate invariants with no height context.
pub fn valid_certificate(c: &CommitCertificate, rules: &CommitRules<'_>) -> bool {
    let mut signers = BTreeSet::new();
    for pc in &c.precommits {
        if pc.height != c.height || pc.round != c.round || pc.value_id != Some(c.value_id) {
            return false;
        }
        if !rules.registry.contains(pc.signer) || !signers.insert(pc.signer) {
            return false;
        }
        if !verify_precommit_signature(rules.registry, pc) {
            return false;
        }
        match &pc.extension {
            Some(ext) if verify_vote_extension(rules.registry, pc, ext, &rules.limits) => {}
            _ => return false,
        }
    }
    signers.len() >= rules.min_precommits
}

/// How many attestations make an id sound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SoundThreshold {
    /// `count > f`.
    MoreThan(usize),
    /// `count >= f`; only used to check that the trace checkers notice it.
    AtLeast(usize),
}

impl SoundThreshold {
    fn admits(self, count: usize) -> bool {
        match self {
            SoundThreshold::MoreThan(f) => count > f,
            SoundThreshold::AtLeast(f) => count >= f,
        }
    }
}

/// Ids attested by more than `f` of the certificate's extensions.
pub fn sound_ids(value: &CertValue, f: usize) -> BTreeSet<PayloadId> {
    sound_ids_with(value, SoundThreshold::MoreThan(f))
}

pub fn sound_ids_with(value: &CertValue, threshold: SoundThreshold) -> BTreeSet<PayloadId> {
    let Some(cert) = value.as_commit() else {
        return BTreeSet::new();
    };
    let mut count: BTreeMap<PayloadId, usize> = BTreeMap::new();
    let mut seen_signers = BTreeSet::new();
    for pc in &cert.precommits {
        if !seen_signers.insert(pc.signer) {
            continue;
        }
        let Some(ext) = &pc.extension else { continue };
        for id in ext.ids.iter().collect::<BTreeSet<_>>() {
            *count.entry(*id).or_default() += 1;
        }
    }
    count
        .into_iter()
        .filter(|&(_, c)| threshold.admits(c))
        .map(|(id, _)| id)
        .collect()
}
