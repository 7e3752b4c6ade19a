// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! The multi-proposer layer of one validator.
//!
//! Validators attest to the payloads they hold by listing payload ids in
//! their precommit vote extensions. The block assembler of height `h`
//! proposes the commit certificate of `h - 1`; the ids attested by more than
//! `f` validators in it are ordered at `h`, and the block for `h` is the
//! deterministic `sort` of those payloads once all of them are available.

pub mod order;
pub mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::consensus::{quorum, AppHooks};
use crate::crypto::PublicKeySet;
use crate::encoding::{Decode, Encode};
use crate::types::*;
pub use order::{block_digest, sort};
pub use validate::{sound_ids, valid_commit, valid_payload, CommitRules, Limits, SoundThreshold};

/// Deliberate protocol faults, used to show the trace checkers are not vacuous.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    #[default]
    None,
    /// `soundIDs` admits ids with `count >= f`.
    SoundThresholdAtLeastF,
    /// `validCommit` accepts one precommit fewer than a quorum.
    CommitAcceptsBelowQuorum,
    /// `sort` breaks fee ties with a per-validator shuffle.
    UnstableSortTies,
}

impl Mutation {
    pub const INJECTED: [Mutation; 3] = [
        Mutation::SoundThresholdAtLeastF,
        Mutation::CommitAcceptsBelowQuorum,
        Mutation::UnstableSortTies,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mutation::None => "none",
            Mutation::SoundThresholdAtLeastF => "sound_threshold_at_least_f",
            Mutation::CommitAcceptsBelowQuorum => "commit_accepts_below_quorum",
            Mutation::UnstableSortTies => "unstable_sort_ties",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AmpConfig {
    pub n: usize,
    pub f: usize,
    /// Ids still pending `aging_k` heights after first being seen are evicted.
    pub aging_k: u64,
    pub limits: Limits,
    pub mutation: Mutation,
}

impl AmpConfig {
    pub fn new(n: usize, f: usize) -> Self {
        AmpConfig {
            n,
            f,
            aging_k: 8,
            limits: Limits::default(),
            mutation: Mutation::None,
        }
    }

    pub fn sound_threshold(&self) -> SoundThreshold {
        match self.mutation {
            Mutation::SoundThresholdAtLeastF => SoundThreshold::AtLeast(self.f),
            _ => SoundThreshold::MoreThan(self.f),
        }
    }

    pub fn min_precommits(&self) -> usize {
        match self.mutation {
            Mutation::CommitAcceptsBelowQuorum => quorum(self.n) - 1,
            _ => quorum(self.n),
        }
    }
}

/// Result of handing a payload from the dissemination layer to the AMP layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeliverOutcome {
    /// Stored and added to `pending`.
    Accepted(PayloadId),
    /// Filled an id that was already ordered but missing locally.
    Recovered(PayloadId),
    Duplicate(PayloadId),
    AlreadyOrdered(PayloadId),
    Invalid(PayloadId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinalizedBlock {
    pub height: Height,
    /// Ordered ids of the block, ascending.
    pub payload_ids: Vec<PayloadId>,
    pub transactions: Vec<Transaction>,
    pub digest: Digest,
}

/// Per-validator AMP state.
#[derive(Clone, Debug)]
pub struct AmpState {
    config: AmpConfig,
    registry: Arc<PublicKeySet>,
    /// Salt for [`Mutation::UnstableSortTies`].
    salt: u64,

    ordered: BTreeMap<Height, BTreeSet<PayloadId>>,
    ordered_union: BTreeSet<PayloadId>,
    payloads: BTreeMap<PayloadId, Payload>,
    next: Height,
    attestations: CertValue,
    pending: BTreeSet<PayloadId>,
    pending_age: BTreeMap<PayloadId, Height>,
    aged: BTreeSet<PayloadId>,
    current_height: Height,
    invalid_payloads: u64,
}

impl AmpState {
    pub fn new(config: AmpConfig, registry: Arc<PublicKeySet>, salt: u64) -> Self {
        AmpState {
            config,
            registry,
            salt,
            ordered: BTreeMap::new(),
            ordered_union: BTreeSet::new(),
            payloads: BTreeMap::new(),
            next: Height::FIRST,
            attestations: CertValue::Empty,
            pending: BTreeSet::new(),
            pending_age: BTreeMap::new(),
            aged: BTreeSet::new(),
            current_height: Height::GENESIS,
            invalid_payloads: 0,
        }
    }

    pub fn config(&self) -> &AmpConfig {
        &self.config
    }

    pub fn pending(&self) -> &BTreeSet<PayloadId> {
        &self.pending
    }

    pub fn ordered(&self, h: Height) -> Option<&BTreeSet<PayloadId>> {
        self.ordered.get(&h)
    }

    pub fn payload(&self, id: &PayloadId) -> Option<&Payload> {
        self.payloads.get(id)
    }

    pub fn next(&self) -> Height {
        self.next
    }

    pub fn attestations(&self) -> &CertValue {
        &self.attestations
    }

    pub fn invalid_payloads(&self) -> u64 {
        self.invalid_payloads
    }

    pub fn is_aged(&self, id: &PayloadId) -> bool {
        self.aged.contains(id)
    }

    fn rules(&self) -> CommitRules<'_> {
        CommitRules {
            registry: &self.registry,
            limits: self.config.limits,
            min_precommits: self.config.min_precommits(),
        }
    }

    pub fn sound_ids(&self, value: &CertValue) -> BTreeSet<PayloadId> {
        validate::sound_ids_with(value, self.config.sound_threshold())
    }

    pub fn valid_commit(&self, value: &CertValue, h: Height) -> bool {
        valid_commit(value, h, &self.rules())
    }

    /// Algorithm-1 payload intake. A payload whose id was already ordered
    /// but is missing locally is stored without entering `pending`.
    pub fn on_deliver_payload(&mut self, p: Payload) -> DeliverOutcome {
        let id = p.id();
        if self.payloads.contains_key(&id) {
            return DeliverOutcome::Duplicate(id);
        }
        if !valid_payload(&p, &self.config.limits) {
            self.invalid_payloads += 1;
            return DeliverOutcome::Invalid(id);
        }
        if self.ordered_union.contains(&id) {
            if self.is_missing(&id) {
                self.payloads.insert(id, p);
                return DeliverOutcome::Recovered(id);
            }
            return DeliverOutcome::AlreadyOrdered(id);
        }
        self.pending.insert(id);
        self.pending_age.insert(id, self.current_height);
        self.payloads.insert(id, p);
        DeliverOutcome::Accepted(id)
    }

    /// Stores a retransmitted payload if it fills an ordered-but-missing id.
    pub fn on_retransmitted_payload(&mut self, p: Payload) -> bool {
        let id = p.id();
        if !self.is_missing(&id) || !valid_payload(&p, &self.config.limits) {
            return false;
        }
        self.payloads.insert(id, p);
        true
    }

    fn is_missing(&self, id: &PayloadId) -> bool {
        self.ordered_union.contains(id) && !self.payloads.contains_key(id)
    }

    /// Ordered ids not yet held locally.
    pub fn missing(&self) -> BTreeSet<PayloadId> {
        self.ordered
            .range(self.next..)
            .flat_map(|(_, ids)| ids)
            .filter(|id| !self.payloads.contains_key(id))
            .copied()
            .collect()
    }

    /// Evicts ids first seen more than `k` heights before `current_h`.
    pub fn age_pending(&mut self, current_h: Height, k: u64) -> BTreeSet<PayloadId> {
        let evicted: BTreeSet<PayloadId> = self
            .pending
            .iter()
            .filter(|id| {
                self.pending_age
                    .get(id)
                    .is_some_and(|first| first.0 + k < current_h.0)
            })
            .copied()
            .collect();
        for id in &evicted {
            self.pending.remove(id);
            self.aged.insert(*id);
        }
        evicted
    }

    pub fn start_height(&mut self, h: Height) -> BTreeSet<PayloadId> {
        self.current_height = h;
        self.age_pending(h, self.config.aging_k)
    }

    pub fn extend_vote_ids(&self, value: &CertValue) -> Vec<PayloadId> {
        let skip = self.sound_ids(value);
        let mut ids: Vec<PayloadId> = self
            .pending
            .iter()
            .filter(|id| !skip.contains(id))
            .copied()
            .collect();
        if ids.len() > self.config.limits.max_extension_ids {
            // Oldest first, so a flood of fresh ids cannot starve earlier ones.
            ids.sort_by_key(|id| (self.pending_age.get(id).copied(), *id));
            ids.truncate(self.config.limits.max_extension_ids);
            ids.sort();
        }
        ids
    }

    pub fn get_value(&self, _h: Height) -> CertValue {
        self.attestations.clone()
    }

    /// Records a decision. Returns the decided ids not held locally, which
    /// must be fetched from other validators.
    pub fn decided(
        &mut self,
        h: Height,
        value: &CertValue,
        commit: &CommitCertificate,
    ) -> BTreeSet<PayloadId> {
        self.attestations = CertValue::Commit(commit.clone());
        let ids = self.sound_ids(value);
        for id in &ids {
            self.pending.remove(id);
        }
        self.ordered_union.extend(ids.iter().copied());
        let missing = ids
            .iter()
            .filter(|id| !self.payloads.contains_key(id))
            .copied()
            .collect();
        self.ordered.insert(h, ids);
        missing
    }

    /// Emits every height that has become finalizable, in order.
    pub fn try_finalize(&mut self) -> Vec<FinalizedBlock> {
        let mut blocks = Vec::new();
        while let Some(ids) = self.ordered.get(&self.next) {
            let Some(payloads) = ids
                .iter()
                .map(|id| self.payloads.get(id))
                .collect::<Option<Vec<_>>>()
            else {
                break;
            };
            let transactions = match self.config.mutation {
                Mutation::UnstableSortTies => order::sort_with_unstable_ties(
                    payloads,
                    self.salt ^ self.next.0.wrapping_mul(0x9e37_79b9),
                ),
                _ => sort(payloads),
            };
            let digest = block_digest(&transactions);
            blocks.push(FinalizedBlock {
                height: self.next,
                payload_ids: ids.iter().copied().collect(),
                transactions,
                digest,
            });
            self.next = self.next.next();
        }
        blocks
    }
}

impl AppHooks for AmpState {
    fn received_proposal(&mut self, h: Height, _r: Round, value: &[u8]) -> bool {
        match CertValue::decode(value) {
            Ok(v) => self.valid_commit(&v, h),
            Err(_) => false,
        }
    }

    fn extend_vote(&mut self, _h: Height, _r: Round, value: &[u8]) -> Vec<PayloadId> {
        let v = CertValue::decode(value).unwrap_or(CertValue::Empty);
        self.extend_vote_ids(&v)
    }

    fn verify_vote_extension(&mut self, pc: &Precommit, ext: &VoteExtension) -> bool {
        validate::verify_vote_extension(&self.registry, pc, ext, &self.config.limits)
    }

    fn get_value(&mut self, h: Height) -> Vec<u8> {
        AmpState::get_value(self, h).encode()
    }

    fn decided(&mut self, h: Height, value: &[u8], commit: &CommitCertificate) {
        let v = CertValue::decode(value).unwrap_or(CertValue::Empty);
        AmpState::decided(self, h, &v, commit);
    }

    fn height_started(&mut self, h: Height) {
        self.start_height(h);
    }
}
