// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Tendermint-style agreement for one validator.
//!
//! The state machine is sans-IO: every handler takes an input (start,
//! message, timeout) and returns the [`Output`]s the host must act on. The
//! application is consulted through [`AppHooks`]. Own votes are applied to
//! the local tallies immediately, so the host never has to loop them back.

mod state;

pub use state::Consensus;

use serde::{Deserialize, Serialize};

use crate::encoding::{Encode, Writer};
use crate::types::*;

/// Votes needed for a quorum: more than two thirds of `n`, which is `2f + 1`
/// when `n = 3f + 1`.
pub fn quorum(n: usize) -> usize {
    2 * n / 3 + 1
}

/// Round-robin block assembler: `(h + r) mod n`.
pub fn assembler_for(h: Height, r: Round, n: usize) -> ValidatorId {
    assert!(n >= 1, "empty validator set");
    ValidatorId(((h.0 + u64::from(r.0)) % n as u64) as u32)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Timeouts {
    pub base: u64,
    pub delta: u64,
}

impl Timeouts {
    /// `base + r * delta`, used for all three step timeouts.
    pub fn duration(&self, r: Round) -> u64 {
        self.base + u64::from(r.0) * self.delta
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConsensusConfig {
    pub n: usize,
    pub f: usize,
    pub timeouts: Timeouts,
    /// How long to keep collecting precommits after a decision before the
    /// next height starts.
    pub grace_window: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Step {
    Propose,
    Prevote,
    Precommit,
    Decided,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TimeoutKind {
    Propose,
    Prevote,
    Precommit,
    /// End of the grace window after a decision.
    Commit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Timer {
    pub kind: TimeoutKind,
    pub height: Height,
    pub round: Round,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConsensusMsg {
    Proposal(Proposal),
    Prevote(Prevote),
    Precommit(Precommit),
}

impl ConsensusMsg {
    pub fn height(&self) -> Height {
        match self {
            ConsensusMsg::Proposal(m) => m.height,
            ConsensusMsg::Prevote(m) => m.height,
            ConsensusMsg::Precommit(m) => m.height,
        }
    }

    pub fn round(&self) -> Round {
        match self {
            ConsensusMsg::Proposal(m) => m.round,
            ConsensusMsg::Prevote(m) => m.round,
            ConsensusMsg::Precommit(m) => m.round,
        }
    }

    pub fn signer(&self) -> ValidatorId {
        match self {
            ConsensusMsg::Proposal(m) => m.signer,
            ConsensusMsg::Prevote(m) => m.signer,
            ConsensusMsg::Precommit(m) => m.signer,
        }
    }
}

impl Encode for ConsensusMsg {
    fn encode_to(&self, w: &mut Writer) {
        match self {
            ConsensusMsg::Proposal(m) => m.encode_to(w),
            ConsensusMsg::Prevote(m) => m.encode_to(w),
            ConsensusMsg::Precommit(m) => m.encode_to(w),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decision {
    pub height: Height,
    pub round: Round,
    pub value: Vec<u8>,
    pub commit: CommitCertificate,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Output {
    Broadcast(ConsensusMsg),
    Schedule {
        timer: Timer,
        after: u64,
    },
    StartedHeight(Height),
    StartedRound(Height, Round),
    /// A quorum of precommits for a valid proposal was observed.
    Quorum {
        height: Height,
        round: Round,
        value_id: ValueId,
    },
    /// The grace window closed; `decided` was delivered to the application.
    Decided(Decision),
    Equivocation {
        signer: ValidatorId,
        kind: &'static str,
        height: Height,
        round: Round,
    },
    Rejected {
        from: ValidatorId,
        reason: &'static str,
    },
}

/// Callbacks into the application layer. All must be deterministic
/// functions of validator-local state.
pub trait AppHooks {
    fn received_proposal(&mut self, h: Height, r: Round, value: &[u8]) -> bool;
    fn extend_vote(&mut self, h: Height, r: Round, value: &[u8]) -> Vec<PayloadId>;
    fn verify_vote_extension(&mut self, pc: &Precommit, ext: &VoteExtension) -> bool;
    fn get_value(&mut self, h: Height) -> Vec<u8>;
    fn decided(&mut self, h: Height, value: &[u8], commit: &CommitCertificate);
    fn height_started(&mut self, _h: Height) {}
}
