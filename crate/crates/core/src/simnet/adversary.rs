// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Fault and adversary specifications. A behavior only changes what its
//! target node sends and how it handles its own inputs; other nodes are never
//! touched directly.

use serde::{Deserialize, Serialize};

use crate::types::NodeId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    pub target: NodeId,
    pub behavior: Behavior,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Behavior {
    /// Stops at `at_time`; if `restart_at` is given, resumes from its
    /// persisted state then. Applies to validators and proposers.
    Crash {
        at_time: u64,
        restart_at: Option<u64>,
    },
    /// As block assembler, drops precommits from the certificate it proposes
    /// (those of `omit_validators`, and those attesting payloads of
    /// `omit_proposers`) as long as the result still passes `validCommit`.
    /// It also leaves those payloads out of its own extensions.
    CensorAssembler {
        omit_proposers: Vec<u32>,
        omit_validators: Vec<u32>,
    },
    /// Sends one payload to the `split` validators and a different payload to the rest.
    EquivocateProposer { split: Vec<u32> },
    /// Sends its payloads only to the `reach` validators.
    SelectiveDissemination { reach: Vec<u32> },
    /// Leaves payloads of `from_proposers` out of its own extensions; an
    /// empty list removes every id.
    OmitExtensionIds { from_proposers: Vec<u32> },
    /// Broadcasts `rate` extra junk payloads per regular payload; every
    /// second one is structurally invalid.
    SpamProposer { rate: u32 },
    /// Ignores retransmission requests.
    SilentRetransmit {},
    /// Answers retransmission requests with a tampered payload body.
    CorruptRetransmit {},
}

impl Behavior {
    pub fn name(&self) -> &'static str {
        match self {
            Behavior::Crash { .. } => "crash",
            Behavior::CensorAssembler { .. } => "censor_assembler",
            Behavior::EquivocateProposer { .. } => "equivocate_proposer",
            Behavior::SelectiveDissemination { .. } => "selective_dissemination",
            Behavior::OmitExtensionIds { .. } => "omit_extension_ids",
            Behavior::SpamProposer { .. } => "spam_proposer",
            Behavior::SilentRetransmit {} => "silent_retransmit",
            Behavior::CorruptRetransmit {} => "corrupt_retransmit",
        }
    }

    pub fn applies_to_validator(&self) -> bool {
        !matches!(
            self,
            Behavior::EquivocateProposer { .. }
                | Behavior::SelectiveDissemination { .. }
                | Behavior::SpamProposer { .. }
        )
    }

    pub fn applies_to_proposer(&self) -> bool {
        matches!(
            self,
            Behavior::Crash { .. }
                | Behavior::EquivocateProposer { .. }
                | Behavior::SelectiveDissemination { .. }
                | Behavior::SpamProposer { .. }
        )
    }

    pub(crate) fn validate(&self, n: usize) -> Result<(), String> {
        let in_range = |vs: &[u32]| match vs.iter().find(|v| **v as usize >= n) {
            Some(v) => Err(format!("validator v{v} does not exist (n = {n})")),
            None => Ok(()),
        };
        match self {
            Behavior::Crash {
                at_time,
                restart_at: Some(r),
            } if r <= at_time => Err(format!("restart_at {r} must be after at_time {at_time}")),
            Behavior::CensorAssembler {
                omit_validators, ..
            } => in_range(omit_validators),
            Behavior::EquivocateProposer { split } => in_range(split),
            Behavior::SelectiveDissemination { reach } => in_range(reach),
            _ => Ok(()),
        }
    }
}
