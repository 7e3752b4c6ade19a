// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Scenario configuration. Every field must be given explicitly; unknown
//! keys are rejected, so a typo cannot silently fall back to a default.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::amp::{AmpConfig, Limits, Mutation};
use crate::consensus::{ConsensusConfig, Timeouts};
use crate::crypto::{self, SignatureScheme};
use crate::types::{Digest, NodeId, ValidatorId};

use super::adversary::{AdversarySpec, Behavior};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Every node has a direct link to every validator.
    Direct,
    /// A fixed random expander over validators; broadcasts are flooded and
    /// every hop is a separate message.
    Relay,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadTrigger {
    /// Each proposer broadcasts one payload every `payload_interval` time units.
    Interval,
    /// Each proposer broadcasts one payload whenever the network starts a new height.
    PerHeight,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    pub f: usize,
    pub proposer_count: usize,
    pub gst: u64,
    pub delta: u64,
    pub seed: u64,
    pub topology: Topology,
    pub payload_trigger: PayloadTrigger,
    pub payload_interval: u64,
    pub txs_per_payload: usize,
    pub tx_body_bytes: usize,
    pub fee_min: u64,
    pub fee_max: u64,
    pub max_heights: u64,
    /// Virtual time after which an unfinished run is marked incomplete.
    pub time_budget: u64,
    pub timeout_base: u64,
    pub timeout_delta: u64,
    pub grace_window: u64,
    pub aging_k: u64,
    pub max_extension_ids: usize,
    pub max_payload_bytes: usize,
    pub signature_scheme: SignatureScheme,
    /// Allows `n <= 3f` and more than `f` faulty validators, for negative tests.
    pub beyond_threshold: bool,
    pub mutation: Mutation,
    /// Proposers whose payloads every validator discards on receipt.
    pub drop_proposers: Vec<u32>,
    #[serde(rename = "adversary")]
    pub adversaries: Vec<AdversarySpec>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let c: SimConfig = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Digest of the config's canonical TOML rendering.
    pub fn digest(&self) -> Digest {
        crypto::hash(self.to_toml().as_bytes())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.n <= 3 * self.f && !self.beyond_threshold {
            return bad(format!(
                "n > 3f is required (n = {}, f = {})",
                self.n, self.f
            ));
        }
        if self.delta == 0 {
            return bad("delta must be positive".into());
        }
        if self.timeout_base == 0 {
            return bad("timeout_base must be positive".into());
        }
        if self.payload_trigger == PayloadTrigger::Interval && self.payload_interval == 0 {
            return bad("payload_interval must be positive for the interval trigger".into());
        }
        if self.txs_per_payload == 0 {
            return bad("txs_per_payload must be at least 1".into());
        }
        if self.fee_min > self.fee_max {
            return bad(format!(
                "fee_min {} exceeds fee_max {}",
                self.fee_min, self.fee_max
            ));
        }
        if self.max_heights == 0 || self.time_budget == 0 {
            return bad("max_heights and time_budget must be positive".into());
        }
        for p in &self.drop_proposers {
            if *p as usize >= self.proposer_count {
                return bad(format!(
                    "drop_proposers names p{p}, but proposer_count is {}",
                    self.proposer_count
                ));
            }
        }
        let mut targets = BTreeSet::new();
        for a in &self.adversaries {
            if !targets.insert(a.target) {
                return bad(format!("{} has more than one adversary behavior", a.target));
            }
            match a.target {
                NodeId::Validator(v) if v.index() >= self.n => {
                    return bad(format!(
                        "adversary target {} does not exist (n = {})",
                        a.target, self.n
                    ))
                }
                NodeId::Proposer(p) if p as usize >= self.proposer_count => {
                    return bad(format!(
                        "adversary target {} does not exist (proposer_count = {})",
                        a.target, self.proposer_count
                    ))
                }
                _ => {}
            }
            let for_validator = a.behavior.applies_to_validator();
            let for_proposer = a.behavior.applies_to_proposer();
            match a.target {
                NodeId::Validator(_) if !for_validator => {
                    return bad(format!(
                        "{} is a validator, but {} is a proposer behavior",
                        a.target,
                        a.behavior.name()
                    ))
                }
                NodeId::Proposer(_) if !for_proposer => {
                    return bad(format!(
                        "{} is a proposer, but {} is a validator behavior",
                        a.target,
                        a.behavior.name()
                    ))
                }
                _ => {}
            }
            if let Err(m) = a.behavior.validate(self.n) {
                return bad(format!("{}: {m}", a.target));
            }
        }
        let faulty = self.faulty_validators().len();
        if faulty > self.f && !self.beyond_threshold {
            return bad(format!("{faulty} faulty validators exceed f = {}", self.f));
        }
        Ok(())
    }

    pub fn behavior_of(&self, node: NodeId) -> Option<&Behavior> {
        self.adversaries
            .iter()
            .find(|a| a.target == node)
            .map(|a| &a.behavior)
    }

    pub fn faulty_validators(&self) -> BTreeSet<ValidatorId> {
        self.adversaries
            .iter()
            .filter_map(|a| a.target.as_validator())
            .collect()
    }

    pub fn correct_validators(&self) -> Vec<ValidatorId> {
        let faulty = self.faulty_validators();
        (0..self.n as u32)
            .map(ValidatorId)
            .filter(|v| !faulty.contains(v))
            .collect()
    }

    pub fn correct_proposers(&self) -> Vec<u32> {
        (0..self.proposer_count as u32)
            .filter(|p| {
                self.behavior_of(NodeId::Proposer(*p)).is_none() && !self.drop_proposers.contains(p)
            })
            .collect()
    }

    pub fn limits(&self) -> Limits {
        Limits {
            max_payload_bytes: self.max_payload_bytes,
            max_extension_ids: self.max_extension_ids,
        }
    }

    pub fn amp_config(&self) -> AmpConfig {
        AmpConfig {
            n: self.n,
            f: self.f,
            aging_k: self.aging_k,
            limits: self.limits(),
            mutation: self.mutation,
        }
    }

    pub fn consensus_config(&self) -> ConsensusConfig {
        ConsensusConfig {
            n: self.n,
            f: self.f,
            timeouts: Timeouts {
                base: self.timeout_base,
                delta: self.timeout_delta,
            },
            grace_window: self.grace_window,
        }
    }

    /// A fault-free synchronous scenario; a starting point for tests and sweeps.
    pub fn baseline(n: usize, f: usize) -> Self {
        SimConfig {
            n,
            f,
            proposer_count: 2,
            gst: 0,
            delta: 10,
            seed: 1,
            topology: Topology::Direct,
            payload_trigger: PayloadTrigger::Interval,
            payload_interval: 25,
            txs_per_payload: 3,
            tx_body_bytes: 32,
            fee_min: 1,
            fee_max: 4,
            max_heights: 10,
            time_budget: 20_000,
            timeout_base: 30,
            timeout_delta: 10,
            grace_window: 30,
            aging_k: 8,
            max_extension_ids: 256,
            max_payload_bytes: 64 * 1024,
            signature_scheme: SignatureScheme::KeyedSha256,
            beyond_threshold: false,
            mutation: Mutation::None,
            drop_proposers: Vec::new(),
            adversaries: Vec::new(),
        }
    }
}
