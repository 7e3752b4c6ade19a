// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Per-node state held by the simulator, and the application wrapper through
//! which validator adversaries alter their own AMP behavior.

use std::collections::BTreeSet;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::amp::AmpState;
use crate::consensus::{AppHooks, Consensus};
use crate::dissemination::Retransmitter;
use crate::encoding::Decode;
use crate::types::*;

use super::adversary::Behavior;
use super::config::SimConfig;

/// The AMP layer of one validator, plus the deviations of its behavior.
pub(crate) struct ValidatorApp {
    pub amp: AmpState,
    pub behavior: Option<Behavior>,
    /// Ids evicted by aging since the simulator last looked.
    pub aged: Vec<PayloadId>,
}

impl ValidatorApp {
    fn proposer_of(&self, id: &PayloadId) -> Option<u32> {
        match self.amp.payload(id)?.proposer {
            NodeId::Proposer(p) => Some(p),
            NodeId::Validator(_) => None,
        }
    }

    /// Ids this validator refuses to attest.
    fn suppressed(&self, id: &PayloadId) -> bool {
        match &self.behavior {
            Some(Behavior::OmitExtensionIds { from_proposers }) => {
                from_proposers.is_empty()
                    || self
                        .proposer_of(id)
                        .is_some_and(|p| from_proposers.contains(&p))
            }
            Some(Behavior::CensorAssembler { omit_proposers, .. }) => self
                .proposer_of(id)
                .is_some_and(|p| omit_proposers.contains(&p)),
            _ => false,
        }
    }

    /// Drops precommits from the certificate while it still passes this
    /// validator's own `validCommit`: first those of the targeted
    /// validators, then those attesting the most targeted payloads.
    fn censor(&self, value: CertValue, h: Height, omit_validators: &[u32]) -> CertValue {
        let CertValue::Commit(mut cert) = value else {
            return value;
        };
        let targeted = |pc: &Precommit| -> usize {
            pc.extension
                .as_ref()
                .map_or(0, |e| e.ids.iter().filter(|id| self.suppressed(id)).count())
        };
        let mut order: Vec<(bool, usize, ValidatorId)> = cert
            .precommits
            .iter()
            .map(|pc| {
                (
                    omit_validators.contains(&pc.signer.0),
                    targeted(pc),
                    pc.signer,
                )
            })
            .filter(|(omit, n, _)| *omit || *n > 0)
            .collect();
        order.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
        for (_, _, signer) in order {
            let mut trial = cert.clone();
            trial.precommits.retain(|pc| pc.signer != signer);
            let candidate = CertValue::Commit(trial);
            if self.amp.valid_commit(&candidate, h) {
                let CertValue::Commit(c) = candidate else {
                    unreachable!()
                };
                cert = c;
            }
        }
        CertValue::Commit(cert)
    }
}

impl AppHooks for ValidatorApp {
    fn received_proposal(&mut self, h: Height, r: Round, value: &[u8]) -> bool {
        self.amp.received_proposal(h, r, value)
    }

    fn extend_vote(&mut self, h: Height, r: Round, value: &[u8]) -> Vec<PayloadId> {
        let ids = AppHooks::extend_vote(&mut self.amp, h, r, value);
        ids.into_iter().filter(|id| !self.suppressed(id)).collect()
    }

    fn verify_vote_extension(&mut self, pc: &Precommit, ext: &VoteExtension) -> bool {
        self.amp.verify_vote_extension(pc, ext)
    }

    fn get_value(&mut self, h: Height) -> Vec<u8> {
        let value = self.amp.get_value(h);
        let value = match &self.behavior {
            Some(Behavior::CensorAssembler {
                omit_validators, ..
            }) => self.censor(value, h, omit_validators),
            _ => value,
        };
        crate::encoding::Encode::encode(&value)
    }

    fn decided(&mut self, h: Height, value: &[u8], commit: &CommitCertificate) {
        let v = CertValue::decode(value).unwrap_or(CertValue::Empty);
        self.amp.decided(h, &v, commit);
    }

    fn height_started(&mut self, h: Height) {
        self.aged.extend(self.amp.start_height(h));
    }
}

pub(crate) struct ValidatorNode {
    pub consensus: Consensus,
    pub app: ValidatorApp,
    pub retransmitter: Retransmitter,
    pub retransmit_at: Option<u64>,
    pub crashed: bool,
    pub finalized: u64,
    pub seen: BTreeSet<u64>,
}

/// Creates payloads for one proposer from its own seeded stream.
pub(crate) struct PayloadFactory {
    index: u32,
    rng: ChaCha8Rng,
    nonce: u64,
    txs: usize,
    body: usize,
    fees: (u64, u64),
}

impl PayloadFactory {
    pub fn new(cfg: &SimConfig, index: u32) -> Self {
        let seed =
            cfg.seed ^ 0x7072_6f70_0000_0000 ^ u64::from(index).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        PayloadFactory {
            index,
            rng: ChaCha8Rng::seed_from_u64(seed),
            nonce: 0,
            txs: cfg.txs_per_payload,
            body: cfg.tx_body_bytes,
            fees: (cfg.fee_min, cfg.fee_max),
        }
    }

    fn tx(&mut self, fee: u64) -> Transaction {
        let mut body = vec![0u8; self.body.max(1)];
        self.rng.fill_bytes(&mut body);
        self.nonce += 1;
        Transaction::new(AccountId(u64::from(self.index)), self.nonce, fee, body)
    }

    pub fn payload(&mut self, hint: Height) -> Payload {
        let transactions = (0..self.txs)
            .map(|_| {
                let fee = self.rng.gen_range(self.fees.0..=self.fees.1);
                self.tx(fee)
            })
            .collect();
        Payload {
            proposer: NodeId::Proposer(self.index),
            created_height_hint: hint,
            transactions,
        }
    }

    /// A low-fee payload; when `invalid`, it repeats one transaction.
    pub fn junk(&mut self, hint: Height, invalid: bool) -> Payload {
        let tx = self.tx(self.fees.0);
        let transactions = if invalid {
            vec![tx.clone(), tx]
        } else {
            vec![tx]
        };
        Payload {
            proposer: NodeId::Proposer(self.index),
            created_height_hint: hint,
            transactions,
        }
    }
}

/// The same payload with one transaction body byte flipped.
pub(crate) fn tamper(p: &Payload) -> Payload {
    let mut q = p.clone();
    if let Some(tx) = q.transactions.first_mut() {
        let mut body = tx.body().to_vec();
        if let Some(b) = body.first_mut() {
            *b ^= 0xff;
        } else {
            body.push(0);
        }
        *tx = Transaction::new(tx.sender(), tx.nonce(), tx.priority_fee(), body);
    }
    q
}

pub(crate) struct ProposerNode {
    pub factory: PayloadFactory,
    pub crashed: bool,
    pub junk_count: u64,
}
