// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Shared fixtures: signed precommits and certificates over a small
//! validator set.

// Each test binary uses a different subset of these helpers.
#![allow(dead_code)]

use amp_core::crypto::{validator_keys, KeyPair, PublicKeySet, SignatureScheme};
use amp_core::types::*;

pub fn pid(b: u8) -> PayloadId {
    PayloadId(Digest([b; 32]))
}

pub struct Fixture {
    pub keys: Vec<KeyPair>,
    pub registry: PublicKeySet,
    pub value: ValueId,
}

impl Fixture {
    pub fn new(n: usize) -> Self {
        let (keys, registry) = validator_keys(SignatureScheme::KeyedSha256, 42, n);
        Fixture {
            keys,
            registry,
            value: ValueId(Digest([9; 32])),
        }
    }

    pub fn precommit(&self, h: u64, r: u32, signer: u32, ids: &[PayloadId]) -> Precommit {
        let (h, r, v) = (Height(h), Round(r), self.value);
        let key = &self.keys[signer as usize];
        let ext = VoteExtension {
            ids: ids.to_vec(),
            signer: ValidatorId(signer),
            signature: key.sign(&sign_bytes::extension(h, r, v, ids)),
        };
        Precommit {
            height: h,
            round: r,
            value_id: Some(v),
            signer: ValidatorId(signer),
            signature: key.sign(&sign_bytes::precommit(h, r, Some(v))),
            extension: Some(ext),
        }
    }

    pub fn cert(&self, h: u64, exts: &[(u32, &[PayloadId])]) -> CommitCertificate {
        CommitCertificate {
            height: Height(h),
            round: Round(0),
            value_id: self.value,
            precommits: exts
                .iter()
                .map(|(s, ids)| self.precommit(h, 0, *s, ids))
                .collect(),
        }
    }
}
