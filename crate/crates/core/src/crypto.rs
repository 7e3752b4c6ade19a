// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Hashing and signatures.
//!
//! All identifiers use SHA-256. Two signature schemes sit behind one
//! interface: Ed25519 and a keyed SHA-256 digest. The keyed digest is
//! symmetric (the "public" key is the secret) and exists only to make large
//! simulation sweeps cheap; it is unforgeable only against parties that do
//! not read the registry.

use std::fmt;

use ed25519_dalek::{Signer as _, Verifier as _};
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::types::{Digest, ValidatorId};

/// Name recorded in trace headers.
pub const HASH_SCHEME: &str = "sha256";

pub fn hash(bytes: &[u8]) -> Digest {
    Digest(Sha256::digest(bytes).into())
}

fn hash_parts(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_be_bytes());
        h.update(p);
    }
    Digest(h.finalize().into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignatureScheme {
    Ed25519,
    KeyedSha256,
}

impl fmt::Display for SignatureScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignatureScheme::Ed25519 => "ed25519",
            SignatureScheme::KeyedSha256 => "keyed-sha256",
        })
    }
}

#[derive(Clone, PartialEq, Eq, Default)]
pub struct Signature(pub Vec<u8>);

impl Signature {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sig({})", hex::encode(&self.0[..self.0.len().min(4)]))
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PublicKey(#[serde(with = "hex")] pub Vec<u8>);

#[derive(Clone)]
enum Secret {
    Ed25519(Box<ed25519_dalek::SigningKey>),
    Keyed([u8; 32]),
}

#[derive(Clone)]
pub struct KeyPair {
    secret: Secret,
    public: PublicKey,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyPair({})", hex::encode(&self.public.0[..4]))
    }
}

impl KeyPair {
    pub fn from_seed(scheme: SignatureScheme, seed: [u8; 32]) -> Self {
        match scheme {
            SignatureScheme::Ed25519 => {
                let sk = ed25519_dalek::SigningKey::from_bytes(&seed);
                let public = PublicKey(sk.verifying_key().to_bytes().to_vec());
                KeyPair {
                    secret: Secret::Ed25519(Box::new(sk)),
                    public,
                }
            }
            SignatureScheme::KeyedSha256 => KeyPair {
                secret: Secret::Keyed(seed),
                public: PublicKey(seed.to_vec()),
            },
        }
    }

    /// Deterministic per-validator key for a simulation seed.
    pub fn derive(scheme: SignatureScheme, seed: u64, validator: ValidatorId) -> Self {
        let d = hash_parts(&[
            b"amp-validator-key",
            &seed.to_be_bytes(),
            &validator.0.to_be_bytes(),
        ]);
        KeyPair::from_seed(scheme, d.0)
    }

    pub fn scheme(&self) -> SignatureScheme {
        match self.secret {
            Secret::Ed25519(_) => SignatureScheme::Ed25519,
            Secret::Keyed(_) => SignatureScheme::KeyedSha256,
        }
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn sign(&self, msg: &[u8]) -> Signature {
        match &self.secret {
            Secret::Ed25519(sk) => Signature(sk.sign(msg).to_bytes().to_vec()),
            Secret::Keyed(k) => Signature(hash_parts(&[b"amp-keyed-sig", k, msg]).0.to_vec()),
        }
    }
}

pub fn verify(scheme: SignatureScheme, pk: &PublicKey, msg: &[u8], sig: &Signature) -> bool {
    match scheme {
        SignatureScheme::Ed25519 => {
            let Ok(pk_bytes) = <[u8; 32]>::try_from(pk.0.as_slice()) else {
                return false;
            };
            let Ok(vk) = ed25519_dalek::VerifyingKey::from_bytes(&pk_bytes) else {
                return false;
            };
            let Ok(sig) = ed25519_dalek::Signature::from_slice(&sig.0) else {
                return false;
            };
            vk.verify(msg, &sig).is_ok()
        }
        SignatureScheme::KeyedSha256 => {
            sig.0.len() == 32 && hash_parts(&[b"amp-keyed-sig", &pk.0, msg]).0[..] == sig.0[..]
        }
    }
}

/// Registry mapping each validator to its verification key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicKeySet {
    pub scheme: SignatureScheme,
    pub keys: Vec<PublicKey>,
}

impl PublicKeySet {
    pub fn from_keypairs<'a>(
        scheme: SignatureScheme,
        pairs: impl IntoIterator<Item = &'a KeyPair>,
    ) -> Self {
        PublicKeySet {
            scheme,
            keys: pairs.into_iter().map(|k| k.public().clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn contains(&self, v: ValidatorId) -> bool {
        v.index() < self.keys.len()
    }

    /// False for unknown signers as well as bad signatures.
    pub fn verify(&self, signer: ValidatorId, msg: &[u8], sig: &Signature) -> bool {
        match self.keys.get(signer.index()) {
            Some(pk) => verify(self.scheme, pk, msg, sig),
            None => false,
        }
    }
}

/// Generates the full key material for `n` validators.
pub fn validator_keys(
    scheme: SignatureScheme,
    seed: u64,
    n: usize,
) -> (Vec<KeyPair>, PublicKeySet) {
    let pairs: Vec<KeyPair> = (0..n as u32)
        .map(|i| KeyPair::derive(scheme, seed, ValidatorId(i)))
        .collect();
    let set = PublicKeySet::from_keypairs(scheme, &pairs);
    (pairs, set)
}
