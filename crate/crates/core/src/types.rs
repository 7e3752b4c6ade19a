// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Domain types shared by every layer: identifiers, transactions, payloads,
//! votes, vote extensions and commit certificates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::crypto::{self, Signature};
use crate::encoding::Encode;

/// A 256-bit digest produced by [`crypto::hash`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)?;
        Ok(Digest(out))
    }

    /// Eight hex characters, for logs.
    pub fn short(&self) -> String {
        hex::encode(&self.0[..4])
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.short())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

macro_rules! digest_newtype {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub Digest);

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.0.short())
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt::Display::fmt(&self.0, f)
            }
        }
    };
}

digest_newtype!(
    /// Collision-resistant identifier of a payload: the hash of its canonical bytes.
    PayloadId
);
digest_newtype!(
    /// Digest of a proposed consensus value.
    ValueId
);
digest_newtype!(
    /// Digest of a transaction's canonical bytes.
    TxHash
);

/// Consensus instance index. Height 0 is genesis and is never decided.
#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Height(pub u64);

impl Height {
    pub const GENESIS: Height = Height(0);
    /// The first height decided by consensus; it proposes the empty certificate.
    pub const FIRST: Height = Height(1);

    pub fn next(self) -> Height {
        Height(self.0 + 1)
    }

    pub fn prev(self) -> Option<Height> {
        self.0.checked_sub(1).map(Height)
    }
}

impl fmt::Display for Height {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Round(pub u32);

impl Round {
    pub const ZERO: Round = Round(0);

    pub fn next(self) -> Round {
        Round(self.0 + 1)
    }
}

impl fmt::Display for Round {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index of a validator in the fixed validator set, `0..n`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValidatorId(pub u32);

impl ValidatorId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ValidatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Any simulated node: a validator or a proposer.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum NodeId {
    Validator(ValidatorId),
    Proposer(u32),
}

impl NodeId {
    pub fn validator(i: u32) -> NodeId {
        NodeId::Validator(ValidatorId(i))
    }

    pub fn as_validator(self) -> Option<ValidatorId> {
        match self {
            NodeId::Validator(v) => Some(v),
            NodeId::Proposer(_) => None,
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Validator(v) => write!(f, "{v}"),
            NodeId::Proposer(p) => write!(f, "p{p}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid node id {0:?}: expected v<index> or p<index>")]
pub struct ParseNodeIdError(String);

impl FromStr for NodeId {
    type Err = ParseNodeIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseNodeIdError(s.to_string());
        let (kind, rest) = s.split_at_checked(1).ok_or_else(err)?;
        let idx: u32 = rest.parse().map_err(|_| err())?;
        match kind {
            "v" => Ok(NodeId::validator(idx)),
            "p" => Ok(NodeId::Proposer(idx)),
            _ => Err(err()),
        }
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Opaque account identifier of a transaction sender.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccountId(pub u64);

/// A user transaction. The hash is derived from the other fields and is
/// recomputed on decode, so it always matches the canonical encoding.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Transaction {
    sender: AccountId,
    nonce: u64,
    priority_fee: u64,
    body: Vec<u8>,
    hash: TxHash,
}

impl Transaction {
    pub fn new(sender: AccountId, nonce: u64, priority_fee: u64, body: Vec<u8>) -> Self {
        let mut tx = Transaction {
            sender,
            nonce,
            priority_fee,
            body,
            hash: TxHash(Digest::ZERO),
        };
        tx.hash = TxHash(crypto::hash(&tx.encode()));
        tx
    }

    pub fn sender(&self) -> AccountId {
        self.sender
    }

    pub fn nonce(&self) -> u64 {
        self.nonce
    }

    /// Fee per unit of computation.
    pub fn priority_fee(&self) -> u64 {
        self.priority_fee
    }

    pub fn body(&self) -> &[u8] {
        &self.body
    }

    pub fn tx_hash(&self) -> TxHash {
        self.hash
    }
}

/// A proposer-assembled bundle of transactions.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Payload {
    pub proposer: NodeId,
    pub created_height_hint: Height,
    pub transactions: Vec<Transaction>,
}

impl Payload {
    pub fn id(&self) -> PayloadId {
        PayloadId(crypto::hash(&self.encode()))
    }
}

/// Signed set of payload ids attached to a non-nil precommit.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VoteExtension {
    pub ids: Vec<PayloadId>,
    pub signer: ValidatorId,
    pub signature: Signature,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Prevote {
    pub height: Height,
    pub round: Round,
    /// `None` is a vote for NIL.
    pub value_id: Option<ValueId>,
    pub signer: ValidatorId,
    pub signature: Signature,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Precommit {
    pub height: Height,
    pub round: Round,
    /// `None` is a vote for NIL, encoded as the all-zero digest.
    pub value_id: Option<ValueId>,
    pub signer: ValidatorId,
    pub signature: Signature,
    /// Present exactly when `value_id` is not NIL.
    pub extension: Option<VoteExtension>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Proposal {
    pub height: Height,
    pub round: Round,
    pub value: Vec<u8>,
    /// Tendermint's `validRound`; `None` stands for -1.
    pub valid_round: Option<Round>,
    pub signer: ValidatorId,
    pub signature: Signature,
}

impl Proposal {
    pub fn value_id(&self) -> ValueId {
        value_id_of(&self.value)
    }
}

pub fn value_id_of(value: &[u8]) -> ValueId {
    ValueId(crypto::hash(value))
}

/// A set of matching precommits from a quorum, evidence that `value_id`
/// was decided at `height`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CommitCertificate {
    pub height: Height,
    pub round: Round,
    pub value_id: ValueId,
    pub precommits: Vec<Precommit>,
}

/// The value proposed in every height: the commit certificate of the previous
/// height, or the distinguished empty certificate for the first height.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum CertValue {
    Empty,
    Commit(CommitCertificate),
}

impl CertValue {
    pub fn as_commit(&self) -> Option<&CommitCertificate> {
        match self {
            CertValue::Empty => None,
            CertValue::Commit(c) => Some(c),
        }
    }
}

/// What a signature covers. Each message kind has its own domain tag so a
/// signature for one kind can never be replayed as another.
pub mod sign_bytes {
    use super::*;
    use crate::encoding::Writer;

    const PREVOTE: u8 = 0xa1;
    const PRECOMMIT: u8 = 0xa2;
    const EXTENSION: u8 = 0xa3;
    const PROPOSAL: u8 = 0xa4;

    fn vote(tag: u8, h: Height, r: Round, value: Option<ValueId>) -> Writer {
        let mut w = Writer::new();
        w.u8(tag);
        w.u64(h.0);
        w.u32(r.0);
        w.digest(&value.map(|v| v.0).unwrap_or(Digest::ZERO));
        w
    }

    pub fn prevote(h: Height, r: Round, value: Option<ValueId>) -> Vec<u8> {
        vote(PREVOTE, h, r, value).finish()
    }

    pub fn precommit(h: Height, r: Round, value: Option<ValueId>) -> Vec<u8> {
        vote(PRECOMMIT, h, r, value).finish()
    }

    pub fn extension(h: Height, r: Round, value: ValueId, ids: &[PayloadId]) -> Vec<u8> {
        let mut w = vote(EXTENSION, h, r, Some(value));
        w.u32(ids.len() as u32);
        for id in ids {
            w.digest(&id.0);
        }
        w.finish()
    }

    pub fn proposal(h: Height, r: Round, value: &[u8], valid_round: Option<Round>) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(PROPOSAL);
        w.u64(h.0);
        w.u32(r.0);
        w.bytes(value);
        match valid_round {
            None => w.u8(0),
            Some(vr) => {
                w.u8(1);
                w.u32(vr.0);
            }
        }
        w.finish()
    }
}
