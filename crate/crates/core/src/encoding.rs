// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Canonical binary encoding.
//!
//! Every top-level value starts with a one-byte type tag. Integers are fixed
//! width big-endian, byte strings and lists carry a `u32` length prefix, and
//! fields are written in declaration order. There is no floating point and no
//! optional padding, so the encoding is injective and identical on every
//! platform. `decode(encode(v)) == v` for every value, and decoding rejects
//! trailing bytes.

use crate::crypto::Signature;
use crate::types::*;

pub mod tag {
    pub const TRANSACTION: u8 = 0x01;
    pub const PAYLOAD: u8 = 0x02;
    pub const PRECOMMIT: u8 = 0x03;
    pub const COMMIT: u8 = 0x04;
    pub const EMPTY_COMMIT: u8 = 0x05;
    pub const PREVOTE: u8 = 0x06;
    pub const PROPOSAL: u8 = 0x07;
    pub const EXTENSION: u8 = 0x08;
    pub const TX_LIST: u8 = 0x09;
    pub const RETRANSMIT_REQUEST: u8 = 0x0a;
    pub const RETRANSMIT_RESPONSE: u8 = 0x0b;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("unexpected end of input at offset {0}")]
    Truncated(usize),
    #[error("unexpected type tag {found:#04x} (expected {expected:#04x})")]
    BadTag { expected: u8, found: u8 },
    #[error("invalid discriminant {0} for {1}")]
    BadDiscriminant(u8, &'static str),
    #[error("{0} trailing bytes after value")]
    TrailingBytes(usize),
    #[error("digest field has length {0}, expected 32")]
    BadDigestLength(usize),
    #[error("length prefix {0} exceeds remaining input")]
    BadLength(usize),
    #[error("{0}")]
    Invalid(&'static str),
}

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn bytes(&mut self, v: &[u8]) {
        self.u32(v.len() as u32);
        self.buf.extend_from_slice(v);
    }

    /// Digests are length-prefixed like any byte string, so a malformed id on
    /// the wire is detectable rather than silently re-framed.
    pub fn digest(&mut self, d: &Digest) {
        self.bytes(&d.0);
    }

    pub fn node(&mut self, n: NodeId) {
        match n {
            NodeId::Validator(v) => {
                self.u8(0);
                self.u32(v.0);
            }
            NodeId::Proposer(p) => {
                self.u8(1);
                self.u32(p);
            }
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() - self.pos < n {
            return Err(DecodeError::Truncated(self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], DecodeError> {
        let len = self.u32()? as usize;
        if len > self.remaining() {
            return Err(DecodeError::BadLength(len));
        }
        self.take(len)
    }

    pub fn digest(&mut self) -> Result<Digest, DecodeError> {
        let b = self.bytes()?;
        let arr: [u8; 32] = b
            .try_into()
            .map_err(|_| DecodeError::BadDigestLength(b.len()))?;
        Ok(Digest(arr))
    }

    pub fn node(&mut self) -> Result<NodeId, DecodeError> {
        match self.u8()? {
            0 => Ok(NodeId::Validator(ValidatorId(self.u32()?))),
            1 => Ok(NodeId::Proposer(self.u32()?)),
            d => Err(DecodeError::BadDiscriminant(d, "node id")),
        }
    }

    /// Reads a list length, rejecting counts that cannot possibly fit in the
    /// remaining input (every element takes at least one byte).
    pub fn count(&mut self) -> Result<usize, DecodeError> {
        let n = self.u32()? as usize;
        if n > self.remaining() {
            return Err(DecodeError::BadLength(n));
        }
        Ok(n)
    }

    pub fn expect_tag(&mut self, expected: u8) -> Result<(), DecodeError> {
        let found = self.u8()?;
        if found != expected {
            return Err(DecodeError::BadTag { expected, found });
        }
        Ok(())
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn peek(&self) -> Option<u8> {
        self.buf.get(self.pos).copied()
    }
}

pub trait Encode {
    fn encode_to(&self, w: &mut Writer);

    fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode_to(&mut w);
        w.finish()
    }
}

pub trait Decode: Sized {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError>;

    fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let v = Self::decode_from(&mut r)?;
        if r.remaining() != 0 {
            return Err(DecodeError::TrailingBytes(r.remaining()));
        }
        Ok(v)
    }
}

fn write_value_id(w: &mut Writer, v: Option<ValueId>) {
    w.digest(&v.map(|v| v.0).unwrap_or(Digest::ZERO));
}

fn read_value_id(r: &mut Reader<'_>) -> Result<Option<ValueId>, DecodeError> {
    let d = r.digest()?;
    Ok(if d == Digest::ZERO {
        None
    } else {
        Some(ValueId(d))
    })
}

impl Encode for Transaction {
    fn encode_to(&self, w: &mut Writer) {
        w.u8(tag::TRANSACTION);
        w.u64(self.sender().0);
        w.u64(self.nonce());
        w.u64(self.priority_fee());
        w.bytes(self.body());
    }
}

impl Decode for Transaction {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.expect_tag(tag::TRANSACTION)?;
        let sender = AccountId(r.u64()?);
        let nonce = r.u64()?;
        let fee = r.u64()?;
        let body = r.bytes()?.to_vec();
        Ok(Transaction::new(sender, nonce, fee, body))
    }
}

impl Encode for Payload {
    fn encode_to(&self, w: &mut Writer) {
        w.u8(tag::PAYLOAD);
        w.node(self.proposer);
        w.u64(self.created_height_hint.0);
        w.u32(self.transactions.len() as u32);
        for tx in &self.transactions {
            tx.encode_to(w);
        }
    }
}

impl Decode for Payload {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.expect_tag(tag::PAYLOAD)?;
        let proposer = r.node()?;
        let created_height_hint = Height(r.u64()?);
        let n = r.count()?;
        let transactions = (0..n)
            .map(|_| Transaction::decode_from(r))
            .collect::<Result<_, _>>()?;
        Ok(Payload {
            proposer,
            created_height_hint,
            transactions,
        })
    }
}

/// A finalized block body: the sorted transaction list.
pub fn encode_tx_list(txs: &[Transaction]) -> Vec<u8> {
    let mut w = Writer::new();
    w.u8(tag::TX_LIST);
    w.u32(txs.len() as u32);
    for tx in txs {
        tx.encode_to(&mut w);
    }
    w.finish()
}

impl Encode for VoteExtension {
    fn encode_to(&self, w: &mut Writer) {
        w.u8(tag::EXTENSION);
        w.u32(self.ids.len() as u32);
        for id in &self.ids {
            w.digest(&id.0);
        }
        w.u32(self.signer.0);
        w.bytes(self.signature.as_bytes());
    }
}

impl Decode for VoteExtension {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.expect_tag(tag::EXTENSION)?;
        let n = r.count()?;
        let ids = (0..n)
            .map(|_| r.digest().map(PayloadId))
            .collect::<Result<_, _>>()?;
        let signer = ValidatorId(r.u32()?);
        let signature = Signature(r.bytes()?.to_vec());
        Ok(VoteExtension {
            ids,
            signer,
            signature,
        })
    }
}

impl Encode for Prevote {
    fn encode_to(&self, w: &mut Writer) {
        w.u8(tag::PREVOTE);
        w.u64(self.height.0);
        w.u32(self.round.0);
        write_value_id(w, self.value_id);
        w.u32(self.signer.0);
        w.bytes(self.signature.as_bytes());
    }
}

impl Decode for Prevote {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.expect_tag(tag::PREVOTE)?;
        Ok(Prevote {
            height: Height(r.u64()?),
            round: Round(r.u32()?),
            value_id: read_value_id(r)?,
            signer: ValidatorId(r.u32()?),
            signature: Signature(r.bytes()?.to_vec()),
        })
    }
}

impl Encode for Precommit {
    fn encode_to(&self, w: &mut Writer) {
        w.u8(tag::PRECOMMIT);
        w.u64(self.height.0);
        w.u32(self.round.0);
        write_value_id(w, self.value_id);
        w.u32(self.signer.0);
        w.bytes(self.signature.as_bytes());
        match &self.extension {
            None => w.u8(0),
            Some(ext) => {
                w.u8(1);
                ext.encode_to(w);
            }
        }
    }
}

impl Decode for Precommit {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.expect_tag(tag::PRECOMMIT)?;
        let height = Height(r.u64()?);
        let round = Round(r.u32()?);
        let value_id = read_value_id(r)?;
        let signer = ValidatorId(r.u32()?);
        let signature = Signature(r.bytes()?.to_vec());
        let extension = match r.u8()? {
            0 => None,
            1 => Some(VoteExtension::decode_from(r)?),
            d => return Err(DecodeError::BadDiscriminant(d, "extension flag")),
        };
        if extension.is_some() != value_id.is_some() {
            return Err(DecodeError::Invalid(
                "extension must be present exactly for non-nil precommits",
            ));
        }
        Ok(Precommit {
            height,
            round,
            value_id,
            signer,
            signature,
            extension,
        })
    }
}

impl Encode for Proposal {
    fn encode_to(&self, w: &mut Writer) {
        w.u8(tag::PROPOSAL);
        w.u64(self.height.0);
        w.u32(self.round.0);
        w.bytes(&self.value);
        match self.valid_round {
            None => w.u8(0),
            Some(vr) => {
                w.u8(1);
                w.u32(vr.0);
            }
        }
        w.u32(self.signer.0);
        w.bytes(self.signature.as_bytes());
    }
}

impl Decode for Proposal {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.expect_tag(tag::PROPOSAL)?;
        let height = Height(r.u64()?);
        let round = Round(r.u32()?);
        let value = r.bytes()?.to_vec();
        let valid_round = match r.u8()? {
            0 => None,
            1 => Some(Round(r.u32()?)),
            d => return Err(DecodeError::BadDiscriminant(d, "valid round flag")),
        };
        let signer = ValidatorId(r.u32()?);
        let signature = Signature(r.bytes()?.to_vec());
        Ok(Proposal {
            height,
            round,
            value,
            valid_round,
            signer,
            signature,
        })
    }
}

impl Encode for CommitCertificate {
    fn encode_to(&self, w: &mut Writer) {
        w.u8(tag::COMMIT);
        w.u64(self.height.0);
        w.u32(self.round.0);
        w.digest(&self.value_id.0);
        w.u32(self.precommits.len() as u32);
        for pc in &self.precommits {
            pc.encode_to(w);
        }
    }
}

impl Decode for CommitCertificate {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.expect_tag(tag::COMMIT)?;
        let height = Height(r.u64()?);
        let round = Round(r.u32()?);
        let value_id = ValueId(r.digest()?);
        let n = r.count()?;
        let precommits = (0..n)
            .map(|_| Precommit::decode_from(r))
            .collect::<Result<_, _>>()?;
        Ok(CommitCertificate {
            height,
            round,
            value_id,
            precommits,
        })
    }
}

impl Encode for CertValue {
    fn encode_to(&self, w: &mut Writer) {
        match self {
            CertValue::Empty => w.u8(tag::EMPTY_COMMIT),
            CertValue::Commit(c) => c.encode_to(w),
        }
    }
}

impl Decode for CertValue {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.peek() {
            Some(tag::EMPTY_COMMIT) => {
                r.u8()?;
                Ok(CertValue::Empty)
            }
            Some(tag::COMMIT) => Ok(CertValue::Commit(CommitCertificate::decode_from(r)?)),
            Some(found) => Err(DecodeError::BadTag {
                expected: tag::COMMIT,
                found,
            }),
            None => Err(DecodeError::Truncated(0)),
        }
    }
}
