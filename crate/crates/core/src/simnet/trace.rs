// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Trace records. A trace is a header line, one JSON record per event in
//! total order, and a footer line stating whether the run completed.
//!
//! Link-level traffic appears as `SEND`/`DELIVER` pairs keyed by a message
//! `uid`; the content of each message is recorded once, where the message
//! originates (`PROPOSE`, `PREVOTE`, `PRECOMMIT`, `BROADCAST`, `REQUEST`,
//! `RESPOND`).

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::consensus::TimeoutKind;
use crate::crypto::{PublicKey, SignatureScheme};
use crate::types::*;

use super::config::SimConfig;

pub const TRACE_FORMAT: &str = "amp-trace/1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub hash_scheme: String,
    pub signature_scheme: SignatureScheme,
    pub config_digest: Digest,
    pub seed: u64,
    pub correct_validators: Vec<ValidatorId>,
    pub correct_proposers: Vec<u32>,
    pub public_keys: Vec<PublicKey>,
    pub config: SimConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MsgKind {
    Proposal,
    Prevote,
    Precommit,
    Payload,
    RetransmitRequest,
    RetransmitResponse,
}

impl MsgKind {
    pub const ALL: [MsgKind; 6] = [
        MsgKind::Proposal,
        MsgKind::Prevote,
        MsgKind::Precommit,
        MsgKind::Payload,
        MsgKind::RetransmitRequest,
        MsgKind::RetransmitResponse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MsgKind::Proposal => "PROPOSAL",
            MsgKind::Prevote => "PREVOTE",
            MsgKind::Precommit => "PRECOMMIT",
            MsgKind::Payload => "PAYLOAD",
            MsgKind::RetransmitRequest => "RETRANSMIT_REQUEST",
            MsgKind::RetransmitResponse => "RETRANSMIT_RESPONSE",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Via {
    Broadcast,
    Retransmit,
}

/// A transaction as the checkers need it: hash and fee.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TxSummary {
    pub hash: TxHash,
    pub fee: u64,
}

impl TxSummary {
    pub fn of(p: &Payload) -> Vec<TxSummary> {
        p.transactions
            .iter()
            .map(|t| TxSummary {
                hash: t.tx_hash(),
                fee: t.priority_fee(),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "ev", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Event {
    /// One link-level transmission. `h` is the height the traffic is accounted to.
    Send {
        to: NodeId,
        uid: u64,
        msg: MsgKind,
        bytes: u64,
        h: u64,
    },
    Deliver {
        from: NodeId,
        uid: u64,
        msg: MsgKind,
        hops: u32,
    },
    Drop {
        uid: Option<u64>,
        reason: String,
    },
    Propose {
        uid: u64,
        h: Height,
        r: Round,
        value_id: ValueId,
        valid_round: Option<Round>,
        #[serde(with = "hex")]
        value: Vec<u8>,
    },
    Prevote {
        uid: u64,
        h: Height,
        r: Round,
        value_id: Option<ValueId>,
    },
    Precommit {
        uid: u64,
        h: Height,
        r: Round,
        value_id: Option<ValueId>,
        ids: Option<Vec<PayloadId>>,
    },
    /// A proposer's best-effort broadcast of a payload.
    Broadcast {
        uid: u64,
        payload_id: PayloadId,
        txs: Vec<TxSummary>,
    },
    Request {
        uid: u64,
        ids: Vec<PayloadId>,
    },
    Respond {
        uid: u64,
        to: NodeId,
        payload_id: PayloadId,
    },
    Timeout {
        kind: TimeoutKind,
        h: Height,
        r: Round,
    },
    HeightStart {
        h: Height,
    },
    RoundStart {
        h: Height,
        r: Round,
    },
    Quorum {
        h: Height,
        r: Round,
        value_id: ValueId,
    },
    /// The end of the grace window: the decision is handed to the AMP layer.
    Decide {
        h: Height,
        r: Round,
        value_id: ValueId,
        quorum_t: u64,
        #[serde(with = "hex")]
        value: Vec<u8>,
        #[serde(with = "hex")]
        commit: Vec<u8>,
        missing: Vec<PayloadId>,
    },
    Finalize {
        h: Height,
        payload_ids: Vec<PayloadId>,
        txs: Vec<TxHash>,
        digest: Digest,
    },
    PayloadAccepted {
        payload_id: PayloadId,
        proposer: NodeId,
        via: Via,
        txs: Vec<TxSummary>,
    },
    Aged {
        ids: Vec<PayloadId>,
    },
    Equivocation {
        signer: ValidatorId,
        kind: String,
        h: Height,
        r: Round,
    },
    Crash {},
    Restart {},
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::Send { .. } => "SEND",
            Event::Deliver { .. } => "DELIVER",
            Event::Drop { .. } => "DROP",
            Event::Propose { .. } => "PROPOSE",
            Event::Prevote { .. } => "PREVOTE",
            Event::Precommit { .. } => "PRECOMMIT",
            Event::Broadcast { .. } => "BROADCAST",
            Event::Request { .. } => "REQUEST",
            Event::Respond { .. } => "RESPOND",
            Event::Timeout { .. } => "TIMEOUT",
            Event::HeightStart { .. } => "HEIGHT_START",
            Event::RoundStart { .. } => "ROUND_START",
            Event::Quorum { .. } => "QUORUM",
            Event::Decide { .. } => "DECIDE",
            Event::Finalize { .. } => "FINALIZE",
            Event::PayloadAccepted { .. } => "PAYLOAD_ACCEPTED",
            Event::Aged { .. } => "AGED",
            Event::Equivocation { .. } => "EQUIVOCATION",
            Event::Crash {} => "CRASH",
            Event::Restart {} => "RESTART",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub i: u64,
    pub t: u64,
    pub node: NodeId,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TraceStatus {
    Complete,
    Incomplete,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFooter {
    pub status: TraceStatus,
    pub events: u64,
    pub end_time: u64,
    pub reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<Record>,
    pub footer: TraceFooter,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: {message}")]
    Structure { line: usize, message: String },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(Box<TraceHeader>),
    Footer(TraceFooter),
}

impl Trace {
    pub fn is_complete(&self) -> bool {
        self.footer.status == TraceStatus::Complete
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> io::Result<()> {
        serde_json::to_writer(&mut w, &Line::Header(Box::new(self.header.clone())))?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut w, &Line::Footer(self.footer.clone()))?;
        w.write_all(b"\n")?;
        w.flush()
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        buf
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Trace, TraceError> {
        let mut header = None;
        let mut footer = None;
        let mut records = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let structure = |message: &str| TraceError::Structure {
                line: line_no,
                message: message.to_string(),
            };
            if footer.is_some() {
                return Err(structure("content after footer"));
            }
            if header.is_none() {
                match serde_json::from_str::<Line>(&line) {
                    Ok(Line::Header(h)) => {
                        if h.format != TRACE_FORMAT {
                            return Err(structure(&format!(
                                "unsupported trace format {:?}",
                                h.format
                            )));
                        }
                        header = Some(*h)
                    }
                    Ok(Line::Footer(_)) => return Err(structure("footer before header")),
                    Err(source) => {
                        return Err(TraceError::Json {
                            line: line_no,
                            source,
                        })
                    }
                }
                continue;
            }
            if line.starts_with("{\"type\":") {
                match serde_json::from_str::<Line>(&line) {
                    Ok(Line::Footer(f)) => footer = Some(f),
                    Ok(Line::Header(_)) => return Err(structure("second header")),
                    Err(source) => {
                        return Err(TraceError::Json {
                            line: line_no,
                            source,
                        })
                    }
                }
                continue;
            }
            let rec: Record = serde_json::from_str(&line).map_err(|source| TraceError::Json {
                line: line_no,
                source,
            })?;
            if rec.i != records.len() as u64 {
                return Err(structure(&format!(
                    "record index {} out of sequence",
                    rec.i
                )));
            }
            records.push(rec);
        }
        let header = header.ok_or(TraceError::Structure {
            line: 0,
            message: "missing header".into(),
        })?;
        let footer = footer.ok_or(TraceError::Structure {
            line: 0,
            message: "missing footer (truncated trace?)".into(),
        })?;
        Ok(Trace {
            header,
            records,
            footer,
        })
    }
}
