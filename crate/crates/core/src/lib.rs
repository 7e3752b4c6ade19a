// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Attested multi-proposer agreement layered over Tendermint, plus a
//! deterministic network simulator and trace checkers to evaluate it.

pub mod amp;
pub mod check;
pub mod consensus;
pub mod crypto;
pub mod dissemination;
pub mod encoding;
pub mod harness;
pub mod simnet;
pub mod types;
