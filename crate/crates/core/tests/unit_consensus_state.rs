// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Unit tests for `amp_core::consensus::state`.

use std::sync::Arc;

use amp_core::consensus::*;
use amp_core::crypto::KeyPair;
use amp_core::crypto::{validator_keys, SignatureScheme};
use amp_core::types::*;

/// Accepts every value and extends every vote with a fixed id set.
#[derive(Default)]
struct TestApp {
    reject: bool,
    bad_extension_from: Option<ValidatorId>,
    decided: Vec<(Height, CommitCertificate)>,
    extends: usize,
}

impl AppHooks for TestApp {
    fn received_proposal(&mut self, _h: Height, _r: Round, _v: &[u8]) -> bool {
        !self.reject
    }
    fn extend_vote(&mut self, _h: Height, _r: Round, _v: &[u8]) -> Vec<PayloadId> {
        self.extends += 1;
        vec![PayloadId(Digest([1; 32]))]
    }
    fn verify_vote_extension(&mut self, pc: &Precommit, _ext: &VoteExtension) -> bool {
        Some(pc.signer) != self.bad_extension_from
    }
    fn get_value(&mut self, h: Height) -> Vec<u8> {
        format!("value-{h}").into_bytes()
    }
    fn decided(&mut self, h: Height, _v: &[u8], commit: &CommitCertificate) {
        self.decided.push((h, commit.clone()));
    }
}

struct Net {
    nodes: Vec<Consensus>,
    keys: Vec<KeyPair>,
}

fn config(n: usize) -> ConsensusConfig {
    ConsensusConfig {
        n,
        f: (n - 1) / 3,
        timeouts: Timeouts {
            base: 30,
            delta: 10,
        },
        grace_window: 5,
    }
}

fn net(n: usize) -> Net {
    let (keys, set) = validator_keys(SignatureScheme::KeyedSha256, 1, n);
    let set = Arc::new(set);
    let nodes = (0..n)
        .map(|i| {
            Consensus::new(
                ValidatorId(i as u32),
                keys[i].clone(),
                set.clone(),
                config(n),
            )
        })
        .collect();
    Net { nodes, keys }
}

fn broadcasts(out: &[Output]) -> Vec<ConsensusMsg> {
    out.iter()
        .filter_map(|o| match o {
            Output::Broadcast(m) => Some(m.clone()),
            _ => None,
        })
        .collect()
}

fn prevote(keys: &[KeyPair], h: u64, r: u32, signer: u32, v: Option<ValueId>) -> ConsensusMsg {
    let (h, r) = (Height(h), Round(r));
    ConsensusMsg::Prevote(Prevote {
        height: h,
        round: r,
        value_id: v,
        signer: ValidatorId(signer),
        signature: keys[signer as usize].sign(&sign_bytes::prevote(h, r, v)),
    })
}

fn precommit(keys: &[KeyPair], h: u64, r: u32, signer: u32, v: Option<ValueId>) -> ConsensusMsg {
    let (hh, rr) = (Height(h), Round(r));
    let extension = v.map(|vid| VoteExtension {
        ids: vec![],
        signer: ValidatorId(signer),
        signature: keys[signer as usize].sign(&sign_bytes::extension(hh, rr, vid, &[])),
    });
    ConsensusMsg::Precommit(Precommit {
        height: hh,
        round: rr,
        value_id: v,
        signer: ValidatorId(signer),
        signature: keys[signer as usize].sign(&sign_bytes::precommit(hh, rr, v)),
        extension,
    })
}

/// Delivers every broadcast to every other node until quiescent,
/// skipping nodes in `silent`.
fn flood(
    net: &mut Net,
    apps: &mut [TestApp],
    mut pending: Vec<(usize, ConsensusMsg)>,
    silent: &[usize],
) -> Vec<Output> {
    let mut all = Vec::new();
    while let Some((from, msg)) = pending.pop() {
        for (to, (node, app)) in net.nodes.iter_mut().zip(apps.iter_mut()).enumerate() {
            if to == from || silent.contains(&to) {
                continue;
            }
            let out = node.handle_message(msg.clone(), app);
            for m in broadcasts(&out) {
                pending.push((to, m));
            }
            all.extend(out);
        }
    }
    all
}

#[test]
fn assembler_proposes_and_everyone_arms_propose_timeout() {
    let mut net = net(4);
    let mut app = TestApp::default();
    let out = net.nodes[1].start_height(Height(1), &mut app);
    // The assembler proposes, then prevotes its own proposal.
    assert!(matches!(
        broadcasts(&out)[..],
        [ConsensusMsg::Proposal(_), ConsensusMsg::Prevote(_)]
    ));
    let out = net.nodes[2].start_height(Height(1), &mut app);
    assert!(broadcasts(&out).is_empty());
    assert!(out.iter().any(
        |o| matches!(o, Output::Schedule { timer, .. } if timer.kind == TimeoutKind::Propose)
    ));
}

#[test]
fn happy_path_decides_in_round_zero() {
    let mut net = net(4);
    let mut apps: Vec<TestApp> = (0..4).map(|_| TestApp::default()).collect();
    let mut pending = Vec::new();
    for (i, (node, app)) in net.nodes.iter_mut().zip(apps.iter_mut()).enumerate() {
        for m in broadcasts(&node.start_height(Height(1), app)) {
            pending.push((i, m));
        }
    }
    let out = flood(&mut net, &mut apps, pending, &[]);
    let quorums = out
        .iter()
        .filter(|o| {
            matches!(
                o,
                Output::Quorum {
                    round: Round(0),
                    ..
                }
            )
        })
        .count();
    assert_eq!(quorums, 4);
    for node in &net.nodes {
        assert_eq!(node.step(), Step::Decided);
    }
    // Every precommit carried an extension.
    assert_eq!(apps.iter().map(|a| a.extends).sum::<usize>(), 4);
}

#[test]
fn commit_timer_delivers_decision_with_all_precommits() {
    let mut net = net(4);
    let mut apps: Vec<TestApp> = (0..4).map(|_| TestApp::default()).collect();
    let mut pending = Vec::new();
    for (i, (node, app)) in net.nodes.iter_mut().zip(apps.iter_mut()).enumerate() {
        for m in broadcasts(&node.start_height(Height(1), app)) {
            pending.push((i, m));
        }
    }
    flood(&mut net, &mut apps, pending, &[]);
    let timer = Timer {
        kind: TimeoutKind::Commit,
        height: Height(1),
        round: Round(0),
    };
    let out = net.nodes[0].handle_timeout(timer, &mut apps[0]);
    let decided = out.iter().find_map(|o| match o {
        Output::Decided(d) => Some(d.clone()),
        _ => None,
    });
    let d = decided.expect("decision");
    assert_eq!(d.commit.precommits.len(), 4);
    assert_eq!(net.nodes[0].height(), Height(2));
    assert_eq!(apps[0].decided.len(), 1);
    // A stale commit timer has no effect.
    assert!(net.nodes[0].handle_timeout(timer, &mut apps[0]).is_empty());
}

#[test]
fn three_prevotes_trigger_an_extended_precommit() {
    let mut net = net(4);
    let mut app = TestApp::default();
    net.nodes[1].start_height(Height(1), &mut app);
    let value = b"value-1".to_vec();
    let vid = value_id_of(&value);
    let node = &mut net.nodes[2];
    let mut app2 = TestApp::default();
    node.start_height(Height(1), &mut app2);
    let sig = net.keys[1].sign(&sign_bytes::proposal(Height(1), Round(0), &value, None));
    let prop = ConsensusMsg::Proposal(Proposal {
        height: Height(1),
        round: Round(0),
        value,
        valid_round: None,
        signer: ValidatorId(1),
        signature: sig,
    });
    let out = node.handle_message(prop, &mut app2);
    assert!(matches!(
        broadcasts(&out)[..],
        [ConsensusMsg::Prevote(Prevote {
            value_id: Some(_),
            ..
        })]
    ));
    node.handle_message(prevote(&net.keys, 1, 0, 0, Some(vid)), &mut app2);
    let out = node.handle_message(prevote(&net.keys, 1, 0, 1, Some(vid)), &mut app2);
    match &broadcasts(&out)[..] {
        [ConsensusMsg::Precommit(pc)] => {
            assert_eq!(pc.value_id, Some(vid));
            assert!(pc.extension.is_some());
        }
        other => panic!("expected precommit, got {other:?}"),
    }
    assert_eq!(node.locked_round(), Some(Round(0)));
}

#[test]
fn split_prevotes_precommit_nil_after_timeout() {
    let mut net = net(4);
    let keys = net.keys.clone();
    let node = &mut net.nodes[0];
    let mut app = TestApp::default();
    node.start_height(Height(1), &mut app);
    // Propose timeout: prevote nil.
    let out = node.handle_timeout(
        Timer {
            kind: TimeoutKind::Propose,
            height: Height(1),
            round: Round(0),
        },
        &mut app,
    );
    assert!(matches!(
        broadcasts(&out)[..],
        [ConsensusMsg::Prevote(Prevote { value_id: None, .. })]
    ));
    let v = Some(ValueId(Digest([5; 32])));
    node.handle_message(prevote(&keys, 1, 0, 1, v), &mut app);
    let mut out = node.handle_message(prevote(&keys, 1, 0, 2, v), &mut app);
    out.extend(node.handle_message(prevote(&keys, 1, 0, 3, None), &mut app));
    // 2 for v, 2 for nil: no quorum either way, so only the prevote timer is armed.
    assert!(broadcasts(&out).is_empty());
    assert!(out.iter().any(
        |o| matches!(o, Output::Schedule { timer, .. } if timer.kind == TimeoutKind::Prevote)
    ));
    let out = node.handle_timeout(
        Timer {
            kind: TimeoutKind::Prevote,
            height: Height(1),
            round: Round(0),
        },
        &mut app,
    );
    assert!(matches!(
        broadcasts(&out)[..],
        [ConsensusMsg::Precommit(Precommit {
            value_id: None,
            extension: None,
            ..
        })]
    ));
}

#[test]
fn proposal_from_non_assembler_is_ignored() {
    let mut net = net(4);
    let keys = net.keys.clone();
    let node = &mut net.nodes[0];
    let mut app = TestApp::default();
    node.start_height(Height(1), &mut app);
    let value = b"x".to_vec();
    let prop = ConsensusMsg::Proposal(Proposal {
        height: Height(1),
        round: Round(0),
        value: value.clone(),
        valid_round: None,
        signer: ValidatorId(3),
        signature: keys[3].sign(&sign_bytes::proposal(Height(1), Round(0), &value, None)),
    });
    let out = node.handle_message(prop, &mut app);
    assert!(broadcasts(&out).is_empty());
    assert!(out.iter().any(|o| matches!(o, Output::Rejected { .. })));
    assert_eq!(node.step(), Step::Propose);
}

#[test]
fn invalid_value_gets_nil_prevote() {
    let mut net = net(4);
    let keys = net.keys.clone();
    let node = &mut net.nodes[2];
    let mut app = TestApp {
        reject: true,
        ..Default::default()
    };
    node.start_height(Height(1), &mut app);
    let value = b"x".to_vec();
    let prop = ConsensusMsg::Proposal(Proposal {
        height: Height(1),
        round: Round(0),
        value: value.clone(),
        valid_round: None,
        signer: ValidatorId(1),
        signature: keys[1].sign(&sign_bytes::proposal(Height(1), Round(0), &value, None)),
    });
    let out = node.handle_message(prop, &mut app);
    assert!(matches!(
        broadcasts(&out)[..],
        [ConsensusMsg::Prevote(Prevote { value_id: None, .. })]
    ));
}

#[test]
fn duplicate_and_conflicting_votes() {
    let mut net = net(4);
    let keys = net.keys.clone();
    let node = &mut net.nodes[0];
    let mut app = TestApp::default();
    node.start_height(Height(1), &mut app);
    let v = Some(ValueId(Digest([5; 32])));
    node.handle_message(prevote(&keys, 1, 0, 1, v), &mut app);
    assert!(node
        .handle_message(prevote(&keys, 1, 0, 1, v), &mut app)
        .is_empty());
    let out = node.handle_message(prevote(&keys, 1, 0, 1, None), &mut app);
    assert!(out.iter().any(|o| matches!(
        o,
        Output::Equivocation {
            kind: "PREVOTE",
            ..
        }
    )));
}

#[test]
fn precommit_with_rejected_extension_is_disregarded() {
    let mut net = net(4);
    let mut apps: Vec<TestApp> = (0..4)
        .map(|_| TestApp {
            bad_extension_from: Some(ValidatorId(3)),
            ..Default::default()
        })
        .collect();
    let mut pending = Vec::new();
    for (i, (node, app)) in net.nodes.iter_mut().zip(apps.iter_mut()).enumerate() {
        for m in broadcasts(&node.start_height(Height(1), app)) {
            pending.push((i, m));
        }
    }
    let out = flood(&mut net, &mut apps, pending, &[]);
    assert!(out.iter().any(|o| matches!(
        o,
        Output::Rejected {
            reason: "invalid vote extension",
            ..
        }
    )));
    // Decision still reached from the other three.
    for node in &net.nodes[..3] {
        assert_eq!(node.step(), Step::Decided);
    }
    let timer = Timer {
        kind: TimeoutKind::Commit,
        height: Height(1),
        round: Round(0),
    };
    let out = net.nodes[0].handle_timeout(timer, &mut apps[0]);
    let Some(Output::Decided(d)) = out.iter().find(|o| matches!(o, Output::Decided(_))) else {
        panic!()
    };
    assert!(d
        .commit
        .precommits
        .iter()
        .all(|pc| pc.signer != ValidatorId(3)));
}

#[test]
fn silent_assembler_leads_to_round_one() {
    let mut net = net(4);
    let mut apps: Vec<TestApp> = (0..4).map(|_| TestApp::default()).collect();
    // Assembler of (1, 0) is v1; it never starts.
    let mut pending = Vec::new();
    for i in [0usize, 2, 3] {
        net.nodes[i].start_height(Height(1), &mut apps[i]);
    }
    for i in [0usize, 2, 3] {
        let t = Timer {
            kind: TimeoutKind::Propose,
            height: Height(1),
            round: Round(0),
        };
        for m in broadcasts(&net.nodes[i].handle_timeout(t, &mut apps[i])) {
            pending.push((i, m));
        }
    }
    flood(&mut net, &mut apps, pending, &[1]);
    let mut pending = Vec::new();
    for i in [0usize, 2, 3] {
        let t = Timer {
            kind: TimeoutKind::Prevote,
            height: Height(1),
            round: Round(0),
        };
        for m in broadcasts(&net.nodes[i].handle_timeout(t, &mut apps[i])) {
            pending.push((i, m));
        }
    }
    flood(&mut net, &mut apps, pending, &[1]);
    let mut pending = Vec::new();
    for i in [0usize, 2, 3] {
        let t = Timer {
            kind: TimeoutKind::Precommit,
            height: Height(1),
            round: Round(0),
        };
        for m in broadcasts(&net.nodes[i].handle_timeout(t, &mut apps[i])) {
            pending.push((i, m));
        }
        assert_eq!(net.nodes[i].round(), Round(1));
    }
    // v2 leads round 1.
    let out = flood(&mut net, &mut apps, pending, &[1]);
    assert!(out.iter().any(|o| matches!(
        o,
        Output::Quorum {
            round: Round(1),
            ..
        }
    )));
}

#[test]
fn future_height_messages_are_buffered() {
    let mut net = net(4);
    let keys = net.keys.clone();
    let node = &mut net.nodes[0];
    let mut app = TestApp::default();
    node.start_height(Height(1), &mut app);
    let v = Some(ValueId(Digest([5; 32])));
    assert!(node
        .handle_message(precommit(&keys, 2, 0, 1, v), &mut app)
        .is_empty());
    assert_eq!(node.buffered(), 1);
    // A message for an old height is dropped outright.
    node.start_height(Height(3), &mut app);
    assert_eq!(node.buffered(), 0);
}

#[test]
fn skip_to_higher_round_on_f_plus_one_messages() {
    let mut net = net(4);
    let keys = net.keys.clone();
    let node = &mut net.nodes[0];
    let mut app = TestApp::default();
    node.start_height(Height(1), &mut app);
    node.handle_message(prevote(&keys, 1, 3, 1, None), &mut app);
    assert_eq!(node.round(), Round(0));
    node.handle_message(prevote(&keys, 1, 3, 2, None), &mut app);
    assert_eq!(node.round(), Round(3));
}
