// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! The scenario set is well formed and sweeps are order-stable.

use std::collections::BTreeSet;

use amp_core::amp::Mutation;
use amp_core::harness::{jobs, mutated, scenario_set, standard_scenarios, sweep, totals};

#[test]
fn standard_scenarios_are_valid_unique_and_cover_every_behavior() {
    let all = standard_scenarios();
    let names: BTreeSet<&str> = all.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names.len(), all.len());
    for (name, cfg) in &all {
        cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(cfg.faulty_validators().len() <= cfg.f, "{name}");
    }
    for (n, f) in [(4, 1), (7, 2)] {
        let kinds: BTreeSet<&str> = scenario_set(n, f)
            .iter()
            .flat_map(|(_, c)| {
                c.adversaries
                    .iter()
                    .map(|a| a.behavior.name())
                    .collect::<Vec<_>>()
            })
            .collect();
        for k in [
            "crash",
            "censor_assembler",
            "equivocate_proposer",
            "selective_dissemination",
            "omit_extension_ids",
            "spam_proposer",
            "silent_retransmit",
            "corrupt_retransmit",
        ] {
            assert!(kinds.contains(k), "n={n} lacks {k}");
        }
    }
}

#[test]
fn sweep_results_follow_job_order_for_any_thread_count() {
    let scenarios: Vec<_> = scenario_set(4, 1).into_iter().take(3).collect();
    let js = jobs(&scenarios, 1..=2);
    let one = sweep(&js, 1, |_, _, _| {});
    let two = sweep(&js, 2, |_, _, _| {});
    assert_eq!(one, two);
    let order: Vec<(String, u64)> = one
        .iter()
        .map(|r| r.as_ref().map(|s| (s.scenario.clone(), s.seed)).unwrap())
        .collect();
    let expected: Vec<(String, u64)> = js
        .iter()
        .map(|j| (j.scenario.clone(), j.config.seed))
        .collect();
    assert_eq!(order, expected);
}

#[test]
fn totals_count_failing_runs() {
    let scenarios = mutated(&scenario_set(4, 1)[..1], Mutation::UnstableSortTies);
    let results = sweep(&jobs(&scenarios, 1..=3), 0, |_, _, _| {});
    let t = totals(&results);
    assert_eq!((t.runs, t.errors, t.incomplete), (3, 0, 0));
    assert_eq!(t.failing_runs, 3);
    assert_eq!(t.by_property["agreement"].1, 3);
}

#[test]
fn empty_seed_range_yields_no_jobs() {
    let js = jobs(&standard_scenarios(), 1..1);
    assert!(js.is_empty());
}
