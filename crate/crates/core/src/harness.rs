// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! Batch execution: the standard scenario set, and parallel sweeps over
//! scenarios and seeds with per-run summaries.

use serde::{Deserialize, Serialize};

use crate::amp::Mutation;
use crate::check::{check, PropertyReport, Status};
use crate::simnet::{
    measure, run, AdversarySpec, Behavior, ConfigError, SimConfig, Topology, Trace,
};
use crate::types::{Digest, NodeId};

/// One simulation to run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub scenario: String,
    pub config: SimConfig,
}

/// What a sweep keeps of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub mutation: Mutation,
    pub config_digest: Digest,
    pub complete: bool,
    pub events: u64,
    pub end_time: u64,
    pub heights_decided: u64,
    pub max_decide_round: u32,
    pub median_steps: Option<u32>,
    pub messages_per_height: Option<f64>,
    pub bytes_per_height: Option<f64>,
    pub report: PropertyReport,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }

    pub fn failed_properties(&self) -> Vec<&str> {
        self.report.failures().map(|p| p.name.as_str()).collect()
    }
}

/// Runs, checks and measures one job.
pub fn execute(job: &Job) -> Result<(Trace, RunSummary), ConfigError> {
    let trace = run(&job.config)?;
    let summary = summarize(&job.scenario, &trace);
    Ok((trace, summary))
}

pub fn summarize(scenario: &str, trace: &Trace) -> RunSummary {
    let report = check(trace);
    let metrics = measure(trace).ok();
    let correct = &trace.header.correct_validators;
    let mut heights = 0;
    let mut max_round = 0;
    for rec in &trace.records {
        if let crate::simnet::Event::Decide { h, r, .. } = &rec.event {
            if rec
                .node
                .as_validator()
                .is_some_and(|v| correct.contains(&v))
            {
                heights = heights.max(h.0);
                max_round = max_round.max(r.0);
            }
        }
    }
    RunSummary {
        scenario: scenario.to_string(),
        seed: trace.header.seed,
        mutation: trace.header.config.mutation,
        config_digest: trace.header.config_digest,
        complete: trace.is_complete(),
        events: trace.footer.events,
        end_time: trace.footer.end_time,
        heights_decided: heights,
        max_decide_round: max_round,
        median_steps: metrics.as_ref().and_then(|m| m.median_steps()),
        messages_per_height: metrics.as_ref().map(|m| m.messages_per_height),
        bytes_per_height: metrics.as_ref().map(|m| m.bytes_per_height),
        report,
    }
}

/// Expands every scenario over every seed.
pub fn jobs(
    scenarios: &[(String, SimConfig)],
    seeds: impl IntoIterator<Item = u64> + Clone,
) -> Vec<Job> {
    scenarios
        .iter()
        .flat_map(|(name, cfg)| {
            seeds.clone().into_iter().map(move |s| Job {
                scenario: name.clone(),
                config: cfg.clone().with_seed(s),
            })
        })
        .collect()
}

/// Runs `jobs` on `threads` worker threads (0 = one per core). Results are
/// in job order regardless of scheduling. `visit` sees every trace before it
/// is dropped, e.g. to persist the failing ones.
pub fn sweep<F>(jobs: &[Job], threads: usize, visit: F) -> Vec<Result<RunSummary, String>>
where
    F: Fn(&Job, &Trace, &RunSummary) + Sync,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| {
        jobs.par_iter()
            .map(|job| match execute(job) {
                Ok((trace, summary)) => {
                    visit(job, &trace, &summary);
                    Ok(summary)
                }
                Err(e) => Err(format!("{}: {e}", job.scenario)),
            })
            .collect()
    })
}

fn adversary(target: NodeId, behavior: Behavior) -> AdversarySpec {
    AdversarySpec { target, behavior }
}

/// One scenario per fault class at size `(n, f)`: fault-free, asynchrony
/// before GST, crash and crash-restart, and every adversary behavior, each
/// with at most `f` Byzantine validators. Names carry an `_n<n>` suffix.
pub fn scenario_set(n: usize, f: usize) -> Vec<(String, SimConfig)> {
    assert!(n > 3 * f && f >= 1, "scenario_set needs n > 3f and f >= 1");
    let base = SimConfig {
        proposer_count: if n > 4 { 3 } else { 2 },
        ..SimConfig::baseline(n, f)
    };
    let last = n as u32 - 1;
    let v = NodeId::validator;
    let p = NodeId::Proposer;
    let with = |adv: Vec<AdversarySpec>| SimConfig {
        adversaries: adv,
        ..base.clone()
    };
    // Payloads of p0 reach `f` (never sound) or `f + 1` (sound, but most
    // correct validators must fetch them) validators.
    let below: Vec<u32> = (0..f as u32).collect();
    let above: Vec<u32> = (0..=f as u32).collect();
    let mut censor = vec![adversary(
        v(0),
        Behavior::CensorAssembler {
            omit_proposers: vec![0],
            omit_validators: vec![last],
        },
    )];
    if f >= 2 {
        // A colluding validator that also withholds attestations of p0.
        censor.push(adversary(
            v(last - 1),
            Behavior::OmitExtensionIds {
                from_proposers: vec![0],
            },
        ));
    }
    let out: Vec<(&str, SimConfig)> = vec![
        ("baseline", base.clone()),
        (
            "late_gst",
            SimConfig {
                gst: 400,
                ..base.clone()
            },
        ),
        (
            "crash_validator",
            with(vec![adversary(
                v(1),
                Behavior::Crash {
                    at_time: 120,
                    restart_at: None,
                },
            )]),
        ),
        (
            "crash_restart",
            with(vec![adversary(
                v(2),
                Behavior::Crash {
                    at_time: 100,
                    restart_at: Some(400),
                },
            )]),
        ),
        ("censor", with(censor)),
        (
            "equivocating_proposer",
            with(vec![adversary(
                p(0),
                Behavior::EquivocateProposer { split: vec![0, 1] },
            )]),
        ),
        (
            "selective_below_threshold",
            with(vec![adversary(
                p(0),
                Behavior::SelectiveDissemination { reach: below },
            )]),
        ),
        (
            "selective_above_threshold",
            with(vec![adversary(
                p(0),
                Behavior::SelectiveDissemination {
                    reach: above.clone(),
                },
            )]),
        ),
        (
            "silent_retransmit",
            with(vec![
                adversary(
                    p(0),
                    Behavior::SelectiveDissemination {
                        reach: above.clone(),
                    },
                ),
                adversary(v(0), Behavior::SilentRetransmit {}),
            ]),
        ),
        (
            "corrupt_retransmit",
            with(vec![
                adversary(p(0), Behavior::SelectiveDissemination { reach: above }),
                adversary(v(1), Behavior::CorruptRetransmit {}),
            ]),
        ),
        (
            "spam_proposer",
            with(vec![adversary(p(1), Behavior::SpamProposer { rate: 2 })]),
        ),
        (
            "omit_extension_ids",
            with(vec![adversary(
                v(last),
                Behavior::OmitExtensionIds {
                    from_proposers: vec![],
                },
            )]),
        ),
    ];
    out.into_iter()
        .map(|(name, c)| (format!("{name}_n{n}"), c))
        .collect()
}

/// The scenario set used by default sweeps: [`scenario_set`] at `n = 4` and
/// `n = 7`, plus a fault-free relay-topology run. Sorted by name.
pub fn standard_scenarios() -> Vec<(String, SimConfig)> {
    let mut out = scenario_set(4, 1);
    out.extend(scenario_set(7, 2));
    out.push((
        "relay_n8".into(),
        SimConfig {
            topology: Topology::Relay,
            ..SimConfig::baseline(8, 2)
        },
    ));
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// `scenarios` with `mutation` injected into every validator.
pub fn mutated(scenarios: &[(String, SimConfig)], mutation: Mutation) -> Vec<(String, SimConfig)> {
    scenarios
        .iter()
        .map(|(name, c)| {
            (
                format!("{name}+{}", mutation.name()),
                SimConfig {
                    mutation,
                    ..c.clone()
                },
            )
        })
        .collect()
}

/// Aggregate over a sweep.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepTotals {
    pub runs: u64,
    pub errors: u64,
    pub incomplete: u64,
    pub failing_runs: u64,
    /// Per property: (PASS, FAIL, N-A).
    pub by_property: std::collections::BTreeMap<String, (u64, u64, u64)>,
}

pub fn totals(results: &[Result<RunSummary, String>]) -> SweepTotals {
    let mut t = SweepTotals::default();
    for r in results {
        t.runs += 1;
        let Ok(s) = r else {
            t.errors += 1;
            continue;
        };
        t.incomplete += u64::from(!s.complete);
        t.failing_runs += u64::from(!s.passed());
        for p in &s.report.properties {
            let e = t.by_property.entry(p.name.clone()).or_default();
            match p.status {
                Status::Pass => e.0 += 1,
                Status::Fail => e.1 += 1,
                Status::NotApplicable => e.2 += 1,
            }
        }
    }
    t
}
