// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

//! The `ampsim` commands: `run` one seeded simulation, `check` a recorded
//! trace, `sweep` many configurations over a seed range.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use amp_core::check::{check, PropertyReport};
use amp_core::harness::{self, Job, RunSummary};
use amp_core::simnet::{measure, run, Event, SimConfig, Trace};
use serde::Serialize;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "AMPSIM_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "ampsim-out";

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    /// At least one property failed.
    PropertyFailed = 1,
    /// The configuration could not be loaded or violates its constraints.
    InvalidConfig = 2,
    /// The run ended before every correct validator finalized `max_heights`.
    Incomplete = 3,
    /// The trace file could not be parsed.
    MalformedTrace = 4,
    /// Output could not be written.
    Io = 5,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Machine,
}

/// A failure that ends the command with `exit` after printing `message`.
#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub message: String,
}

impl Failure {
    fn new(exit: Exit, message: impl Into<String>) -> Self {
        Failure {
            exit,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::new(Exit::Io, format!("cannot write {}: {e}", path.display()))
    }
}

/// What a command prints to stdout, and how it exits.
pub struct Outcome {
    pub exit: Exit,
    pub stdout: String,
}

fn machine<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn load(path: &Path) -> Result<SimConfig, Failure> {
    SimConfig::load(path)
        .and_then(|c| c.validate().map(|()| c))
        .map_err(|e| Failure::new(Exit::InvalidConfig, format!("{}: {e}", path.display())))
}

fn scenario_name(path: &Path) -> String {
    path.file_stem().map_or_else(
        || path.display().to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

/// Parses `a..b`, `a..=b` or a single seed `a`. `a..a` is empty.
pub fn parse_seeds(s: &str) -> Result<Range<u64>, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<u64>()
            .map_err(|e| format!("bad seed {t:?}: {e}"))
    };
    if let Some((a, b)) = s.split_once("..=") {
        Ok(num(a)?..num(b)?.saturating_add(1))
    } else if let Some((a, b)) = s.split_once("..") {
        Ok(num(a)?..num(b)?)
    } else {
        let a = num(s)?;
        Ok(a..a.saturating_add(1))
    }
}

#[derive(Serialize)]
struct BlockLine<'a> {
    height: u64,
    t: u64,
    payload_ids: &'a [amp_core::types::PayloadId],
    txs: &'a [amp_core::types::TxHash],
    digest: amp_core::types::Digest,
}

fn write_jsonl<T: Serialize>(
    path: &Path,
    rows: impl IntoIterator<Item = T>,
) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| Failure::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, &row).map_err(|e| Failure::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Failure::io(path, e))?;
    }
    w.flush().map_err(|e| Failure::io(path, e))
}

/// Writes `trace.jsonl`, `metrics.jsonl` (one record per height, complete
/// traces only) and `blocks/v<i>.jsonl` (each validator's finalized blocks).
fn write_run(trace: &Trace, out: &Path) -> Result<Vec<PathBuf>, Failure> {
    let blocks = out.join("blocks");
    fs::create_dir_all(&blocks).map_err(|e| Failure::io(&blocks, e))?;
    let mut written = Vec::new();

    let trace_path = out.join("trace.jsonl");
    let file = File::create(&trace_path).map_err(|e| Failure::io(&trace_path, e))?;
    let mut w = BufWriter::new(file);
    trace
        .write_jsonl(&mut w)
        .and_then(|()| w.flush())
        .map_err(|e| Failure::io(&trace_path, e))?;
    written.push(trace_path);

    if let Ok(report) = measure(trace) {
        let path = out.join("metrics.jsonl");
        write_jsonl(&path, &report.heights)?;
        written.push(path);
    }

    for v in 0..trace.header.config.n {
        let rows = trace
            .records
            .iter()
            .filter(|r| r.node.as_validator().is_some_and(|x| x.index() == v))
            .filter_map(|r| match &r.event {
                Event::Finalize {
                    h,
                    payload_ids,
                    txs,
                    digest,
                } => Some(BlockLine {
                    height: h.0,
                    t: r.t,
                    payload_ids,
                    txs,
                    digest: *digest,
                }),
                _ => None,
            });
        let path = blocks.join(format!("v{v}.jsonl"));
        write_jsonl(&path, rows)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Serialize)]
struct RunOutput<'a> {
    #[serde(flatten)]
    summary: &'a RunSummary,
    files: Vec<String>,
}

pub fn cmd_run(
    config: &Path,
    seed: Option<u64>,
    out: &Path,
    format: Format,
) -> Result<Outcome, Failure> {
    let mut cfg = load(config)?;
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    let trace =
        run(&cfg).map_err(|e| Failure::new(Exit::InvalidConfig, format!("invalid config: {e}")))?;
    let files = write_run(&trace, out)?;
    let summary = harness::summarize(&scenario_name(config), &trace);
    let stdout = match format {
        Format::Machine => machine(&RunOutput {
            summary: &summary,
            files: files.iter().map(|p| p.display().to_string()).collect(),
        }),
        Format::Text => {
            let mut s = String::new();
            let status = if summary.complete {
                "COMPLETE"
            } else {
                "INCOMPLETE"
            };
            let _ = writeln!(
                s,
                "{} seed={}: {status}, {} heights decided, {} events, end_time={}",
                summary.scenario,
                summary.seed,
                summary.heights_decided,
                summary.events,
                summary.end_time
            );
            if let Some(reason) = &trace.footer.reason {
                let _ = writeln!(s, "  reason: {reason}");
            }
            if let (Some(mph), Some(bph)) = (summary.messages_per_height, summary.bytes_per_height)
            {
                let steps = summary.median_steps.map_or("-".into(), |m| m.to_string());
                let _ = writeln!(s, "  median steps-to-finalize {steps}, {mph:.1} msgs/height, {bph:.0} bytes/height");
            }
            let failed = summary.failed_properties();
            let _ = writeln!(
                s,
                "  properties: {}",
                if failed.is_empty() {
                    "no FAIL".to_string()
                } else {
                    format!("FAIL {}", failed.join(", "))
                }
            );
            let _ = writeln!(s, "  wrote {} files under {}", files.len(), out.display());
            s
        }
    };
    Ok(Outcome {
        exit: if summary.complete {
            Exit::Ok
        } else {
            Exit::Incomplete
        },
        stdout,
    })
}

pub fn render_report(report: &PropertyReport, format: Format) -> String {
    match format {
        Format::Machine => machine(report),
        Format::Text => {
            let mut s = report.to_text();
            let verdict = if !report.passed() { "FAIL" } else { "PASS" };
            let _ = writeln!(
                s,
                "result: {verdict}{}",
                if report.complete {
                    ""
                } else {
                    " (trace incomplete)"
                }
            );
            s
        }
    }
}

pub fn cmd_check(trace_path: &Path, format: Format) -> Result<Outcome, Failure> {
    let file = File::open(trace_path).map_err(|e| {
        Failure::new(
            Exit::MalformedTrace,
            format!("cannot read {}: {e}", trace_path.display()),
        )
    })?;
    let trace = Trace::read_jsonl(std::io::BufReader::new(file)).map_err(|e| {
        Failure::new(
            Exit::MalformedTrace,
            format!("malformed trace {}: {e}", trace_path.display()),
        )
    })?;
    let report = check(&trace);
    let exit = if !report.complete {
        Exit::Incomplete
    } else if !report.passed() {
        Exit::PropertyFailed
    } else {
        Exit::Ok
    };
    Ok(Outcome {
        exit,
        stdout: render_report(&report, format),
    })
}

#[derive(Debug, Serialize)]
pub struct FailedRun {
    pub config: String,
    pub seed: u64,
    pub properties: Vec<String>,
    pub counterexamples: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct ConfigSummary {
    pub config: String,
    pub runs: u64,
    pub passed: u64,
    pub incomplete: u64,
    pub median_steps_to_finalize: Option<u32>,
    pub mean_messages_per_height: Option<f64>,
    pub mean_bytes_per_height: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub seeds: String,
    pub runs: u64,
    pub passed: u64,
    pub configs: Vec<ConfigSummary>,
    /// Per property: [PASS, FAIL, N-A] counts.
    pub properties: BTreeMap<String, [u64; 3]>,
    pub failed: Vec<FailedRun>,
}

fn median(mut v: Vec<u32>) -> Option<u32> {
    v.sort_unstable();
    v.get(v.len() / 2).copied()
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn summarize_sweep(seeds: &str, names: &[String], results: &[RunSummary]) -> SweepSummary {
    let mut configs = Vec::new();
    for name in names {
        let runs: Vec<&RunSummary> = results.iter().filter(|r| &r.scenario == name).collect();
        let mph: Vec<f64> = runs.iter().filter_map(|r| r.messages_per_height).collect();
        let bph: Vec<f64> = runs.iter().filter_map(|r| r.bytes_per_height).collect();
        configs.push(ConfigSummary {
            config: name.clone(),
            runs: runs.len() as u64,
            passed: runs.iter().filter(|r| r.passed()).count() as u64,
            incomplete: runs.iter().filter(|r| !r.complete).count() as u64,
            median_steps_to_finalize: median(runs.iter().filter_map(|r| r.median_steps).collect()),
            mean_messages_per_height: mean(&mph),
            mean_bytes_per_height: mean(&bph),
        });
    }
    let mut properties: BTreeMap<String, [u64; 3]> = BTreeMap::new();
    let mut failed = Vec::new();
    for r in results {
        for p in &r.report.properties {
            let slot = match p.status {
                amp_core::check::Status::Pass => 0,
                amp_core::check::Status::Fail => 1,
                amp_core::check::Status::NotApplicable => 2,
            };
            properties.entry(p.name.clone()).or_default()[slot] += 1;
        }
        if !r.passed() {
            failed.push(FailedRun {
                config: r.scenario.clone(),
                seed: r.seed,
                properties: r
                    .failed_properties()
                    .into_iter()
                    .map(String::from)
                    .collect(),
                counterexamples: r
                    .report
                    .failures()
                    .filter_map(|p| {
                        p.counterexample.as_ref().map(|c| {
                            format!("{}: events {}..={} {}", p.name, c.first, c.last, c.reason)
                        })
                    })
                    .collect(),
            });
        }
    }
    SweepSummary {
        seeds: seeds.to_string(),
        runs: results.len() as u64,
        passed: results.iter().filter(|r| r.passed()).count() as u64,
        configs,
        properties,
        failed,
    }
}

fn render_sweep(s: &SweepSummary, format: Format) -> String {
    if format == Format::Machine {
        return machine(s);
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<32} {:>5} {:>6} {:>5} {:>6} {:>10} {:>12}",
        "config", "runs", "passed", "inc", "steps", "msgs/h", "bytes/h"
    );
    for c in &s.configs {
        let opt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |x| format!("{x:.p$}"));
        let _ = writeln!(
            out,
            "{:<32} {:>5} {:>6} {:>5} {:>6} {:>10} {:>12}",
            c.config,
            c.runs,
            c.passed,
            c.incomplete,
            c.median_steps_to_finalize
                .map_or("-".into(), |m| m.to_string()),
            opt(c.mean_messages_per_height, 1),
            opt(c.mean_bytes_per_height, 0),
        );
    }
    let _ = writeln!(
        out,
        "seeds {}: {}/{} runs passed",
        s.seeds, s.passed, s.runs
    );
    for f in &s.failed {
        let _ = writeln!(
            out,
            "FAIL {} seed={} {}",
            f.config,
            f.seed,
            f.properties.join(",")
        );
        for c in &f.counterexamples {
            let _ = writeln!(out, "  {c}");
        }
    }
    out
}

/// Expands config globs into (scenario name, path) pairs, sorted by path.
pub fn expand_configs(patterns: &[String]) -> Result<Vec<PathBuf>, Failure> {
    let mut paths = Vec::new();
    for pat in patterns {
        let matches = glob::glob(pat)
            .map_err(|e| Failure::new(Exit::InvalidConfig, format!("bad glob {pat:?}: {e}")))?;
        for m in matches {
            paths.push(m.map_err(|e| Failure::new(Exit::InvalidConfig, e.to_string()))?);
        }
    }
    paths.sort();
    paths.dedup();
    if paths.is_empty() {
        return Err(Failure::new(
            Exit::InvalidConfig,
            format!("no config matches {patterns:?}"),
        ));
    }
    Ok(paths)
}

/// Runs every (config, seed); failing traces are kept under `out/failures`
/// and the machine-readable summary is written to `out/sweep-summary.json`.
pub fn cmd_sweep(
    patterns: &[String],
    seeds: &str,
    jobs: usize,
    out: &Path,
    format: Format,
) -> Result<Outcome, Failure> {
    let range = parse_seeds(seeds).map_err(|m| Failure::new(Exit::InvalidConfig, m))?;
    let mut scenarios = Vec::new();
    let mut names = Vec::new();
    for path in expand_configs(patterns)? {
        let name = scenario_name(&path);
        if names.contains(&name) {
            return Err(Failure::new(
                Exit::InvalidConfig,
                format!("two configs are named {name}"),
            ));
        }
        scenarios.push((name.clone(), load(&path)?));
        names.push(name);
    }
    let jobs_list: Vec<Job> = harness::jobs(&scenarios, range);
    let failures = out.join("failures");
    fs::create_dir_all(out).map_err(|e| Failure::io(out, e))?;
    let write_errors = std::sync::Mutex::new(Vec::new());
    let results = harness::sweep(&jobs_list, jobs, |job, trace, summary| {
        if summary.passed() {
            return;
        }
        let path = failures.join(format!("{}-seed{}.jsonl", job.scenario, job.config.seed));
        let written = fs::create_dir_all(&failures).and_then(|()| {
            let mut w = BufWriter::new(File::create(&path)?);
            trace.write_jsonl(&mut w)?;
            w.flush()
        });
        if let Err(e) = written {
            write_errors
                .lock()
                .expect("lock")
                .push(Failure::io(&path, e));
        }
    });
    if let Some(e) = write_errors.into_inner().expect("lock").into_iter().next() {
        return Err(e);
    }
    let results: Vec<RunSummary> = results
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(|m| Failure::new(Exit::InvalidConfig, m))?;
    let summary = summarize_sweep(seeds, &names, &results);
    let path = out.join("sweep-summary.json");
    fs::write(&path, machine(&summary)).map_err(|e| Failure::io(&path, e))?;
    let exit = if summary.failed.is_empty() {
        Exit::Ok
    } else {
        Exit::PropertyFailed
    };
    Ok(Outcome {
        exit,
        stdout: render_sweep(&summary, format),
    })
}

/// `--out`, else `$AMPSIM_OUT_DIR`, else `./ampsim-out`.
pub fn resolve_out(out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}
