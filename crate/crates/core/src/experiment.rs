//! Running configured experiments: one run, or a batch of comparison rows
//! that share a trace.

use std::fmt::Write as _;

use serde::Serialize;

use crate::allocator::{resolve, GroupingStrategy, ResolvedTrace};
use crate::config::{CompareRow, RunConfig};
use crate::error::{Error, SimError};
use crate::metrics::RunReport;
use crate::sim::{simulate, SimConfig};
use crate::workload::Trace;

/// How a batch of independent simulations is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// On the rayon pool. Without the `parallel` feature this runs
    /// sequentially.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// One simulation of a batch.
#[derive(Debug, Clone)]
pub struct Job<'a> {
    pub resolved: &'a ResolvedTrace,
    pub config: SimConfig,
}

/// Runs every job; results come back in job order whatever the schedule.
pub fn run_batch(jobs: &[Job<'_>], exec: Execution) -> Vec<Result<RunReport, SimError>> {
    let one = |j: &Job<'_>| simulate(j.resolved, &j.config);
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            jobs.par_iter().map(one).collect()
        }
        _ => jobs.iter().map(one).collect(),
    }
}

fn echo(run: &RunConfig, sim: &SimConfig) -> serde_json::Value {
    serde_json::json!({ "run": run, "sim": sim })
}

/// Places `trace` for `run` and simulates it.
pub fn run_one(run: &RunConfig, trace: &Trace) -> Result<(ResolvedTrace, RunReport), Error> {
    let resolved = resolve(trace, run.strategy, run.max_pages)?;
    let sim = run.sim_config_for(resolved.pages_opened, trace.page_size())?;
    let mut report = simulate(&resolved, &sim)?;
    report.config = echo(run, &sim);
    Ok((resolved, report))
}

/// The result of one comparison row.
#[derive(Debug, Clone)]
pub struct RowResult {
    pub name: String,
    pub report: RunReport,
}

/// Simulates every row over `trace`. Each distinct placement is resolved
/// once and shared by the rows that use it.
pub fn run_rows(rows: &[CompareRow], trace: &Trace, exec: Execution) -> Result<Vec<RowResult>, Error> {
    let mut keys: Vec<(GroupingStrategy, u64)> = Vec::new();
    for r in rows {
        let k = (r.config.strategy, r.config.max_pages);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let resolved: Vec<ResolvedTrace> = keys
        .iter()
        .map(|&(s, max)| resolve(trace, s, max))
        .collect::<Result<_, _>>()?;
    let mut jobs = Vec::with_capacity(rows.len());
    for r in rows {
        let k = keys
            .iter()
            .position(|&k| k == (r.config.strategy, r.config.max_pages))
            .expect("every key was resolved");
        let config = r.config.sim_config_for(resolved[k].pages_opened, trace.page_size())?;
        jobs.push(Job {
            resolved: &resolved[k],
            config,
        });
    }
    let results = run_batch(&jobs, exec);
    rows.iter()
        .zip(jobs.iter().zip(results))
        .map(|(row, (job, rep))| {
            let mut report = rep?;
            report.config = echo(&row.config, &job.config);
            Ok(RowResult {
                name: row.name.clone(),
                report,
            })
        })
        .collect()
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub name: String,
    pub policy: String,
    pub strategy: String,
    pub hit_rate: f64,
    pub promotions: u64,
    pub demotions: u64,
    pub migrations: u64,
    pub estimated_runtime_ns: f64,
    /// Estimated runtime over the fastest row's.
    pub slowdown: f64,
}

pub fn summarize(results: &[RowResult]) -> Vec<SummaryRow> {
    let best = results
        .iter()
        .map(|r| r.report.estimated_runtime_ns)
        .fold(f64::INFINITY, f64::min);
    results
        .iter()
        .map(|r| {
            let rep = &r.report;
            SummaryRow {
                name: r.name.clone(),
                policy: rep.policy.clone(),
                strategy: rep.strategy.clone(),
                hit_rate: rep.hit_rate,
                promotions: rep.promotions,
                demotions: rep.demotions,
                migrations: rep.migrations,
                estimated_runtime_ns: rep.estimated_runtime_ns,
                slowdown: if best > 0.0 {
                    rep.estimated_runtime_ns / best
                } else {
                    1.0
                },
            }
        })
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s =
        String::from("name,policy,strategy,hit_rate,promotions,demotions,migrations,estimated_runtime_ns,slowdown\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{:.6},{},{},{},{:.1},{:.4}",
            csv_field(&r.name),
            r.policy,
            r.strategy,
            r.hit_rate,
            r.promotions,
            r.demotions,
            r.migrations,
            r.estimated_runtime_ns,
            r.slowdown
        )
        .expect("writing to a string");
    }
    s
}
