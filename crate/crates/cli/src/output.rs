//! Report types and file emission.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dispatch_core::metrics::{post_warmup_message_rate, workload_slope, MessageRate};
use dispatch_core::{MessageCounters, RunLedger};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub name: String,
    pub policy: String,
    pub seed: u64,
    pub n: usize,
    pub rates: Vec<f64>,
    pub horizon: f64,
    pub warmup_end: f64,
    pub arrivals: u64,
    pub departures: u64,
    pub spontaneous_events: u64,
    pub spontaneous_fired: u64,
    pub counters: MessageCounters,
    pub total_messages: u64,
    pub message_rate: Option<MessageRate>,
    pub workload_slope: Option<f64>,
    pub final_workload: f64,
    pub final_jobs: u64,
    pub mean_queue_lengths: Vec<f64>,
    pub dispatch_shares: Vec<f64>,
}

impl RunReport {
    pub fn from_ledger(l: &RunLedger) -> Self {
        let last = l.rows.last();
        RunReport {
            name: l.name.clone(),
            policy: l.policy.clone(),
            seed: l.seed,
            n: l.n,
            rates: l.rates.clone(),
            horizon: l.horizon,
            warmup_end: l.warmup_end,
            arrivals: l.totals.arrivals,
            departures: l.totals.departures,
            spontaneous_events: l.totals.spontaneous_events,
            spontaneous_fired: l.totals.spontaneous_fired,
            counters: l.totals.counters,
            total_messages: l.totals.counters.total(),
            message_rate: post_warmup_message_rate(l).ok(),
            workload_slope: workload_slope(l).ok(),
            final_workload: last.map_or(0.0, |r| r.total_workload),
            final_jobs: last.map_or(0, |r| r.jobs_in_system()),
            mean_queue_lengths: l.mean_queue_lengths.clone(),
            dispatch_shares: l.dispatch_shares(),
        }
    }
}

pub fn scenario_dir(out: &Path, name: &str) -> PathBuf {
    out.join(name)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Writes `<out>/<name>/<seed>/{ledger.csv,report.json}`.
pub fn write_run(out: &Path, ledger: &RunLedger) -> Result<RunReport> {
    let dir = scenario_dir(out, &ledger.name).join(ledger.seed.to_string());
    write_text(&dir.join("ledger.csv"), &ledger.to_csv())?;
    let report = RunReport::from_ledger(ledger);
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}
