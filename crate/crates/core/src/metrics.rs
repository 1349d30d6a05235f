//! Message-rate accounting, workload-drift diagnostics and observers that
//! accumulate time averages during a run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{EventDetail, EventRecord, MessageCounters, Observer, Simulator};
use crate::error::AnalysisError;
use crate::ledger::RunLedger;
use crate::stats::{bootstrap_mean_ci, mean, ols_slope, Interval};

/// Messages per unit time over a window, split into the arrival,
/// spontaneous and departure terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageRate {
    pub t1: f64,
    pub t2: f64,
    pub counts: MessageCounters,
    pub total: f64,
    pub arrival: f64,
    pub spontaneous: f64,
    pub departure: f64,
}

/// Average message rate over `[t1, t2]`. Window ends are read from the
/// latest sampled rows at or before them; the warmup end and the horizon
/// are always sampled.
pub fn average_message_rate(ledger: &RunLedger, t1: f64, t2: f64) -> Result<MessageRate, AnalysisError> {
    if !(t2 > t1) {
        return Err(AnalysisError::EmptyWindow { t1, t2 });
    }
    if t1 < ledger.warmup_end {
        return Err(AnalysisError::Precondition(format!(
            "window start {t1} precedes the warmup end {}",
            ledger.warmup_end
        )));
    }
    let a = ledger.row_at(t1).ok_or(AnalysisError::EmptyWindow { t1, t2 })?;
    let b = ledger.row_at(t2).ok_or(AnalysisError::EmptyWindow { t1, t2 })?;
    let span = b.time - a.time;
    if !(span > 0.0) {
        return Err(AnalysisError::EmptyWindow { t1, t2 });
    }
    let counts = b.counters.saturating_sub(&a.counters);
    let [arr, spon, dep] = counts.three_terms();
    Ok(MessageRate {
        t1: a.time,
        t2: b.time,
        counts,
        total: counts.total() as f64 / span,
        arrival: arr as f64 / span,
        spontaneous: spon as f64 / span,
        departure: dep as f64 / span,
    })
}

/// Message rate over the whole post-warmup window.
pub fn post_warmup_message_rate(ledger: &RunLedger) -> Result<MessageRate, AnalysisError> {
    average_message_rate(ledger, ledger.warmup_end, ledger.horizon)
}

/// Recounts the four message counters from raw decisions in an event log,
/// without using the per-event message totals.
pub fn rederive_counters(events: &[EventRecord]) -> MessageCounters {
    let mut c = MessageCounters::default();
    for e in events {
        match &e.detail {
            EventDetail::Arrival { sampled, .. } => c.arrival_query += 2 * sampled.len() as u64,
            EventDetail::Spontaneous { sender: Some(_), sampled } => {
                c.spontaneous += 1;
                c.spontaneous_query += 2 * sampled.len() as u64;
            }
            EventDetail::Spontaneous { sender: None, .. } => {}
            EventDetail::Departure { notified, .. } => c.departure += u64::from(*notified),
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    DriftNull,
    DriftPositive,
    Inconclusive,
}

impl Classification {
    /// Process exit code: 0 stable-consistent, 2 unstable-consistent,
    /// 3 inconclusive.
    pub fn exit_code(self) -> i32 {
        match self {
            Classification::DriftNull => 0,
            Classification::DriftPositive => 2,
            Classification::Inconclusive => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::DriftNull => "drift_null",
            Classification::DriftPositive => "drift_positive",
            Classification::Inconclusive => "inconclusive",
        }
    }
}

/// Classifies a slope interval against the threshold `0.01 n`.
pub fn classify(ci: &Interval, n: usize) -> Classification {
    let threshold = 0.01 * n as f64;
    if ci.lower > threshold {
        Classification::DriftPositive
    } else if ci.contains(0.0) && ci.half_width() < threshold {
        Classification::DriftNull
    } else {
        Classification::Inconclusive
    }
}

pub const BOOTSTRAP_RESAMPLES: usize = 2000;
pub const CONFIDENCE: f64 = 0.95;
/// Pseudo-replications a single run is cut into.
pub const SEGMENTS: usize = 10;
/// Minimum post-warmup rows per run.
pub const MIN_ROWS: usize = 10;
const BOOTSTRAP_SEED: u64 = 0x2545_F491_4F6C_DD1D;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftEstimate {
    /// Per-replication (or per-segment) slopes of total workload in time.
    pub slopes: Vec<f64>,
    pub mean_slope: f64,
    pub ci: Interval,
    /// `replications` or `segments`.
    pub resampling: String,
    pub classification: Classification,
}

fn post_warmup_series(ledger: &RunLedger) -> (Vec<f64>, Vec<f64>) {
    ledger
        .window(ledger.warmup_end, ledger.horizon)
        .map(|r| (r.time, r.total_workload))
        .unzip()
}

/// Least-squares slope of total workload against time after the warmup.
pub fn workload_slope(ledger: &RunLedger) -> Result<f64, AnalysisError> {
    let (t, w) = post_warmup_series(ledger);
    if t.len() < MIN_ROWS {
        return Err(AnalysisError::InsufficientSamples(format!(
            "{} post-warmup rows, need {MIN_ROWS}",
            t.len()
        )));
    }
    ols_slope(&t, &w)
}

/// Slope of total workload with a bootstrap interval over replications,
/// or over equal time segments when only one run is given.
pub fn workload_drift(ledgers: &[RunLedger]) -> Result<DriftEstimate, AnalysisError> {
    let first = ledgers
        .first()
        .ok_or_else(|| AnalysisError::InsufficientSamples("no runs".into()))?;
    let (slopes, resampling) = if ledgers.len() >= 2 {
        let s = ledgers.iter().map(workload_slope).collect::<Result<Vec<_>, _>>()?;
        (s, "replications")
    } else {
        let (t, w) = post_warmup_series(first);
        if t.len() < SEGMENTS * MIN_ROWS {
            return Err(AnalysisError::InsufficientSamples(format!(
                "{} post-warmup rows, need {} to cut a single run into segments",
                t.len(),
                SEGMENTS * MIN_ROWS
            )));
        }
        let size = t.len() / SEGMENTS;
        let s = (0..SEGMENTS)
            .map(|k| ols_slope(&t[k * size..(k + 1) * size], &w[k * size..(k + 1) * size]))
            .collect::<Result<Vec<_>, _>>()?;
        (s, "segments")
    };
    let ci = bootstrap_mean_ci(&slopes, BOOTSTRAP_RESAMPLES, CONFIDENCE, BOOTSTRAP_SEED)?;
    Ok(DriftEstimate {
        mean_slope: mean(&slopes),
        classification: classify(&ci, first.n),
        slopes,
        ci,
        resampling: resampling.into(),
    })
}

/// Time spent in each `(queue lengths, memory value)` state from `start`
/// on, for comparison with a stationary distribution.
#[derive(Debug, Clone, Default)]
pub struct StateOccupancy {
    start: f64,
    last_time: f64,
    current: Option<(Vec<usize>, u128)>,
    pub time_in_state: BTreeMap<(Vec<usize>, u128), f64>,
    pub events: u64,
}

impl StateOccupancy {
    pub fn new(start: f64) -> Self {
        StateOccupancy {
            start,
            ..Default::default()
        }
    }

    fn advance(&mut self, t: f64) {
        let from = self.last_time.max(self.start);
        if t > from {
            let key = self.current.clone().unwrap_or_default();
            *self.time_in_state.entry(key).or_default() += t - from;
        }
        self.last_time = t;
    }

    pub fn total_time(&self) -> f64 {
        self.time_in_state.values().sum()
    }

    /// Occupancy fractions.
    pub fn distribution(&self) -> BTreeMap<(Vec<usize>, u128), f64> {
        let total = self.total_time();
        self.time_in_state.iter().map(|(k, v)| (k.clone(), v / total)).collect()
    }
}

impl Observer for StateOccupancy {
    fn on_event(&mut self, event: &EventRecord, sim: &Simulator<'_>) {
        if self.current.is_none() {
            self.current = Some((vec![0; sim.servers()], event.memory_before.value()));
        }
        self.advance(event.time);
        self.current = Some((sim.queue_lengths(), sim.memory().value()));
        self.events += 1;
    }

    fn on_finish(&mut self, sim: &Simulator<'_>) {
        self.advance(sim.now());
    }
}

/// Time-averaged number of jobs in the system over equal batches of
/// `[start, end]`.
#[derive(Debug, Clone)]
pub struct BatchMeans {
    start: f64,
    end: f64,
    width: f64,
    last_time: f64,
    jobs: u64,
    area: Vec<f64>,
}

impl BatchMeans {
    pub fn new(start: f64, end: f64, batches: usize) -> Self {
        BatchMeans {
            start,
            end,
            width: (end - start) / batches as f64,
            last_time: 0.0,
            jobs: 0,
            area: vec![0.0; batches],
        }
    }

    fn advance(&mut self, t: f64) {
        let mut from = self.last_time.max(self.start);
        let to = t.min(self.end);
        while from < to {
            let k = (((from - self.start) / self.width) as usize).min(self.area.len() - 1);
            let edge = (self.start + (k + 1) as f64 * self.width).min(to);
            let stop = if edge > from { edge } else { to };
            self.area[k] += self.jobs as f64 * (stop - from);
            from = stop;
        }
        self.last_time = t;
    }

    pub fn batch_means(&self) -> Vec<f64> {
        self.area.iter().map(|a| a / self.width).collect()
    }
}

impl Observer for BatchMeans {
    fn on_event(&mut self, event: &EventRecord, sim: &Simulator<'_>) {
        self.advance(event.time);
        self.jobs = sim.jobs_in_system();
    }

    fn on_finish(&mut self, sim: &Simulator<'_>) {
        self.advance(sim.now());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_rules() {
        let n = 10;
        assert_eq!(classify(&Interval { lower: 0.2, upper: 0.4 }, n), Classification::DriftPositive);
        assert_eq!(classify(&Interval { lower: -0.05, upper: 0.05 }, n), Classification::DriftNull);
        assert_eq!(classify(&Interval { lower: -0.5, upper: 0.5 }, n), Classification::Inconclusive);
        assert_eq!(classify(&Interval { lower: 0.02, upper: 0.08 }, n), Classification::Inconclusive);
        assert_eq!(Classification::DriftPositive.exit_code(), 2);
    }
}
