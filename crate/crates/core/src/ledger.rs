//! Time series recorded during a run.
//!
//! Rows are taken at fixed sampling instants (multiples of the sampling
//! period, plus the warmup end and the horizon). The state between two
//! events is known exactly, so a row at instant `t` reports the true
//! workload at `t` and counts every event with time `<= t`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::engine::{EventDetail, EventKind, EventRecord, MessageCounters, Observer, Simulator};
use crate::policy::DispatchPolicy;
use crate::types::SystemState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub time: f64,
    /// Kind of the most recent event at or before `time`.
    pub event_kind: Option<EventKind>,
    pub server: Option<usize>,
    pub total_workload: f64,
    pub queue_lengths: Vec<usize>,
    pub counters: MessageCounters,
    pub arrivals: u64,
    pub departures: u64,
}

impl LedgerRow {
    pub fn max_queue_len(&self) -> usize {
        self.queue_lengths.iter().copied().max().unwrap_or(0)
    }

    pub fn jobs_in_system(&self) -> u64 {
        self.queue_lengths.iter().map(|&l| l as u64).sum()
    }
}

/// Cumulative counts at one instant.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub time: f64,
    pub counters: MessageCounters,
    pub arrivals: u64,
    pub spontaneous_events: u64,
    pub spontaneous_fired: u64,
    pub departures: u64,
    pub dispatched: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLedger {
    pub name: String,
    pub policy: String,
    pub seed: u64,
    pub n: usize,
    pub rates: Vec<f64>,
    pub horizon: f64,
    pub warmup_end: f64,
    pub sample_period: f64,
    pub rows: Vec<LedgerRow>,
    /// Counts at the warmup end.
    pub warmup: Checkpoint,
    /// Counts at the horizon.
    pub totals: Checkpoint,
    pub departed: Vec<u64>,
    /// Time-averaged queue length of each server after the warmup.
    pub mean_queue_lengths: Vec<f64>,
    pub final_state: SystemState,
}

impl RunLedger {
    /// Rows with `t1 <= time <= t2`.
    pub fn window(&self, t1: f64, t2: f64) -> impl Iterator<Item = &LedgerRow> {
        self.rows.iter().filter(move |r| r.time >= t1 && r.time <= t2)
    }

    /// Latest row at or before `t`.
    pub fn row_at(&self, t: f64) -> Option<&LedgerRow> {
        let k = self.rows.partition_point(|r| r.time <= t);
        k.checked_sub(1).map(|k| &self.rows[k])
    }

    /// Fraction of post-warmup arrivals sent to each server.
    pub fn dispatch_shares(&self) -> Vec<f64> {
        let total = (self.totals.arrivals - self.warmup.arrivals) as f64;
        self.totals
            .dispatched
            .iter()
            .zip(&self.warmup.dispatched)
            .map(|(a, b)| if total > 0.0 { (a - b) as f64 / total } else { 0.0 })
            .collect()
    }

    /// CSV with columns `time,event_kind,server,total_workload,max_queue_len,cum_messages`.
    /// Servers are one-based; missing values are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,event_kind,server,total_workload,max_queue_len,cum_messages\n");
        for r in &self.rows {
            let kind = r.event_kind.map_or("", EventKind::as_str);
            let server = r.server.map(|s| (s + 1).to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.time,
                kind,
                server,
                r.total_workload,
                r.max_queue_len(),
                r.counters.total()
            );
        }
        out
    }
}

fn sample_instants(horizon: f64, period: f64, warmup_end: f64) -> Vec<f64> {
    let steps = (horizon / period).floor() as u64;
    let mut ticks: Vec<f64> = (0..=steps).map(|k| k as f64 * period).filter(|&t| t <= horizon).collect();
    ticks.push(warmup_end);
    ticks.push(horizon);
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    ticks
}

/// Observer that builds a [`RunLedger`]. Workload and queue lengths are
/// tracked incrementally so that a row costs `O(n)` regardless of how long
/// the queues are.
pub struct LedgerRecorder {
    name: String,
    policy: String,
    seed: u64,
    rates: Vec<f64>,
    horizon: f64,
    warmup_end: f64,
    period: f64,
    ticks: Vec<f64>,
    next_tick: usize,
    rows: Vec<LedgerRow>,

    lengths: Vec<usize>,
    jobs: u64,
    work: f64,
    busy_rate: f64,
    last_time: f64,
    last_kind: Option<EventKind>,
    last_server: Option<usize>,
    counters: MessageCounters,
    arrivals: u64,
    spontaneous_events: u64,
    spontaneous_fired: u64,
    departures: u64,
    dispatched: Vec<u64>,
    departed: Vec<u64>,

    area: Vec<f64>,
    area_since: Vec<f64>,
    warmup: Option<Checkpoint>,
    final_state: Option<SystemState>,
}

impl LedgerRecorder {
    pub fn new(config: &ScenarioConfig, policy: &dyn DispatchPolicy, horizon: f64) -> Self {
        let n = config.n;
        let warmup_end = config.warmup * horizon;
        let period = config.sample_period.unwrap_or(horizon / crate::config::DEFAULT_SAMPLES);
        LedgerRecorder {
            name: config.name.clone(),
            policy: policy.name(),
            seed: config.seed,
            rates: config.rates.as_slice().to_vec(),
            horizon,
            warmup_end,
            period,
            ticks: sample_instants(horizon, period, warmup_end),
            next_tick: 0,
            rows: Vec::new(),
            lengths: vec![0; n],
            jobs: 0,
            work: 0.0,
            busy_rate: 0.0,
            last_time: 0.0,
            last_kind: None,
            last_server: None,
            counters: MessageCounters::default(),
            arrivals: 0,
            spontaneous_events: 0,
            spontaneous_fired: 0,
            departures: 0,
            dispatched: vec![0; n],
            departed: vec![0; n],
            area: vec![0.0; n],
            area_since: vec![warmup_end; n],
            warmup: None,
            final_state: None,
        }
    }

    fn checkpoint(&self, time: f64) -> Checkpoint {
        Checkpoint {
            time,
            counters: self.counters,
            arrivals: self.arrivals,
            spontaneous_events: self.spontaneous_events,
            spontaneous_fired: self.spontaneous_fired,
            departures: self.departures,
            dispatched: self.dispatched.clone(),
        }
    }

    fn work_at(&self, t: f64) -> f64 {
        if self.jobs == 0 {
            0.0
        } else {
            (self.work - self.busy_rate * (t - self.last_time)).max(0.0)
        }
    }

    /// Emits every sampling instant strictly before `t` (or up to and
    /// including `t` when `inclusive`).
    fn emit_until(&mut self, t: f64, inclusive: bool) {
        while let Some(&tick) = self.ticks.get(self.next_tick) {
            if tick > t || (!inclusive && tick == t) {
                break;
            }
            if self.warmup.is_none() && tick >= self.warmup_end {
                self.warmup = Some(self.checkpoint(tick));
            }
            self.rows.push(LedgerRow {
                time: tick,
                event_kind: self.last_kind,
                server: self.last_server,
                total_workload: self.work_at(tick),
                queue_lengths: self.lengths.clone(),
                counters: self.counters,
                arrivals: self.arrivals,
                departures: self.departures,
            });
            self.next_tick += 1;
        }
    }

    fn accumulate(&mut self, server: usize, t: f64) {
        let from = self.area_since[server].max(self.warmup_end);
        let to = t.min(self.horizon);
        if to > from {
            self.area[server] += self.lengths[server] as f64 * (to - from);
        }
        self.area_since[server] = t.max(self.warmup_end);
    }

    fn set_length(&mut self, server: usize, len: usize, t: f64) {
        self.accumulate(server, t);
        let was_busy = self.lengths[server] > 0;
        self.lengths[server] = len;
        match (was_busy, len > 0) {
            (false, true) => self.busy_rate += self.rates[server],
            (true, false) => self.busy_rate -= self.rates[server],
            _ => {}
        }
    }

    pub fn finish(mut self) -> RunLedger {
        let horizon = self.horizon;
        self.emit_until(horizon, true);
        for i in 0..self.lengths.len() {
            self.accumulate(i, horizon);
        }
        let span = horizon - self.warmup_end;
        let mean_queue_lengths = self
            .area
            .iter()
            .map(|a| if span > 0.0 { a / span } else { 0.0 })
            .collect();
        let totals = self.checkpoint(horizon);
        RunLedger {
            name: self.name,
            policy: self.policy,
            seed: self.seed,
            n: self.lengths.len(),
            rates: self.rates,
            horizon,
            warmup_end: self.warmup_end,
            sample_period: self.period,
            rows: self.rows,
            warmup: self.warmup.unwrap_or_else(|| totals.clone()),
            totals,
            departed: self.departed,
            mean_queue_lengths,
            final_state: self.final_state.expect("on_finish called before finish"),
        }
    }
}

impl Observer for LedgerRecorder {
    fn on_event(&mut self, event: &EventRecord, sim: &Simulator<'_>) {
        let t = event.time;
        self.emit_until(t, false);
        self.work = self.work_at(t);
        self.last_time = t;
        match &event.detail {
            EventDetail::Arrival {
                job_size, destination, ..
            } => {
                self.work += job_size;
                self.jobs += 1;
                let d = *destination;
                self.set_length(d, self.lengths[d] + 1, t);
                self.arrivals += 1;
                self.dispatched[d] += 1;
            }
            EventDetail::Spontaneous { sender, .. } => {
                self.spontaneous_events += 1;
                if sender.is_some() {
                    self.spontaneous_fired += 1;
                }
            }
            EventDetail::Departure { server, .. } => {
                let s = *server;
                self.jobs -= 1;
                self.set_length(s, self.lengths[s] - 1, t);
                self.departures += 1;
                self.departed[s] += 1;
            }
        }
        self.counters = *sim.counters();
        if self.jobs == 0 {
            self.work = 0.0;
            self.busy_rate = 0.0;
        }
        self.last_kind = Some(event.kind);
        self.last_server = event.server;
    }

    fn on_finish(&mut self, sim: &Simulator<'_>) {
        self.final_state = Some(sim.snapshot());
    }
}

/// Observer keeping every event record, for re-deriving counters.
#[derive(Debug, Default)]
pub struct EventLog {
    pub events: Vec<EventRecord>,
}

impl Observer for EventLog {
    fn on_event(&mut self, event: &EventRecord, _sim: &Simulator<'_>) {
        self.events.push(event.clone());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instants_include_warmup_end_and_horizon() {
        let t = sample_instants(10.0, 3.0, 2.5);
        assert_eq!(t, vec![0.0, 2.5, 3.0, 6.0, 9.0, 10.0]);
        let t = sample_instants(1.0, 0.5, 0.5);
        assert_eq!(t, vec![0.0, 0.5, 1.0]);
    }
}
