//! Discrete-event simulation of the queues, the dispatcher memory and the
//! elapsed time since the last arrival.
//!
//! Three event types drive the state: arrivals (sample, dispatch, update
//! memory), spontaneous-process events (pick a sender, sample, update
//! memory) and departures (optionally notify, update memory). Between
//! events the head job of each nonempty queue `i` is served at rate
//! `mu_i`. Departure times are fixed when a job enters service, so the
//! head's remaining work is read off as `(due - now) * mu_i` instead of
//! being integrated step by step.
//!
//! Simultaneous events are resolved as arrival, then spontaneous, then
//! departures in server order.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{InitialMemory, ScenarioConfig};
use crate::error::{PolicyViolation, SimError};
use crate::ledger::{LedgerRecorder, RunLedger};
use crate::policy::{
    build_policy, messages_for_arrival, messages_for_departure, messages_for_spontaneous,
    DispatchPolicy, ServerSet, ServerView,
};
use crate::rng::{Draw, FundamentalStreams};
use crate::types::{MemoryState, QueueState, RateVector, SystemState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrival,
    Spontaneous,
    Departure,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Arrival => "arrival",
            EventKind::Spontaneous => "spontaneous",
            EventKind::Departure => "departure",
        }
    }
}

/// Raw decisions taken at an event, enough to recount its messages.
#[derive(Debug, Clone, PartialEq)]
pub enum EventDetail {
    Arrival {
        job_size: f64,
        sampled: ServerSet,
        destination: usize,
    },
    Spontaneous {
        sender: Option<usize>,
        sampled: ServerSet,
    },
    Departure {
        server: usize,
        notified: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    /// Position in the run, starting at zero.
    pub seq: u64,
    pub time: f64,
    pub kind: EventKind,
    /// Destination for arrivals, sender for fired spontaneous events,
    /// departing server for departures.
    pub server: Option<usize>,
    pub messages_exchanged: u64,
    /// Memory before the event.
    pub memory_before: MemoryState,
    pub detail: EventDetail,
}

/// Cumulative message counts, split by where they come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageCounters {
    /// Query/response pairs at arrivals: sum of `2|S_k|`.
    pub arrival_query: u64,
    /// Spontaneous messages that were actually sent.
    pub spontaneous: u64,
    /// Query/response pairs triggered by spontaneous messages.
    pub spontaneous_query: u64,
    /// Departure notifications.
    pub departure: u64,
}

impl MessageCounters {
    pub fn total(&self) -> u64 {
        self.arrival_query + self.spontaneous + self.spontaneous_query + self.departure
    }

    /// Arrival, spontaneous (message plus its queries) and departure terms.
    pub fn three_terms(&self) -> [u64; 3] {
        [
            self.arrival_query,
            self.spontaneous + self.spontaneous_query,
            self.departure,
        ]
    }

    pub fn saturating_sub(&self, earlier: &MessageCounters) -> MessageCounters {
        MessageCounters {
            arrival_query: self.arrival_query.saturating_sub(earlier.arrival_query),
            spontaneous: self.spontaneous.saturating_sub(earlier.spontaneous),
            spontaneous_query: self.spontaneous_query.saturating_sub(earlier.spontaneous_query),
            departure: self.departure.saturating_sub(earlier.departure),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub arrivals: u64,
    pub spontaneous_events: u64,
    pub spontaneous_fired: u64,
    pub departures: u64,
    /// Jobs dispatched to each server.
    pub dispatched: Vec<u64>,
    /// Jobs completed at each server.
    pub departed: Vec<u64>,
}

impl EventCounts {
    fn new(n: usize) -> Self {
        EventCounts {
            dispatched: vec![0; n],
            departed: vec![0; n],
            ..Default::default()
        }
    }

    pub fn events(&self) -> u64 {
        self.arrivals + self.spontaneous_events + self.departures
    }
}

/// Callback invoked after every event with the post-event state.
pub trait Observer {
    fn on_event(&mut self, event: &EventRecord, sim: &Simulator<'_>);

    /// Called once when the run reaches its horizon.
    fn on_finish(&mut self, _sim: &Simulator<'_>) {}
}

/// Next event according to the fixed precedence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NextEvent {
    pub time: f64,
    pub kind: EventKind,
    pub server: Option<usize>,
}

fn earliest(next_arrival: f64, next_spontaneous: f64, due: &[f64]) -> Option<NextEvent> {
    let mut departure: Option<(f64, usize)> = None;
    for (i, &t) in due.iter().enumerate() {
        if t.is_finite() && departure.is_none_or(|(best, _)| t < best) {
            departure = Some((t, i));
        }
    }
    let mut best = NextEvent {
        time: f64::INFINITY,
        kind: EventKind::Arrival,
        server: None,
    };
    if next_arrival.is_finite() {
        best.time = next_arrival;
    }
    if next_spontaneous < best.time {
        best = NextEvent {
            time: next_spontaneous,
            kind: EventKind::Spontaneous,
            server: None,
        };
    }
    if let Some((t, i)) = departure {
        if t < best.time {
            best = NextEvent {
                time: t,
                kind: EventKind::Departure,
                server: Some(i),
            };
        }
    }
    best.time.is_finite().then_some(best)
}

/// Earliest pending event given the current queues. Departure of queue `i`
/// is due at `now + head_i / mu_i`. Returns `None` only when nothing is
/// pending at all.
pub fn next_event_time(
    now: f64,
    queues: &[QueueState],
    rates: &RateVector,
    next_arrival: f64,
    next_spontaneous: f64,
) -> Option<NextEvent> {
    let due: Vec<f64> = queues
        .iter()
        .enumerate()
        .map(|(i, q)| q.head().map_or(f64::INFINITY, |w| now + w / rates.get(i)))
        .collect();
    earliest(next_arrival, next_spontaneous, &due)
}

/// A single simulation run in progress.
pub struct Simulator<'p> {
    policy: &'p dyn DispatchPolicy,
    rates: RateVector,
    n: usize,
    now: f64,
    queues: Vec<QueueState>,
    due: Vec<f64>,
    memory: MemoryState,
    last_arrival: f64,
    streams: FundamentalStreams,
    script: Option<VecDeque<(f64, f64)>>,
    counters: MessageCounters,
    counts: EventCounts,
    seq: u64,
}

impl<'p> Simulator<'p> {
    /// Simulator driven by the fundamental streams of `config`.
    pub fn new(config: &ScenarioConfig, policy: &'p dyn DispatchPolicy) -> Result<Self, SimError> {
        config.validate().map_err(|e| match e {
            crate::error::ConfigError::Model(m) => SimError::Model(m),
            other => SimError::Model(crate::error::ModelError::InvalidParameter(other.to_string())),
        })?;
        if policy.servers() != config.n {
            return Err(SimError::Model(crate::error::ModelError::InvalidParameter(format!(
                "policy built for {} servers, scenario has {}",
                policy.servers(),
                config.n
            ))));
        }
        let mut streams = FundamentalStreams::new(
            &config.source_seeds(),
            config.interarrival,
            config.arrival_rate(),
            policy.spontaneous_rate(),
            config.job_size,
        );
        let bits = policy.memory_bits();
        let initial = match config.initial_memory {
            InitialMemory::Value(v) => v,
            InitialMemory::Random => policy.random_initial_memory(streams.initial.next_draw()),
        };
        let memory = MemoryState::new(initial, bits)?;
        Ok(Simulator {
            policy,
            rates: config.rates.clone(),
            n: config.n,
            now: 0.0,
            queues: vec![QueueState::new(); config.n],
            due: vec![f64::INFINITY; config.n],
            memory,
            last_arrival: 0.0,
            streams,
            script: None,
            counters: MessageCounters::default(),
            counts: EventCounts::new(config.n),
            seq: 0,
        })
    }

    /// Replaces the renewal arrival stream by an explicit list of
    /// `(time, job size)` pairs, in nondecreasing time order.
    pub fn with_scripted_arrivals(mut self, arrivals: Vec<(f64, f64)>) -> Self {
        self.script = Some(arrivals.into());
        self
    }

    /// Places jobs in the queues at time zero, heads entering service.
    pub fn with_initial_queues(mut self, queues: Vec<QueueState>) -> Result<Self, SimError> {
        let state = SystemState::new(queues, self.memory, 0.0, self.n)?;
        for (i, q) in state.queues.into_iter().enumerate() {
            self.due[i] = q.head().map_or(f64::INFINITY, |w| self.now + w / self.rates.get(i));
            self.queues[i] = q;
        }
        Ok(self)
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn servers(&self) -> usize {
        self.n
    }

    pub fn rates(&self) -> &RateVector {
        &self.rates
    }

    pub fn memory(&self) -> MemoryState {
        self.memory
    }

    pub fn policy(&self) -> &dyn DispatchPolicy {
        self.policy
    }

    pub fn counters(&self) -> &MessageCounters {
        &self.counters
    }

    pub fn counts(&self) -> &EventCounts {
        &self.counts
    }

    pub fn queue_len(&self, server: usize) -> usize {
        self.queues[server].len()
    }

    pub fn queue_lengths(&self) -> Vec<usize> {
        self.queues.iter().map(QueueState::len).collect()
    }

    pub fn jobs_in_system(&self) -> u64 {
        self.queues.iter().map(|q| q.len() as u64).sum()
    }

    /// Remaining work of the job in service at `server`, at the current time.
    pub fn head_remaining(&self, server: usize) -> Option<f64> {
        self.queues[server]
            .head()
            .map(|_| ((self.due[server] - self.now) * self.rates.get(server)).max(0.0))
    }

    pub fn workload(&self, server: usize) -> f64 {
        self.head_remaining(server)
            .map_or(0.0, |h| h + self.queues[server].tail_workload())
    }

    pub fn total_workload(&self) -> f64 {
        (0..self.n).map(|i| self.workload(i)).sum()
    }

    /// Sum of the rates of the servers that are currently busy.
    pub fn busy_capacity(&self) -> f64 {
        (0..self.n)
            .filter(|&i| !self.queues[i].is_empty())
            .map(|i| self.rates.get(i))
            .sum()
    }

    pub fn snapshot(&self) -> SystemState {
        let queues = (0..self.n)
            .map(|i| {
                let mut q = self.queues[i].clone();
                if let Some(h) = self.head_remaining(i) {
                    q.set_head(h);
                }
                q
            })
            .collect();
        SystemState {
            queues,
            memory: self.memory,
            elapsed_since_arrival: self.now - self.last_arrival,
        }
    }

    fn sync_head(&mut self, server: usize) {
        if let Some(h) = self.head_remaining(server) {
            self.queues[server].set_head(h);
        }
    }

    fn next_arrival(&self) -> f64 {
        match &self.script {
            Some(s) => s.front().map_or(f64::INFINITY, |&(t, _)| t),
            None => self.streams.arrivals.peek(),
        }
    }

    /// Time of the next pending event, if any.
    pub fn peek_next(&self) -> Option<NextEvent> {
        earliest(self.next_arrival(), self.streams.spontaneous.peek(), &self.due)
    }

    fn check_set(&self, function: &'static str, set: &ServerSet) -> Result<(), PolicyViolation> {
        match set.max_index() {
            Some(i) if i >= self.n => Err(PolicyViolation::ServerOutOfRange {
                function,
                index: i + 1,
                n: self.n,
            }),
            _ => Ok(()),
        }
    }

    fn check_server(&self, function: &'static str, server: usize) -> Result<(), PolicyViolation> {
        if server >= self.n {
            return Err(PolicyViolation::ServerOutOfRange {
                function,
                index: server + 1,
                n: self.n,
            });
        }
        Ok(())
    }

    fn check_memory(&self, function: &'static str, value: u128) -> Result<MemoryState, PolicyViolation> {
        self.memory
            .with_value(value)
            .map_err(|_| PolicyViolation::MemoryOutOfRange {
                function,
                value,
                max: 1u128 << self.memory.bits(),
            })
    }

    fn views<'a>(&'a self, set: &ServerSet) -> Vec<ServerView<'a>> {
        set.iter()
            .map(|i| ServerView {
                index: i,
                queue: &self.queues[i],
                rate: self.rates.get(i),
            })
            .collect()
    }

    /// Processes the next event if it occurs no later than `horizon`.
    pub fn step(&mut self, horizon: f64) -> Result<Option<EventRecord>, SimError> {
        let Some(next) = self.peek_next() else {
            return Ok(None);
        };
        if next.time > horizon {
            return Ok(None);
        }
        self.now = next.time;
        let time = self.now;
        let record = match next.kind {
            EventKind::Arrival => self.arrival(),
            EventKind::Spontaneous => self.spontaneous(),
            EventKind::Departure => self.departure(next.server.expect("departure has a server")),
        }
        .map_err(|violation| SimError::Policy { time, violation })?;
        self.seq += 1;
        Ok(Some(record))
    }

    fn arrival(&mut self) -> Result<EventRecord, PolicyViolation> {
        let job_size = match &mut self.script {
            Some(s) => s.pop_front().expect("pending scripted arrival").1,
            None => {
                self.streams.arrivals.advance();
                self.streams.next_size()
            }
        };
        let (u1, u2, u3) = (self.streams.u(1), self.streams.u(2), self.streams.u(3));
        let before = self.memory;
        let sampled = self.policy.sample_on_arrival(before, job_size, u1);
        self.check_set("f1", &sampled)?;
        for i in sampled.iter() {
            self.sync_head(i);
        }
        let (destination, new_memory) = {
            let views = self.views(&sampled);
            let destination = self.policy.dispatch(before, job_size, &views, u2);
            self.check_server("f2", destination)?;
            let m = self
                .policy
                .update_on_arrival(before, job_size, &views, destination, u3);
            (destination, m)
        };
        let new_memory = self.check_memory("f3", new_memory)?;

        if self.queues[destination].is_empty() {
            self.due[destination] = self.now + job_size / self.rates.get(destination);
        }
        self.queues[destination].push_unchecked(job_size);
        self.memory = new_memory;
        self.last_arrival = self.now;

        let messages = messages_for_arrival(&sampled);
        self.counters.arrival_query += messages;
        self.counts.arrivals += 1;
        self.counts.dispatched[destination] += 1;
        Ok(EventRecord {
            seq: self.seq,
            time: self.now,
            kind: EventKind::Arrival,
            server: Some(destination),
            messages_exchanged: messages,
            memory_before: before,
            detail: EventDetail::Arrival {
                job_size,
                sampled,
                destination,
            },
        })
    }

    fn spontaneous(&mut self) -> Result<EventRecord, PolicyViolation> {
        self.streams.spontaneous.advance();
        let (u4, u5, u6) = (self.streams.u(4), self.streams.u(5), self.streams.u(6));
        let before = self.memory;
        for i in 0..self.n {
            self.sync_head(i);
        }
        let sender = self.policy.select_sender(&self.queues, &self.rates, u4);
        let mut sampled = ServerSet::empty();
        if let Some(s) = sender {
            self.check_server("g1", s)?;
            let sender_queue = &self.queues[s];
            let sender_view = ServerView {
                index: s,
                queue: sender_queue,
                rate: self.rates.get(s),
            };
            sampled = self.policy.sample_on_message(before, &sender_view, u5);
            self.check_set("g2", &sampled)?;
            let views = self.views(&sampled);
            let m = self.policy.update_on_message(before, &sender_view, &views, u6);
            self.memory = self.check_memory("g3", m)?;
        }
        let messages = messages_for_spontaneous(sender.is_some(), &sampled);
        self.counts.spontaneous_events += 1;
        if sender.is_some() {
            self.counts.spontaneous_fired += 1;
            self.counters.spontaneous += 1;
            self.counters.spontaneous_query += 2 * sampled.len() as u64;
        }
        Ok(EventRecord {
            seq: self.seq,
            time: self.now,
            kind: EventKind::Spontaneous,
            server: sender,
            messages_exchanged: messages,
            memory_before: before,
            detail: EventDetail::Spontaneous { sender, sampled },
        })
    }

    fn departure(&mut self, server: usize) -> Result<EventRecord, PolicyViolation> {
        self.queues[server].pop_head();
        self.due[server] = match self.queues[server].head() {
            Some(w) => self.now + w / self.rates.get(server),
            None => f64::INFINITY,
        };
        let (u7, u8) = (self.streams.u(7), self.streams.u(8));
        let before = self.memory;
        let rate = self.rates.get(server);
        let notified = self.policy.notify_on_departure(&self.queues[server], rate, u7);
        if notified {
            let view = ServerView {
                index: server,
                queue: &self.queues[server],
                rate,
            };
            let m = self.policy.update_on_departure(before, &view, u8);
            self.memory = self.check_memory("h2", m)?;
        }
        let messages = messages_for_departure(notified);
        self.counters.departure += messages;
        self.counts.departures += 1;
        self.counts.departed[server] += 1;
        Ok(EventRecord {
            seq: self.seq,
            time: self.now,
            kind: EventKind::Departure,
            server: Some(server),
            messages_exchanged: messages,
            memory_before: before,
            detail: EventDetail::Departure { server, notified },
        })
    }

    /// Runs to `horizon`, feeding every event to `observers`, and leaves
    /// the clock at `horizon`.
    pub fn run_until(&mut self, horizon: f64, observers: &mut [&mut dyn Observer]) -> Result<(), SimError> {
        while let Some(record) = self.step(horizon)? {
            for o in observers.iter_mut() {
                o.on_event(&record, self);
            }
        }
        if horizon.is_finite() && horizon > self.now {
            self.now = horizon;
        }
        for o in observers.iter_mut() {
            o.on_finish(self);
        }
        Ok(())
    }
}

/// Simulates one scenario from time zero to `horizon` and returns its
/// ledger. Extra observers see every event after the ledger does.
pub fn run(
    config: &ScenarioConfig,
    policy: &dyn DispatchPolicy,
    horizon: f64,
    observers: &mut [&mut dyn Observer],
) -> Result<RunLedger, SimError> {
    let mut sim = Simulator::new(config, policy)?;
    let mut recorder = LedgerRecorder::new(config, policy, horizon);
    {
        let mut all: Vec<&mut dyn Observer> = Vec::with_capacity(observers.len() + 1);
        all.push(&mut recorder);
        for o in observers.iter_mut() {
            all.push(&mut **o);
        }
        sim.run_until(horizon, &mut all)?;
    }
    Ok(recorder.finish())
}

/// Runs the scenario's own policy.
pub fn run_config(config: &ScenarioConfig) -> Result<RunLedger, SimError> {
    let policy = build_policy(&config.policy, config.n)?;
    run(config, policy.as_ref(), config.horizon, &mut [])
}

/// Independent runs, one per master seed, in seed order. Runs execute in
/// parallel and share nothing.
pub fn replications(
    config: &ScenarioConfig,
    policy: &dyn DispatchPolicy,
    horizon: f64,
    seeds: &[u64],
) -> Result<Vec<RunLedger>, SimError> {
    seeds
        .par_iter()
        .map(|&seed| run(&config.with_seed(seed), policy, horizon, &mut []))
        .collect()
}

/// Uniform draw for tests that call decision functions directly.
pub fn draw_from(seed: u64) -> Draw {
    Draw(crate::rng::splitmix64(seed))
}
