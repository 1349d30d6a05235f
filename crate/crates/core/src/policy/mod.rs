//! The decision-function contract every dispatching policy implements.
//!
//! A policy is a bundle of eight pure functions plus a spontaneous message
//! rate and a declared memory budget. Each function sees exactly the
//! information the model allows at that decision point and nothing else:
//! arrival-time sampling gets the memory, the job size and a uniform draw,
//! and cannot read any queue. All persistent state lives in the memory
//! value, which keeps the bit budget auditable.
//!
//! Server indices are zero-based. Memory values are one-based, in
//! `1..=2^bits`.

mod zoo;

use std::fmt;

use crate::rng::Draw;
use crate::types::{MemoryState, QueueState, RateVector};

pub use zoo::{
    build_policy, ceil_log2, jiq_policy, jsq_policy, persistent_idle_policy, sq_d_policy,
    sq_d_with_memory_policy, stored_id_policy, uniform_random_policy, weighted_random_policy,
    Jiq, PersistentIdle, PolicyKind, PolicySpec, SqD, SqDWithMemory, StoredId, UniformRandom,
    WeightedRandom, POLICY_IDS,
};

/// A set of distinct servers in canonical (ascending) order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ServerSet(Vec<usize>);

impl ServerSet {
    pub fn empty() -> Self {
        ServerSet(Vec::new())
    }

    pub fn singleton(server: usize) -> Self {
        ServerSet(vec![server])
    }

    /// Canonicalizes the order; returns the first repeated index on failure.
    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Result<Self, usize> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        if let Some(w) = v.windows(2).find(|w| w[0] == w[1]) {
            return Err(w[0]);
        }
        Ok(ServerSet(v))
    }

    pub fn all(n: usize) -> Self {
        ServerSet((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, server: usize) -> bool {
        self.0.binary_search(&server).is_ok()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.0.last().copied()
    }
}

impl fmt::Display for ServerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, s) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", s + 1)?;
        }
        write!(f, "}}")
    }
}

/// What a server reports when queried: its queue, its rate and its index.
#[derive(Debug, Clone, Copy)]
pub struct ServerView<'a> {
    pub index: usize,
    pub queue: &'a QueueState,
    pub rate: f64,
}

/// The eight decision functions of a dispatching policy.
///
/// Memory-update functions return the new raw memory value; the simulator
/// rejects values outside `1..=2^memory_bits()`.
pub trait DispatchPolicy: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    /// Number of servers the bundle was built for.
    fn servers(&self) -> usize;

    /// Declared memory budget `c_n` in bits.
    fn memory_bits(&self) -> u32;

    /// Rate of the spontaneous message process.
    fn spontaneous_rate(&self) -> f64 {
        0.0
    }

    /// Memory value used when the initial condition is drawn at random.
    fn random_initial_memory(&self, u: Draw) -> u128 {
        let states = 1u128 << self.memory_bits();
        1 + ((u.unit() * states as f64) as u128).min(states - 1)
    }

    /// Servers queried when a job of size `job_size` arrives.
    fn sample_on_arrival(&self, memory: MemoryState, job_size: f64, u: Draw) -> ServerSet;

    /// Destination of the arriving job. May lie outside the sampled set.
    fn dispatch(
        &self,
        memory: MemoryState,
        job_size: f64,
        sampled: &[ServerView<'_>],
        u: Draw,
    ) -> usize;

    fn update_on_arrival(
        &self,
        memory: MemoryState,
        _job_size: f64,
        _sampled: &[ServerView<'_>],
        _destination: usize,
        _u: Draw,
    ) -> u128 {
        memory.value()
    }

    /// Which server (if any) sends a spontaneous message.
    fn select_sender(&self, _queues: &[QueueState], _rates: &RateVector, _u: Draw) -> Option<usize> {
        None
    }

    /// Servers queried after a spontaneous message from `sender`.
    fn sample_on_message(&self, _memory: MemoryState, _sender: &ServerView<'_>, _u: Draw) -> ServerSet {
        ServerSet::empty()
    }

    fn update_on_message(
        &self,
        memory: MemoryState,
        _sender: &ServerView<'_>,
        _sampled: &[ServerView<'_>],
        _u: Draw,
    ) -> u128 {
        memory.value()
    }

    /// Whether a departing server notifies the dispatcher. `queue` is the
    /// queue after the departure.
    fn notify_on_departure(&self, _queue: &QueueState, _rate: f64, _u: Draw) -> bool {
        false
    }

    fn update_on_departure(&self, memory: MemoryState, _server: &ServerView<'_>, _u: Draw) -> u128 {
        memory.value()
    }
}

/// Messages exchanged when the dispatcher queries `sampled` at an arrival.
pub fn messages_for_arrival(sampled: &ServerSet) -> u64 {
    2 * sampled.len() as u64
}

/// Messages for a spontaneous-process event: the message itself plus a
/// query/response pair per sampled server, nothing if no server fired.
pub fn messages_for_spontaneous(fired: bool, sampled: &ServerSet) -> u64 {
    if fired {
        1 + 2 * sampled.len() as u64
    } else {
        0
    }
}

pub fn messages_for_departure(notified: bool) -> u64 {
    u64::from(notified)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arrival_message_counts() {
        assert_eq!(messages_for_arrival(&ServerSet::empty()), 0);
        let s = ServerSet::from_indices([2, 6]).unwrap();
        assert_eq!(messages_for_arrival(&s), 4);
        assert_eq!(messages_for_arrival(&ServerSet::all(5)), 10);
    }

    #[test]
    fn spontaneous_message_counts() {
        assert_eq!(messages_for_spontaneous(false, &ServerSet::empty()), 0);
        assert_eq!(messages_for_spontaneous(true, &ServerSet::empty()), 1);
        assert_eq!(messages_for_spontaneous(true, &ServerSet::singleton(1)), 3);
    }

    #[test]
    fn departure_message_counts() {
        assert_eq!(messages_for_departure(false), 0);
        assert_eq!(messages_for_departure(true), 1);
        let total: u64 = (0..17).map(|_| messages_for_departure(true)).sum();
        assert_eq!(total, 17);
    }

    #[test]
    fn server_set_is_canonical() {
        let a = ServerSet::from_indices([3, 1, 2]).unwrap();
        let b = ServerSet::from_indices([2, 3, 1]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.as_slice(), &[1, 2, 3]);
        assert_eq!(ServerSet::from_indices([1, 4, 1]), Err(1));
        assert_eq!(a.to_string(), "{2,3,4}");
    }
}
