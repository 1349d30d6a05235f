//! Concrete policies.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{DispatchPolicy, ServerSet, ServerView};
use crate::error::ModelError;
use crate::rng::Draw;
use crate::types::{MemoryState, QueueState, RateVector};

pub const POLICY_IDS: [&str; 8] = [
    "stored_id",
    "uniform",
    "weighted_random",
    "sq_d",
    "jsq",
    "jiq",
    "persistent_idle",
    "sq_d_mem",
];

/// `ceil(log2(n))`, zero for `n <= 1`.
pub fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// Shortest queue among `views`, ties to the lowest index.
fn shortest(views: &[ServerView<'_>]) -> Option<usize> {
    views
        .iter()
        .min_by_key(|v| (v.queue.len(), v.index))
        .map(|v| v.index)
}

fn check_servers(n: usize) -> Result<(), ModelError> {
    if n == 0 {
        return Err(ModelError::InvalidParameter("policy needs at least one server".into()));
    }
    Ok(())
}

/// Keeps one server ID in memory. Every job goes to that server; the ID is
/// replaced when a spontaneous message comes from a server with a strictly
/// shorter queue than the stored one (queried at that moment).
#[derive(Debug, Clone)]
pub struct StoredId {
    n: usize,
    alpha: f64,
}

impl StoredId {
    /// Server currently stored in `memory`.
    pub fn stored(&self, memory: MemoryState) -> usize {
        ((memory.value() - 1) % self.n as u128) as usize
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

pub fn stored_id_policy(n: usize, alpha: f64) -> Result<StoredId, ModelError> {
    check_servers(n)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(ModelError::InvalidParameter(format!(
            "spontaneous message rate must be positive, got {alpha}"
        )));
    }
    Ok(StoredId { n, alpha })
}

impl DispatchPolicy for StoredId {
    fn name(&self) -> String {
        format!("stored_id(alpha={})", self.alpha)
    }

    fn servers(&self) -> usize {
        self.n
    }

    fn memory_bits(&self) -> u32 {
        ceil_log2(self.n)
    }

    // n independent Poisson(alpha) senders, superposed
    fn spontaneous_rate(&self) -> f64 {
        self.n as f64 * self.alpha
    }

    fn random_initial_memory(&self, u: Draw) -> u128 {
        u.index(self.n) as u128 + 1
    }

    fn sample_on_arrival(&self, _memory: MemoryState, _job_size: f64, _u: Draw) -> ServerSet {
        ServerSet::empty()
    }

    fn dispatch(&self, memory: MemoryState, _: f64, _: &[ServerView<'_>], _: Draw) -> usize {
        self.stored(memory)
    }

    fn select_sender(&self, _queues: &[QueueState], _rates: &RateVector, u: Draw) -> Option<usize> {
        Some(u.index(self.n))
    }

    fn sample_on_message(&self, memory: MemoryState, _sender: &ServerView<'_>, _u: Draw) -> ServerSet {
        ServerSet::singleton(self.stored(memory))
    }

    fn update_on_message(
        &self,
        memory: MemoryState,
        sender: &ServerView<'_>,
        sampled: &[ServerView<'_>],
        _u: Draw,
    ) -> u128 {
        let stored = self.stored(memory);
        let stored_len = sampled
            .iter()
            .find(|v| v.index == stored)
            .map(|v| v.queue.len());
        match stored_len {
            // strictly shorter: ties keep the incumbent
            Some(len) if sender.queue.len() < len => sender.index as u128 + 1,
            _ => memory.value(),
        }
    }
}

/// Blind uniform dispatching; no memory, no messages.
#[derive(Debug, Clone)]
pub struct UniformRandom {
    n: usize,
}

pub fn uniform_random_policy(n: usize) -> Result<UniformRandom, ModelError> {
    check_servers(n)?;
    Ok(UniformRandom { n })
}

impl DispatchPolicy for UniformRandom {
    fn name(&self) -> String {
        "uniform".into()
    }

    fn servers(&self) -> usize {
        self.n
    }

    fn memory_bits(&self) -> u32 {
        0
    }

    fn sample_on_arrival(&self, _: MemoryState, _: f64, _: Draw) -> ServerSet {
        ServerSet::empty()
    }

    fn dispatch(&self, _: MemoryState, _: f64, _: &[ServerView<'_>], u: Draw) -> usize {
        u.index(self.n)
    }
}

/// Queries every server for its rate and dispatches proportionally to it.
#[derive(Debug, Clone)]
pub struct WeightedRandom {
    n: usize,
}

pub fn weighted_random_policy(n: usize) -> Result<WeightedRandom, ModelError> {
    check_servers(n)?;
    Ok(WeightedRandom { n })
}

impl DispatchPolicy for WeightedRandom {
    fn name(&self) -> String {
        "weighted_random".into()
    }

    fn servers(&self) -> usize {
        self.n
    }

    fn memory_bits(&self) -> u32 {
        0
    }

    fn sample_on_arrival(&self, _: MemoryState, _: f64, _: Draw) -> ServerSet {
        ServerSet::all(self.n)
    }

    fn dispatch(&self, _: MemoryState, _: f64, sampled: &[ServerView<'_>], u: Draw) -> usize {
        let total: f64 = sampled.iter().map(|v| v.rate).sum();
        let target = u.unit() * total;
        let mut acc = 0.0;
        for v in sampled {
            acc += v.rate;
            if target < acc {
                return v.index;
            }
        }
        sampled.last().map_or(0, |v| v.index)
    }
}

/// Power-of-d-choices: sample `d` servers uniformly, join the shortest.
#[derive(Debug, Clone)]
pub struct SqD {
    n: usize,
    d: usize,
    label: &'static str,
}

impl SqD {
    pub fn d(&self) -> usize {
        self.d
    }
}

pub fn sq_d_policy(n: usize, d: usize) -> Result<SqD, ModelError> {
    check_servers(n)?;
    if d == 0 || d > n {
        return Err(ModelError::InvalidParameter(format!(
            "sq_d needs 1 <= d <= n, got d={d}, n={n}"
        )));
    }
    Ok(SqD { n, d, label: "sq_d" })
}

/// Join-the-shortest-queue over all servers.
pub fn jsq_policy(n: usize) -> Result<SqD, ModelError> {
    let mut p = sq_d_policy(n, n)?;
    p.label = "jsq";
    Ok(p)
}

impl DispatchPolicy for SqD {
    fn name(&self) -> String {
        if self.label == "jsq" {
            "jsq".into()
        } else {
            format!("sq_d(d={})", self.d)
        }
    }

    fn servers(&self) -> usize {
        self.n
    }

    fn memory_bits(&self) -> u32 {
        0
    }

    fn sample_on_arrival(&self, _: MemoryState, _: f64, u: Draw) -> ServerSet {
        if self.d == self.n {
            return ServerSet::all(self.n);
        }
        ServerSet::from_indices(u.expand().subset(self.n, self.d))
            .expect("partial shuffle yields distinct indices")
    }

    fn dispatch(&self, _: MemoryState, _: f64, sampled: &[ServerView<'_>], _: Draw) -> usize {
        shortest(sampled).unwrap_or(0)
    }
}

/// Join-idle-queue with a randomized fallback. Memory holds one bit per
/// server (raw value = memory - 1), set while the server may be busy, so
/// the default memory value 1 describes an empty system. Servers report
/// when they empty; a job goes to a uniformly chosen idle server, or to a
/// uniformly random server if none is known to be idle.
#[derive(Debug, Clone)]
pub struct Jiq {
    n: usize,
}

pub fn jiq_policy(n: usize) -> Result<Jiq, ModelError> {
    check_servers(n)?;
    MemoryState::capacity(n as u32)?;
    Ok(Jiq { n })
}

fn idle_members(busy: u128, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| busy >> i & 1 == 0).collect()
}

impl DispatchPolicy for Jiq {
    fn name(&self) -> String {
        "jiq".into()
    }

    fn servers(&self) -> usize {
        self.n
    }

    fn memory_bits(&self) -> u32 {
        self.n as u32
    }

    fn sample_on_arrival(&self, _: MemoryState, _: f64, _: Draw) -> ServerSet {
        ServerSet::empty()
    }

    fn dispatch(&self, memory: MemoryState, _: f64, _: &[ServerView<'_>], u: Draw) -> usize {
        let idle = idle_members(memory.value() - 1, self.n);
        if idle.is_empty() {
            u.index(self.n)
        } else {
            idle[u.index(idle.len())]
        }
    }

    fn update_on_arrival(
        &self,
        memory: MemoryState,
        _: f64,
        _: &[ServerView<'_>],
        destination: usize,
        _: Draw,
    ) -> u128 {
        ((memory.value() - 1) | (1u128 << destination)) + 1
    }

    fn notify_on_departure(&self, queue: &QueueState, _rate: f64, _u: Draw) -> bool {
        queue.is_empty()
    }

    fn update_on_departure(&self, memory: MemoryState, server: &ServerView<'_>, _: Draw) -> u128 {
        ((memory.value() - 1) & !(1u128 << server.index)) + 1
    }
}

/// Persistent-idle: like join-idle-queue, but with no idle server known
/// the job goes to the most recent destination instead of a random one.
/// Raw memory = busy mask in the low `n` bits, last destination above.
#[derive(Debug, Clone)]
pub struct PersistentIdle {
    n: usize,
}

pub fn persistent_idle_policy(n: usize) -> Result<PersistentIdle, ModelError> {
    check_servers(n)?;
    MemoryState::capacity(n as u32 + ceil_log2(n))?;
    Ok(PersistentIdle { n })
}

impl PersistentIdle {
    fn split(&self, memory: MemoryState) -> (u128, usize) {
        let raw = memory.value() - 1;
        let mask = raw & ((1u128 << self.n) - 1);
        let last = ((raw >> self.n) as usize) % self.n;
        (mask, last)
    }

    fn join(&self, mask: u128, last: usize) -> u128 {
        (mask | ((last as u128) << self.n)) + 1
    }
}

impl DispatchPolicy for PersistentIdle {
    fn name(&self) -> String {
        "persistent_idle".into()
    }

    fn servers(&self) -> usize {
        self.n
    }

    fn memory_bits(&self) -> u32 {
        self.n as u32 + ceil_log2(self.n)
    }

    fn sample_on_arrival(&self, _: MemoryState, _: f64, _: Draw) -> ServerSet {
        ServerSet::empty()
    }

    fn dispatch(&self, memory: MemoryState, _: f64, _: &[ServerView<'_>], u: Draw) -> usize {
        let (mask, last) = self.split(memory);
        let idle = idle_members(mask, self.n);
        if idle.is_empty() {
            last
        } else {
            idle[u.index(idle.len())]
        }
    }

    fn update_on_arrival(
        &self,
        memory: MemoryState,
        _: f64,
        _: &[ServerView<'_>],
        destination: usize,
        _: Draw,
    ) -> u128 {
        let (mask, _) = self.split(memory);
        self.join(mask | (1u128 << destination), destination)
    }

    fn notify_on_departure(&self, queue: &QueueState, _rate: f64, _u: Draw) -> bool {
        queue.is_empty()
    }

    fn update_on_departure(&self, memory: MemoryState, server: &ServerView<'_>, _: Draw) -> u128 {
        let (mask, last) = self.split(memory);
        self.join(mask & !(1u128 << server.index), last)
    }
}

/// Power-of-d-choices with memory: the `d` random samples are joined by
/// the server remembered from the previous arrival; after dispatching, the
/// least loaded sampled server is remembered.
#[derive(Debug, Clone)]
pub struct SqDWithMemory {
    n: usize,
    d: usize,
}

pub fn sq_d_with_memory_policy(n: usize, d: usize) -> Result<SqDWithMemory, ModelError> {
    check_servers(n)?;
    if d == 0 || d > n {
        return Err(ModelError::InvalidParameter(format!(
            "sq_d_mem needs 1 <= d <= n, got d={d}, n={n}"
        )));
    }
    Ok(SqDWithMemory { n, d })
}

impl SqDWithMemory {
    fn remembered(&self, memory: MemoryState) -> usize {
        ((memory.value() - 1) % self.n as u128) as usize
    }
}

impl DispatchPolicy for SqDWithMemory {
    fn name(&self) -> String {
        format!("sq_d_mem(d={})", self.d)
    }

    fn servers(&self) -> usize {
        self.n
    }

    fn memory_bits(&self) -> u32 {
        ceil_log2(self.n)
    }

    fn random_initial_memory(&self, u: Draw) -> u128 {
        u.index(self.n) as u128 + 1
    }

    fn sample_on_arrival(&self, memory: MemoryState, _: f64, u: Draw) -> ServerSet {
        let mut picks = u.expand().subset(self.n, self.d);
        let kept = self.remembered(memory);
        if !picks.contains(&kept) {
            picks.push(kept);
        }
        ServerSet::from_indices(picks).expect("distinct by construction")
    }

    fn dispatch(&self, _: MemoryState, _: f64, sampled: &[ServerView<'_>], _: Draw) -> usize {
        shortest(sampled).unwrap_or(0)
    }

    fn update_on_arrival(
        &self,
        memory: MemoryState,
        _: f64,
        sampled: &[ServerView<'_>],
        destination: usize,
        _: Draw,
    ) -> u128 {
        sampled
            .iter()
            .map(|v| (v.queue.len() + usize::from(v.index == destination), v.index))
            .min()
            .map_or(memory.value(), |(_, i)| i as u128 + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    StoredId,
    Uniform,
    WeightedRandom,
    SqD,
    Jsq,
    Jiq,
    PersistentIdle,
    SqDMem,
}

impl PolicyKind {
    pub fn id(self) -> &'static str {
        match self {
            PolicyKind::StoredId => "stored_id",
            PolicyKind::Uniform => "uniform",
            PolicyKind::WeightedRandom => "weighted_random",
            PolicyKind::SqD => "sq_d",
            PolicyKind::Jsq => "jsq",
            PolicyKind::Jiq => "jiq",
            PolicyKind::PersistentIdle => "persistent_idle",
            PolicyKind::SqDMem => "sq_d_mem",
        }
    }

    pub fn from_id(id: &str) -> Option<PolicyKind> {
        use PolicyKind::*;
        [StoredId, Uniform, WeightedRandom, SqD, Jsq, Jiq, PersistentIdle, SqDMem]
            .into_iter()
            .find(|k| k.id() == id)
    }
}

/// A policy identifier plus its parameters, as written in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    /// Per-server spontaneous message rate (`stored_id`).
    pub alpha: Option<f64>,
    /// Number of samples (`sq_d`, `sq_d_mem`).
    pub d: Option<usize>,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind) -> Self {
        PolicySpec {
            kind,
            alpha: None,
            d: None,
        }
    }

    pub fn stored_id(alpha: f64) -> Self {
        PolicySpec {
            alpha: Some(alpha),
            ..Self::new(PolicyKind::StoredId)
        }
    }

    pub fn sq_d(d: usize) -> Self {
        PolicySpec {
            d: Some(d),
            ..Self::new(PolicyKind::SqD)
        }
    }

    /// Parses an identifier with its parameter map (`alpha`, `d`).
    pub fn parse(id: &str, params: &BTreeMap<String, String>) -> Result<Self, String> {
        let kind = PolicyKind::from_id(id).ok_or_else(|| {
            format!("unknown policy `{id}` (expected one of {})", POLICY_IDS.join(", "))
        })?;
        let mut spec = PolicySpec::new(kind);
        for (key, value) in params {
            match key.as_str() {
                "alpha" => {
                    spec.alpha = Some(value.parse().map_err(|_| format!("alpha: not a number: {value}"))?)
                }
                "d" => spec.d = Some(value.parse().map_err(|_| format!("d: not an integer: {value}"))?),
                other => return Err(format!("unknown policy parameter `{other}`")),
            }
        }
        Ok(spec)
    }

    /// Short label, e.g. `sq_d:2` or `stored_id`.
    pub fn label(&self) -> String {
        match (self.kind, self.d) {
            (PolicyKind::SqD | PolicyKind::SqDMem, Some(d)) => format!("{}:{d}", self.kind.id()),
            _ => self.kind.id().to_string(),
        }
    }

    /// Checks that the parameters this policy needs are present and valid.
    pub fn validate(&self, n: usize) -> Result<(), ModelError> {
        build_policy(self, n).map(|_| ())
    }
}

fn need<T>(value: Option<T>, what: &str, id: &str) -> Result<T, ModelError> {
    value.ok_or_else(|| ModelError::InvalidParameter(format!("policy `{id}` needs parameter `{what}`")))
}

pub fn build_policy(spec: &PolicySpec, n: usize) -> Result<Arc<dyn DispatchPolicy>, ModelError> {
    let id = spec.kind.id();
    Ok(match spec.kind {
        PolicyKind::StoredId => Arc::new(stored_id_policy(n, need(spec.alpha, "alpha", id)?)?),
        PolicyKind::Uniform => Arc::new(uniform_random_policy(n)?),
        PolicyKind::WeightedRandom => Arc::new(weighted_random_policy(n)?),
        PolicyKind::SqD => Arc::new(sq_d_policy(n, need(spec.d, "d", id)?)?),
        PolicyKind::Jsq => Arc::new(jsq_policy(n)?),
        PolicyKind::Jiq => Arc::new(jiq_policy(n)?),
        PolicyKind::PersistentIdle => Arc::new(persistent_idle_policy(n)?),
        PolicyKind::SqDMem => Arc::new(sq_d_with_memory_policy(n, need(spec.d, "d", id)?)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::UniformStream;

    fn mem(value: u128, bits: u32) -> MemoryState {
        MemoryState::new(value, bits).unwrap()
    }

    fn queue(len: usize) -> QueueState {
        QueueState::from_workloads(std::iter::repeat_n(1.0, len)).unwrap()
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(8), 3);
        assert_eq!(ceil_log2(9), 4);
        assert_eq!(ceil_log2(10), 4);
    }

    #[test]
    fn stored_id_dispatches_to_memory_without_queries() {
        let p = stored_id_policy(8, 0.3).unwrap();
        let m = mem(5, p.memory_bits());
        assert!(p.sample_on_arrival(m, 1.0, Draw(1)).is_empty());
        assert_eq!(p.dispatch(m, 1.0, &[], Draw(2)), 4);
        assert_eq!(p.update_on_arrival(m, 1.0, &[], 4, Draw(3)), 5);
        assert_eq!(p.spontaneous_rate(), 8.0 * 0.3);
        assert_eq!(p.memory_bits(), 3);
    }

    #[test]
    fn stored_id_switches_only_on_strictly_shorter() {
        let p = stored_id_policy(8, 1.0).unwrap();
        let m = mem(5, 3); // server index 4
        let short = queue(2);
        let long = queue(5);
        let same = queue(5);
        let sender = ServerView { index: 1, queue: &short, rate: 1.0 };
        let stored = ServerView { index: 4, queue: &long, rate: 1.0 };
        assert_eq!(p.sample_on_message(m, &sender, Draw(0)), ServerSet::singleton(4));
        assert_eq!(p.update_on_message(m, &sender, &[stored], Draw(0)), 2);

        let tie = ServerView { index: 1, queue: &same, rate: 1.0 };
        assert_eq!(p.update_on_message(m, &tie, &[stored], Draw(0)), 5);
    }

    #[test]
    fn uniform_single_server() {
        let p = uniform_random_policy(1).unwrap();
        let m = mem(1, 0);
        let mut s = UniformStream::new(4);
        for _ in 0..100 {
            assert_eq!(p.dispatch(m, 1.0, &[], s.next_draw()), 0);
        }
    }

    #[test]
    fn uniform_shares_are_balanced() {
        let p = uniform_random_policy(4).unwrap();
        let m = mem(1, 0);
        let mut s = UniformStream::new(11);
        let mut counts = [0usize; 4];
        let trials = 100_000;
        for _ in 0..trials {
            counts[p.dispatch(m, 1.0, &[], s.next_draw())] += 1;
        }
        for c in counts {
            let share = c as f64 / trials as f64;
            assert!((0.24..=0.26).contains(&share), "{share}");
        }
    }

    #[test]
    fn sq_d_picks_shortest_sampled() {
        let p = sq_d_policy(5, 2).unwrap();
        let m = mem(1, 0);
        let a = queue(3);
        let b = queue(1);
        let views = [
            ServerView { index: 0, queue: &a, rate: 1.0 },
            ServerView { index: 3, queue: &b, rate: 1.0 },
        ];
        assert_eq!(p.dispatch(m, 1.0, &views, Draw(0)), 3);
        let set = p.sample_on_arrival(m, 1.0, Draw(12345));
        assert_eq!(set.len(), 2);
        let tied = [
            ServerView { index: 2, queue: &a, rate: 1.0 },
            ServerView { index: 4, queue: &a, rate: 1.0 },
        ];
        assert_eq!(p.dispatch(m, 1.0, &tied, Draw(0)), 2);
    }

    #[test]
    fn jsq_samples_everything() {
        let p = jsq_policy(6).unwrap();
        assert_eq!(p.sample_on_arrival(mem(1, 0), 1.0, Draw(3)), ServerSet::all(6));
        assert!(sq_d_policy(3, 4).is_err());
        assert!(sq_d_policy(3, 0).is_err());
    }

    #[test]
    fn weighted_random_follows_rates() {
        let p = weighted_random_policy(2).unwrap();
        let m = mem(1, 0);
        let q = QueueState::new();
        let views = [
            ServerView { index: 0, queue: &q, rate: 0.5 },
            ServerView { index: 1, queue: &q, rate: 1.5 },
        ];
        let mut s = UniformStream::new(2);
        let trials = 100_000;
        let to_slow = (0..trials)
            .filter(|_| p.dispatch(m, 1.0, &views, s.next_draw()) == 0)
            .count() as f64
            / trials as f64;
        assert!((to_slow - 0.25).abs() < 0.01);
    }

    #[test]
    fn jiq_tracks_idle_servers() {
        let p = jiq_policy(4).unwrap();
        let bits = p.memory_bits();
        let all_busy = mem(0b1111 + 1, bits);
        let q = QueueState::new();
        let v = ServerView { index: 2, queue: &q, rate: 1.0 };
        assert!(p.notify_on_departure(&q, 1.0, Draw(0)));
        let m2 = mem(p.update_on_departure(all_busy, &v, Draw(0)), bits);
        assert_eq!(m2.value(), 0b1011 + 1);
        assert_eq!(p.dispatch(m2, 1.0, &[], Draw(77)), 2);
        let m3 = p.update_on_arrival(m2, 1.0, &[], 2, Draw(0));
        assert_eq!(m3, all_busy.value());
        // empty system: every server is idle
        let empty = mem(1, bits);
        let mut seen = [false; 4];
        for k in 0..200 {
            seen[p.dispatch(empty, 1.0, &[], Draw(crate::rng::splitmix64(k)))] = true;
        }
        assert!(seen.iter().all(|&x| x));
        assert!(!p.notify_on_departure(&queue(1), 1.0, Draw(0)));
    }

    #[test]
    fn persistent_idle_falls_back_to_last() {
        let p = persistent_idle_policy(4).unwrap();
        let bits = p.memory_bits();
        assert_eq!(bits, 6);
        let q = QueueState::new();
        let m = mem(0b1111 + 1, bits);
        let m = mem(
            p.update_on_departure(m, &ServerView { index: 3, queue: &q, rate: 1.0 }, Draw(0)),
            bits,
        );
        let dest = p.dispatch(m, 1.0, &[], Draw(5));
        assert_eq!(dest, 3);
        let m = mem(p.update_on_arrival(m, 1.0, &[], dest, Draw(0)), bits);
        // no idle servers left: keep sending to the last destination
        for k in 0..10 {
            assert_eq!(p.dispatch(m, 1.0, &[], Draw(k)), 3);
        }
    }

    #[test]
    fn sq_d_mem_includes_remembered_server() {
        let p = sq_d_with_memory_policy(10, 2).unwrap();
        let bits = p.memory_bits();
        let m = mem(8, bits); // server 7
        for k in 0..50 {
            let s = p.sample_on_arrival(m, 1.0, Draw(k));
            assert!(s.contains(7));
            assert!(s.len() == 2 || s.len() == 3);
        }
        let a = queue(1);
        let b = queue(1);
        let views = [
            ServerView { index: 2, queue: &a, rate: 1.0 },
            ServerView { index: 7, queue: &b, rate: 1.0 },
        ];
        let dest = p.dispatch(m, 1.0, &views, Draw(0));
        assert_eq!(dest, 2);
        // after placing the job at 2, server 7 is the least loaded
        assert_eq!(p.update_on_arrival(m, 1.0, &views, dest, Draw(0)), 8);
    }

    #[test]
    fn spec_parsing() {
        let mut params = BTreeMap::new();
        params.insert("alpha".to_string(), "0.5".to_string());
        let spec = PolicySpec::parse("stored_id", &params).unwrap();
        assert_eq!(spec, PolicySpec::stored_id(0.5));
        assert!(PolicySpec::parse("nope", &params).is_err());
        assert!(PolicySpec::new(PolicyKind::StoredId).validate(3).is_err());
        assert!(PolicySpec::sq_d(2).validate(3).is_ok());
        for id in POLICY_IDS {
            assert_eq!(PolicyKind::from_id(id).unwrap().id(), id);
        }
    }

    #[test]
    fn memory_budgets_reject_huge_n() {
        assert!(jiq_policy(127).is_ok());
        assert!(jiq_policy(128).is_err());
        assert!(persistent_idle_policy(200).is_err());
    }
}
