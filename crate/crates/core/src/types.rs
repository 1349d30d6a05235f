//! Domain records shared by the simulator, the policies, the chain verifier
//! and the metrics.
//!
//! Servers are addressed by zero-based `usize` indices inside the library.
//! Everything that leaves the process (CSV, JSON, config files, memory
//! values) uses the one-based numbering of the model.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Absolute tolerance on `sum(rates) == n`.
pub const RATE_SUM_TOLERANCE: f64 = 1e-9;

/// Service rates of the `n` servers, in work units per unit time.
///
/// Every entry is strictly positive and the entries sum to `n`, so the
/// total capacity of the farm is always `n` regardless of heterogeneity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RateVector(Vec<f64>);

impl RateVector {
    pub fn new(rates: Vec<f64>) -> Result<Self, ModelError> {
        if rates.is_empty() {
            return Err(ModelError::EmptyRates);
        }
        for (index, &value) in rates.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ModelError::NonPositiveRate { index, value });
            }
        }
        let sum: f64 = rates.iter().sum();
        let expected = rates.len() as f64;
        if (sum - expected).abs() > RATE_SUM_TOLERANCE {
            return Err(ModelError::RateSum { sum, expected });
        }
        Ok(RateVector(rates))
    }

    /// All servers at rate one.
    pub fn homogeneous(n: usize) -> Result<Self, ModelError> {
        Self::new(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, server: usize) -> f64 {
        self.0[server]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl TryFrom<Vec<f64>> for RateVector {
    type Error = ModelError;

    fn try_from(rates: Vec<f64>) -> Result<Self, Self::Error> {
        RateVector::new(rates)
    }
}

impl From<RateVector> for Vec<f64> {
    fn from(rates: RateVector) -> Self {
        rates.0
    }
}

/// Rate vector with `floor(n/2)` servers at rate `epsilon` and the rest
/// sharing the remaining capacity equally. Slow servers come first.
pub fn make_slow_half_rates(n: usize, epsilon: f64) -> Result<RateVector, ModelError> {
    if n < 2 {
        return Err(ModelError::InvalidParameter(format!(
            "slow-half construction needs n >= 2, got {n}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 2.0) {
        return Err(ModelError::InvalidParameter(format!(
            "slow rate must lie in (0, 2), got {epsilon}"
        )));
    }
    let slow = n / 2;
    let fast = n - slow;
    let fast_rate = (n as f64 - epsilon * slow as f64) / fast as f64;
    let mut rates = vec![epsilon; slow];
    rates.extend(std::iter::repeat_n(fast_rate, fast));
    RateVector::new(rates)
}

/// Remaining workloads at one server, head of line first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueueState {
    jobs: VecDeque<f64>,
}

impl QueueState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_workloads<I: IntoIterator<Item = f64>>(workloads: I) -> Result<Self, ModelError> {
        let mut queue = QueueState::new();
        for w in workloads {
            queue.push(w)?;
        }
        Ok(queue)
    }

    pub(crate) fn push_unchecked(&mut self, workload: f64) {
        self.jobs.push_back(workload);
    }

    pub(crate) fn pop_head(&mut self) -> Option<f64> {
        self.jobs.pop_front()
    }

    pub(crate) fn set_head(&mut self, workload: f64) {
        if let Some(h) = self.jobs.front_mut() {
            *h = workload;
        }
    }

    /// Workload behind the head of line.
    pub(crate) fn tail_workload(&self) -> f64 {
        self.jobs.iter().skip(1).sum()
    }

    pub fn push(&mut self, workload: f64) -> Result<(), ModelError> {
        if !(workload > 0.0 && workload.is_finite()) {
            return Err(ModelError::NonPositiveWorkload(workload));
        }
        self.jobs.push_back(workload);
        Ok(())
    }

    /// Number of jobs, the one in service included.
    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    pub fn head(&self) -> Option<f64> {
        self.jobs.front().copied()
    }

    pub fn workloads(&self) -> impl Iterator<Item = f64> + '_ {
        self.jobs.iter().copied()
    }

    pub fn workload(&self) -> f64 {
        self.jobs.iter().sum()
    }
}

/// Dispatcher memory: a value in `1..=2^bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MemoryState {
    value: u128,
    bits: u32,
}

impl MemoryState {
    pub const MAX_BITS: u32 = 127;

    pub fn new(value: u128, bits: u32) -> Result<Self, ModelError> {
        let max = Self::capacity(bits)?;
        if value == 0 || value > max {
            return Err(ModelError::MemoryOutOfRange { value, bits, max });
        }
        Ok(MemoryState { value, bits })
    }

    /// Number of distinct memory states for a budget of `bits`.
    pub fn capacity(bits: u32) -> Result<u128, ModelError> {
        if bits > Self::MAX_BITS {
            return Err(ModelError::MemoryBudgetTooLarge(bits));
        }
        Ok(1u128 << bits)
    }

    pub fn value(self) -> u128 {
        self.value
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    /// Same budget, different value.
    pub fn with_value(self, value: u128) -> Result<Self, ModelError> {
        Self::new(value, self.bits)
    }
}

impl fmt::Display for MemoryState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// Full system state `(Q, M, Z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub queues: Vec<QueueState>,
    pub memory: MemoryState,
    pub elapsed_since_arrival: f64,
}

impl SystemState {
    pub fn new(
        queues: Vec<QueueState>,
        memory: MemoryState,
        elapsed_since_arrival: f64,
        servers: usize,
    ) -> Result<Self, ModelError> {
        if queues.len() != servers {
            return Err(ModelError::QueueCount {
                queues: queues.len(),
                servers,
            });
        }
        if elapsed_since_arrival < 0.0 {
            return Err(ModelError::InvalidParameter(format!(
                "elapsed time since arrival must be nonnegative, got {elapsed_since_arrival}"
            )));
        }
        Ok(SystemState {
            queues,
            memory,
            elapsed_since_arrival,
        })
    }

    /// Empty queues, memory 1, no elapsed time.
    pub fn empty(servers: usize, memory_bits: u32) -> Result<Self, ModelError> {
        let memory = MemoryState::new(1, memory_bits)?;
        Self::new(vec![QueueState::new(); servers], memory, 0.0, servers)
    }

    pub fn queue_lengths(&self) -> Vec<usize> {
        self.queues.iter().map(QueueState::len).collect()
    }
}

/// Sum of every remaining workload in every queue.
pub fn total_workload(state: &SystemState) -> f64 {
    state.queues.iter().map(QueueState::workload).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_vector_rejects_bad_sum_and_nonpositive_entries() {
        assert!(RateVector::new(vec![0.5, 1.5]).is_ok());
        assert!(matches!(
            RateVector::new(vec![1.0, 1.1]),
            Err(ModelError::RateSum { .. })
        ));
        assert!(matches!(
            RateVector::new(vec![0.0, 2.0]),
            Err(ModelError::NonPositiveRate { index: 0, .. })
        ));
        assert!(matches!(
            RateVector::new(vec![-1.0, 3.0]),
            Err(ModelError::NonPositiveRate { .. })
        ));
        assert!(RateVector::new(vec![1.0 + 5e-10, 1.0]).is_ok());
        assert!(RateVector::new(vec![1.0 + 5e-9, 1.0]).is_err());
        assert_eq!(RateVector::new(vec![]), Err(ModelError::EmptyRates));
    }

    #[test]
    fn slow_half_examples() {
        assert_eq!(make_slow_half_rates(2, 0.5).unwrap().as_slice(), &[0.5, 1.5]);
        let r = make_slow_half_rates(4, 0.1).unwrap();
        let expected = [0.1, 0.1, 1.9, 1.9];
        for (a, b) in r.as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(make_slow_half_rates(3, 1.0).unwrap().as_slice(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn slow_half_rejects_out_of_range() {
        assert!(make_slow_half_rates(1, 0.5).is_err());
        assert!(make_slow_half_rates(4, 0.0).is_err());
        assert!(make_slow_half_rates(4, 2.0).is_err());
        assert!(make_slow_half_rates(4, -0.3).is_err());
    }

    #[test]
    fn total_workload_examples() {
        let empty = SystemState::empty(3, 0).unwrap();
        assert_eq!(total_workload(&empty), 0.0);

        let mut state = SystemState::empty(2, 0).unwrap();
        state.queues[0] = QueueState::from_workloads([2.0, 1.0]).unwrap();
        assert_eq!(total_workload(&state), 3.0);

        let mut state = SystemState::empty(3, 0).unwrap();
        for q in &mut state.queues {
            q.push(0.5).unwrap();
        }
        assert_eq!(total_workload(&state), 1.5);
    }

    #[test]
    fn queue_rejects_zero_workload() {
        let mut q = QueueState::new();
        assert!(q.push(0.0).is_err());
        assert!(q.push(f64::NAN).is_err());
        q.push(1.0).unwrap();
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn memory_bounds() {
        assert!(MemoryState::new(1, 0).is_ok());
        assert!(MemoryState::new(2, 0).is_err());
        assert!(MemoryState::new(0, 3).is_err());
        assert!(MemoryState::new(8, 3).is_ok());
        assert!(MemoryState::new(9, 3).is_err());
        assert!(MemoryState::new(1, 128).is_err());
    }

    #[test]
    fn system_state_checks_queue_count() {
        let memory = MemoryState::new(1, 1).unwrap();
        assert!(SystemState::new(vec![QueueState::new()], memory, 0.0, 2).is_err());
    }

    proptest::proptest! {
        #[test]
        fn slow_half_always_valid(n in 2usize..200, eps in 1e-6f64..1.999) {
            let r = make_slow_half_rates(n, eps).unwrap();
            proptest::prop_assert_eq!(r.len(), n);
            proptest::prop_assert!(RateVector::new(r.as_slice().to_vec()).is_ok());
            proptest::prop_assert_eq!(r.as_slice().iter().filter(|&&x| x == eps).count() >= n / 2, true);
        }
    }
}
