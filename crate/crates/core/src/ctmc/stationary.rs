//! Stationary distribution of the stored-ID chain truncated to
//! `{0..=q_max}^n`. Arrivals that would push a queue past `q_max` are
//! dropped, which keeps the truncated chain irreducible.

use serde::{Deserialize, Serialize};

use super::chain::{transition_rates, ChainState, LyapunovParams};
use crate::error::AnalysisError;

pub const DEFAULT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_MAX_SWEEPS: usize = 200_000;

/// Index of states in the truncated box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateIndexer {
    pub n: usize,
    pub q_max: u64,
}

impl StateIndexer {
    pub fn len(&self) -> usize {
        (self.q_max as usize + 1).pow(self.n as u32) * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, s: &ChainState) -> Option<usize> {
        let w = self.q_max as usize + 1;
        let mut k = 0usize;
        for &q in s.q.iter().rev() {
            if q > self.q_max {
                return None;
            }
            k = k * w + q as usize;
        }
        Some(s.i * w.pow(self.n as u32) + k)
    }

    pub fn state(&self, mut k: usize) -> ChainState {
        let w = self.q_max as usize + 1;
        let block = w.pow(self.n as u32);
        let i = k / block;
        k %= block;
        let q = (0..self.n)
            .map(|_| {
                let v = (k % w) as u64;
                k /= w;
                v
            })
            .collect();
        ChainState { q, i }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    pub indexer: StateIndexer,
    pub probabilities: Vec<f64>,
    /// Probability of the states where some queue sits at `q_max`.
    pub boundary_mass: f64,
    /// Long-run departure rate of each server.
    pub server_throughput: Vec<f64>,
    pub throughput: f64,
    pub sweeps: usize,
    /// `sum_s |(pi G)_s|` at termination.
    pub residual: f64,
}

impl StationaryDistribution {
    pub fn probability(&self, s: &ChainState) -> f64 {
        self.indexer.index(s).map_or(0.0, |k| self.probabilities[k])
    }

    pub fn iter(&self) -> impl Iterator<Item = (ChainState, f64)> + '_ {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(k, &p)| (self.indexer.state(k), p))
    }

    /// Distribution of the total number of jobs.
    pub fn total_jobs_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.indexer.n * self.indexer.q_max as usize + 1];
        for (s, p) in self.iter() {
            out[s.total() as usize] += p;
        }
        out
    }

    /// Long-run fraction of time the memory points at each server.
    pub fn memory_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.indexer.n];
        for (s, p) in self.iter() {
            out[s.i] += p;
        }
        out
    }
}

/// Gauss-Seidel on the balance equations `pi G = 0`, `sum pi = 1`, with the
/// incoming transitions of each state stored in compressed rows.
pub fn stationary_distribution(
    params: &LyapunovParams,
    q_max: u64,
) -> Result<StationaryDistribution, AnalysisError> {
    stationary_distribution_with(params, q_max, DEFAULT_TOLERANCE, DEFAULT_MAX_SWEEPS)
}

pub fn stationary_distribution_with(
    params: &LyapunovParams,
    q_max: u64,
    tolerance: f64,
    max_sweeps: usize,
) -> Result<StationaryDistribution, AnalysisError> {
    if q_max == 0 {
        return Err(AnalysisError::Precondition("q_max must be at least 1".into()));
    }
    let idx = StateIndexer { n: params.n(), q_max };
    let size = idx.len();
    let mut outflow = vec![0.0f64; size];
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for from in 0..size {
        let s = idx.state(from);
        for (t, r) in transition_rates(&s, params) {
            if let Some(to) = idx.index(&t) {
                outflow[from] += r;
                edges.push((to, from, r));
            }
        }
    }
    edges.sort_by_key(|e| (e.0, e.1));
    let mut row_start = vec![0usize; size + 1];
    for e in &edges {
        row_start[e.0 + 1] += 1;
    }
    for k in 0..size {
        row_start[k + 1] += row_start[k];
    }
    let sources: Vec<usize> = edges.iter().map(|e| e.1).collect();
    let weights: Vec<f64> = edges.iter().map(|e| e.2).collect();
    if outflow.iter().any(|&o| o <= 0.0) {
        return Err(AnalysisError::Solve("a state has no outgoing transitions".into()));
    }

    let inflow = |pi: &[f64], k: usize| -> f64 {
        (row_start[k]..row_start[k + 1]).map(|e| pi[sources[e]] * weights[e]).sum()
    };
    let mut pi = vec![1.0 / size as f64; size];
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        for k in 0..size {
            pi[k] = inflow(&pi, k) / outflow[k];
        }
        let total: f64 = pi.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(AnalysisError::Solve("iteration lost all mass".into()));
        }
        for p in &mut pi {
            *p /= total;
        }
        if sweeps % 10 == 0 || sweeps == max_sweeps {
            residual = (0..size).map(|k| (inflow(&pi, k) - pi[k] * outflow[k]).abs()).sum();
            if residual < tolerance {
                break;
            }
        }
    }
    if residual >= tolerance {
        return Err(AnalysisError::Solve(format!(
            "no convergence after {sweeps} sweeps (residual {residual:e})"
        )));
    }

    let mut boundary_mass = 0.0;
    let mut server_throughput = vec![0.0; params.n()];
    for (k, &p) in pi.iter().enumerate() {
        let s = idx.state(k);
        if s.q.iter().any(|&q| q == q_max) {
            boundary_mass += p;
        }
        for (j, &q) in s.q.iter().enumerate() {
            if q >= 1 {
                server_throughput[j] += p * params.rates.get(j);
            }
        }
    }
    Ok(StationaryDistribution {
        indexer: idx,
        probabilities: pi,
        boundary_mass,
        throughput: server_throughput.iter().sum(),
        server_throughput,
        sweeps,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::RateVector;
    use approx::assert_abs_diff_eq;

    #[test]
    fn indexer_round_trips() {
        let idx = StateIndexer { n: 3, q_max: 4 };
        for k in 0..idx.len() {
            assert_eq!(idx.index(&idx.state(k)), Some(k));
        }
        assert_eq!(idx.index(&ChainState { q: vec![5, 0, 0], i: 0 }), None);
    }

    #[test]
    fn single_server_is_geometric() {
        let p = LyapunovParams::new(0.5, RateVector::homogeneous(1).unwrap(), 1.0).unwrap();
        let pi = stationary_distribution(&p, 40).unwrap();
        for k in 0..20u64 {
            let expect = 0.5f64.powi(k as i32) * 0.5;
            assert_abs_diff_eq!(pi.probability(&ChainState { q: vec![k], i: 0 }), expect, epsilon = 1e-10);
        }
        assert!(pi.boundary_mass < 1e-4);
    }

    #[test]
    fn symmetric_pair_is_swap_invariant() {
        let p = LyapunovParams::new(0.5, RateVector::homogeneous(2).unwrap(), 1.0).unwrap();
        let pi = stationary_distribution(&p, 30).unwrap();
        assert_abs_diff_eq!(pi.throughput, 1.0, epsilon = 1e-3);
        assert!(pi.boundary_mass < 1e-4);
        for (s, prob) in pi.iter() {
            let swapped = ChainState { q: vec![s.q[1], s.q[0]], i: 1 - s.i };
            assert_abs_diff_eq!(pi.probability(&swapped), prob, epsilon = 1e-10);
        }
    }

    #[test]
    fn throughput_balances_arrivals_heterogeneous() {
        let rates = crate::types::make_slow_half_rates(2, 0.5).unwrap();
        let p = LyapunovParams::new(0.3, rates, 2.0).unwrap();
        let pi = stationary_distribution(&p, 30).unwrap();
        assert!(pi.boundary_mass < 1e-4);
        assert_abs_diff_eq!(pi.throughput, 0.6, epsilon = 1e-3);
    }
}
