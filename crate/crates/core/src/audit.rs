//! Monte-Carlo check that a policy's arrival-time sampling and dispatch
//! treat servers exchangeably.
//!
//! Three families of chi-square tests are run on draws of `f1` (and `f2`)
//! at a fixed memory state and job size:
//!
//! * inclusion: among samples containing a conditioning server `c` (and,
//!   unconditionally, among all samples), every other server is included
//!   equally often;
//! * permutation: within each sample size, every subset of that size is
//!   equally likely, which is what invariance under relabelling means for
//!   a fixed memory state; classes with too few draws per subset fall back
//!   to the inclusion tests;
//! * destination: when the destination lies outside the sample, it is
//!   uniform over the servers outside the sample.
//!
//! Tests are judged at level `0.01 / (number of tests)`. A sampler or a
//! dispatcher with constant output is flagged instead of tested.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::AnalysisError;
use crate::policy::{DispatchPolicy, ServerSet, ServerView};
use crate::rng::UniformStream;
use crate::stats::chi_square_uniform;
use crate::types::{MemoryState, QueueState};

pub const SIGNIFICANCE: f64 = 0.01;
pub const MIN_TRIALS: usize = 10_000;
/// Expected count per category below which a test is skipped.
pub const MIN_EXPECTED: f64 = 5.0;
/// Largest subset count for which the permutation test is attempted.
const MAX_SUBSETS: u128 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditTest {
    pub family: String,
    /// Conditioning server (one-based) or subset size, if any.
    pub condition: Option<usize>,
    pub categories: usize,
    pub observations: u64,
    pub statistic: f64,
    pub p_value: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditVerdict {
    Pass,
    Fail,
    /// Sampling always returns the empty set and dispatch never leaves it.
    Vacuous,
    /// Sampling returns one constant nonempty set; reported, not failed.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub policy: String,
    pub memory: u128,
    pub job_size: f64,
    pub trials: usize,
    pub distinct_samples: usize,
    pub degenerate: bool,
    /// Every destination outside the sample was the same server.
    pub dispatch_degenerate: bool,
    pub adjusted_level: f64,
    pub tests: Vec<AuditTest>,
    pub verdict: AuditVerdict,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.verdict != AuditVerdict::Fail
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let mut r: u128 = 1;
    for t in 0..k {
        r = r.saturating_mul((n - t) as u128) / (t as u128 + 1);
    }
    r
}

/// Position of a sorted `k`-subset of `0..n` in colexicographic order.
fn subset_rank(set: &[usize]) -> usize {
    set.iter().enumerate().map(|(k, &s)| binomial(s, k + 1) as usize).sum()
}

pub fn symmetry_audit(
    policy: &dyn DispatchPolicy,
    memory: MemoryState,
    job_size: f64,
    trials: usize,
    seed: u64,
) -> Result<AuditReport, AnalysisError> {
    if trials < MIN_TRIALS {
        return Err(AnalysisError::Precondition(format!(
            "symmetry audit needs at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    let n = policy.servers();
    let mut sample_stream = UniformStream::new(crate::rng::splitmix64(seed));
    let mut dispatch_stream = UniformStream::new(crate::rng::splitmix64(seed ^ 0xD15_7A7C));
    let empty = QueueState::new();

    let mut samples: BTreeMap<ServerSet, u64> = BTreeMap::new();
    let mut outside_dest: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for _ in 0..trials {
        let s = policy.sample_on_arrival(memory, job_size, sample_stream.next_draw());
        if let Some(bad) = s.max_index().filter(|&m| m >= n) {
            return Err(AnalysisError::Precondition(format!("sampled server {} outside 1..={n}", bad + 1)));
        }
        let views: Vec<ServerView<'_>> = s
            .iter()
            .map(|i| ServerView { index: i, queue: &empty, rate: 1.0 })
            .collect();
        let d = policy.dispatch(memory, job_size, &views, dispatch_stream.next_draw());
        if d >= n {
            return Err(AnalysisError::Precondition(format!("destination {} outside 1..={n}", d + 1)));
        }
        if !s.contains(d) {
            outside_dest.entry(s.len()).or_insert_with(|| vec![0; n])[d] += 1;
        }
        *samples.entry(s).or_default() += 1;
    }

    let distinct = samples.len();
    let only_empty = distinct == 1 && samples.keys().next().is_some_and(ServerSet::is_empty);
    let degenerate = distinct == 1 && !only_empty;
    let mut outside_targets = outside_dest.values().flat_map(|c| {
        c.iter().enumerate().filter(|&(_, &v)| v > 0).map(|(j, _)| j)
    });
    let dispatch_degenerate = match outside_targets.next() {
        Some(first) => outside_targets.all(|j| j == first),
        None => false,
    };

    let mut raw: Vec<(String, Option<usize>, Vec<u64>)> = Vec::new();
    if !degenerate {
        // Inclusion, unconditional and conditioned on each server.
        let mut marginal = vec![0u64; n];
        let mut conditional = vec![vec![0u64; n]; n];
        for (s, &count) in &samples {
            for i in s.iter() {
                marginal[i] += count;
                for c in s.iter() {
                    if c != i {
                        conditional[c][i] += count;
                    }
                }
            }
        }
        if marginal.iter().any(|&m| m > 0) {
            raw.push(("inclusion".into(), None, marginal));
        }
        for (c, row) in conditional.into_iter().enumerate() {
            let others: Vec<u64> = row
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != c)
                .map(|(_, &v)| v)
                .collect();
            raw.push(("inclusion_given".into(), Some(c + 1), others));
        }
        // Permutation: subsets of each observed size.
        let mut by_size: BTreeMap<usize, Vec<(&ServerSet, u64)>> = BTreeMap::new();
        for (s, &count) in &samples {
            if !s.is_empty() && s.len() < n {
                by_size.entry(s.len()).or_default().push((s, count));
            }
        }
        for (k, sets) in by_size {
            let classes = binomial(n, k);
            if classes > MAX_SUBSETS {
                continue;
            }
            let mut counts = vec![0u64; classes as usize];
            for (s, count) in sets {
                counts[subset_rank(s.as_slice())] += count;
            }
            raw.push(("permutation".into(), Some(k), counts));
        }
    }
    if !dispatch_degenerate {
        // Destination outside the sample, per sample size. Averaged over
        // exchangeable samples, it is uniform over all servers.
        for (k, counts) in outside_dest {
            raw.push(("destination".into(), Some(k), counts));
        }
    }

    let usable: Vec<(String, Option<usize>, Vec<u64>)> = raw
        .into_iter()
        .filter(|(_, _, counts)| {
            let total: u64 = counts.iter().sum();
            counts.len() >= 2 && total > 0 && total as f64 / counts.len() as f64 >= MIN_EXPECTED
        })
        .collect();
    let adjusted = SIGNIFICANCE / usable.len().max(1) as f64;
    let mut tests = Vec::with_capacity(usable.len());
    for (family, condition, counts) in usable {
        let r = chi_square_uniform(&counts)?;
        tests.push(AuditTest {
            family,
            condition,
            categories: counts.len(),
            observations: counts.iter().sum(),
            statistic: r.statistic,
            p_value: r.p_value,
            rejected: r.p_value < adjusted,
        });
    }
    let verdict = if degenerate {
        AuditVerdict::Degenerate
    } else if tests.iter().any(|t| t.rejected) {
        AuditVerdict::Fail
    } else if tests.is_empty() {
        AuditVerdict::Vacuous
    } else {
        AuditVerdict::Pass
    };
    Ok(AuditReport {
        policy: policy.name(),
        memory: memory.value(),
        job_size,
        trials,
        distinct_samples: distinct,
        degenerate,
        dispatch_degenerate,
        adjusted_level: adjusted,
        tests,
        verdict,
    })
}
