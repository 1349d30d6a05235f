//! The slow-server experiment and its benchmarks.
//!
//! Half of the servers (rounded down) run at a small rate `epsilon`. A
//! policy that sends a fixed fraction of jobs to them regardless of their
//! backlog makes the total workload grow linearly. Two reference slopes are
//! computed: a loose benchmark built from the probability of a job of size
//! at least one half and the message budget, and a sharper counting bound
//! from the exact probability that the dispatcher cannot avoid the slow
//! set.

use serde::{Deserialize, Serialize};

use crate::config::{RatesSpec, ScenarioConfig};
use crate::dist::UnitDist;
use crate::engine::replications;
use crate::error::{AnalysisError, SimError};
use crate::ledger::RunLedger;
use crate::metrics::{post_warmup_message_rate, workload_drift, Classification, DriftEstimate};
use crate::policy::{build_policy, DispatchPolicy, PolicySpec, ServerView};
use crate::rng::UniformStream;
use crate::stats::mean;
use crate::types::{MemoryState, QueueState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstabilityBenchmark {
    pub lambda: f64,
    pub alpha: f64,
    pub n: usize,
    pub p_half: f64,
    pub s_star: f64,
    pub b_n: f64,
}

/// `p_half = P(W >= 1/2)`, `s* = alpha / (lambda n p_half)` and
/// `b_n = (lambda p_half / 6) (1/3)^{s*}`.
pub fn instability_benchmark(
    lambda: f64,
    alpha: f64,
    n: usize,
    size: &UnitDist,
) -> Result<InstabilityBenchmark, AnalysisError> {
    if n == 0 || !(lambda > 0.0) || !(alpha >= 0.0) {
        return Err(AnalysisError::Precondition(format!(
            "need n >= 1, lambda > 0, alpha >= 0 (got n={n}, lambda={lambda}, alpha={alpha})"
        )));
    }
    size.check_unit_mean()
        .map_err(|e| AnalysisError::Precondition(e.to_string()))?;
    let p_half = size.survival(0.5);
    if !(p_half > 0.0) {
        return Err(AnalysisError::Precondition(
            "job-size distribution puts no mass on [1/2, inf)".into(),
        ));
    }
    let s_star = alpha / (lambda * n as f64 * p_half);
    let b_n = lambda * p_half / 6.0 * (1.0f64 / 3.0).powf(s_star);
    Ok(InstabilityBenchmark {
        lambda,
        alpha,
        n,
        p_half,
        s_star,
        b_n,
    })
}

/// Probability that two distinct uniform samples both land in the slow
/// half: `floor(n/2) (floor(n/2) - 1) / (n (n - 1))`.
pub fn both_slow_probability(n: usize) -> f64 {
    let s = (n / 2) as f64;
    let n = n as f64;
    s * (s - 1.0) / (n * (n - 1.0))
}

/// Lower bound on the SQ(2) workload slope used for acceptance:
/// `lambda n p_slow (1/2)(1/2) - epsilon floor(n/2)`.
pub fn sq2_counting_bound(n: usize, lambda: f64, epsilon: f64) -> f64 {
    lambda * n as f64 * both_slow_probability(n) * 0.25 - epsilon * (n / 2) as f64
}

/// Fraction of arrivals a memoryless policy sends to the slow set when
/// every slow queue is longer than every fast queue, estimated by calling
/// its sampling and dispatch functions directly.
pub fn slow_share_oracle(policy: &dyn DispatchPolicy, trials: usize, seed: u64) -> Option<f64> {
    if policy.memory_bits() != 0 || policy.spontaneous_rate() > 0.0 {
        return None;
    }
    let n = policy.servers();
    let slow = n / 2;
    let long = QueueState::from_workloads(std::iter::repeat_n(1.0, 1000)).expect("positive");
    let empty = QueueState::new();
    let memory = MemoryState::new(1, 0).expect("zero-bit memory");
    let mut stream = UniformStream::new(seed);
    let mut hits = 0usize;
    for _ in 0..trials {
        let sampled = policy.sample_on_arrival(memory, 1.0, stream.next_draw());
        let views: Vec<ServerView<'_>> = sampled
            .iter()
            .map(|i| ServerView {
                index: i,
                queue: if i < slow { &long } else { &empty },
                rate: 1.0,
            })
            .collect();
        if policy.dispatch(memory, 1.0, &views, stream.next_draw()) < slow {
            hits += 1;
        }
    }
    Some(hits as f64 / trials as f64)
}

/// Workload slope implied by a slow-set share: inflow to the slow set
/// minus its total service rate.
pub fn predicted_slow_slope(n: usize, lambda: f64, epsilon: f64, slow_share: f64) -> f64 {
    lambda * n as f64 * slow_share - epsilon * (n / 2) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowServerReport {
    pub policy: String,
    pub n: usize,
    pub lambda: f64,
    pub epsilon: f64,
    pub horizon: f64,
    pub replications: usize,
    pub drift: DriftEstimate,
    pub classification: Classification,
    pub message_rate: f64,
    pub slow_dispatch_fraction: f64,
    /// Benchmark evaluated at the measured message rate.
    pub benchmark: InstabilityBenchmark,
    /// `(b_n - epsilon) n`.
    pub benchmark_slope: f64,
    /// Whether the slope interval reaches the benchmark slope.
    pub benchmark_consistent: bool,
    pub predicted_slope: Option<f64>,
}

/// Runs `reps` replications of `policy` on slow-half rates and summarises
/// drift, message rate and slow-set share.
pub fn slow_server_experiment(
    base: &ScenarioConfig,
    policy: &PolicySpec,
    epsilon: f64,
    reps: usize,
) -> Result<(SlowServerReport, Vec<RunLedger>), SimError> {
    let mut config = base.clone();
    config.rates_spec = RatesSpec::SlowHalf { epsilon };
    config.rates = config.rates_spec.build(config.n)?;
    config.policy = policy.clone();
    let bundle = build_policy(policy, config.n)?;
    let seeds: Vec<u64> = (0..reps as u64).map(|k| base.seed.wrapping_add(k)).collect();
    let ledgers = replications(&config, bundle.as_ref(), config.horizon, &seeds)?;
    let report = summarise(&config, bundle.as_ref(), epsilon, &ledgers)
        .map_err(|e| SimError::Model(crate::error::ModelError::InvalidParameter(e.to_string())))?;
    Ok((report, ledgers))
}

pub fn summarise(
    config: &ScenarioConfig,
    policy: &dyn DispatchPolicy,
    epsilon: f64,
    ledgers: &[RunLedger],
) -> Result<SlowServerReport, AnalysisError> {
    let n = config.n;
    let drift = workload_drift(ledgers)?;
    let rates = ledgers
        .iter()
        .map(|l| post_warmup_message_rate(l).map(|r| r.total))
        .collect::<Result<Vec<_>, _>>()?;
    let message_rate = mean(&rates);
    let slow = n / 2;
    let slow_dispatch_fraction = mean(
        &ledgers
            .iter()
            .map(|l| l.dispatch_shares()[..slow].iter().sum())
            .collect::<Vec<f64>>(),
    );
    let benchmark = instability_benchmark(config.lambda, message_rate, n, &config.job_size)?;
    let benchmark_slope = (benchmark.b_n - epsilon) * n as f64;
    let predicted_slope = slow_share_oracle(policy, 100_000, config.seed)
        .map(|share| predicted_slow_slope(n, config.lambda, epsilon, share));
    Ok(SlowServerReport {
        policy: config.policy.label(),
        n,
        lambda: config.lambda,
        epsilon,
        horizon: config.horizon,
        replications: ledgers.len(),
        classification: drift.classification,
        benchmark_consistent: drift.ci.upper >= benchmark_slope,
        drift,
        message_rate,
        slow_dispatch_fraction,
        benchmark,
        benchmark_slope,
        predicted_slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn p_half_per_distribution() {
        let b = instability_benchmark(0.5, 1.0, 1, &UnitDist::Exp).unwrap();
        assert_relative_eq!(b.p_half, (-0.5f64).exp(), epsilon = 1e-15);
        let b = instability_benchmark(0.5, 1.0, 1, &UnitDist::Det).unwrap();
        assert_eq!(b.p_half, 1.0);
    }

    #[test]
    fn benchmark_example() {
        let n = 10;
        let b = instability_benchmark(0.5, n as f64, n, &UnitDist::Exp).unwrap();
        assert!((b.s_star - 3.297).abs() < 1e-3);
        assert!((b.b_n - 1.35e-3).abs() < 1e-5);
    }

    #[test]
    fn counting_bound_for_ten_servers() {
        assert_relative_eq!(both_slow_probability(10), 20.0 / 90.0, epsilon = 1e-15);
        assert_relative_eq!(sq2_counting_bound(10, 0.9, 0.05), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn oracle_shares() {
        let u = build_policy(&PolicySpec::new(crate::policy::PolicyKind::Uniform), 10).unwrap();
        let s = slow_share_oracle(u.as_ref(), 200_000, 1).unwrap();
        assert!((s - 0.5).abs() < 0.01);
        let q = build_policy(&PolicySpec::sq_d(2), 10).unwrap();
        let s = slow_share_oracle(q.as_ref(), 200_000, 1).unwrap();
        assert!((s - 2.0 / 9.0).abs() < 0.01);
        let st = build_policy(&PolicySpec::stored_id(0.5), 10).unwrap();
        assert!(slow_share_oracle(st.as_ref(), 10, 1).is_none());
    }
}
