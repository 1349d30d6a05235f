//! Drift certificate for the stored-ID chain on the box
//! `{0..=q_max}^n x {1..=n}`.
//!
//! Two routes reach the same verdict:
//!
//! * `Enumeration` visits every state. Drift is evaluated in `f64` twice
//!   (closed form and sum over transitions) and any state whose value is
//!   not clearly on one side of `-1` is re-evaluated in exact rational
//!   arithmetic.
//! * `Structured` fixes the stored server `i` and its queue `a = q_i`. The
//!   drift is then a constant plus `sum_{j != i} g_j(q_j)` with every `g_j`
//!   piecewise linear and concave in `q_j`, so the maximum over all states
//!   of the slice with a given bound on the total queue is found exactly by
//!   taking unit increments in decreasing order of slope. All arithmetic is
//!   rational, and each slice maximizer is re-evaluated through the
//!   transition sum as a cross-check. This covers boxes far too large to
//!   visit state by state.

use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chain::{
    drift, drift_direct_with_scale, int, rational_string, to_f64, ChainState, ExactParams,
    LyapunovParams,
};
use crate::error::AnalysisError;

/// Boxes with at most this many states are enumerated under `Auto`.
pub const ENUMERATION_LIMIT: u128 = 20_000_000;

/// Violations kept in a report; the total is always counted.
pub const MAX_LISTED_VIOLATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertifyMethod {
    Auto,
    Enumeration,
    Structured,
}

impl CertifyMethod {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "auto" => Some(CertifyMethod::Auto),
            "enumeration" => Some(CertifyMethod::Enumeration),
            "structured" => Some(CertifyMethod::Structured),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub state: ChainState,
    pub drift: f64,
    pub drift_exact: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub n: usize,
    pub lambda: f64,
    pub rates: Vec<f64>,
    pub alpha: f64,
    pub memory_moves: bool,
    pub theta: f64,
    pub theta_exact: String,
    /// Smallest total queue length outside the exception set.
    pub outside_from_total: u64,
    pub q_max: u64,
    pub method: CertifyMethod,
    pub states_checked: u128,
    pub states_outside: u128,
    pub max_drift_outside: Option<f64>,
    pub max_drift_outside_exact: Option<String>,
    pub argmax_outside: Option<ChainState>,
    pub max_drift_inside: Option<f64>,
    pub argmax_inside: Option<ChainState>,
    /// `state` for enumeration; `slice` (one maximizer per violating
    /// `(i, q_i)` pair) for the structured route.
    pub violation_unit: String,
    pub violations_total: u128,
    pub violations: Vec<Violation>,
    /// Largest disagreement between the two floating-point drift
    /// evaluations, relative to the size of the drift terms.
    pub max_redundancy_gap: Option<f64>,
    /// Exact re-evaluations performed.
    pub exact_checks: u64,
    pub passed: bool,
}

pub fn state_count(n: usize, q_max: u64) -> u128 {
    (q_max as u128 + 1).checked_pow(n as u32).map_or(u128::MAX, |b| b.saturating_mul(n as u128))
}

/// Checks that every state of the box with total queue at least `theta`
/// has drift at most `-1`, and reports the largest drift inside the
/// exception set.
pub fn certify_foster_lyapunov(
    params: &LyapunovParams,
    q_max: u64,
    method: CertifyMethod,
) -> Result<CertificateReport, AnalysisError> {
    let theta = params.theta();
    if (q_max as f64) < theta + 2.0 {
        return Err(AnalysisError::Precondition(format!(
            "q_max = {q_max} is below theta + 2 = {:.6}",
            theta + 2.0
        )));
    }
    let exact = params.exact();
    let total = state_count(params.n(), q_max);
    let method = match method {
        CertifyMethod::Auto if total <= ENUMERATION_LIMIT => CertifyMethod::Enumeration,
        CertifyMethod::Auto => CertifyMethod::Structured,
        m => m,
    };
    let mut report = CertificateReport {
        n: params.n(),
        lambda: params.lambda,
        rates: params.rates.as_slice().to_vec(),
        alpha: params.alpha,
        memory_moves: params.memory_moves,
        theta,
        theta_exact: rational_string(&exact.theta),
        outside_from_total: exact.ceil_theta(),
        q_max,
        method,
        states_checked: total,
        states_outside: count_outside(params.n(), q_max, exact.ceil_theta()),
        max_drift_outside: None,
        max_drift_outside_exact: None,
        argmax_outside: None,
        max_drift_inside: None,
        argmax_inside: None,
        violation_unit: String::new(),
        violations_total: 0,
        violations: Vec::new(),
        max_redundancy_gap: None,
        exact_checks: 0,
        passed: false,
    };
    match method {
        CertifyMethod::Enumeration => enumerate(params, &exact, q_max, &mut report)?,
        _ => structured(params, &exact, q_max, &mut report)?,
    }
    report.passed = report.violations_total == 0;
    Ok(report)
}

/// Number of states in the box with total queue `>= threshold`.
fn count_outside(n: usize, q_max: u64, threshold: u64) -> u128 {
    let width = q_max as usize + 1;
    let mut ways: Vec<u128> = vec![1];
    for _ in 0..n {
        let mut next = vec![0u128; ways.len() + width - 1];
        let mut window = 0u128;
        for s in 0..next.len() {
            if s < ways.len() {
                window += ways[s];
            }
            if s >= width {
                window -= ways[s - width];
            }
            next[s] = window;
        }
        ways = next;
    }
    let outside: u128 = ways.iter().skip(threshold as usize).sum();
    outside * n as u128
}

#[derive(Default)]
struct Partial {
    max_out: Option<(f64, ChainState)>,
    max_in: Option<(f64, ChainState)>,
    violations: Vec<Violation>,
    violations_total: u128,
    max_gap: f64,
    exact_checks: u64,
}

impl Partial {
    fn keep_max(slot: &mut Option<(f64, ChainState)>, d: f64, s: &ChainState) {
        if slot.as_ref().is_none_or(|(best, st)| d > *best || (d == *best && s < st)) {
            *slot = Some((d, s.clone()));
        }
    }

    fn merge(mut self, other: Partial) -> Partial {
        if let Some((d, s)) = other.max_out {
            Self::keep_max(&mut self.max_out, d, &s);
        }
        if let Some((d, s)) = other.max_in {
            Self::keep_max(&mut self.max_in, d, &s);
        }
        self.violations.extend(other.violations);
        self.violations_total += other.violations_total;
        self.max_gap = self.max_gap.max(other.max_gap);
        self.exact_checks += other.exact_checks;
        self
    }
}

fn minus_one() -> BigRational {
    -BigRational::one()
}

fn enumerate(
    params: &LyapunovParams,
    exact: &ExactParams,
    q_max: u64,
    report: &mut CertificateReport,
) -> Result<(), AnalysisError> {
    let n = params.n();
    let threshold = exact.ceil_theta();
    let width = q_max + 1;
    // Blocks: stored server times first queue length.
    let blocks: Vec<(usize, u64)> = (0..n).flat_map(|i| (0..width).map(move |q0| (i, q0))).collect();
    let merged = blocks
        .par_iter()
        .map(|&(i, q0)| {
            let mut part = Partial::default();
            let mut q = vec![0u64; n];
            q[0] = q0;
            loop {
                let state = ChainState { q: q.clone(), i };
                let (d, scale) = drift_direct_with_scale(&state, params);
                let d2 = drift(&state, params);
                let tol = 1e-9 * scale.max(1.0);
                part.max_gap = part.max_gap.max((d - d2).abs() / scale.max(1.0));
                if state.total() >= threshold {
                    let mut value = d;
                    if d > -1.0 - tol {
                        let e = exact.drift(&state);
                        part.exact_checks += 1;
                        value = to_f64(&e);
                        if e > minus_one() {
                            part.violations_total += 1;
                            if part.violations.len() < MAX_LISTED_VIOLATIONS {
                                part.violations.push(Violation {
                                    state: state.clone(),
                                    drift: value,
                                    drift_exact: rational_string(&e),
                                });
                            }
                        }
                    }
                    Partial::keep_max(&mut part.max_out, value, &state);
                } else {
                    Partial::keep_max(&mut part.max_in, d, &state);
                }
                // Odometer over coordinates 1..n.
                let mut k = 1;
                while k < n {
                    if q[k] < q_max {
                        q[k] += 1;
                        break;
                    }
                    q[k] = 0;
                    k += 1;
                }
                if k >= n {
                    break;
                }
            }
            part
        })
        .reduce(Partial::default, Partial::merge);
    finish(report, merged, exact, "state");
    Ok(())
}

fn finish(report: &mut CertificateReport, mut part: Partial, exact: &ExactParams, unit: &str) {
    part.violations.sort_by(|a, b| a.state.cmp(&b.state));
    part.violations.truncate(MAX_LISTED_VIOLATIONS);
    if let Some((_, s)) = &part.max_out {
        let e = exact.drift(s);
        report.max_drift_outside = Some(to_f64(&e));
        report.max_drift_outside_exact = Some(rational_string(&e));
        report.argmax_outside = Some(s.clone());
        part.exact_checks += 1;
    }
    if let Some((d, s)) = part.max_in {
        report.max_drift_inside = Some(d);
        report.argmax_inside = Some(s);
    }
    report.violation_unit = unit.to_string();
    report.violations_total = part.violations_total;
    report.violations = part.violations;
    report.max_redundancy_gap = (unit == "state").then_some(part.max_gap);
    report.exact_checks = part.exact_checks;
}

struct Block {
    server: usize,
    slope: BigRational,
    len: u64,
}

/// Maximum of the drift over the states with stored server `i`,
/// `q_i = a` and `lower <= sum_{j != i} q_j <= upper`, with a maximizer.
fn slice_max(
    exact: &ExactParams,
    n: usize,
    i: usize,
    a: u64,
    q_max: u64,
    lower: u64,
    upper: u64,
) -> (BigRational, ChainState) {
    let busy = a >= 1;
    let mu_i = &exact.rates[i];
    let c = &exact.stored_weight;
    let kappa = &exact.kappa;
    let lam = &exact.arrival_rate;
    let mut value = lam * c + lam * int(2 * a + 1);
    if busy {
        value -= c * mu_i;
        value -= mu_i * (int(2 * a) - BigRational::one());
    }
    let mut blocks = Vec::with_capacity(3 * n);
    for (j, mu) in exact.rates.iter().enumerate() {
        if j == i {
            continue;
        }
        value -= kappa * int(a);
        let mut first = -mu.clone();
        if busy {
            first += kappa;
        }
        blocks.push(Block { server: j, slope: first, len: 1 });
        if a >= 2 {
            blocks.push(Block {
                server: j,
                slope: kappa - mu * int(2),
                len: a - 1,
            });
        }
        blocks.push(Block {
            server: j,
            slope: -(mu * int(2)),
            len: q_max - a.max(1),
        });
    }
    blocks.sort_by(|x, y| y.slope.cmp(&x.slope));
    let mut q = vec![0u64; n];
    q[i] = a;
    let mut taken = 0u64;
    for b in &blocks {
        let want = if b.slope > BigRational::zero() {
            upper.saturating_sub(taken)
        } else {
            lower.saturating_sub(taken)
        };
        let t = want.min(b.len);
        if t == 0 {
            if taken >= lower && b.slope <= BigRational::zero() {
                break;
            }
            continue;
        }
        value += &b.slope * int(t);
        q[b.server] += t;
        taken += t;
    }
    (value, ChainState { q, i })
}

fn structured(
    params: &LyapunovParams,
    exact: &ExactParams,
    q_max: u64,
    report: &mut CertificateReport,
) -> Result<(), AnalysisError> {
    let n = params.n();
    let threshold = exact.ceil_theta();
    let span = (n as u64 - 1) * q_max;
    let slices: Vec<(usize, u64)> = (0..n).flat_map(|i| (0..=q_max).map(move |a| (i, a))).collect();
    let results: Vec<Result<Partial, AnalysisError>> = slices
        .par_iter()
        .map(|&(i, a)| {
            let mut part = Partial::default();
            let lower = threshold.saturating_sub(a);
            if lower <= span {
                let (value, state) = slice_max(exact, n, i, a, q_max, lower, span);
                let check = exact.drift(&state);
                part.exact_checks += 1;
                if check != value {
                    return Err(AnalysisError::Solve(format!(
                        "slice maximizer {state} disagrees with the transition sum"
                    )));
                }
                let d = to_f64(&value);
                if value > minus_one() {
                    part.violations_total += 1;
                    part.violations.push(Violation {
                        state: state.clone(),
                        drift: d,
                        drift_exact: rational_string(&value),
                    });
                }
                Partial::keep_max(&mut part.max_out, d, &state);
            }
            if a < threshold {
                let upper = (threshold - 1 - a).min(span);
                let (value, state) = slice_max(exact, n, i, a, q_max, 0, upper);
                Partial::keep_max(&mut part.max_in, to_f64(&value), &state);
            }
            Ok(part)
        })
        .collect();
    let mut merged = Partial::default();
    for r in results {
        merged = merged.merge(r?);
    }
    finish(report, merged, exact, "slice");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::RateVector;

    fn canonical() -> LyapunovParams {
        LyapunovParams::new(0.5, RateVector::homogeneous(2).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn canonical_chain_certifies_both_ways() {
        for m in [CertifyMethod::Enumeration, CertifyMethod::Structured] {
            let r = certify_foster_lyapunov(&canonical(), 12, m).unwrap();
            assert!(r.passed, "{m:?}: {r:?}");
            assert_eq!(r.theta, 6.0);
            assert_eq!(r.states_checked, 2 * 13 * 13);
            assert!(r.max_drift_outside.unwrap() <= -1.0);
            assert!(r.max_drift_inside.unwrap().is_finite());
        }
    }

    #[test]
    fn precondition_on_box_size() {
        assert!(matches!(
            certify_foster_lyapunov(&canonical(), 7, CertifyMethod::Auto),
            Err(AnalysisError::Precondition(_))
        ));
        assert!(certify_foster_lyapunov(&canonical(), 8, CertifyMethod::Auto).is_ok());
    }

    #[test]
    fn broken_chain_fails() {
        let p = canonical().without_memory_moves();
        for m in [CertifyMethod::Enumeration, CertifyMethod::Structured] {
            let r = certify_foster_lyapunov(&p, 12, m).unwrap();
            assert!(!r.passed);
            assert!(r.violations_total > 0);
            assert!(r.violations.iter().all(|v| v.drift > -1.0));
        }
    }

    #[test]
    fn outside_count_matches_brute_force() {
        let mut brute = 0u128;
        for a in 0..=5u64 {
            for b in 0..=5u64 {
                for c in 0..=5u64 {
                    if a + b + c >= 7 {
                        brute += 1;
                    }
                }
            }
        }
        assert_eq!(count_outside(3, 5, 7), 3 * brute);
    }

    /// The structured maximum of every slice equals the brute-force maximum.
    #[test]
    fn slice_max_matches_brute_force() {
        let rates = crate::types::make_slow_half_rates(3, 0.3).unwrap();
        for moves in [true, false] {
            let mut p = LyapunovParams::new(0.7, rates.clone(), 0.4).unwrap();
            p.memory_moves = moves;
            let e = p.exact();
            let q_max = 9u64;
            for i in 0..3 {
                for a in 0..=q_max {
                    for (lo, hi) in [(0u64, 18u64), (5, 18), (0, 4), (12, 18), (7, 7)] {
                        let mut best: Option<BigRational> = None;
                        for x in 0..=q_max {
                            for y in 0..=q_max {
                                if x + y < lo || x + y > hi {
                                    continue;
                                }
                                let mut q = vec![0; 3];
                                q[i] = a;
                                let others: Vec<usize> = (0..3).filter(|&j| j != i).collect();
                                q[others[0]] = x;
                                q[others[1]] = y;
                                let d = e.drift(&ChainState { q, i });
                                if best.as_ref().is_none_or(|b| d > *b) {
                                    best = Some(d);
                                }
                            }
                        }
                        let (v, s) = slice_max(&e, 3, i, a, q_max, lo, hi);
                        assert_eq!(Some(v.clone()), best, "i={i} a={a} [{lo},{hi}] moves={moves}");
                        assert_eq!(e.drift(&s), v);
                    }
                }
            }
        }
    }
}
