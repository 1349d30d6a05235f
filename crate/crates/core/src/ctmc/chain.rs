//! The stored-ID chain on `(queue lengths, stored server)` under Poisson
//! arrivals and exponential unit-mean job sizes.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::types::RateVector;

/// Queue lengths and the stored server (zero-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChainState {
    pub q: Vec<u64>,
    pub i: usize,
}

impl ChainState {
    pub fn new(q: Vec<u64>, i: usize) -> Result<Self, ModelError> {
        if i >= q.len() {
            return Err(ModelError::InvalidParameter(format!(
                "stored server {} outside 1..={}",
                i + 1,
                q.len()
            )));
        }
        Ok(ChainState { q, i })
    }

    pub fn total(&self) -> u64 {
        self.q.iter().sum()
    }
}

impl fmt::Display for ChainState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(q=(")?;
        for (k, v) in self.q.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "), i={})", self.i + 1)
    }
}

/// Parameters of the chain and of the Lyapunov function
/// `(2 mu_max / alpha) q_i + sum_j q_j^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovParams {
    pub lambda: f64,
    pub rates: RateVector,
    pub alpha: f64,
    /// When false the memory never moves (a deliberately broken chain).
    pub memory_moves: bool,
}

impl LyapunovParams {
    pub fn new(lambda: f64, rates: RateVector, alpha: f64) -> Result<Self, ModelError> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(ModelError::InvalidParameter(format!("lambda must lie in (0, 1), got {lambda}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        Ok(LyapunovParams {
            lambda,
            rates,
            alpha,
            memory_moves: true,
        })
    }

    pub fn without_memory_moves(mut self) -> Self {
        self.memory_moves = false;
        self
    }

    pub fn n(&self) -> usize {
        self.rates.len()
    }

    pub fn arrival_rate(&self) -> f64 {
        self.lambda * self.n() as f64
    }

    pub fn mu_min(&self) -> f64 {
        self.rates.min()
    }

    pub fn mu_max(&self) -> f64 {
        self.rates.max()
    }

    fn move_rate(&self) -> f64 {
        if self.memory_moves {
            self.alpha
        } else {
            0.0
        }
    }

    /// Weight of the stored queue in the Lyapunov function.
    pub fn stored_weight(&self) -> f64 {
        2.0 * self.mu_max() / self.alpha
    }

    /// Total-queue threshold of the exception set.
    pub fn theta(&self) -> f64 {
        let n = self.n() as f64;
        (self.arrival_rate() * (1.0 + self.stored_weight()) + n + 1.0)
            / (2.0 * (1.0 - self.lambda).min(self.mu_min()))
    }

    pub fn exact(&self) -> ExactParams {
        ExactParams::new(self)
    }
}

/// Outgoing transitions of `state`. Every rate is strictly positive.
pub fn transition_rates(state: &ChainState, params: &LyapunovParams) -> Vec<(ChainState, f64)> {
    let n = state.q.len();
    let mut out = Vec::with_capacity(2 * n + 1);
    let mut up = state.clone();
    up.q[state.i] += 1;
    out.push((up, params.arrival_rate()));
    for j in 0..n {
        if state.q[j] >= 1 {
            let mut down = state.clone();
            down.q[j] -= 1;
            out.push((down, params.rates.get(j)));
        }
    }
    let alpha = params.move_rate();
    if alpha > 0.0 {
        for j in 0..n {
            if j != state.i && state.q[j] < state.q[state.i] {
                out.push((ChainState { q: state.q.clone(), i: j }, alpha));
            }
        }
    }
    out
}

pub fn lyapunov_value(state: &ChainState, params: &LyapunovParams) -> f64 {
    params.stored_weight() * state.q[state.i] as f64 + state.q.iter().map(|&x| (x * x) as f64).sum::<f64>()
}

/// Generator applied to the Lyapunov function, by summing over transitions.
pub fn drift(state: &ChainState, params: &LyapunovParams) -> f64 {
    let v = lyapunov_value(state, params);
    transition_rates(state, params)
        .iter()
        .map(|(s, r)| r * (lyapunov_value(s, params) - v))
        .sum()
}

/// Closed-form drift, together with the sum of the absolute values of its
/// terms (a scale for rounding error).
pub fn drift_direct_with_scale(state: &ChainState, params: &LyapunovParams) -> (f64, f64) {
    let c = params.stored_weight();
    let kappa = c * params.move_rate();
    let ln = params.arrival_rate();
    let qi = state.q[state.i];
    let mut terms = [0.0f64; 5];
    terms[0] = ln * c;
    terms[2] = ln * (2.0 * qi as f64 + 1.0);
    let mu_i = params.rates.get(state.i);
    if qi >= 1 {
        terms[1] = -c * mu_i;
    }
    for (j, &qj) in state.q.iter().enumerate() {
        if qj < qi {
            terms[3] -= kappa * (qi - qj) as f64;
        }
        if qj >= 1 {
            terms[4] -= params.rates.get(j) * (2.0 * qj as f64 - 1.0);
        }
    }
    let scale = terms.iter().map(|t| t.abs()).sum();
    (terms.iter().sum(), scale)
}

pub fn drift_direct(state: &ChainState, params: &LyapunovParams) -> f64 {
    drift_direct_with_scale(state, params).0
}

/// The chain parameters as exact rationals (each `f64` converted without
/// rounding).
#[derive(Debug, Clone)]
pub struct ExactParams {
    pub arrival_rate: BigRational,
    pub rates: Vec<BigRational>,
    pub move_rate: BigRational,
    pub stored_weight: BigRational,
    pub kappa: BigRational,
    pub theta: BigRational,
}

pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

pub fn int(x: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

impl ExactParams {
    fn new(p: &LyapunovParams) -> Self {
        let n = p.n() as u64;
        let lambda = rational(p.lambda);
        let rates: Vec<BigRational> = p.rates.as_slice().iter().map(|&m| rational(m)).collect();
        let alpha = rational(p.alpha);
        let mu_max = rates.iter().max().cloned().expect("nonempty");
        let mu_min = rates.iter().min().cloned().expect("nonempty");
        let two = int(2);
        let stored_weight = &two * &mu_max / &alpha;
        let move_rate = if p.memory_moves { alpha } else { BigRational::zero() };
        let kappa = &stored_weight * &move_rate;
        let arrival_rate = &lambda * int(n);
        let one = BigRational::one();
        let gap = std::cmp::min(&one - &lambda, mu_min);
        let theta = (&arrival_rate * (&one + &stored_weight) + int(n) + &one) / (&two * gap);
        ExactParams {
            arrival_rate,
            rates,
            move_rate,
            stored_weight,
            kappa,
            theta,
        }
    }

    /// Smallest integer total queue length outside the exception set.
    pub fn ceil_theta(&self) -> u64 {
        let c = self.theta.ceil().to_integer();
        u64::try_from(c).unwrap_or(u64::MAX)
    }

    fn value(&self, state: &ChainState) -> BigRational {
        let mut v = &self.stored_weight * int(state.q[state.i]);
        for &x in &state.q {
            v += int(x * x);
        }
        v
    }

    /// Exact drift by summing over transitions.
    pub fn drift(&self, state: &ChainState) -> BigRational {
        let n = state.q.len();
        let v = self.value(state);
        let mut d = BigRational::zero();
        let mut next = state.clone();
        next.q[state.i] += 1;
        d += &self.arrival_rate * (self.value(&next) - &v);
        for j in 0..n {
            if state.q[j] >= 1 {
                let mut next = state.clone();
                next.q[j] -= 1;
                d += &self.rates[j] * (self.value(&next) - &v);
            }
        }
        if !self.move_rate.is_zero() {
            for j in 0..n {
                if j != state.i && state.q[j] < state.q[state.i] {
                    let next = ChainState { q: state.q.clone(), i: j };
                    d += &self.move_rate * (self.value(&next) - &v);
                }
            }
        }
        d
    }
}

/// Renders a rational as `p/q` (or `p`).
pub fn rational_string(x: &BigRational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn to_f64(x: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(if x.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}
