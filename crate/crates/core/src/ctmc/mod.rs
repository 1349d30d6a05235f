//! Exact Markov chain of the stored-ID policy (Poisson arrivals,
//! exponential unit-mean sizes): transitions, Lyapunov drift, a drift
//! certificate and a truncated stationary solver.

mod certify;
mod chain;
mod stationary;

pub use certify::{
    certify_foster_lyapunov, state_count, CertificateReport, CertifyMethod, Violation, ENUMERATION_LIMIT,
    MAX_LISTED_VIOLATIONS,
};
pub use chain::{
    drift, drift_direct, drift_direct_with_scale, lyapunov_value, rational_string, transition_rates,
    ChainState, ExactParams, LyapunovParams,
};
pub use stationary::{
    stationary_distribution, stationary_distribution_with, StateIndexer, StationaryDistribution,
};
