//! Simulation, accounting and stability verification for dispatching
//! policies in server farms with heterogeneous service rates.
//!
//! The crate is organised around a pluggable policy contract
//! ([`policy::DispatchPolicy`]): eight pure decision functions and a memory
//! budget in bits. The [`engine`] runs any such policy as a discrete-event
//! simulation, [`ledger`] and [`metrics`] turn runs into message rates and
//! workload-drift diagnostics, and [`ctmc`] builds the exact Markov chain of
//! the stored-ID policy to certify a Lyapunov drift condition and to
//! compute stationary distributions.

pub mod audit;
pub mod config;
pub mod ctmc;
pub mod dist;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod ledger;
pub mod metrics;
pub mod policy;
pub mod rng;
pub mod stats;
pub mod types;

pub use config::ScenarioConfig;
pub use engine::{replications, run, run_config, EventKind, EventRecord, MessageCounters, Observer, Simulator};
pub use error::{AnalysisError, ConfigError, ModelError, PolicyViolation, SimError};
pub use ledger::RunLedger;
pub use policy::{build_policy, DispatchPolicy, PolicySpec, ServerSet};
pub use types::{make_slow_half_rates, total_workload, MemoryState, QueueState, RateVector, SystemState};
