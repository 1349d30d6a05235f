use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("rate vector is empty")]
    EmptyRates,
    #[error("rate {value} at server {index} is not strictly positive")]
    NonPositiveRate { index: usize, value: f64 },
    #[error("rates sum to {sum}, expected {expected} (tolerance 1e-9)")]
    RateSum { sum: f64, expected: f64 },
    #[error("workload {0} is not strictly positive")]
    NonPositiveWorkload(f64),
    #[error("memory value {value} outside 1..={max} for a {bits}-bit budget")]
    MemoryOutOfRange { value: u128, bits: u32, max: u128 },
    #[error("memory budget of {0} bits is not supported (max 127)")]
    MemoryBudgetTooLarge(u32),
    #[error("system state has {queues} queues but {servers} servers")]
    QueueCount { queues: usize, servers: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: invalid value for `{key}`: {message}")]
    Value {
        line: usize,
        key: String,
        message: String,
    },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}` (first set on line {first})")]
    Duplicate {
        line: usize,
        key: String,
        first: usize,
    },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("invalid scenario: {0}")]
    Model(#[from] ModelError),
}

/// Raised when a decision function breaks its contract mid-run.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyViolation {
    #[error("{function} returned server {index}, outside 1..={n}")]
    ServerOutOfRange {
        function: &'static str,
        index: usize,
        n: usize,
    },
    #[error("{function} returned a set with a repeated server {index}")]
    RepeatedServer { function: &'static str, index: usize },
    #[error("{function} returned memory {value}, outside 1..={max}")]
    MemoryOutOfRange {
        function: &'static str,
        value: u128,
        max: u128,
    },
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("policy contract violation at t={time}: {violation}")]
    Policy {
        time: f64,
        violation: PolicyViolation,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("policy `{0}` is not known")]
    UnknownPolicy(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("window [{t1}, {t2}] is empty or inverted")]
    EmptyWindow { t1: f64, t2: f64 },
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("linear solve failed: {0}")]
    Solve(String),
}
