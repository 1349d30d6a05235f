//! Scenario files: flat `key = value` text, one key per line.
//!
//! ```text
//! # comments start with '#'
//! name = slow_half_demo
//! n = 10
//! lambda = 0.9
//! interarrival = exp            # exp | det | uniform | pareto
//! job_size = exp                # same tags; pareto takes job_size.shape / job_size.ratio
//! rates = slow_half:0.05        # uniform | slow_half:<eps> | comma-separated list
//! policy = stored_id            # see POLICY_IDS
//! policy.alpha = 0.5
//! horizon = 100000
//! warmup = 0.2                  # fraction of the horizon
//! sample_period = 10
//! seed = 42
//! seed.arrivals = 7             # optional per-source override
//! initial_memory = 1            # or `random`
//! sweep.epsilon = 0.05, 0.5     # sweep axes: epsilon, alpha, lambda, n, policy
//! ```
//!
//! Required keys: `n`, `lambda`, `policy`, `horizon`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dist::UnitDist;
use crate::error::ConfigError;
use crate::policy::{PolicyKind, PolicySpec};
use crate::rng::{Source, SourceSeeds};
use crate::types::{make_slow_half_rates, RateVector};

pub const DEFAULT_WARMUP: f64 = 0.2;

/// Number of ledger observations per run when no period is given.
pub const DEFAULT_SAMPLES: f64 = 10_000.0;

const REQUIRED: [&str; 4] = ["n", "lambda", "policy", "horizon"];

const KNOWN: [&str; 20] = [
    "name",
    "n",
    "lambda",
    "interarrival",
    "interarrival.shape",
    "interarrival.ratio",
    "job_size",
    "job_size.shape",
    "job_size.ratio",
    "rates",
    "policy",
    "policy.alpha",
    "policy.d",
    "horizon",
    "warmup",
    "sample_period",
    "seed",
    "initial_memory",
    "sweep.epsilon",
    "sweep.alpha",
];

const KNOWN_SWEEP: [&str; 3] = ["sweep.lambda", "sweep.n", "sweep.policy"];

/// How the rate vector was specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RatesSpec {
    Uniform,
    SlowHalf { epsilon: f64 },
    Explicit { rates: Vec<f64> },
}

impl RatesSpec {
    pub fn build(&self, n: usize) -> Result<RateVector, crate::error::ModelError> {
        match self {
            RatesSpec::Uniform => RateVector::homogeneous(n),
            RatesSpec::SlowHalf { epsilon } => make_slow_half_rates(n, *epsilon),
            RatesSpec::Explicit { rates } => {
                if rates.len() != n {
                    return Err(crate::error::ModelError::InvalidParameter(format!(
                        "{} rates given for n = {n}",
                        rates.len()
                    )));
                }
                RateVector::new(rates.clone())
            }
        }
    }

    fn to_value(&self) -> String {
        match self {
            RatesSpec::Uniform => "uniform".into(),
            RatesSpec::SlowHalf { epsilon } => format!("slow_half:{epsilon}"),
            RatesSpec::Explicit { rates } => rates
                .iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join(", "),
        }
    }

    fn parse(value: &str) -> Result<Self, String> {
        if value == "uniform" {
            return Ok(RatesSpec::Uniform);
        }
        if let Some(eps) = value.strip_prefix("slow_half:") {
            let epsilon = eps
                .trim()
                .parse()
                .map_err(|_| format!("slow_half rate `{eps}` is not a number"))?;
            return Ok(RatesSpec::SlowHalf { epsilon });
        }
        let rates = parse_list::<f64>(value)?;
        Ok(RatesSpec::Explicit { rates })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialMemory {
    Value(u128),
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub n: usize,
    pub lambda: f64,
    pub interarrival: UnitDist,
    pub job_size: UnitDist,
    pub rates_spec: RatesSpec,
    pub rates: RateVector,
    pub policy: PolicySpec,
    pub horizon: f64,
    pub warmup: f64,
    pub sample_period: Option<f64>,
    pub seed: u64,
    pub seed_overrides: BTreeMap<Source, u64>,
    pub initial_memory: InitialMemory,
}

impl ScenarioConfig {
    /// A validated config with defaults for everything optional.
    pub fn new(
        n: usize,
        lambda: f64,
        rates_spec: RatesSpec,
        policy: PolicySpec,
        horizon: f64,
    ) -> Result<Self, ConfigError> {
        let rates = rates_spec.build(n)?;
        let config = ScenarioConfig {
            name: "scenario".into(),
            n,
            lambda,
            interarrival: UnitDist::Exp,
            job_size: UnitDist::Exp,
            rates_spec,
            rates,
            policy,
            horizon,
            warmup: DEFAULT_WARMUP,
            sample_period: None,
            seed: 0,
            seed_overrides: BTreeMap::new(),
            initial_memory: InitialMemory::Value(1),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        use crate::error::ModelError::InvalidParameter as Bad;
        if self.n == 0 {
            return Err(Bad("n must be at least 1".into()).into());
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Bad(format!("lambda must lie in (0, 1), got {}", self.lambda)).into());
        }
        if self.rates.len() != self.n {
            return Err(Bad(format!("{} rates for n = {}", self.rates.len(), self.n)).into());
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Bad(format!("horizon must be positive, got {}", self.horizon)).into());
        }
        if !(0.0..1.0).contains(&self.warmup) {
            return Err(Bad(format!("warmup must lie in [0, 1), got {}", self.warmup)).into());
        }
        if let Some(p) = self.sample_period {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Bad(format!("sample_period must be positive, got {p}")).into());
            }
        }
        self.job_size.check_unit_mean()?;
        self.interarrival.check_unit_mean()?;
        self.policy.validate(self.n)?;
        Ok(())
    }

    pub fn arrival_rate(&self) -> f64 {
        self.lambda * self.n as f64
    }

    pub fn warmup_end(&self) -> f64 {
        self.warmup * self.horizon
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period.unwrap_or(self.horizon / DEFAULT_SAMPLES)
    }

    pub fn source_seeds(&self) -> SourceSeeds {
        let mut seeds = SourceSeeds::from_master(self.seed);
        for (&source, &seed) in &self.seed_overrides {
            seeds.set(source, seed);
        }
        seeds
    }

    /// Same scenario under another master seed. Per-source overrides are
    /// dropped so that replications stay independent.
    pub fn with_seed(&self, seed: u64) -> Self {
        ScenarioConfig {
            seed,
            seed_overrides: BTreeMap::new(),
            ..self.clone()
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let doc = Document::parse(text)?;
        Self::from_document(&doc)
    }

    fn from_document(doc: &Document) -> Result<Self, ConfigError> {
        for key in REQUIRED {
            if !doc.entries.contains_key(key) {
                return Err(ConfigError::Missing(key.into()));
            }
        }
        let name = doc.get("name").map_or("scenario".to_string(), |(v, _)| v.to_string());
        if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
            let line = doc.line("name");
            return Err(doc.value_error("name", line, "must be a nonempty single path component"));
        }
        let n: usize = doc.parse_value("n")?;
        let lambda: f64 = doc.parse_value("lambda")?;
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(doc.value_error("lambda", doc.line("lambda"), "must lie in (0, 1)"));
        }
        let interarrival = doc.dist("interarrival")?;
        let job_size = doc.dist("job_size")?;

        let rates_spec = match doc.get("rates") {
            None => RatesSpec::Uniform,
            Some((v, line)) => RatesSpec::parse(v).map_err(|m| doc.value_error("rates", line, &m))?,
        };
        let rates = rates_spec
            .build(n)
            .map_err(|e| doc.value_error("rates", doc.line("rates"), &e.to_string()))?;

        let (policy_id, policy_line) = doc.get("policy").expect("checked above");
        let mut params = BTreeMap::new();
        for key in ["alpha", "d"] {
            if let Some((v, _)) = doc.get(&format!("policy.{key}")) {
                params.insert(key.to_string(), v.to_string());
            }
        }
        let policy = PolicySpec::parse(policy_id, &params)
            .map_err(|m| doc.value_error("policy", policy_line, &m))?;
        policy
            .validate(n)
            .map_err(|e| doc.value_error("policy", policy_line, &e.to_string()))?;

        let horizon: f64 = doc.parse_value("horizon")?;
        let warmup: f64 = doc.parse_or("warmup", DEFAULT_WARMUP)?;
        let sample_period: Option<f64> = doc.parse_opt("sample_period")?;
        let seed: u64 = doc.parse_or("seed", 0)?;

        let mut seed_overrides = BTreeMap::new();
        for (key, (value, line)) in &doc.entries {
            if let Some(source) = key.strip_prefix("seed.") {
                let source = Source::from_key(source)
                    .ok_or_else(|| ConfigError::UnknownKey { line: *line, key: key.clone() })?;
                let seed = value
                    .parse()
                    .map_err(|_| doc.value_error(key, *line, "not an unsigned integer"))?;
                seed_overrides.insert(source, seed);
            }
        }

        let initial_memory = match doc.get("initial_memory") {
            None => InitialMemory::Value(1),
            Some(("random", _)) => InitialMemory::Random,
            Some((v, line)) => InitialMemory::Value(v.parse().map_err(|_| {
                doc.value_error("initial_memory", line, "expected a positive integer or `random`")
            })?),
        };

        let config = ScenarioConfig {
            name,
            n,
            lambda,
            interarrival,
            job_size,
            rates_spec,
            rates,
            policy,
            horizon,
            warmup,
            sample_period,
            seed,
            seed_overrides,
            initial_memory,
        };
        // remaining range checks, reported against the first offending key
        if let Err(e) = config.validate() {
            let key = ["horizon", "warmup", "sample_period"]
                .into_iter()
                .find(|k| e.to_string().contains(k));
            return Err(match key {
                Some(k) => doc.value_error(k, doc.line(k), &e.to_string()),
                None => e,
            });
        }
        Ok(config)
    }

    /// Serializes back to the key/value format. Sweep axes are not included.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("name", self.name.clone());
        put("n", self.n.to_string());
        put("lambda", self.lambda.to_string());
        for (key, dist) in [("interarrival", &self.interarrival), ("job_size", &self.job_size)] {
            put(key, dist.tag().into());
            if let UnitDist::Pareto { shape, ratio, .. } = dist {
                put(&format!("{key}.shape"), shape.to_string());
                put(&format!("{key}.ratio"), ratio.to_string());
            }
        }
        put("rates", self.rates_spec.to_value());
        put("policy", self.policy.kind.id().into());
        if let Some(a) = self.policy.alpha {
            put("policy.alpha", a.to_string());
        }
        if let Some(d) = self.policy.d {
            put("policy.d", d.to_string());
        }
        put("horizon", self.horizon.to_string());
        put("warmup", self.warmup.to_string());
        if let Some(p) = self.sample_period {
            put("sample_period", p.to_string());
        }
        put("seed", self.seed.to_string());
        for (source, seed) in &self.seed_overrides {
            put(&format!("seed.{}", source.key()), seed.to_string());
        }
        put(
            "initial_memory",
            match self.initial_memory {
                InitialMemory::Value(v) => v.to_string(),
                InitialMemory::Random => "random".into(),
            },
        );
        out
    }
}

/// Axes of a parameter sweep. Points are the cartesian product of the
/// axes that are present; with no axes the grid is empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub epsilon: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub n: Option<Vec<usize>>,
    pub policy: Option<Vec<PolicySpec>>,
}

/// One grid point, applied on top of a base scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub epsilon: Option<f64>,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub n: Option<usize>,
    pub policy: Option<PolicySpec>,
}

impl SweepGrid {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let doc = Document::parse(text)?;
        let mut grid = SweepGrid::default();
        if let Some((v, line)) = doc.get("sweep.epsilon") {
            grid.epsilon = Some(parse_list(v).map_err(|m| doc.value_error("sweep.epsilon", line, &m))?);
        }
        if let Some((v, line)) = doc.get("sweep.alpha") {
            grid.alpha = Some(parse_list(v).map_err(|m| doc.value_error("sweep.alpha", line, &m))?);
        }
        if let Some((v, line)) = doc.get("sweep.lambda") {
            grid.lambda = Some(parse_list(v).map_err(|m| doc.value_error("sweep.lambda", line, &m))?);
        }
        if let Some((v, line)) = doc.get("sweep.n") {
            grid.n = Some(parse_list(v).map_err(|m| doc.value_error("sweep.n", line, &m))?);
        }
        if let Some((v, line)) = doc.get("sweep.policy") {
            let mut specs = Vec::new();
            for label in split_list(v) {
                specs.push(parse_policy_label(label).map_err(|m| doc.value_error("sweep.policy", line, &m))?);
            }
            grid.policy = Some(specs);
        }
        Ok(grid)
    }

    pub fn is_empty(&self) -> bool {
        self.points().is_empty()
    }

    pub fn points(&self) -> Vec<SweepPoint> {
        if self.epsilon.is_none()
            && self.alpha.is_none()
            && self.lambda.is_none()
            && self.n.is_none()
            && self.policy.is_none()
        {
            return Vec::new();
        }
        fn axis<T: Clone>(a: &Option<Vec<T>>) -> Vec<Option<T>> {
            match a {
                None => vec![None],
                Some(v) => v.iter().cloned().map(Some).collect(),
            }
        }
        let mut points = Vec::new();
        for policy in axis(&self.policy) {
            for n in axis(&self.n) {
                for lambda in axis(&self.lambda) {
                    for alpha in axis(&self.alpha) {
                        for epsilon in axis(&self.epsilon) {
                            points.push(SweepPoint {
                                epsilon,
                                alpha,
                                lambda,
                                n,
                                policy: policy.clone(),
                            });
                        }
                    }
                }
            }
        }
        points
    }
}

impl SweepPoint {
    /// Applies this point to `base`, validating the result.
    pub fn apply(&self, base: &ScenarioConfig) -> Result<ScenarioConfig, ConfigError> {
        let mut c = base.clone();
        if let Some(n) = self.n {
            c.n = n;
        }
        if let Some(lambda) = self.lambda {
            c.lambda = lambda;
        }
        if let Some(policy) = &self.policy {
            let mut p = policy.clone();
            // keep base parameters the label did not set
            p.alpha = p.alpha.or(base.policy.alpha);
            p.d = p.d.or(base.policy.d);
            c.policy = p;
        }
        if let Some(alpha) = self.alpha {
            c.policy.alpha = Some(alpha);
        }
        if let Some(epsilon) = self.epsilon {
            c.rates_spec = RatesSpec::SlowHalf { epsilon };
        }
        c.rates = c.rates_spec.build(c.n)?;
        c.name = format!("{}-{}", base.name, self.slug());
        c.validate()?;
        Ok(c)
    }

    /// Filesystem-safe label such as `sq_d2_eps0.05`.
    pub fn slug(&self) -> String {
        let mut parts = Vec::new();
        if let Some(p) = &self.policy {
            parts.push(p.label().replace(':', ""));
        }
        if let Some(n) = self.n {
            parts.push(format!("n{n}"));
        }
        if let Some(l) = self.lambda {
            parts.push(format!("lam{l}"));
        }
        if let Some(a) = self.alpha {
            parts.push(format!("alpha{a}"));
        }
        if let Some(e) = self.epsilon {
            parts.push(format!("eps{e}"));
        }
        parts.join("_")
    }
}

/// `sq_d:2` style label; a bare id uses the base parameters.
pub fn parse_policy_label(label: &str) -> Result<PolicySpec, String> {
    let (id, d) = match label.split_once(':') {
        Some((id, d)) => (id, Some(d.parse::<usize>().map_err(|_| format!("bad d in `{label}`"))?)),
        None => (label, None),
    };
    let kind = PolicyKind::from_id(id).ok_or_else(|| format!("unknown policy `{id}`"))?;
    Ok(PolicySpec {
        kind,
        alpha: None,
        d,
    })
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>, String> {
    split_list(value)
        .map(|s| s.parse::<T>().map_err(|_| format!("cannot parse `{s}`")))
        .collect()
}

/// Raw parsed lines: key -> (value, line number).
struct Document {
    entries: BTreeMap<String, (String, usize)>,
}

impl Document {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, (String, usize)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    message: "empty key".into(),
                });
            }
            let known = KNOWN.contains(&key) || KNOWN_SWEEP.contains(&key) || key.starts_with("seed.");
            if !known {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.into(),
                });
            }
            if let Some((_, first)) = entries.get(key) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.into(),
                    first: *first,
                });
            }
            entries.insert(key.to_string(), (value.to_string(), line));
        }
        Ok(Document { entries })
    }

    fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.entries.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |(_, l)| *l)
    }

    fn value_error(&self, key: &str, line: usize, message: &str) -> ConfigError {
        ConfigError::Value {
            line,
            key: key.into(),
            message: message.into(),
        }
    }

    fn parse_value<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        match self.get(key) {
            None => Err(ConfigError::Missing(key.into())),
            Some((v, line)) => v
                .parse()
                .map_err(|_| self.value_error(key, line, &format!("cannot parse `{v}`"))),
        }
    }

    fn parse_opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(_) => self.parse_value(key).map(Some),
        }
    }

    fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.parse_opt(key)?.unwrap_or(default))
    }

    fn dist(&self, key: &str) -> Result<UnitDist, ConfigError> {
        let Some((tag, line)) = self.get(key) else {
            return Ok(UnitDist::Exp);
        };
        match tag {
            "exp" => Ok(UnitDist::Exp),
            "det" => Ok(UnitDist::Det),
            "uniform" => Ok(UnitDist::Uniform),
            "pareto" => {
                let shape: f64 = self.parse_or(&format!("{key}.shape"), 2.5)?;
                let ratio: f64 = self.parse_or(&format!("{key}.ratio"), 100.0)?;
                UnitDist::pareto(shape, ratio).map_err(|e| self.value_error(key, line, &e.to_string()))
            }
            other => Err(self.value_error(
                key,
                line,
                &format!("unknown distribution `{other}` (expected exp, det, uniform, pareto)"),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "n = 4\nlambda = 0.5\npolicy = stored_id\npolicy.alpha = 1\nhorizon = 100\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ScenarioConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.n, 4);
        assert_eq!(c.rates.as_slice(), &[1.0; 4]);
        assert_eq!(c.warmup, 0.2);
        assert_eq!(c.job_size, UnitDist::Exp);
        assert_eq!(c.sample_period(), 0.01);
        assert_eq!(c.initial_memory, InitialMemory::Value(1));
    }

    #[test]
    fn missing_lambda_is_named() {
        let err = ScenarioConfig::parse("n = 4\npolicy = uniform\nhorizon = 10\n").unwrap_err();
        assert_eq!(err, ConfigError::Missing("lambda".into()));
        assert!(err.to_string().contains("lambda"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "n = 4\nlambda = 1.5\npolicy = uniform\nhorizon = 10\n";
        match ScenarioConfig::parse(text).unwrap_err() {
            ConfigError::Value { line, key, .. } => {
                assert_eq!(line, 2);
                assert_eq!(key, "lambda");
            }
            e => panic!("unexpected {e:?}"),
        }
        let text = "n = 4\nlambda = 0.5\npolicy = uniform\nhorizon = 10\nbogus = 3\n";
        assert_eq!(
            ScenarioConfig::parse(text).unwrap_err(),
            ConfigError::UnknownKey { line: 5, key: "bogus".into() }
        );
        let text = "n = 4\nn = 5\n";
        assert!(matches!(
            ScenarioConfig::parse(text).unwrap_err(),
            ConfigError::Duplicate { line: 2, first: 1, .. }
        ));
        let text = "n = 4\nlambda 0.5\n";
        assert!(matches!(
            ScenarioConfig::parse(text).unwrap_err(),
            ConfigError::Syntax { line: 2, .. }
        ));
        let text = "n = 4\nlambda = 0.5\npolicy = sq_d\nhorizon = 10\n";
        assert!(matches!(
            ScenarioConfig::parse(text).unwrap_err(),
            ConfigError::Value { line: 3, .. }
        ));
        let text = "n = 4\nlambda = 0.5\npolicy = uniform\nhorizon = 10\nrates = 1, 1, 1\n";
        assert!(matches!(
            ScenarioConfig::parse(text).unwrap_err(),
            ConfigError::Value { line: 5, .. }
        ));
    }

    #[test]
    fn rates_forms() {
        let c = ScenarioConfig::parse(&format!("{MINIMAL}rates = slow_half:0.1\n")).unwrap();
        assert!((c.rates.get(3) - 1.9).abs() < 1e-12);
        let c = ScenarioConfig::parse(&format!("{MINIMAL}rates = 0.5, 0.5, 1.5, 1.5\n")).unwrap();
        assert_eq!(c.rates.as_slice(), &[0.5, 0.5, 1.5, 1.5]);
        assert!(ScenarioConfig::parse(&format!("{MINIMAL}rates = 0.5, 0.5, 1.5, 1.0\n")).is_err());
    }

    #[test]
    fn seed_overrides() {
        let c = ScenarioConfig::parse(&format!("{MINIMAL}seed = 9\nseed.u4 = 77\n")).unwrap();
        let seeds = c.source_seeds();
        assert_eq!(seeds.get(Source::U4), 77);
        assert_eq!(seeds.get(Source::U3), SourceSeeds::from_master(9).get(Source::U3));
        assert!(ScenarioConfig::parse(&format!("{MINIMAL}seed.u9 = 1\n")).is_err());
    }

    #[test]
    fn text_round_trip() {
        let text = format!(
            "{MINIMAL}name = demo\njob_size = pareto\njob_size.shape = 1.5\nrates = slow_half:0.25\nseed = 3\nseed.sizes = 5\ninitial_memory = random\nsample_period = 0.5\n"
        );
        let c = ScenarioConfig::parse(&text).unwrap();
        let again = ScenarioConfig::parse(&c.to_text()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn sweep_grid_points() {
        let g = SweepGrid::parse("sweep.epsilon = 0.05, 0.5\nsweep.policy = stored_id, sq_d:2\n").unwrap();
        let points = g.points();
        assert_eq!(points.len(), 4);
        let base = ScenarioConfig::parse(&format!("{MINIMAL}name = base\n")).unwrap();
        let c = points[3].apply(&base).unwrap();
        assert_eq!(c.policy.kind, PolicyKind::SqD);
        assert_eq!(c.policy.d, Some(2));
        assert_eq!(c.rates_spec, RatesSpec::SlowHalf { epsilon: 0.5 });
        assert_eq!(c.name, "base-sq_d2_eps0.5");
        assert!(SweepGrid::parse("").unwrap().points().is_empty());
    }
}
