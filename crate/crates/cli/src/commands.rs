use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use dispatch_core::audit::{symmetry_audit, AuditVerdict, MIN_TRIALS};
use dispatch_core::config::{InitialMemory, RatesSpec, SweepGrid, SweepPoint};
use dispatch_core::ctmc::{certify_foster_lyapunov, CertifyMethod, LyapunovParams};
use dispatch_core::dist::UnitDist;
use dispatch_core::experiments::{both_slow_probability, slow_server_experiment, sq2_counting_bound};
use dispatch_core::metrics::{workload_drift, Classification, DriftEstimate};
use dispatch_core::policy::PolicyKind;
use dispatch_core::rng::{splitmix64, Draw};
use dispatch_core::{build_policy, DispatchPolicy, MemoryState, RunLedger, ScenarioConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{scenario_dir, write_json, write_run, write_text, RunReport};
use crate::{AuditArgs, CertifyArgs, Common};

struct Loaded {
    config: ScenarioConfig,
    text: String,
}

/// Reads, parses and validates the scenario with CLI overrides applied.
fn load(c: &Common) -> Result<Loaded> {
    if let Some(jobs) = c.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        // a second initialisation in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let path = c.config.display();
    let text = fs::read_to_string(&c.config).with_context(|| format!("cannot read config {path}"))?;
    let mut config = ScenarioConfig::parse(&text).map_err(|e| anyhow!("{path}: {e}"))?;
    if let Some(seed) = c.seed {
        config.seed = seed;
    }
    if let Some(h) = c.horizon {
        config.horizon = h;
        config.validate().map_err(|e| anyhow!("--horizon: {e}"))?;
    }
    build_policy(&config.policy, config.n).map_err(|e| anyhow!("{path}: {e}"))?;
    Ok(Loaded { config, text })
}

fn seeds(config: &ScenarioConfig, reps: u64) -> Vec<u64> {
    (0..reps).map(|k| config.seed.wrapping_add(k)).collect()
}

/// First replication uses the config as given; later ones reseed.
fn simulate(config: &ScenarioConfig, reps: u64) -> Result<Vec<RunLedger>> {
    let policy = build_policy(&config.policy, config.n)?;
    let policy: &dyn DispatchPolicy = policy.as_ref();
    seeds(config, reps)
        .par_iter()
        .enumerate()
        .map(|(k, &seed)| {
            let c = if k == 0 { config.clone() } else { config.with_seed(seed) };
            dispatch_core::run(&c, policy, c.horizon, &mut []).map_err(Into::into)
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct ScenarioSummary {
    name: String,
    policy: String,
    n: usize,
    lambda: f64,
    rates: Vec<f64>,
    horizon: f64,
    seeds: Vec<u64>,
    mean_message_rate: Option<f64>,
    drift: Option<DriftEstimate>,
    drift_error: Option<String>,
    classification: Classification,
    runs: Vec<RunReport>,
}

fn summarise(config: &ScenarioConfig, ledgers: &[RunLedger], runs: Vec<RunReport>) -> ScenarioSummary {
    let (drift, drift_error) = match workload_drift(ledgers) {
        Ok(d) => (Some(d), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let rates: Vec<f64> = runs.iter().filter_map(|r| r.message_rate.as_ref().map(|m| m.total)).collect();
    ScenarioSummary {
        name: config.name.clone(),
        policy: config.policy.label(),
        n: config.n,
        lambda: config.lambda,
        rates: config.rates.as_slice().to_vec(),
        horizon: config.horizon,
        seeds: ledgers.iter().map(|l| l.seed).collect(),
        mean_message_rate: (rates.len() == runs.len() && !rates.is_empty())
            .then(|| rates.iter().sum::<f64>() / rates.len() as f64),
        classification: drift.as_ref().map_or(Classification::Inconclusive, |d| d.classification),
        drift,
        drift_error,
        runs,
    }
}

fn simulate_and_write(config: &ScenarioConfig, reps: u64, out: &Path) -> Result<ScenarioSummary> {
    let ledgers = simulate(config, reps)?;
    let runs = ledgers.iter().map(|l| write_run(out, l)).collect::<Result<Vec<_>>>()?;
    let summary = summarise(config, &ledgers, runs);
    write_json(&scenario_dir(out, &config.name).join("summary.json"), &summary)?;
    Ok(summary)
}

fn describe(s: &ScenarioSummary) -> String {
    let rate = s.mean_message_rate.map_or("n/a".into(), |r| format!("{r:.4}"));
    let slope = s.drift.as_ref().map_or("n/a".into(), |d| {
        format!("{:.4} [{:.4}, {:.4}]", d.mean_slope, d.ci.lower, d.ci.upper)
    });
    format!(
        "{}: policy {}, {} run(s), message rate {rate}, workload slope {slope}, {}",
        s.name,
        s.policy,
        s.seeds.len(),
        s.classification.as_str()
    )
}

pub fn run(c: &Common) -> Result<u8> {
    let Loaded { config, .. } = load(c)?;
    let summary = simulate_and_write(&config, c.reps, &c.out)?;
    println!("{}", describe(&summary));
    Ok(summary.classification.exit_code() as u8)
}

#[derive(Debug, Serialize)]
struct PointOutcome {
    name: String,
    policy: String,
    epsilon: Option<f64>,
    n: Option<usize>,
    lambda: Option<f64>,
    alpha: Option<f64>,
    status: &'static str,
    error: Option<String>,
    classification: Option<Classification>,
    slope_lower: Option<f64>,
    slope_upper: Option<f64>,
    message_rate: Option<f64>,
}

fn sweep_point(base: &ScenarioConfig, point: &SweepPoint, reps: u64, out: &Path) -> PointOutcome {
    let mut outcome = PointOutcome {
        name: format!("{}-{}", base.name, point.slug()),
        policy: point.policy.as_ref().unwrap_or(&base.policy).label(),
        epsilon: point.epsilon,
        n: point.n,
        lambda: point.lambda,
        alpha: point.alpha,
        status: "ok",
        error: None,
        classification: None,
        slope_lower: None,
        slope_upper: None,
        message_rate: None,
    };
    let result = point
        .apply(base)
        .map_err(anyhow::Error::from)
        .and_then(|config| {
            outcome.policy = config.policy.label();
            simulate_and_write(&config, reps, out)
        });
    match result {
        Ok(s) => {
            outcome.classification = Some(s.classification);
            outcome.slope_lower = s.drift.as_ref().map(|d| d.ci.lower);
            outcome.slope_upper = s.drift.as_ref().map(|d| d.ci.upper);
            outcome.message_rate = s.mean_message_rate;
        }
        Err(e) => {
            outcome.status = "error";
            outcome.error = Some(format!("{e:#}"));
        }
    }
    outcome
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

fn sweep_csv(points: &[PointOutcome]) -> String {
    let mut out = String::from(
        "point,policy,epsilon,n,lambda,alpha,status,classification,slope_lower,slope_upper,message_rate,error\n",
    );
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            p.name,
            p.policy,
            opt(&p.epsilon),
            opt(&p.n),
            opt(&p.lambda),
            opt(&p.alpha),
            p.status,
            p.classification.map_or("", Classification::as_str),
            opt(&p.slope_lower),
            opt(&p.slope_upper),
            opt(&p.message_rate),
            p.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
        );
    }
    out
}

/// Policy rows against epsilon columns; cells list classifications of
/// every point that shares the pair.
fn regime_table(points: &[PointOutcome]) -> String {
    let mut policies: Vec<&str> = Vec::new();
    let mut eps: Vec<String> = Vec::new();
    for p in points {
        if !policies.contains(&p.policy.as_str()) {
            policies.push(&p.policy);
        }
        let e = opt(&p.epsilon);
        if !eps.contains(&e) {
            eps.push(e);
        }
    }
    let mut out = String::from("policy");
    for e in &eps {
        let _ = write!(out, "\teps={}", if e.is_empty() { "-" } else { e });
    }
    out.push('\n');
    for pol in policies {
        out.push_str(pol);
        for e in &eps {
            let cell: Vec<&str> = points
                .iter()
                .filter(|p| p.policy == pol && &opt(&p.epsilon) == e)
                .map(|p| p.classification.map_or(p.status, Classification::as_str))
                .collect();
            let _ = write!(out, "\t{}", if cell.is_empty() { "-".into() } else { cell.join("/") });
        }
        out.push('\n');
    }
    out
}

pub fn sweep(c: &Common) -> Result<u8> {
    let Loaded { config, text } = load(c)?;
    let grid = SweepGrid::parse(&text).map_err(|e| anyhow!("{}: {e}", c.config.display()))?;
    let points = grid.points();
    let outcomes: Vec<PointOutcome> = points
        .par_iter()
        .map(|p| sweep_point(&config, p, c.reps, &c.out))
        .collect();
    let dir = scenario_dir(&c.out, &config.name);
    write_text(&dir.join("sweep_summary.csv"), &sweep_csv(&outcomes))?;
    let failed = outcomes.iter().filter(|p| p.status != "ok").count();
    print!("{}", regime_table(&outcomes));
    println!("{} point(s), {} failed", outcomes.len(), failed);
    Ok(0)
}

#[derive(Debug, Serialize)]
struct CertifyOutput<'a> {
    name: &'a str,
    certificate: &'a dispatch_core::ctmc::CertificateReport,
}

pub fn certify(a: &CertifyArgs) -> Result<u8> {
    let Loaded { config, .. } = load(&a.common)?;
    let path = a.common.config.display();
    let method = CertifyMethod::parse(&a.method)
        .ok_or_else(|| anyhow!("--method must be auto, enumeration or structured, got `{}`", a.method))?;
    if config.policy.kind != PolicyKind::StoredId {
        bail!("{path}: certify needs `policy = stored_id`, got `{}`", config.policy.kind.id());
    }
    if config.interarrival != UnitDist::Exp || config.job_size != UnitDist::Exp {
        bail!("{path}: the certified chain needs `interarrival = exp` and `job_size = exp`");
    }
    let alpha = config.policy.alpha.ok_or_else(|| anyhow!("{path}: missing required key `policy.alpha`"))?;
    let mut params = LyapunovParams::new(config.lambda, config.rates.clone(), alpha)?;
    if a.broken_chain {
        params = params.without_memory_moves();
    }
    let q_max = a.q_max.unwrap_or_else(|| (params.theta() + 10.0).ceil() as u64);
    let report = certify_foster_lyapunov(&params, q_max, method)?;
    write_json(
        &scenario_dir(&a.common.out, &config.name).join("certificate.json"),
        &CertifyOutput { name: &config.name, certificate: &report },
    )?;
    println!(
        "{}: certificate {} (theta = {}, q_max = {}, {} states checked, {} violating {}(s))",
        config.name,
        if report.passed { "PASS" } else { "FAIL" },
        report.theta,
        report.q_max,
        report.states_checked,
        report.violations_total,
        report.violation_unit,
    );
    Ok(if report.passed { 0 } else { 2 })
}

pub fn audit(a: &AuditArgs) -> Result<u8> {
    let Loaded { config, .. } = load(&a.common)?;
    if a.trials < MIN_TRIALS {
        bail!("--trials must be at least {MIN_TRIALS}, got {}", a.trials);
    }
    let policy = build_policy(&config.policy, config.n)?;
    let bits = policy.memory_bits();
    let value = match config.initial_memory {
        InitialMemory::Value(v) => v,
        InitialMemory::Random => policy.random_initial_memory(Draw(splitmix64(config.seed))),
    };
    let memory = MemoryState::new(value, bits)
        .map_err(|e| anyhow!("{}: invalid value for `initial_memory`: {e}", a.common.config.display()))?;
    let report = symmetry_audit(policy.as_ref(), memory, 1.0, a.trials, config.seed)?;
    let dir = scenario_dir(&a.common.out, &config.name).join(config.seed.to_string());
    write_json(&dir.join("audit.json"), &report)?;
    println!(
        "{}: audit {:?} over {} trials ({} test(s), level {:.2e})",
        config.name,
        report.verdict,
        report.trials,
        report.tests.len(),
        report.adjusted_level
    );
    Ok(if report.verdict == AuditVerdict::Fail { 2 } else { 0 })
}

#[derive(Debug, Serialize)]
struct BenchOutput {
    report: dispatch_core::experiments::SlowServerReport,
    both_slow_probability: f64,
    sq2_counting_bound: f64,
    runs: Vec<RunReport>,
}

pub fn bench(c: &Common) -> Result<u8> {
    let Loaded { config, .. } = load(c)?;
    let RatesSpec::SlowHalf { epsilon } = config.rates_spec else {
        bail!("{}: bench needs `rates = slow_half:<eps>`", c.config.display());
    };
    let (report, ledgers) = slow_server_experiment(&config, &config.policy, epsilon, c.reps as usize)?;
    let runs = ledgers.iter().map(|l| write_run(&c.out, l)).collect::<Result<Vec<_>>>()?;
    println!(
        "{}: policy {}, slope {:.4} [{:.4}, {:.4}], message rate {:.4}, benchmark slope {:.4}, {}",
        config.name,
        report.policy,
        report.drift.mean_slope,
        report.drift.ci.lower,
        report.drift.ci.upper,
        report.message_rate,
        report.benchmark_slope,
        report.classification.as_str()
    );
    let code = report.classification.exit_code() as u8;
    let out = BenchOutput {
        both_slow_probability: both_slow_probability(config.n),
        sq2_counting_bound: sq2_counting_bound(config.n, config.lambda, epsilon),
        report,
        runs,
    };
    write_json(&scenario_dir(&c.out, &config.name).join("bench.json"), &out)?;
    Ok(code)
}
