//! Run configuration: a TOML file of dotted keys, overridable key by key.
//!
//! Resolution order is built-in defaults, then the file, then `--key=value`
//! arguments, then the shorthand flags. Every key is listed in [`KEYS`];
//! anything else is rejected.

use std::fmt::Write as _;
use std::path::Path;

use coopfb::channel::{SystemParams, TauMode};
use coopfb::ipc::{Alg1Options, Alg1Start, Alg2Fallback};
use coopfb::report::ThroughputColumn;
use coopfb::simulator::{db_to_linear, Scheme, SweepSpec};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown configuration key '{0}'")]
    UnknownKey(String),
    #[error("invalid value '{value}' for '{key}': {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("cannot read configuration file {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("configuration file {path} is not valid TOML: {message}")]
    Syntax { path: String, message: String },
    #[error("override '{0}' must have the form --key=value")]
    MalformedOverride(String),
    #[error("{0}")]
    Invalid(String),
}

/// Every accepted key, in the order the sidecar lists them.
pub const KEYS: &[&str] = &[
    "system.l",
    "system.m",
    "system.n",
    "system.b",
    "system.nu",
    "system.theta",
    "sweep.p_max_db",
    "sweep.trials",
    "sweep.seed",
    "sweep.workers",
    "ipc.scheme",
    "ipc.tau",
    "ipc.tau_proportional_coeff",
    "ipc.alg1.step",
    "ipc.alg1.max_iters",
    "ipc.alg1.tol",
    "ipc.alg1.start",
    "ipc.alg2.fallback",
    "quantization.per_trial_codebook",
    "quantization.codebooks",
    "precoding.outer_from_true_inner",
    "asymptote.tau",
    "asymptote.trials",
    "scan_n.values",
    "output.path",
    "output.throughput",
    "output.verbosity",
    "validate.check",
    "validate.points",
    "validate.trials",
    "validate.fault",
];

pub const CHECKS: &[&str] = &["lemma1", "gradient", "alg2", "decoupling"];

/// Deliberate defects the validation suite should catch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    None,
    /// Transmit codeword 0 instead of the best one while still reporting the
    /// best codeword's ε.
    SkipQuantization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub l: usize,
    pub m: usize,
    pub n: usize,
    pub b: u32,
    pub nu: f64,
    pub theta: f64,
    pub p_max_db: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub workers: usize,
    pub schemes: Vec<String>,
    pub tau: f64,
    pub tau_proportional_coeff: f64,
    pub alg1_step: f64,
    pub alg1_max_iters: usize,
    pub alg1_tol: f64,
    pub alg1_start: Alg1Start,
    pub alg2_fallback: Alg2Fallback,
    pub per_trial_codebook: bool,
    pub codebooks: Vec<String>,
    pub outer_from_true_inner: bool,
    pub asymptote_tau: Vec<TauMode>,
    pub asymptote_trials: u64,
    pub scan_n: Vec<usize>,
    /// `-` writes to standard output.
    pub output_path: String,
    pub output_throughput: ThroughputColumn,
    pub verbosity: log::LevelFilter,
    pub checks: Vec<String>,
    pub validate_points: usize,
    pub validate_trials: u64,
    pub fault: Fault,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = SystemParams::default();
        let s = SweepSpec::default();
        let a = Alg1Options::default();
        Self {
            l: p.l_antennas,
            m: p.m_streams,
            n: p.n_inner,
            b: p.b_bits,
            nu: p.nu,
            theta: p.theta,
            p_max_db: s.p_max_grid_db,
            trials: s.trials_per_point,
            seed: s.master_seed,
            workers: 0,
            schemes: s.schemes.iter().map(|x| x.name().to_string()).collect(),
            tau: 2.0,
            tau_proportional_coeff: 0.4,
            alg1_step: a.step_fraction,
            alg1_max_iters: a.max_iters,
            alg1_tol: a.tol_fraction,
            alg1_start: a.start,
            alg2_fallback: Alg2Fallback::default(),
            per_trial_codebook: false,
            codebooks: Vec::new(),
            outer_from_true_inner: false,
            asymptote_tau: vec![
                TauMode::Fixed(1.0),
                TauMode::Fixed(2.0),
                TauMode::Fixed(5.0),
                TauMode::Fixed(10.0),
                TauMode::Fixed(1e6),
                TauMode::Proportional(0.4),
            ],
            asymptote_trials: 10_000,
            scan_n: vec![2, 3, 4],
            output_path: "-".into(),
            output_throughput: ThroughputColumn::Ergodic,
            verbosity: log::LevelFilter::Warn,
            checks: CHECKS.iter().map(|c| c.to_string()).collect(),
            validate_points: 1000,
            validate_trials: 10_000,
            fault: Fault::None,
        }
    }
}

fn bad(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: reason.into(),
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| bad(key, value, e.to_string()))
}

fn list(value: &str) -> Vec<&str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    list(value).into_iter().map(|v| parse(key, v)).collect()
}

fn parse_tau(key: &str, value: &str) -> Result<TauMode, ConfigError> {
    let v = value.trim();
    match v.split_once('*') {
        Some((c, rest)) if rest.trim().eq_ignore_ascii_case("pmax") => Ok(TauMode::Proportional(parse(key, c)?)),
        Some(_) => Err(bad(key, value, "expected a number or 'c*pmax'")),
        None => Ok(TauMode::Fixed(parse(key, v)?)),
    }
}

fn render_tau(t: &TauMode) -> String {
    match t {
        TauMode::Fixed(x) => x.to_string(),
        TauMode::Proportional(c) => format!("{c}*pmax"),
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn quoted_list(xs: &[String]) -> String {
    let items: Vec<String> = xs.iter().map(|x| format!("{x:?}")).collect();
    format!("[{}]", items.join(", "))
}

impl RunConfig {
    /// Assigns one key from its textual value; lists are comma-separated.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "system.l" => self.l = parse(key, value)?,
            "system.m" => self.m = parse(key, value)?,
            "system.n" => self.n = parse(key, value)?,
            "system.b" => self.b = parse(key, value)?,
            "system.nu" => self.nu = parse(key, value)?,
            "system.theta" => self.theta = parse(key, value)?,
            "sweep.p_max_db" => self.p_max_db = parse_list(key, value)?,
            "sweep.trials" => self.trials = parse(key, value)?,
            "sweep.seed" => self.seed = parse(key, value)?,
            "sweep.workers" => self.workers = parse(key, value)?,
            "ipc.scheme" => {
                self.schemes = list(value).into_iter().map(String::from).collect();
                for s in &self.schemes {
                    s.parse::<Scheme>().map_err(|e| bad(key, value, e.to_string()))?;
                }
            }
            "ipc.tau" => self.tau = parse(key, value)?,
            "ipc.tau_proportional_coeff" => self.tau_proportional_coeff = parse(key, value)?,
            "ipc.alg1.step" => self.alg1_step = parse(key, value)?,
            "ipc.alg1.max_iters" => self.alg1_max_iters = parse(key, value)?,
            "ipc.alg1.tol" => self.alg1_tol = parse(key, value)?,
            "ipc.alg1.start" => {
                self.alg1_start = match value.trim() {
                    "best-candidate" => Alg1Start::BestCandidate,
                    "midpoint" => Alg1Start::Midpoint,
                    _ => return Err(bad(key, value, "expected 'best-candidate' or 'midpoint'")),
                }
            }
            "ipc.alg2.fallback" => {
                self.alg2_fallback = match value.trim() {
                    "pmax" => Alg2Fallback::PMax,
                    "zero" => Alg2Fallback::Zero,
                    "margin" => Alg2Fallback::Margin,
                    _ => return Err(bad(key, value, "expected 'pmax', 'zero' or 'margin'")),
                }
            }
            "quantization.per_trial_codebook" => self.per_trial_codebook = parse(key, value)?,
            "quantization.codebooks" => self.codebooks = list(value).into_iter().map(String::from).collect(),
            "precoding.outer_from_true_inner" => self.outer_from_true_inner = parse(key, value)?,
            "asymptote.tau" => {
                self.asymptote_tau = list(value).into_iter().map(|v| parse_tau(key, v)).collect::<Result<_, _>>()?
            }
            "asymptote.trials" => self.asymptote_trials = parse(key, value)?,
            "scan_n.values" => self.scan_n = parse_list(key, value)?,
            "output.path" => self.output_path = value.trim().to_string(),
            "output.throughput" => {
                self.output_throughput = match value.trim() {
                    "ergodic" => ThroughputColumn::Ergodic,
                    "achievable" => ThroughputColumn::Achievable,
                    _ => return Err(bad(key, value, "expected 'ergodic' or 'achievable'")),
                }
            }
            "output.verbosity" => self.verbosity = parse(key, value)?,
            "validate.check" => {
                let names = list(value);
                self.checks = if names == ["all"] {
                    CHECKS.iter().map(|c| c.to_string()).collect()
                } else {
                    names.into_iter().map(String::from).collect()
                };
                if let Some(c) = self.checks.iter().find(|c| !CHECKS.contains(&c.as_str())) {
                    return Err(bad(key, value, format!("unknown check '{c}', expected one of {CHECKS:?} or 'all'")));
                }
            }
            "validate.points" => self.validate_points = parse(key, value)?,
            "validate.trials" => self.validate_trials = parse(key, value)?,
            "validate.fault" => {
                self.fault = match value.trim() {
                    "none" => Fault::None,
                    "skip-quantization" => Fault::SkipQuantization,
                    _ => return Err(bad(key, value, "expected 'none' or 'skip-quantization'")),
                }
            }
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// The current value of `key` in file syntax.
    pub fn get(&self, key: &str) -> Option<String> {
        let quoted = |s: &str| format!("{s:?}");
        Some(match key {
            "system.l" => self.l.to_string(),
            "system.m" => self.m.to_string(),
            "system.n" => self.n.to_string(),
            "system.b" => self.b.to_string(),
            "system.nu" => format!("{:?}", self.nu),
            "system.theta" => format!("{:?}", self.theta),
            "sweep.p_max_db" => format!("[{}]", self.p_max_db.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")),
            "sweep.trials" => self.trials.to_string(),
            "sweep.seed" => self.seed.to_string(),
            "sweep.workers" => self.workers.to_string(),
            "ipc.scheme" => quoted_list(&self.schemes),
            "ipc.tau" => format!("{:?}", self.tau),
            "ipc.tau_proportional_coeff" => format!("{:?}", self.tau_proportional_coeff),
            "ipc.alg1.step" => format!("{:?}", self.alg1_step),
            "ipc.alg1.max_iters" => self.alg1_max_iters.to_string(),
            "ipc.alg1.tol" => format!("{:?}", self.alg1_tol),
            "ipc.alg1.start" => quoted(match self.alg1_start {
                Alg1Start::Midpoint => "midpoint",
                _ => "best-candidate",
            }),
            "ipc.alg2.fallback" => quoted(match self.alg2_fallback {
                Alg2Fallback::PMax => "pmax",
                Alg2Fallback::Zero => "zero",
                Alg2Fallback::Margin => "margin",
            }),
            "quantization.per_trial_codebook" => self.per_trial_codebook.to_string(),
            "quantization.codebooks" => quoted_list(&self.codebooks),
            "precoding.outer_from_true_inner" => self.outer_from_true_inner.to_string(),
            "asymptote.tau" => {
                let items: Vec<String> = self.asymptote_tau.iter().map(render_tau).collect();
                quoted_list(&items)
            }
            "asymptote.trials" => self.asymptote_trials.to_string(),
            "scan_n.values" => format!("[{}]", join(&self.scan_n).replace(',', ", ")),
            "output.path" => quoted(&self.output_path),
            "output.throughput" => quoted(match self.output_throughput {
                ThroughputColumn::Ergodic => "ergodic",
                ThroughputColumn::Achievable => "achievable",
            }),
            "output.verbosity" => quoted(&self.verbosity.to_string().to_lowercase()),
            "validate.check" => quoted_list(&self.checks),
            "validate.points" => self.validate_points.to_string(),
            "validate.trials" => self.validate_trials.to_string(),
            "validate.fault" => quoted(match self.fault {
                Fault::None => "none",
                Fault::SkipQuantization => "skip-quantization",
            }),
            _ => return None,
        })
    }

    /// Applies every key of a TOML document; nested tables become dotted keys.
    pub fn apply_toml(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax {
            path: origin.to_string(),
            message: e.message().to_string(),
        })?;
        let mut flat = Vec::new();
        flatten("", &table, &mut flat)?;
        for (key, value) in flat {
            self.set(&key, &value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: origin.clone(),
            source,
        })?;
        self.apply_toml(&text, &origin)
    }

    /// Renders the resolved configuration as a file that loads back to it.
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for key in KEYS {
            let (sec, name) = key.split_once('.').expect("dotted key");
            if sec != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{sec}]");
                section = sec;
            }
            let _ = writeln!(out, "{name} = {}", self.get(key).expect("listed key"));
        }
        out
    }

    pub fn system_params(&self) -> SystemParams {
        SystemParams {
            l_antennas: self.l,
            m_streams: self.m,
            n_inner: self.n,
            b_bits: self.b,
            nu: self.nu,
            p_max: self.top_p_max(),
            theta: self.theta,
            tau_mode: TauMode::Fixed(self.tau),
        }
    }

    /// Largest grid point, linear.
    pub fn top_p_max(&self) -> f64 {
        db_to_linear(self.top_p_max_db())
    }

    pub fn top_p_max_db(&self) -> f64 {
        self.p_max_db.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn schemes(&self) -> Vec<Scheme> {
        self.schemes
            .iter()
            .map(|s| Scheme::parse_with(s, self.tau, self.tau_proportional_coeff).expect("checked on set"))
            .collect()
    }

    /// The sweep described by this configuration, without imported codebooks.
    pub fn sweep_spec(&self) -> SweepSpec {
        SweepSpec {
            params: self.system_params(),
            p_max_grid_db: self.p_max_db.clone(),
            schemes: self.schemes(),
            trials_per_point: self.trials,
            master_seed: self.seed,
            workers: self.workers,
            alg1: Alg1Options {
                step_fraction: self.alg1_step,
                max_iters: self.alg1_max_iters,
                tol_fraction: self.alg1_tol,
                start: self.alg1_start,
            },
            alg2_fallback: self.alg2_fallback,
            per_trial_codebook: self.per_trial_codebook,
            codebooks: None,
            outer_from_true_inner: self.outer_from_true_inner,
        }
    }

    /// Checks the physical and numerical constraints.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.p_max_db.is_empty() {
            return invalid("sweep.p_max_db must list at least one value".into());
        }
        self.sweep_spec()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.alg1_step > 0.0 && self.alg1_step.is_finite()) {
            return invalid(format!("ipc.alg1.step must be positive, got {}", self.alg1_step));
        }
        if !(self.alg1_tol > 0.0 && self.alg1_tol.is_finite()) {
            return invalid(format!("ipc.alg1.tol must be positive, got {}", self.alg1_tol));
        }
        if self.alg1_max_iters == 0 {
            return invalid("ipc.alg1.max_iters must be at least 1".into());
        }
        if self.codebooks.len() > 2 {
            return invalid(format!("quantization.codebooks takes one or two paths, got {}", self.codebooks.len()));
        }
        if !self.codebooks.is_empty() && self.per_trial_codebook {
            return invalid("quantization.codebooks cannot be combined with quantization.per_trial_codebook".into());
        }
        if self.asymptote_tau.is_empty() {
            return invalid("asymptote.tau must list at least one value".into());
        }
        for t in &self.asymptote_tau {
            let v = match *t {
                TauMode::Fixed(x) | TauMode::Proportional(x) => x,
            };
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("asymptote.tau entries must be positive, got {}", render_tau(t)));
            }
        }
        if self.asymptote_trials == 0 {
            return invalid("asymptote.trials must be at least 1".into());
        }
        if self.scan_n.is_empty() {
            return invalid("scan_n.values must list at least one value".into());
        }
        for &n in &self.scan_n {
            if n < self.m || n + self.m > self.l {
                return invalid(format!(
                    "scan_n.values: N={n} is outside [M, L-M] = [{}, {}]",
                    self.m,
                    self.l.saturating_sub(self.m)
                ));
            }
        }
        if self.validate_points == 0 || self.validate_trials == 0 {
            return invalid("validate.points and validate.trials must be at least 1".into());
        }
        if self.checks.is_empty() {
            return invalid("validate.check must name at least one check".into());
        }
        Ok(())
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, String)>) -> Result<(), ConfigError> {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out)?,
            toml::Value::Array(items) => {
                let parts = items.iter().map(|i| scalar(&key, i)).collect::<Result<Vec<_>, _>>()?;
                out.push((key, parts.join(",")));
            }
            other => {
                let s = scalar(&key, other)?;
                out.push((key, s));
            }
        }
    }
    Ok(())
}

fn scalar(key: &str, v: &toml::Value) -> Result<String, ConfigError> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => format!("{f:?}"),
        toml::Value::Boolean(b) => b.to_string(),
        _ => return Err(bad(key, &v.to_string(), "expected a scalar or a list of scalars")),
    })
}

/// Splits `--section.key=value` arguments from the rest of the command line.
pub fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), ConfigError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    for arg in args {
        let Some(body) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let name = body.split('=').next().unwrap_or_default();
        if !name.contains('.') {
            rest.push(arg);
            continue;
        }
        match body.split_once('=') {
            Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
            None => return Err(ConfigError::MalformedOverride(arg)),
        }
    }
    Ok((rest, overrides))
}
