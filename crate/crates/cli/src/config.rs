//! Run configuration: `key = value` files, `--param` overrides, defaults and
//! validation.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::path::Path;

use clap::ValueEnum;
use num_complex::Complex64 as C64;
use occtime::occurrence::HorizonMode;
use occtime::quadrature::{QuadratureRule, QuadratureSpec};
use occtime::zeno::Protocol;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Decay,
    Occurrence,
    Rovelli,
    Oru,
    Zeno,
    Sweep,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Decay => "decay",
            Experiment::Occurrence => "occurrence",
            Experiment::Rovelli => "rovelli",
            Experiment::Oru => "oru",
            Experiment::Zeno => "zeno",
            Experiment::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Rabi,
    Rovelli,
    Exponential,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Rabi => "rabi",
            ModelKind::Rovelli => "rovelli",
            ModelKind::Exponential => "exponential",
        }
    }
}

/// Every key the parser knows about.
pub const KEYS: &[&str] = &[
    "lambda", "omega", "T", "c_a", "c_b", "gamma", "model", "t_min", "t_max", "mode", "partitions", "n_points",
    "abs_tol", "rel_tol", "max_evals", "rule", "times", "outcomes", "n_values", "tau", "couplings", "protocol",
    "precision",
];

const QUADRATURE_KEYS: &[&str] = &["abs_tol", "rel_tol", "max_evals", "rule"];

fn experiment_keys(e: Experiment) -> Vec<&'static str> {
    let mut keys: Vec<&'static str> = match e {
        Experiment::Decay => vec!["lambda", "t_min", "t_max", "n_points"],
        Experiment::Occurrence => {
            vec!["model", "lambda", "omega", "T", "c_a", "c_b", "gamma", "t_min", "t_max", "mode", "partitions", "n_points"]
        }
        Experiment::Rovelli => vec!["T", "c_a", "c_b", "t_min", "t_max", "n_points"],
        Experiment::Oru => vec!["model", "omega", "T", "c_a", "c_b", "times", "outcomes"],
        Experiment::Zeno => vec!["model", "omega", "T", "c_a", "c_b", "tau", "n_values"],
        Experiment::Sweep => vec!["model", "omega", "T", "c_a", "c_b", "tau", "couplings", "protocol"],
    };
    if matches!(e, Experiment::Decay | Experiment::Occurrence) {
        keys.extend_from_slice(QUADRATURE_KEYS);
    }
    keys.push("precision");
    keys
}

fn model_keys(m: ModelKind) -> &'static [&'static str] {
    match m {
        ModelKind::Rabi => &["omega"],
        ModelKind::Rovelli => &["T", "c_a", "c_b"],
        ModelKind::Exponential => &["lambda"],
    }
}

/// Raw `key = value` pairs with the place each one came from.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, String)>,
}

impl RawConfig {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses a configuration file body. Blank lines and `#` comments are
    /// ignored; each remaining line is `key = value`.
    pub fn parse_file(&mut self, source_name: &str, body: &str) -> Result<()> {
        let mut seen = BTreeMap::new();
        for (idx, raw_line) in body.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| CliError::Parse { source_name: source_name.to_string(), line: line_no, message };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            check_key(key).map_err(err)?;
            if value.is_empty() {
                return Err(err(format!("empty value for {key}")));
            }
            if let Some(first) = seen.insert(key.to_string(), line_no) {
                return Err(err(format!("{key} already set on line {first}")));
            }
            self.entries.insert(key.to_string(), (value.to_string(), format!("{source_name}:{line_no}")));
        }
        Ok(())
    }

    pub fn read_file(&mut self, path: &Path) -> Result<()> {
        let body = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        self.parse_file(&path.display().to_string(), &body)
    }

    /// Applies `--param key=value` overrides, in order.
    pub fn apply_flags<S: AsRef<str>>(&mut self, flags: &[S]) -> Result<()> {
        let mut seen = Vec::new();
        for (idx, flag) in flags.iter().enumerate() {
            let flag = flag.as_ref();
            let err = |message: String| CliError::Parse { source_name: "--param".into(), line: idx + 1, message };
            let (key, value) = flag.split_once('=').ok_or_else(|| err(format!("expected key=value, got {flag:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            check_key(key).map_err(err)?;
            if value.is_empty() {
                return Err(err(format!("empty value for {key}")));
            }
            if seen.contains(&key) {
                return Err(err(format!("{key} given twice")));
            }
            seen.push(key);
            self.entries.insert(key.to_string(), (value.to_string(), format!("--param {key}")));
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn origin(&self, key: &str) -> &str {
        self.entries.get(key).map(|(_, o)| o.as_str()).unwrap_or("default")
    }
}

fn check_key(key: &str) -> std::result::Result<(), String> {
    if KEYS.contains(&key) {
        Ok(())
    } else {
        Err(format!("unknown key {key:?}"))
    }
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub model: ModelKind,
    pub lambda: f64,
    pub omega: f64,
    pub period: f64,
    pub c_a: C64,
    pub c_b: C64,
    pub gamma: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub mode: HorizonMode,
    pub partitions: usize,
    pub n_points: usize,
    pub quadrature: QuadratureSpec,
    pub times: Vec<f64>,
    pub outcomes: Vec<u8>,
    pub n_values: Vec<usize>,
    pub tau: f64,
    pub couplings: Vec<f64>,
    pub protocols: Vec<Protocol>,
    pub precision: usize,
    /// Effective value of every key that applies to this run, in key order,
    /// for the summary header.
    pub resolved: Vec<(String, String)>,
}

struct Resolver<'a> {
    raw: &'a RawConfig,
    resolved: Vec<(String, String)>,
}

impl Resolver<'_> {
    fn value<T>(&mut self, key: &str, default: T, parse: impl Fn(&str) -> std::result::Result<T, String>, show: impl Fn(&T) -> String) -> Result<T> {
        let v = match self.raw.get(key) {
            Some(text) => parse(text)
                .map_err(|m| CliError::Validation(format!("{key} ({}): {m}", self.raw.origin(key))))?,
            None => default,
        };
        self.resolved.push((key.to_string(), show(&v)));
        Ok(v)
    }

    fn real(&mut self, key: &str, default: f64) -> Result<f64> {
        self.value(key, default, parse_real, |v| v.to_string())
    }

    fn positive(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = self.real(key, default)?;
        if v <= 0.0 {
            return Err(CliError::Validation(format!("{key} must be positive, got {v}")));
        }
        Ok(v)
    }

    fn count(&mut self, key: &str, default: usize, min: usize) -> Result<usize> {
        let v = self.value(key, default, parse_count, |v| v.to_string())?;
        if v < min {
            return Err(CliError::Validation(format!("{key} must be at least {min}, got {v}")));
        }
        Ok(v)
    }
}

pub fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: {s:?}"))?;
    if !v.is_finite() {
        return Err(format!("not finite: {s:?}"));
    }
    Ok(v)
}

fn parse_count(s: &str) -> std::result::Result<usize, String> {
    s.trim().parse().map_err(|_| format!("not a non-negative integer: {s:?}"))
}

/// `re` or `re,im`.
pub fn parse_complex(s: &str) -> std::result::Result<C64, String> {
    match s.split_once(',') {
        Some((re, im)) => Ok(C64::new(parse_real(re)?, parse_real(im)?)),
        None => Ok(C64::new(parse_real(s)?, 0.0)),
    }
}

fn show_complex(z: &C64) -> String {
    format!("{},{}", z.re, z.im)
}

pub fn parse_real_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',').map(parse_real).collect()
}

/// Comma-separated outcomes (`0,0,1`) or a bit string (`001`).
pub fn parse_outcomes(s: &str) -> std::result::Result<Vec<u8>, String> {
    let items: Vec<&str> = if s.contains(',') { s.split(',').map(str::trim).collect() } else { s.trim().split("").filter(|c| !c.is_empty()).collect() };
    items
        .iter()
        .map(|c| match *c {
            "0" => Ok(0),
            "1" => Ok(1),
            other => Err(format!("outcome must be 0 or 1, got {other:?}")),
        })
        .collect()
}

/// Comma-separated integers or inclusive ranges `a..b`.
pub fn parse_n_values(s: &str) -> std::result::Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim) {
        match item.split_once("..") {
            Some((a, b)) => {
                let (a, b) = (parse_count(a)?, parse_count(b)?);
                if b < a {
                    return Err(format!("empty range {item}"));
                }
                out.extend(a..=b);
            }
            None => out.push(parse_count(item)?),
        }
    }
    Ok(out)
}

fn show_list<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn parse_protocols(s: &str) -> std::result::Result<Vec<Protocol>, String> {
    match s.trim() {
        "both" => Ok(vec![Protocol::Pulsed, Protocol::Continuous]),
        other => other.parse::<Protocol>().map(|p| vec![p]).map_err(|e| e.to_string()),
    }
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    match s.trim() {
        "rabi" => Ok(ModelKind::Rabi),
        "rovelli" => Ok(ModelKind::Rovelli),
        "exponential" => Ok(ModelKind::Exponential),
        other => Err(format!("unknown model {other:?} (expected rabi, rovelli or exponential)")),
    }
}

fn parse_mode(s: &str) -> std::result::Result<HorizonMode, String> {
    match s.trim() {
        "window" => Ok(HorizonMode::Window),
        "absorptive" => Ok(HorizonMode::Absorptive),
        other => Err(format!("unknown mode {other:?} (expected window or absorptive)")),
    }
}

fn show_mode(m: &HorizonMode) -> String {
    match m {
        HorizonMode::Window => "window".into(),
        HorizonMode::Absorptive => "absorptive".into(),
    }
}

fn parse_rule(s: &str) -> std::result::Result<QuadratureRule, String> {
    match s.trim() {
        "simpson" => Ok(QuadratureRule::CompositeSimpson),
        "adaptive" => Ok(QuadratureRule::Adaptive),
        other => Err(format!("unknown rule {other:?} (expected simpson or adaptive)")),
    }
}

fn show_rule(r: &QuadratureRule) -> String {
    match r {
        QuadratureRule::CompositeSimpson => "simpson".into(),
        QuadratureRule::Adaptive => "adaptive".into(),
    }
}

impl RunConfig {
    /// Resolves defaults and checks every invariant before anything is
    /// computed.
    pub fn resolve(experiment: Experiment, raw: &RawConfig) -> Result<Self> {
        let allowed = experiment_keys(experiment);
        if let Some(key) = raw.keys().find(|k| !allowed.contains(k)) {
            return Err(CliError::Validation(format!(
                "{key} ({}) does not apply to the {experiment} experiment",
                raw.origin(key)
            )));
        }
        let mut r = Resolver { raw, resolved: Vec::new() };

        let default_model = match experiment {
            Experiment::Decay => ModelKind::Exponential,
            Experiment::Rovelli => ModelKind::Rovelli,
            _ => ModelKind::Rabi,
        };
        let model = if allowed.contains(&"model") {
            r.value("model", default_model, parse_model, |m| m.name().into())?
        } else {
            default_model
        };
        if model == ModelKind::Exponential && !matches!(experiment, Experiment::Decay | Experiment::Occurrence) {
            return Err(CliError::Validation(format!("model exponential is not available for {experiment}")));
        }
        let model_specific = ["lambda", "omega", "T", "c_a", "c_b"];
        if let Some(key) = raw.keys().find(|k| model_specific.contains(k) && !model_keys(model).contains(k)) {
            return Err(CliError::Validation(format!("{key} does not apply to model {}", model.name())));
        }

        let (mut lambda, mut omega, mut period) = (1.0, 1.0, 1.0);
        let (mut c_a, mut c_b) = (C64::new(FRAC_1_SQRT_2, 0.0), C64::new(FRAC_1_SQRT_2, 0.0));
        match model {
            ModelKind::Exponential => lambda = r.positive("lambda", 1.0)?,
            ModelKind::Rabi => omega = r.positive("omega", 1.0)?,
            ModelKind::Rovelli => {
                period = r.positive("T", 1.0)?;
                c_a = r.value("c_a", c_a, parse_complex, show_complex)?;
                c_b = r.value("c_b", c_b, parse_complex, show_complex)?;
                let norm_sq = c_a.norm_sqr() + c_b.norm_sqr();
                if (norm_sq - 1.0).abs() > 1e-12 {
                    return Err(CliError::Validation(format!("|c_a|^2 + |c_b|^2 = {norm_sq}, must be 1")));
                }
            }
        }
        // time at which the event is first certain
        let reference_time = match model {
            ModelKind::Rabi => PI / omega,
            ModelKind::Rovelli => period,
            ModelKind::Exponential => 1.0 / lambda,
        };

        let mut mode = HorizonMode::Window;
        let mut gamma = 0.0;
        if experiment == Experiment::Occurrence {
            let default_mode = if model == ModelKind::Exponential { HorizonMode::Absorptive } else { HorizonMode::Window };
            mode = r.value("mode", default_mode, parse_mode, show_mode)?;
            if model == ModelKind::Exponential {
                if raw.get("gamma").is_some() {
                    return Err(CliError::Validation("gamma does not apply to model exponential (use lambda)".into()));
                }
            } else if mode == HorizonMode::Absorptive {
                gamma = r.positive("gamma", 1.0)?;
            } else if raw.get("gamma").is_some() {
                return Err(CliError::Validation("gamma applies only in absorptive mode".into()));
            }
        }

        let (default_t_min, default_t_max) = match (experiment, model, mode) {
            (Experiment::Decay, ..) => (0.0, 10.0 / lambda),
            (Experiment::Rovelli, ..) => (0.0, 2.0 * period),
            (_, ModelKind::Exponential, _) => (0.0, 40.0 / lambda),
            (_, ModelKind::Rabi, HorizonMode::Window) => (0.0, 2.0 * PI / omega),
            (_, ModelKind::Rovelli, HorizonMode::Window) => (0.0, period),
            (_, _, HorizonMode::Absorptive) => (0.0, 200.0 / gamma.max(f64::MIN_POSITIVE)),
        };
        let (mut t_min, mut t_max) = (0.0, 0.0);
        if allowed.contains(&"t_min") {
            t_min = r.real("t_min", default_t_min)?;
            t_max = r.real("t_max", default_t_max)?;
            if t_min >= t_max {
                return Err(CliError::Validation(format!("t_min = {t_min} must be below t_max = {t_max}")));
            }
            let needs_nonnegative = experiment == Experiment::Decay || mode == HorizonMode::Absorptive;
            if needs_nonnegative && t_min < 0.0 {
                return Err(CliError::Validation(format!("t_min = {t_min} must be non-negative here")));
            }
        }

        let partitions = if allowed.contains(&"partitions") { r.count("partitions", 4, 1)? } else { 0 };
        let n_points = if allowed.contains(&"n_points") { r.count("n_points", 101, 2)? } else { 0 };

        let mut quadrature = QuadratureSpec::default();
        if allowed.contains(&"abs_tol") {
            // a decaying integrand over a long horizon is mostly tail; uniform panels waste the budget there
            let default_rule =
                if mode == HorizonMode::Absorptive { QuadratureRule::Adaptive } else { QuadratureRule::CompositeSimpson };
            quadrature.rule = r.value("rule", default_rule, parse_rule, show_rule)?;
            quadrature.abs_tol = r.real("abs_tol", quadrature.abs_tol)?;
            quadrature.rel_tol = r.real("rel_tol", quadrature.rel_tol)?;
            quadrature.max_evals = r.count("max_evals", quadrature.max_evals, 0)?;
            quadrature.validate().map_err(CliError::invalid)?;
        }

        let mut times = Vec::new();
        let mut outcomes = Vec::new();
        if experiment == Experiment::Oru {
            let default_times: Vec<f64> = [0.2, 0.5, 1.0, 1.3, 2.0].iter().map(|f| f * reference_time).collect();
            times = r.value("times", default_times, parse_real_list, |v| show_list(v))?;
            outcomes = r.value("outcomes", vec![0, 0, 1, 1, 0], parse_outcomes, |v| show_list(v))?;
            if times.len() != outcomes.len() {
                return Err(CliError::Validation(format!(
                    "{} times but {} outcomes",
                    times.len(),
                    outcomes.len()
                )));
            }
            if times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(CliError::Validation("times must be strictly increasing".into()));
            }
        }

        let tau = if allowed.contains(&"tau") { r.positive("tau", reference_time)? } else { 0.0 };

        let mut n_values = Vec::new();
        if experiment == Experiment::Zeno {
            let default_n: Vec<usize> = (0..=10).map(|k| 1usize << k).collect();
            n_values = r.value("n_values", default_n, parse_n_values, |v| show_list(v))?;
            if n_values.first() == Some(&0) || n_values.windows(2).any(|w| w[1] <= w[0]) {
                return Err(CliError::Validation("n_values must be positive and strictly increasing".into()));
            }
        }

        let mut couplings = Vec::new();
        let mut protocols = Vec::new();
        if experiment == Experiment::Sweep {
            let default_g: Vec<f64> = (0..=10).map(|k| (1u32 << k) as f64 / tau).collect();
            couplings = r.value("couplings", default_g, parse_real_list, |v| show_list(v))?;
            if couplings.iter().any(|g| *g <= 0.0) {
                return Err(CliError::Validation("couplings must be positive".into()));
            }
            protocols = r.value(
                "protocol",
                vec![Protocol::Pulsed, Protocol::Continuous],
                parse_protocols,
                |v| if v.len() == 2 { "both".into() } else { v[0].to_string() },
            )?;
        }

        let precision = r.count("precision", 12, 1)?;
        if precision > 17 {
            return Err(CliError::Validation(format!("precision must be at most 17, got {precision}")));
        }

        Ok(RunConfig {
            experiment,
            model,
            lambda,
            omega,
            period,
            c_a,
            c_b,
            gamma,
            t_min,
            t_max,
            mode,
            partitions,
            n_points,
            quadrature,
            times,
            outcomes,
            n_values,
            tau,
            couplings,
            protocols,
            precision,
            resolved: r.resolved,
        })
    }

    /// Reads an optional config file, applies flag overrides and resolves.
    pub fn load<S: AsRef<str>>(experiment: Experiment, path: Option<&Path>, flags: &[S]) -> Result<Self> {
        let mut raw = RawConfig::new();
        if let Some(path) = path {
            raw.read_file(path)?;
        }
        raw.apply_flags(flags)?;
        Self::resolve(experiment, &raw)
    }
}
