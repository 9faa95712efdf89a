//! Flat `key = value` run configuration: defaults, presets, file merging,
//! per-key validation and a bit-exact echo.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use potpda::synthbench::{bench_config, TaskSpec};
use potpda::warmpot::TrainConfig;
use potpda::weights::Scheme;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub train: TrainConfig,
    pub task: TaskSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Default,
    ImagenetCaltechLike,
    SyntheticBench,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Default => "default",
            Preset::ImagenetCaltechLike => "imagenet-caltech-like",
            Preset::SyntheticBench => "synthetic-bench",
        }
    }

    fn train_config(self) -> TrainConfig {
        match self {
            Preset::Default => TrainConfig::default(),
            Preset::ImagenetCaltechLike => TrainConfig::imagenet_caltech_like(),
            Preset::SyntheticBench => bench_config(),
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "default" => Ok(Preset::Default),
            "imagenet-caltech-like" => Ok(Preset::ImagenetCaltechLike),
            "synthetic-bench" => Ok(Preset::SyntheticBench),
            other => Err(format!("unknown preset `{other}` (default, imagenet-caltech-like, synthetic-bench)")),
        }
    }
}

impl RunConfig {
    pub fn from_preset(preset: Preset) -> Self {
        Self { preset, train: preset.train_config(), task: TaskSpec::standard() }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_preset(Preset::Default)
    }
}

/// Every accepted key, in echo order.
pub const KEYS: &[&str] = &[
    "preset",
    "seed",
    "alpha_max",
    "ramp_iters",
    "total_iters",
    "beta",
    "eta1",
    "eta2",
    "eps",
    "lr",
    "batch_size",
    "solver_max_iter",
    "solver_tol",
    "feature_dim",
    "scheme",
    "weight_update_interval",
    "arpm_rho",
    "arpm_steps",
    "arpm_step_size",
    "classes",
    "shared",
    "d",
    "n_s",
    "n_t",
    "separation",
    "noise",
    "shift",
];

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("config key `{key}`: {msg}"))
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| bad(key, format!("cannot parse `{value}`: {e}")))
}

fn real(key: &str, value: &str, ok: impl Fn(f64) -> bool, range: &str) -> Result<f64, CliError> {
    let v: f64 = parse(key, value)?;
    if v.is_finite() && ok(v) {
        Ok(v)
    } else {
        Err(bad(key, format!("{v} out of range, expected {range}")))
    }
}

fn count(key: &str, value: &str, min: usize) -> Result<usize, CliError> {
    let v: usize = parse(key, value)?;
    if v >= min {
        Ok(v)
    } else {
        Err(bad(key, format!("{v} out of range, expected >= {min}")))
    }
}

/// Applies one key; `preset` is handled by [`resolve`].
pub fn set(cfg: &mut RunConfig, key: &str, value: &str) -> Result<(), CliError> {
    let t = &mut cfg.train;
    let s = &mut cfg.task;
    let unit = |v: f64| v > 0.0 && v <= 1.0;
    let positive = |v: f64| v > 0.0;
    let nonneg = |v: f64| v >= 0.0;
    match key {
        "preset" => {
            cfg.preset = parse(key, value)?;
        }
        "seed" => {
            t.seed = parse(key, value)?;
            s.seed = t.seed;
        }
        "alpha_max" => t.alpha_max = real(key, value, unit, "(0, 1]")?,
        "ramp_iters" => t.ramp_iters = count(key, value, 1)?,
        "total_iters" => t.total_iters = count(key, value, 1)?,
        "beta" => t.beta = real(key, value, unit, "(0, 1]")?,
        "eta1" => t.eta1 = real(key, value, nonneg, ">= 0")?,
        "eta2" => t.eta2 = real(key, value, nonneg, ">= 0")?,
        "eps" => t.eps = real(key, value, positive, "> 0")?,
        "lr" => t.lr = real(key, value, nonneg, ">= 0")?,
        "batch_size" => t.batch_size = count(key, value, 1)?,
        "solver_max_iter" => t.solver_max_iter = count(key, value, 1)?,
        "solver_tol" => t.solver_tol = real(key, value, positive, "> 0")?,
        "feature_dim" => {
            t.feature_dim = if value == "none" { None } else { Some(count(key, value, 1)?) };
        }
        "scheme" => t.scheme = value.parse::<Scheme>().map_err(|e| bad(key, e))?,
        "weight_update_interval" => t.weight_update_interval = count(key, value, 1)?,
        "arpm_rho" => t.arpm.rho = real(key, value, nonneg, ">= 0")?,
        "arpm_steps" => t.arpm.subgradient_steps = count(key, value, 1)?,
        "arpm_step_size" => t.arpm.step_size = real(key, value, positive, "> 0")?,
        "classes" => s.classes = count(key, value, 1)?,
        "shared" => s.shared = count(key, value, 1)?,
        "d" => s.d = count(key, value, 1)?,
        "n_s" => s.n_s = count(key, value, 1)?,
        "n_t" => s.n_t = count(key, value, 1)?,
        "separation" => s.separation = real(key, value, positive, "> 0")?,
        "noise" => s.noise = real(key, value, positive, "> 0")?,
        "shift" => s.shift = real(key, value, nonneg, ">= 0")?,
        other => return Err(CliError::Usage(format!("unknown config key `{other}`"))),
    }
    Ok(())
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_lines(text: &str, origin: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{origin}:{}: expected `key = value`, got `{line}`", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_file(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_lines(&text, &path.display().to_string())
}

/// Defaults, then the preset (the last `preset` among files and flags), then
/// file entries in order, then flag entries; later entries win.
pub fn resolve(files: &[(String, String)], flags: &[(String, String)]) -> Result<RunConfig, CliError> {
    let all = || files.iter().chain(flags);
    let preset = match all().rfind(|(k, _)| k == "preset") {
        Some((k, v)) => parse(k, v)?,
        None => Preset::Default,
    };
    let mut cfg = RunConfig::from_preset(preset);
    for (k, v) in all() {
        if k != "preset" {
            set(&mut cfg, k, v)?;
        }
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    let named = |e: potpda::Error| match e {
        potpda::Error::InvalidParameter { name, reason } => bad(name, reason),
        other => CliError::Usage(other.to_string()),
    };
    cfg.train.validate().map_err(named)?;
    cfg.task.validate().map_err(named)
}

fn value_of(cfg: &RunConfig, key: &str) -> String {
    let t = &cfg.train;
    let s = &cfg.task;
    match key {
        "preset" => cfg.preset.name().to_string(),
        "seed" => t.seed.to_string(),
        "alpha_max" => t.alpha_max.to_string(),
        "ramp_iters" => t.ramp_iters.to_string(),
        "total_iters" => t.total_iters.to_string(),
        "beta" => t.beta.to_string(),
        "eta1" => t.eta1.to_string(),
        "eta2" => t.eta2.to_string(),
        "eps" => t.eps.to_string(),
        "lr" => t.lr.to_string(),
        "batch_size" => t.batch_size.to_string(),
        "solver_max_iter" => t.solver_max_iter.to_string(),
        "solver_tol" => t.solver_tol.to_string(),
        "feature_dim" => t.feature_dim.map_or("none".to_string(), |k| k.to_string()),
        "scheme" => t.scheme.name().to_string(),
        "weight_update_interval" => t.weight_update_interval.to_string(),
        "arpm_rho" => t.arpm.rho.to_string(),
        "arpm_steps" => t.arpm.subgradient_steps.to_string(),
        "arpm_step_size" => t.arpm.step_size.to_string(),
        "classes" => s.classes.to_string(),
        "shared" => s.shared.to_string(),
        "d" => s.d.to_string(),
        "n_s" => s.n_s.to_string(),
        "n_t" => s.n_t.to_string(),
        "separation" => s.separation.to_string(),
        "noise" => s.noise.to_string(),
        "shift" => s.shift.to_string(),
        other => unreachable!("unlisted key {other}"),
    }
}

/// The resolved configuration as `key = value` lines; floats use the
/// shortest round-tripping representation.
pub fn echo(cfg: &RunConfig) -> String {
    let mut out = String::from("# resolved configuration\n");
    for key in KEYS {
        let _ = writeln!(out, "{key} = {}", value_of(cfg, key));
    }
    out
}
