//! Flat `key = value` run configuration.
//!
//! ```text
//! # homophilic setting
//! r02 = 3.5
//! h = 0.5
//! axis1 = n2
//! axis1_grid = 0.05:0.35:31
//! ```
//!
//! Grids are either `start:end:count` (inclusive, evenly spaced) or a comma
//! separated list. Every key may appear at most once.

use std::collections::HashMap;
use std::path::PathBuf;

use thiserror::Error;

use hetmix::experiments::{
    default_n2_grid, default_paradox_window, linspace, Axis, SweepParam, FIG6_R0, FIG7_R02,
    FIG8_H, FIG8_R02,
};
use hetmix::integrator::ConfigError as IntegrationError;
use hetmix::{validate_params, IntegrationConfig, ModelParams, ParamError};

pub const KEYS: [&str; 27] = [
    "gamma",
    "pi",
    "r0",
    "r01",
    "r02",
    "alpha1",
    "alpha2",
    "h",
    "n1",
    "n2",
    "seed_fraction",
    "dt",
    "horizon",
    "record_every",
    "extinction_threshold",
    "axis1",
    "axis1_grid",
    "axis2",
    "axis2_grid",
    "fig6_r0",
    "fig7_r02",
    "fig8_r02",
    "fig8_h",
    "n2_grid",
    "paradox_window",
    "paradox_ratio",
    "out",
];

/// Upper bound on `start:end:count` ranges.
pub const MAX_GRID_POINTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {message}")]
    Value {
        line: usize,
        key: String,
        message: String,
    },
    #[error("`{key}`: {source}")]
    Params { key: String, source: ParamError },
    #[error("`{key}`: {source}")]
    Integration {
        key: &'static str,
        source: IntegrationError,
    },
    #[error("`{key}` requires `{requires}`")]
    Missing { key: &'static str, requires: &'static str },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub integration: IntegrationConfig,
    pub axis1: Option<Axis>,
    pub axis2: Option<Axis>,
    pub fig6_r0: Vec<f64>,
    pub fig7_r02: Vec<f64>,
    pub fig8_r02: Vec<f64>,
    pub fig8_h: Vec<f64>,
    pub n2_grid: Vec<f64>,
    pub paradox_window: Vec<f64>,
    /// Reported slope may be at most this share of the deaths slope.
    pub paradox_ratio: f64,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ModelParams::default(),
            integration: IntegrationConfig::default(),
            axis1: None,
            axis2: None,
            fig6_r0: FIG6_R0.to_vec(),
            fig7_r02: FIG7_R02.to_vec(),
            fig8_r02: FIG8_R02.to_vec(),
            fig8_h: FIG8_H.to_vec(),
            n2_grid: default_n2_grid(),
            paradox_window: default_paradox_window(),
            paradox_ratio: 0.1,
            out: None,
        }
    }
}

struct Entry<'a> {
    line: usize,
    value: &'a str,
}

fn value_err(line: usize, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

fn number(key: &str, e: &Entry<'_>) -> Result<f64, ConfigError> {
    let v: f64 = e
        .value
        .parse()
        .map_err(|_| value_err(e.line, key, format!("`{}` is not a number", e.value)))?;
    if !v.is_finite() {
        return Err(value_err(e.line, key, "must be finite"));
    }
    Ok(v)
}

fn parse_grid(key: &str, e: &Entry<'_>) -> Result<Vec<f64>, ConfigError> {
    let num = |s: &str| -> Result<f64, ConfigError> {
        let s = s.trim();
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(value_err(e.line, key, format!("`{s}` is not a finite number"))),
        }
    };
    let parts: Vec<&str> = e.value.split(':').collect();
    let grid = match parts.as_slice() {
        [start, end, count] => {
            let n: usize = count
                .trim()
                .parse()
                .map_err(|_| value_err(e.line, key, format!("`{}` is not a point count", count.trim())))?;
            if !(2..=MAX_GRID_POINTS).contains(&n) {
                return Err(value_err(
                    e.line,
                    key,
                    format!("a range needs 2 to {MAX_GRID_POINTS} points, got {n}"),
                ));
            }
            let (a, b) = (num(start)?, num(end)?);
            if a == b {
                return Err(value_err(e.line, key, "range start and end coincide"));
            }
            linspace(a, b, n)
        }
        [list] => list.split(',').map(num).collect::<Result<_, _>>()?,
        _ => return Err(value_err(e.line, key, "expected `start:end:count` or a comma list")),
    };
    let inc = grid.windows(2).all(|w| w[1] > w[0]);
    let dec = grid.windows(2).all(|w| w[1] < w[0]);
    if !(inc || dec) {
        return Err(value_err(e.line, key, "grid must be strictly increasing or decreasing"));
    }
    Ok(grid)
}

fn param_key(err: &ParamError) -> String {
    match err {
        ParamError::NonPositiveGamma(_) => "gamma".into(),
        ParamError::PiOutOfRange(_) => "pi".into(),
        ParamError::NegativeR0 { group, .. } => format!("r0{group}"),
        ParamError::AlphaBelowPi { group, .. } => format!("alpha{group}"),
        ParamError::HOutOfRange(_) => "h".into(),
        ParamError::SizesNotNormalized(..) => "n1/n2".into(),
        ParamError::SeedOutOfRange { .. } => "seed_fraction".into(),
    }
}

fn integration_key(err: &IntegrationError) -> &'static str {
    match err {
        IntegrationError::NonPositiveDt(_) => "dt",
        IntegrationError::HorizonTooShort { .. } => "horizon",
        IntegrationError::RecordTooFine { .. } => "record_every",
        IntegrationError::NonPositiveThreshold(_) => "extinction_threshold",
    }
}

/// Parses and validates a configuration document. Missing keys keep their
/// defaults, which reproduce the baseline calibration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut entries: HashMap<&str, Entry<'_>> = HashMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                message: "missing key before `=`".into(),
            });
        }
        if value.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                message: format!("missing value for `{key}`"),
            });
        }
        let Some(&key) = KEYS.iter().find(|&&k| k == key) else {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        };
        if entries.insert(key, Entry { line, value }).is_some() {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
    }

    let mut cfg = RunConfig::default();
    let num = |key: &str| entries.get(key).map(|e| number(key, e)).transpose();
    let grid = |key: &str| entries.get(key).map(|e| parse_grid(key, e)).transpose();

    let p = &mut cfg.params;
    if let Some(v) = num("gamma")? {
        p.gamma = v;
    }
    if let Some(v) = num("pi")? {
        p.pi = v;
    }
    // `r0` sets both groups; `r01` / `r02` then override one of them.
    if let Some(v) = num("r0")? {
        p.r0 = [v, v];
    }
    if let Some(v) = num("r01")? {
        p.r0[0] = v;
    }
    if let Some(v) = num("r02")? {
        p.r0[1] = v;
    }
    if let Some(v) = num("alpha1")? {
        p.alpha[0] = v;
    }
    if let Some(v) = num("alpha2")? {
        p.alpha[1] = v;
    }
    if let Some(v) = num("h")? {
        p.h = v;
    }
    match (num("n1")?, num("n2")?) {
        (Some(a), Some(b)) => p.n = [a, b],
        (Some(a), None) => p.n = [a, 1.0 - a],
        (None, Some(b)) => *p = p.with_n2(b),
        (None, None) => {}
    }
    if let Some(v) = num("seed_fraction")? {
        p.seed_fraction = v;
    }

    let ic = &mut cfg.integration;
    if let Some(v) = num("dt")? {
        ic.dt = v;
    }
    if let Some(v) = num("horizon")? {
        ic.horizon = v;
    }
    if let Some(v) = num("record_every")? {
        ic.record_every = v;
    }
    if let Some(v) = num("extinction_threshold")? {
        ic.extinction_threshold = v;
    }

    for (name_key, grid_key, slot) in [
        ("axis1", "axis1_grid", &mut cfg.axis1),
        ("axis2", "axis2_grid", &mut cfg.axis2),
    ] {
        match (entries.get(name_key), grid(grid_key)?) {
            (Some(e), Some(values)) => {
                let param: SweepParam = e
                    .value
                    .parse()
                    .map_err(|err: hetmix::experiments::UnknownParam| value_err(e.line, name_key, err.to_string()))?;
                *slot = Some(Axis::new(param, values));
            }
            (Some(_), None) => {
                return Err(ConfigError::Missing {
                    key: name_key,
                    requires: grid_key,
                })
            }
            (None, Some(_)) => {
                return Err(ConfigError::Missing {
                    key: grid_key,
                    requires: name_key,
                })
            }
            (None, None) => {}
        }
    }
    if cfg.axis2.is_some() && cfg.axis1.is_none() {
        return Err(ConfigError::Missing {
            key: "axis2",
            requires: "axis1",
        });
    }

    for (key, slot) in [
        ("fig6_r0", &mut cfg.fig6_r0),
        ("fig7_r02", &mut cfg.fig7_r02),
        ("fig8_r02", &mut cfg.fig8_r02),
        ("fig8_h", &mut cfg.fig8_h),
        ("n2_grid", &mut cfg.n2_grid),
        ("paradox_window", &mut cfg.paradox_window),
    ] {
        if let Some(g) = grid(key)? {
            *slot = g;
        }
    }
    if let Some(v) = num("paradox_ratio")? {
        if v < 0.0 {
            return Err(value_err(entries["paradox_ratio"].line, "paradox_ratio", "must be non-negative"));
        }
        cfg.paradox_ratio = v;
    }
    if let Some(e) = entries.get("out") {
        cfg.out = Some(PathBuf::from(e.value));
    }

    validate_params(cfg.params).map_err(|source| ConfigError::Params {
        key: param_key(&source),
        source,
    })?;
    cfg.integration
        .validate()
        .map_err(|source| ConfigError::Integration {
            key: integration_key(&source),
            source,
        })?;
    Ok(cfg)
}
