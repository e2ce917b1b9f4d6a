//! Parameter sweeps over the two-group model and the curve diagnostics used
//! to read them.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::integrator::{fmt_num, run, IntegrationConfig, RunSummary, SimError};
use crate::oracle::{two_group_final_size, FinalSizePrediction, OracleError, Seeding};
use crate::params::{validate_params, ModelParams, ParamError};

/// Environment variable capping sweep parallelism; `0` means all cores.
pub const THREADS_ENV: &str = "HETMIX_THREADS";

/// Absolute tolerance on first differences when judging monotonicity.
pub const MONOTONE_TOL: f64 = 1e-9;
/// A curve is affine when every second difference is below this share of
/// its range.
pub const AFFINE_REL_TOL: f64 = 1e-6;

pub const FIG6_R0: [f64; 4] = [1.5, 2.0, 2.5, 3.0];
pub const FIG7_R02: [f64; 4] = [2.5, 3.0, 3.5, 4.0];
pub const FIG8_R02: [f64; 2] = [3.0, 3.5];
pub const FIG8_H: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
/// `R0_1` held fixed in the heterogeneous-activity figures.
pub const BASE_R01: f64 = 2.5;

/// `n` evenly spaced points from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / (n - 1) as f64;
            (0..n)
                .map(|k| if k == n - 1 { end } else { start + k as f64 * step })
                .collect()
        }
    }
}

/// Skeptic-share grid: 100 points, endpoints kept inside `(0, 1)` so both
/// groups can be seeded.
pub fn default_n2_grid() -> Vec<f64> {
    linspace(1e-3, 1.0 - 1e-3, 100)
}

/// Skeptic-share window for the reported-versus-deaths comparison.
pub fn default_paradox_window() -> Vec<f64> {
    linspace(0.05, 0.35, 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParam {
    /// Both reproduction numbers at once.
    R0,
    R01,
    R02,
    Alpha1,
    Alpha2,
    H,
    /// Skeptic share; the majority gets `1 - N2`.
    N2,
    Pi,
    Gamma,
    SeedFraction,
}

impl SweepParam {
    pub const ALL: [SweepParam; 10] = [
        SweepParam::R0,
        SweepParam::R01,
        SweepParam::R02,
        SweepParam::Alpha1,
        SweepParam::Alpha2,
        SweepParam::H,
        SweepParam::N2,
        SweepParam::Pi,
        SweepParam::Gamma,
        SweepParam::SeedFraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::R0 => "r0",
            SweepParam::R01 => "r01",
            SweepParam::R02 => "r02",
            SweepParam::Alpha1 => "alpha1",
            SweepParam::Alpha2 => "alpha2",
            SweepParam::H => "h",
            SweepParam::N2 => "n2",
            SweepParam::Pi => "pi",
            SweepParam::Gamma => "gamma",
            SweepParam::SeedFraction => "seed_fraction",
        }
    }

    pub fn apply(self, p: ModelParams, v: f64) -> ModelParams {
        let mut p = p;
        match self {
            SweepParam::R0 => p.r0 = [v, v],
            SweepParam::R01 => p.r0[0] = v,
            SweepParam::R02 => p.r0[1] = v,
            SweepParam::Alpha1 => p.alpha[0] = v,
            SweepParam::Alpha2 => p.alpha[1] = v,
            SweepParam::H => p.h = v,
            SweepParam::N2 => p = p.with_n2(v),
            SweepParam::Pi => p.pi = v,
            SweepParam::Gamma => p.gamma = v,
            SweepParam::SeedFraction => p.seed_fraction = v,
        }
        p
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("unknown sweep parameter `{0}`")]
pub struct UnknownParam(pub String);

impl FromStr for SweepParam {
    type Err = UnknownParam;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SweepParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| UnknownParam(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(param: SweepParam, values: Vec<f64>) -> Self {
        Axis { param, values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ModelParams,
    pub axis1: Axis,
    pub axis2: Option<Axis>,
    pub config: IntegrationConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis1: f64,
    pub axis2: Option<f64>,
    pub params: ModelParams,
    pub summary: RunSummary,
    pub oracle: FinalSizePrediction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub spec: SweepSpec,
    /// Extra context for CSV block headers, e.g. `r02=3`.
    pub label: Option<String>,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PointError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub axis1: f64,
    pub axis2: Option<f64>,
    pub error: PointError,
}

impl fmt::Display for PointFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.axis2 {
            Some(b) => write!(f, "({}, {}): {}", self.axis1, b, self.error),
            None => write!(f, "({}): {}", self.axis1, self.error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("grid for `{0}` is empty")]
    EmptyGrid(SweepParam),
    #[error("grid for `{0}` is not strictly ordered")]
    UnorderedGrid(SweepParam),
    #[error("invalid grid point {param} = {value}: {source}")]
    InvalidPoint {
        param: SweepParam,
        value: f64,
        source: ParamError,
    },
    #[error("{} grid point(s) failed; first: {}", .0.len(), .0[0])]
    Points(Vec<PointFailure>),
    #[error("{0}")]
    Precondition(String),
    #[error("could not build thread pool: {0}")]
    ThreadPool(String),
}

fn check_axis(axis: &Axis) -> Result<(), SweepError> {
    if axis.values.is_empty() {
        return Err(SweepError::EmptyGrid(axis.param));
    }
    let inc = axis.values.windows(2).all(|w| w[1] > w[0]);
    let dec = axis.values.windows(2).all(|w| w[1] < w[0]);
    if !(inc || dec) {
        return Err(SweepError::UnorderedGrid(axis.param));
    }
    Ok(())
}

impl SweepSpec {
    /// Grid points in row-major order: axis1 outer, axis2 inner.
    pub fn points(&self) -> Vec<(f64, Option<f64>, ModelParams)> {
        let mut out = Vec::new();
        for &a in &self.axis1.values {
            let p = self.axis1.param.apply(self.base, a);
            match &self.axis2 {
                None => out.push((a, None, p)),
                Some(ax2) => {
                    for &b in &ax2.values {
                        out.push((a, Some(b), ax2.param.apply(p, b)));
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        check_axis(&self.axis1)?;
        if let Some(ax2) = &self.axis2 {
            check_axis(ax2)?;
        }
        self.config
            .validate()
            .map_err(|e| SweepError::Precondition(e.to_string()))?;
        for (a, b, p) in self.points() {
            if let Err(source) = validate_params(p) {
                let (param, value) = match (&self.axis2, b) {
                    (Some(ax2), Some(b)) if validate_params(self.axis1.param.apply(self.base, a)).is_ok() => {
                        (ax2.param, b)
                    }
                    _ => (self.axis1.param, a),
                };
                return Err(SweepError::InvalidPoint {
                    param,
                    value,
                    source,
                });
            }
        }
        Ok(())
    }
}

fn evaluate(p: &ModelParams, config: &IntegrationConfig) -> Result<(RunSummary, FinalSizePrediction), PointError> {
    let summary = run(p, config)?;
    let oracle = two_group_final_size(p, Seeding::FromParams)?;
    Ok((summary, oracle))
}

/// One simulation, summary and oracle per grid point, evaluated on the
/// current rayon pool. Rows come back in grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    spec.validate()?;
    let points = spec.points();
    let results: Vec<_> = points
        .par_iter()
        .map(|(_, _, p)| evaluate(p, &spec.config))
        .collect();

    let mut rows = Vec::with_capacity(points.len());
    let mut failures = Vec::new();
    for ((axis1, axis2, params), res) in points.into_iter().zip(results) {
        match res {
            Ok((summary, oracle)) => rows.push(SweepRow {
                axis1,
                axis2,
                params,
                summary,
                oracle,
            }),
            Err(error) => failures.push(PointFailure {
                axis1,
                axis2,
                error,
            }),
        }
    }
    if !failures.is_empty() {
        return Err(SweepError::Points(failures));
    }
    Ok(SweepResult {
        spec: spec.clone(),
        label: None,
        rows,
    })
}

/// Reads [`THREADS_ENV`]; unset, unparsable or `0` means all cores.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

/// Runs `f` on a dedicated pool of `threads` workers (`0` = all cores).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, SweepError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| SweepError::ThreadPool(e.to_string()))?;
    Ok(pool.install(f))
}

/// One line of a figure: the rows sharing an axis1 value, ordered by axis2.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub key: f64,
    pub xs: Vec<f64>,
    pub summaries: Vec<RunSummary>,
}

impl Curve {
    pub fn deaths(&self) -> Vec<f64> {
        self.summaries.iter().map(|s| s.deaths).collect()
    }

    pub fn reported(&self) -> Vec<f64> {
        self.summaries.iter().map(|s| s.reported_cumulative).collect()
    }

    pub fn attack(&self, group: usize) -> Vec<f64> {
        self.summaries.iter().map(|s| s.attack_rate[group]).collect()
    }
}

impl SweepResult {
    /// Splits a two-axis result into one curve per axis1 value. A one-axis
    /// result becomes a single curve over axis1 keyed by NaN.
    pub fn curves(&self) -> Vec<Curve> {
        let mut out: Vec<Curve> = Vec::new();
        for row in &self.rows {
            match row.axis2 {
                None => {
                    if out.is_empty() {
                        out.push(Curve {
                            key: f64::NAN,
                            xs: Vec::new(),
                            summaries: Vec::new(),
                        });
                    }
                    out[0].xs.push(row.axis1);
                    out[0].summaries.push(row.summary);
                }
                Some(b) => {
                    if out.last().map(|c| c.key) != Some(row.axis1) {
                        out.push(Curve {
                            key: row.axis1,
                            xs: Vec::new(),
                            summaries: Vec::new(),
                        });
                    }
                    let c = out.last_mut().unwrap();
                    c.xs.push(b);
                    c.summaries.push(row.summary);
                }
            }
        }
        out
    }

    /// The curve whose axis1 value is `key`.
    pub fn curve(&self, key: f64) -> Option<Curve> {
        self.curves().into_iter().find(|c| c.key == key)
    }
}

fn homogeneous_base() -> ModelParams {
    ModelParams::default()
}

/// Deaths and reported infections against the skeptic share, one curve per
/// common `R0`, under proportionate mixing with equal activity.
pub fn figure6_sweep(
    r0_values: &[f64],
    n2_grid: &[f64],
    config: &IntegrationConfig,
) -> Result<SweepResult, SweepError> {
    let spec = SweepSpec {
        base: homogeneous_base(),
        axis1: Axis::new(SweepParam::R0, r0_values.to_vec()),
        axis2: Some(Axis::new(SweepParam::N2, n2_grid.to_vec())),
        config: *config,
    };
    run_sweep(&spec)
}

/// Per-group attack rates against the skeptic share, one curve per `R0_2`,
/// with `R0_1 = 2.5` and proportionate mixing.
pub fn figure7_sweep(
    r02_values: &[f64],
    n2_grid: &[f64],
    config: &IntegrationConfig,
) -> Result<SweepResult, SweepError> {
    if let Some(&bad) = r02_values.iter().find(|&&r| r < BASE_R01) {
        return Err(SweepError::Precondition(format!(
            "r02 = {bad} is below r01 = {BASE_R01}"
        )));
    }
    let spec = SweepSpec {
        base: ModelParams {
            r0: [BASE_R01, BASE_R01],
            ..homogeneous_base()
        },
        axis1: Axis::new(SweepParam::R02, r02_values.to_vec()),
        axis2: Some(Axis::new(SweepParam::N2, n2_grid.to_vec())),
        config: *config,
    };
    run_sweep(&spec)
}

/// Deaths and reported infections against the skeptic share for each
/// homophily level, one result per skeptic reproduction number.
pub fn figure8_sweep(
    r02_settings: &[f64],
    h_values: &[f64],
    n2_grid: &[f64],
    config: &IntegrationConfig,
) -> Result<Vec<SweepResult>, SweepError> {
    if let Some(&bad) = r02_settings.iter().find(|&&r| r <= BASE_R01) {
        return Err(SweepError::Precondition(format!(
            "r02 = {bad} must exceed r01 = {BASE_R01}"
        )));
    }
    r02_settings
        .iter()
        .map(|&r02| {
            let spec = SweepSpec {
                base: ModelParams {
                    r0: [BASE_R01, r02],
                    ..homogeneous_base()
                },
                axis1: Axis::new(SweepParam::H, h_values.to_vec()),
                axis2: Some(Axis::new(SweepParam::N2, n2_grid.to_vec())),
                config: *config,
            };
            let mut res = run_sweep(&spec)?;
            res.label = Some(format!("r02={}", r02));
            Ok(res)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    Constant,
    NonMonotone,
}

impl fmt::Display for Monotonicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Monotonicity::Increasing => "increasing",
            Monotonicity::Decreasing => "decreasing",
            Monotonicity::Constant => "constant",
            Monotonicity::NonMonotone => "non-monotone",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Maximum,
    Minimum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub kind: ExtremumKind,
    pub index: usize,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeReport {
    pub name: String,
    pub monotonicity: Monotonicity,
    pub affine: bool,
    /// Largest deviation of a point from the line through its two left
    /// neighbours; the plain second difference on an even grid.
    pub max_second_diff: f64,
    pub range: f64,
    /// First interior extremum, found by a sign change of first differences.
    pub extremum: Option<Extremum>,
}

impl fmt::Display for ShapeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} affine={} max_second_diff={} range={}",
            self.name,
            self.monotonicity,
            self.affine,
            fmt_num(self.max_second_diff),
            fmt_num(self.range)
        )?;
        if let Some(e) = self.extremum {
            let kind = match e.kind {
                ExtremumKind::Maximum => "max",
                ExtremumKind::Minimum => "min",
            };
            write!(f, " extremum={}@{}", kind, fmt_num(e.x))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShapeError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("xs and ys differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("xs must be strictly increasing")]
    UnorderedXs,
}

pub fn classify_shape(name: &str, xs: &[f64], ys: &[f64]) -> Result<ShapeReport, ShapeError> {
    if xs.len() != ys.len() {
        return Err(ShapeError::LengthMismatch(xs.len(), ys.len()));
    }
    if ys.len() < 3 {
        return Err(ShapeError::TooFewPoints(ys.len()));
    }
    if !xs.windows(2).all(|w| w[1] > w[0]) {
        return Err(ShapeError::UnorderedXs);
    }
    let diffs: Vec<f64> = ys.windows(2).map(|w| w[1] - w[0]).collect();
    let signs: Vec<i8> = diffs
        .iter()
        .map(|&d| {
            if d > MONOTONE_TOL {
                1
            } else if d < -MONOTONE_TOL {
                -1
            } else {
                0
            }
        })
        .collect();
    let ups = signs.iter().any(|&s| s > 0);
    let downs = signs.iter().any(|&s| s < 0);
    let monotonicity = match (ups, downs) {
        (true, false) => Monotonicity::Increasing,
        (false, true) => Monotonicity::Decreasing,
        (false, false) => Monotonicity::Constant,
        (true, true) => Monotonicity::NonMonotone,
    };

    let mut extremum = None;
    let mut last_sign = 0i8;
    for (k, &s) in signs.iter().enumerate() {
        if s == 0 {
            continue;
        }
        if last_sign != 0 && s != last_sign {
            extremum = Some(Extremum {
                kind: if last_sign > 0 {
                    ExtremumKind::Maximum
                } else {
                    ExtremumKind::Minimum
                },
                index: k,
                x: xs[k],
            });
            break;
        }
        last_sign = s;
    }

    let max_second_diff = (1..ys.len() - 1)
        .map(|k| {
            let ratio = (xs[k + 1] - xs[k]) / (xs[k] - xs[k - 1]);
            (diffs[k] - diffs[k - 1] * ratio).abs()
        })
        .fold(0.0, f64::max);
    let (lo, hi) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)));
    let range = hi - lo;
    Ok(ShapeReport {
        name: name.to_string(),
        monotonicity,
        affine: max_second_diff <= AFFINE_REL_TOL * range,
        max_second_diff,
        range,
        extremum,
    })
}

/// Ordinary least-squares slope of `ys` on `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (sxy, sxx) = xs
        .iter()
        .zip(ys)
        .fold((0.0, 0.0), |(sxy, sxx), (&x, &y)| {
            (sxy + (x - mx) * (y - my), sxx + (x - mx) * (x - mx))
        });
    sxy / sxx
}

fn unit_range(ys: &[f64]) -> Vec<f64> {
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if span > 0.0 {
        ys.iter().map(|y| (y - lo) / span).collect()
    } else {
        vec![0.0; ys.len()]
    }
}

/// Deaths and reported infections over a skeptic-share window.
#[derive(Debug, Clone, PartialEq)]
pub struct ParadoxSummary {
    pub base: ModelParams,
    pub n2: Vec<f64>,
    pub deaths: Vec<f64>,
    pub reported: Vec<f64>,
    pub slope_deaths: f64,
    pub slope_reported: f64,
    /// Slopes after rescaling each curve to `[0, 1]`.
    pub normalized_slope_deaths: f64,
    pub normalized_slope_reported: f64,
}

impl ParadoxSummary {
    /// Deaths rise while reported cases rise by at most `ratio` as much, both
    /// measured on unit-range curves.
    pub fn shows_paradox(&self, ratio: f64) -> bool {
        self.slope_deaths > 0.0
            && self.normalized_slope_reported <= ratio * self.normalized_slope_deaths
    }
}

pub fn paradox_summary(
    n2_grid: &[f64],
    base: &ModelParams,
    config: &IntegrationConfig,
) -> Result<ParadoxSummary, SweepError> {
    let spec = SweepSpec {
        base: *base,
        axis1: Axis::new(SweepParam::N2, n2_grid.to_vec()),
        axis2: None,
        config: *config,
    };
    let res = run_sweep(&spec)?;
    let n2: Vec<f64> = res.rows.iter().map(|r| r.axis1).collect();
    let deaths: Vec<f64> = res.rows.iter().map(|r| r.summary.deaths).collect();
    let reported: Vec<f64> = res.rows.iter().map(|r| r.summary.reported_cumulative).collect();
    Ok(ParadoxSummary {
        base: *base,
        slope_deaths: ols_slope(&n2, &deaths),
        slope_reported: ols_slope(&n2, &reported),
        normalized_slope_deaths: ols_slope(&n2, &unit_range(&deaths)),
        normalized_slope_reported: ols_slope(&n2, &unit_range(&reported)),
        n2,
        deaths,
        reported,
    })
}

pub const SWEEP_CSV_HEADER: &str =
    "axis1,axis2,attack1,attack2,total_infected,reported,deaths,oracle_attack1,oracle_attack2,extinct";

fn write_row<W: Write>(out: &mut W, row: &SweepRow) -> io::Result<()> {
    let s = &row.summary;
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{}",
        fmt_num(row.axis1),
        row.axis2.map(fmt_num).unwrap_or_default(),
        fmt_num(s.attack_rate[0]),
        fmt_num(s.attack_rate[1]),
        fmt_num(s.total_infected),
        fmt_num(s.reported_cumulative),
        fmt_num(s.deaths),
        fmt_num(row.oracle.attack_rate[0]),
        fmt_num(row.oracle.attack_rate[1]),
        s.extinct
    )
}

/// Writes one or more sweep results under a single header. Two-axis results
/// get a `# block:` comment before each axis1 value; shape reports are
/// appended as `# shape:` comments.
pub fn write_sweep_csv<W: Write>(
    mut out: W,
    results: &[SweepResult],
    shapes: &[ShapeReport],
) -> io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for res in results {
        let mut current = None;
        for row in &res.rows {
            if row.axis2.is_some() && current != Some(row.axis1) {
                current = Some(row.axis1);
                write!(out, "# block:")?;
                if let Some(label) = &res.label {
                    write!(out, " {label}")?;
                }
                writeln!(out, " {}={}", res.spec.axis1.param, row.axis1)?;
            }
            write_row(&mut out, row)?;
        }
    }
    for shape in shapes {
        writeln!(out, "# shape: {shape}")?;
    }
    Ok(())
}

/// Deaths and reported shapes for every curve of a figure result.
pub fn curve_shapes(prefix: &str, res: &SweepResult) -> Vec<ShapeReport> {
    let mut out = Vec::new();
    for c in res.curves() {
        let key = if c.key.is_nan() {
            String::new()
        } else {
            format!(" {}={}", res.spec.axis1.param, c.key)
        };
        let label = res.label.as_deref().map(|l| format!(" {l}")).unwrap_or_default();
        for (what, ys) in [("deaths", c.deaths()), ("reported", c.reported())] {
            if let Ok(r) = classify_shape(&format!("{prefix}{label}{key} {what}"), &c.xs, &ys) {
                out.push(r);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::summarize;
    use crate::integrator::simulate;

    fn short() -> IntegrationConfig {
        IntegrationConfig {
            dt: 0.1,
            horizon: 50.0,
            ..Default::default()
        }
    }

    #[test]
    fn linspace_endpoints() {
        let g = default_n2_grid();
        assert_eq!(g.len(), 100);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[99], 1.0 - 1e-3);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(linspace(0.0, 1.0, 1), vec![0.0]);
        assert!(linspace(0.0, 1.0, 0).is_empty());
    }

    #[test]
    fn param_names_round_trip() {
        for p in SweepParam::ALL {
            assert_eq!(p.name().parse::<SweepParam>(), Ok(p));
        }
        assert!("beta".parse::<SweepParam>().is_err());
    }

    #[test]
    fn single_point_matches_direct_run() {
        let spec = SweepSpec {
            base: ModelParams::default(),
            axis1: Axis::new(SweepParam::N2, vec![0.3]),
            axis2: None,
            config: short(),
        };
        let res = run_sweep(&spec).unwrap();
        assert_eq!(res.rows.len(), 1);
        let direct = summarize(&simulate(&ModelParams::default().with_n2(0.3), &short()).unwrap());
        assert_eq!(res.rows[0].summary, direct);
    }

    #[test]
    fn two_axis_grid_is_row_major() {
        let spec = SweepSpec {
            base: ModelParams::default(),
            axis1: Axis::new(SweepParam::R0, vec![1.0, 1.5, 2.0, 2.5, 3.0]),
            axis2: Some(Axis::new(SweepParam::N2, vec![0.1, 0.2, 0.3])),
            config: short(),
        };
        let res = run_sweep(&spec).unwrap();
        assert_eq!(res.rows.len(), 15);
        for (k, row) in res.rows.iter().enumerate() {
            assert_eq!(row.axis1, spec.axis1.values[k / 3]);
            assert_eq!(row.axis2, Some(spec.axis2.as_ref().unwrap().values[k % 3]));
            assert_eq!(row.params.r0, [row.axis1; 2]);
        }
        let curves = res.curves();
        assert_eq!(curves.len(), 5);
        assert_eq!(curves[2].xs, vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn bad_grids_are_rejected() {
        let mut spec = SweepSpec {
            base: ModelParams::default(),
            axis1: Axis::new(SweepParam::N2, vec![]),
            axis2: None,
            config: short(),
        };
        assert_eq!(run_sweep(&spec), Err(SweepError::EmptyGrid(SweepParam::N2)));
        spec.axis1.values = vec![0.1, 0.1];
        assert_eq!(run_sweep(&spec), Err(SweepError::UnorderedGrid(SweepParam::N2)));
        spec.axis1.values = vec![0.1, 0.5, 1.5];
        assert!(matches!(
            run_sweep(&spec),
            Err(SweepError::InvalidPoint { param: SweepParam::N2, value, .. }) if value == 1.5
        ));
        spec.axis1.values = vec![0.5, 0.2];
        assert!(run_sweep(&spec).is_ok());
    }

    #[test]
    fn point_failures_carry_coordinates() {
        let spec = SweepSpec {
            base: ModelParams::default(),
            axis1: Axis::new(SweepParam::R0, vec![2.0, 20_000.0]),
            axis2: None,
            config: IntegrationConfig {
                dt: 1.0,
                horizon: 5.0,
                ..Default::default()
            },
        };
        match run_sweep(&spec) {
            Err(SweepError::Points(f)) => {
                assert_eq!(f.len(), 1);
                assert_eq!(f[0].axis1, 20_000.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn shape_examples() {
        let r = classify_shape("a", &[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.monotonicity, Monotonicity::Increasing);
        assert!(r.affine);
        assert_eq!(r.extremum, None);

        let r = classify_shape("b", &[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(r.monotonicity, Monotonicity::NonMonotone);
        assert_eq!(
            r.extremum,
            Some(Extremum {
                kind: ExtremumKind::Maximum,
                index: 1,
                x: 1.0
            })
        );

        let xs = linspace(0.0, 1.0, 11);
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let r = classify_shape("c", &xs, &ys).unwrap();
        assert_eq!(r.monotonicity, Monotonicity::Increasing);
        assert!(!r.affine);
        assert!((r.max_second_diff - 0.02).abs() < 1e-12);

        let r = classify_shape("d", &[0.0, 1.0, 2.0], &[3.0, 2.0, 2.5]).unwrap();
        assert_eq!(r.extremum.unwrap().kind, ExtremumKind::Minimum);
        let r = classify_shape("e", &[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(r.monotonicity, Monotonicity::Constant);
        assert!(r.affine);
    }

    #[test]
    fn shape_errors() {
        assert_eq!(
            classify_shape("x", &[0.0, 1.0], &[0.0, 1.0]),
            Err(ShapeError::TooFewPoints(2))
        );
        assert_eq!(
            classify_shape("x", &[0.0, 2.0, 1.0], &[0.0, 1.0, 2.0]),
            Err(ShapeError::UnorderedXs)
        );
        assert!(classify_shape("x", &[0.0, 1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn uneven_grid_line_is_affine() {
        let xs = [0.0, 0.1, 0.5, 0.6, 2.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        assert!(classify_shape("l", &xs, &ys).unwrap().affine);
    }

    #[test]
    fn ols_of_a_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        assert!((ols_slope(&xs, &ys) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn csv_layout() {
        let spec = SweepSpec {
            base: ModelParams::default(),
            axis1: Axis::new(SweepParam::H, vec![0.0, 1.0]),
            axis2: Some(Axis::new(SweepParam::N2, vec![0.2, 0.4, 0.6])),
            config: short(),
        };
        let mut res = run_sweep(&spec).unwrap();
        res.label = Some("r02=2.5".into());
        let shapes = curve_shapes("t", &res);
        assert_eq!(shapes.len(), 4);
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &[res], &shapes).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SWEEP_CSV_HEADER);
        assert_eq!(lines[1], "# block: r02=2.5 h=0");
        assert_eq!(lines[2].split(',').count(), 10);
        assert!(lines[2].ends_with(",false"));
        assert_eq!(lines.iter().filter(|l| l.starts_with("# block")).count(), 2);
        assert_eq!(lines.iter().filter(|l| l.starts_with("# shape: t r02=2.5 h=")).count(), 4);
        assert!(!text.contains('\r'));
    }

    #[test]
    fn figure_preconditions() {
        assert!(matches!(
            figure7_sweep(&[2.0], &[0.5], &short()),
            Err(SweepError::Precondition(_))
        ));
        assert!(matches!(
            figure8_sweep(&[2.5], &[0.0], &[0.5], &short()),
            Err(SweepError::Precondition(_))
        ));
    }

    #[test]
    fn equal_alpha_removes_the_gap() {
        let base = ModelParams {
            alpha: [0.3, 0.3],
            r0: [2.0, 3.0],
            ..Default::default()
        };
        let s = paradox_summary(&default_paradox_window(), &base, &IntegrationConfig::default()).unwrap();
        // With a common alpha, reported = alpha * total and deaths = pi * total.
        assert!((s.slope_reported - 0.3 / 0.01 * s.slope_deaths).abs() < 1e-6 * s.slope_reported.abs().max(1e-12));
        assert_eq!(s.slope_reported.signum(), s.slope_deaths.signum());
        assert!(s.slope_deaths > 0.0);
        assert!(!s.shows_paradox(0.1));
    }
}
