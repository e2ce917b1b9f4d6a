//! Fixed-step RK4 integration, trajectory recording and terminal summaries.

use std::io::{self, Write};

use thiserror::Error;

use crate::mixing::{mixing_matrix, MixingError, MixingMatrix};
use crate::model::{derivatives, StateVector, STATE_LABELS, STATE_LEN};
use crate::params::{validate_params, ModelParams, ParamError};

/// Negative values down to this magnitude are treated as roundoff and zeroed.
pub const CLAMP_TOL: f64 = 1e-12;
/// Anything below this is reported as a blowup.
pub const NEGATIVE_LIMIT: f64 = -1e-6;
/// Anything above this is reported as a blowup.
pub const UPPER_LIMIT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationConfig {
    pub dt: f64,
    pub horizon: f64,
    pub record_every: f64,
    pub extinction_threshold: f64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig {
            dt: 0.05,
            horizon: 500.0,
            record_every: 1.0,
            extinction_threshold: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("dt must be positive and finite, got {0}")]
    NonPositiveDt(f64),
    #[error("horizon {horizon} must be finite and at least dt = {dt}")]
    HorizonTooShort { horizon: f64, dt: f64 },
    #[error("record_every {record_every} must be finite and at least dt = {dt}")]
    RecordTooFine { record_every: f64, dt: f64 },
    #[error("extinction threshold must be positive, got {0}")]
    NonPositiveThreshold(f64),
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(ConfigError::NonPositiveDt(self.dt));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(ConfigError::HorizonTooShort {
                horizon: self.horizon,
                dt: self.dt,
            });
        }
        if !(self.record_every >= self.dt && self.record_every.is_finite()) {
            return Err(ConfigError::RecordTooFine {
                record_every: self.record_every,
                dt: self.dt,
            });
        }
        if !(self.extinction_threshold > 0.0) {
            return Err(ConfigError::NonPositiveThreshold(self.extinction_threshold));
        }
        Ok(())
    }

    /// Same config with a different step.
    pub fn with_dt(self, dt: f64) -> Self {
        IntegrationConfig { dt, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mixing(#[from] MixingError),
    #[error("numerical blowup: {label} = {value:e}")]
    Blowup { label: &'static str, value: f64 },
    #[error("numerical blowup at t = {time}: {label} = {value:e}")]
    BlowupAt {
        time: f64,
        label: &'static str,
        value: f64,
    },
}

/// Seeds `seed_fraction * N_i` infections per group, split between I and Q by
/// the detection probability so that the seeds follow the same detection and
/// fatality rules as every later infection.
pub fn initial_state(params: &ModelParams) -> StateVector {
    let mut st = StateVector::default();
    for g in 0..2 {
        let seeded = params.seed_fraction * params.n[g];
        let detected = params.alpha[g] * seeded;
        st.s[g] = params.n[g] - seeded;
        st.i[g] = seeded - detected;
        st.q[g] = detected;
        st.c[g] = detected;
    }
    st
}

fn axpy(base: &[f64; STATE_LEN], k: &[f64; STATE_LEN], h: f64) -> StateVector {
    StateVector::from_array(std::array::from_fn(|n| base[n] + h * k[n]))
}

fn rk4_increment(
    state: &StateVector,
    params: &ModelParams,
    mix: &MixingMatrix,
    dt: f64,
) -> [f64; STATE_LEN] {
    let y = state.to_array();
    let k1 = derivatives(state, params, mix).to_array();
    let k2 = derivatives(&axpy(&y, &k1, 0.5 * dt), params, mix).to_array();
    let k3 = derivatives(&axpy(&y, &k2, 0.5 * dt), params, mix).to_array();
    let k4 = derivatives(&axpy(&y, &k3, dt), params, mix).to_array();
    std::array::from_fn(|n| dt / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]))
}

/// Adds `inc` to `state` with Kahan compensation carried in `comp`, then
/// applies the clamp and blowup checks.
fn apply_increment(
    state: &StateVector,
    inc: &[f64; STATE_LEN],
    comp: &mut [f64; STATE_LEN],
) -> Result<StateVector, SimError> {
    let y = state.to_array();
    let mut next = [0.0; STATE_LEN];
    for n in 0..STATE_LEN {
        let d = inc[n] - comp[n];
        let v = y[n] + d;
        comp[n] = (v - y[n]) - d;
        if !(v >= NEGATIVE_LIMIT && v <= UPPER_LIMIT) {
            return Err(SimError::Blowup {
                label: STATE_LABELS[n],
                value: v,
            });
        }
        if v < 0.0 && v >= -CLAMP_TOL {
            next[n] = 0.0;
            comp[n] = 0.0;
        } else {
            next[n] = v;
        }
    }
    Ok(StateVector::from_array(next))
}

/// One classical RK4 step.
pub fn rk4_step(
    state: &StateVector,
    params: &ModelParams,
    mix: &MixingMatrix,
    dt: f64,
) -> Result<StateVector, SimError> {
    let inc = rk4_increment(state, params, mix, dt);
    apply_increment(state, &inc, &mut [0.0; STATE_LEN])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: ModelParams,
    pub config: IntegrationConfig,
    /// `(t, state)` samples, starting at `t = 0` and ending at the horizon.
    pub samples: Vec<(f64, StateVector)>,
}

impl Trajectory {
    pub fn last(&self) -> &(f64, StateVector) {
        self.samples.last().expect("trajectory has at least the initial sample")
    }

    /// Writes `t,S1,S2,I1,I2,Q1,Q2,R,D,C1,C2`, one row per sample.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,{}", STATE_LABELS.join(","))?;
        for (t, st) in &self.samples {
            write!(out, "{}", fmt_num(*t))?;
            for v in st.to_array() {
                write!(out, ",{}", fmt_num(v))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// CSV number format: 15 significant digits, `.` separator.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-4..1e15).contains(&a) {
        let digits = 14 - a.log10().floor() as i32;
        format!("{:.*}", digits.max(0) as usize, v)
    } else {
        format!("{:.14e}", v)
    }
}

/// Integrates from the seeded initial state to `config.horizon`.
///
/// Steps have length `dt` except possibly a shorter last one that lands on
/// the horizon. Samples are taken at multiples of `record_every` plus the
/// endpoint.
pub fn simulate(params: &ModelParams, config: &IntegrationConfig) -> Result<Trajectory, SimError> {
    let params = validate_params(*params)?;
    config.validate()?;
    // Zero total activity means both contact rates vanish, so any allocation
    // gives a zero force of infection.
    let mix = match mixing_matrix(&params) {
        Err(MixingError::Degenerate) => MixingMatrix::no_contact(&params),
        other => other?,
    };

    let dt = config.dt;
    let full_steps = (config.horizon / dt * (1.0 + 1e-12)).floor() as u64;
    let remainder = config.horizon - full_steps as f64 * dt;
    let has_tail = remainder > 1e-9 * dt;

    let mut state = initial_state(&params);
    let mut samples = vec![(0.0, state)];
    let mut records = 1u64;
    // Compensated accumulation keeps roundoff well below the truncation
    // error even over tens of thousands of steps.
    let mut comp = [0.0; STATE_LEN];
    let mut step_at = |t: f64, st: &StateVector, h: f64| {
        let inc = rk4_increment(st, &params, &mix, h);
        apply_increment(st, &inc, &mut comp).map_err(|e| match e {
            SimError::Blowup { label, value } => SimError::BlowupAt {
                time: t,
                label,
                value,
            },
            other => other,
        })
    };

    for k in 1..=full_steps {
        let t_prev = (k - 1) as f64 * dt;
        state = step_at(t_prev, &state, dt)?;
        let t = k as f64 * dt;
        if t >= records as f64 * config.record_every - 1e-9 * dt {
            samples.push((t, state));
            while records as f64 * config.record_every <= t + 1e-9 * dt {
                records += 1;
            }
        }
    }
    if has_tail {
        state = step_at(full_steps as f64 * dt, &state, remainder)?;
    }
    let end = config.horizon;
    match samples.last_mut() {
        Some(last) if (last.0 - end).abs() <= 1e-9 * dt => *last = (end, state),
        _ => samples.push((end, state)),
    }

    Ok(Trajectory {
        params,
        config: *config,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    /// `(N_i - S_i(T)) / N_i`.
    pub attack_rate: [f64; 2],
    /// `S_i(T)`.
    pub susceptible: [f64; 2],
    pub total_infected: f64,
    pub reported_cumulative: f64,
    pub deaths: f64,
    /// Whether active cases fell below the extinction threshold.
    pub extinct: bool,
    /// Largest `|sum of compartments - 1|` over the recorded samples.
    pub max_mass_error: f64,
}

pub fn summarize(traj: &Trajectory) -> RunSummary {
    let p = &traj.params;
    let (_, st) = traj.last();
    let infected = [p.n[0] - st.s[0], p.n[1] - st.s[1]];
    let attack_rate = [0, 1].map(|g| {
        if p.n[g] > 0.0 {
            (infected[g] / p.n[g]).clamp(0.0, 1.0)
        } else {
            0.0
        }
    });
    RunSummary {
        attack_rate,
        susceptible: st.s,
        total_infected: infected[0] + infected[1],
        reported_cumulative: st.c[0] + st.c[1],
        deaths: st.d,
        extinct: st.active() < traj.config.extinction_threshold,
        max_mass_error: traj
            .samples
            .iter()
            .map(|(_, s)| (s.mass() - 1.0).abs())
            .fold(0.0, f64::max),
    }
}

/// `simulate` followed by `summarize`.
pub fn run(params: &ModelParams, config: &IntegrationConfig) -> Result<RunSummary, SimError> {
    simulate(params, config).map(|t| summarize(&t))
}
