//! Compartment state and the right-hand side of the two-group SIRD system
//! with quarantine.

use crate::mixing::{mortality_given_detection, MixingMatrix};
use crate::params::ModelParams;

/// Number of scalar slots in a [`StateVector`].
pub const STATE_LEN: usize = 10;

/// Column labels in the order used by [`StateVector::to_array`].
pub const STATE_LABELS: [&str; STATE_LEN] =
    ["S1", "S2", "I1", "I2", "Q1", "Q2", "R", "D", "C1", "C2"];

/// Compartment occupancies as population fractions.
///
/// `c` is not a compartment: it counts every detected infection ever, so it
/// is excluded from [`StateVector::mass`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateVector {
    pub s: [f64; 2],
    pub i: [f64; 2],
    pub q: [f64; 2],
    pub r: f64,
    pub d: f64,
    pub c: [f64; 2],
}

/// Time derivatives, laid out like [`StateVector`].
pub type Derivatives = StateVector;

impl StateVector {
    pub fn to_array(&self) -> [f64; STATE_LEN] {
        [
            self.s[0], self.s[1], self.i[0], self.i[1], self.q[0], self.q[1], self.r, self.d,
            self.c[0], self.c[1],
        ]
    }

    pub fn from_array(a: [f64; STATE_LEN]) -> Self {
        StateVector {
            s: [a[0], a[1]],
            i: [a[2], a[3]],
            q: [a[4], a[5]],
            r: a[6],
            d: a[7],
            c: [a[8], a[9]],
        }
    }

    /// Sum of the eight epidemiological compartments.
    pub fn mass(&self) -> f64 {
        self.s[0] + self.s[1] + self.i[0] + self.i[1] + self.q[0] + self.q[1] + self.r + self.d
    }

    /// Active cases, detected or not.
    pub fn active(&self) -> f64 {
        self.i[0] + self.i[1] + self.q[0] + self.q[1]
    }
}

/// Per-group force of infection `beta_i * sum_j p_ij I_j / N_j`.
///
/// Groups of size zero hold no infectious mass and are skipped.
pub fn force_of_infection(state: &StateVector, params: &ModelParams, mix: &MixingMatrix) -> [f64; 2] {
    let prevalence = [0, 1].map(|j| {
        if params.n[j] > 0.0 {
            state.i[j] / params.n[j]
        } else {
            0.0
        }
    });
    [0, 1].map(|i| mix.beta[i] * (mix.p[i][0] * prevalence[0] + mix.p[i][1] * prevalence[1]))
}

/// Right-hand side of the system, extended with the cumulative reported
/// counters `dC_i = alpha_i * incidence_i`.
pub fn derivatives(state: &StateVector, params: &ModelParams, mix: &MixingMatrix) -> Derivatives {
    let mu = mortality_given_detection(params);
    let gamma = params.gamma;
    let force = force_of_infection(state, params, mix);
    let mut out = Derivatives::default();
    for g in 0..2 {
        let incidence = state.s[g] * force[g];
        let detected = params.alpha[g] * incidence;
        out.s[g] = -incidence;
        out.i[g] = (incidence - detected) - gamma * state.i[g];
        out.q[g] = detected - gamma * state.q[g];
        out.c[g] = detected;
    }
    out.r = gamma * (state.i[0] + state.i[1])
        + gamma * ((1.0 - mu[0]) * state.q[0] + (1.0 - mu[1]) * state.q[1]);
    out.d = gamma * (mu[0] * state.q[0] + mu[1] * state.q[1]);
    out
}
