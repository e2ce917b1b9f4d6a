//! Preferred-mixing contact allocation.
//!
//! A share `h` of every contact stays inside the own group; the remaining
//! `1 - h` is spread over both groups in proportion to their activity
//! `R0_j * N_j`.

use thiserror::Error;

use crate::params::ModelParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MixingError {
    #[error("degenerate mixing: total activity R01*N1 + R02*N2 is zero")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingMatrix {
    /// Proportionate-mixing fractions `p_j`.
    pub p_frac: [f64; 2],
    /// `p[i][j]`: share of group i's contacts that go to group j.
    pub p: [[f64; 2]; 2],
    /// Infectious contact rates `gamma * R0_i`.
    pub beta: [f64; 2],
}

/// `p_i = R0_i N_i / (R0_1 N_1 + R0_2 N_2)`.
///
/// The common `(1 - h) gamma` factor is left out; it cancels, and keeping it
/// would turn `h = 1` into `0 / 0`.
pub fn mixing_fractions(params: &ModelParams) -> Result<[f64; 2], MixingError> {
    let a1 = params.r0[0] * params.n[0];
    let a2 = params.r0[1] * params.n[1];
    let total = a1 + a2;
    if !(total > 0.0) {
        return Err(MixingError::Degenerate);
    }
    let p1 = a1 / total;
    Ok([p1, 1.0 - p1])
}

pub fn mixing_matrix(params: &ModelParams) -> Result<MixingMatrix, MixingError> {
    let p_frac = mixing_fractions(params)?;
    let h = params.h;
    let mut p = [[0.0; 2]; 2];
    for (i, row) in p.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (1.0 - h) * p_frac[j];
        }
        row[i] += h;
    }
    Ok(MixingMatrix {
        p_frac,
        p,
        beta: [params.gamma * params.r0[0], params.gamma * params.r0[1]],
    })
}

impl MixingMatrix {
    /// Allocation for a population without infectious contacts: proportional
    /// to group size, zero contact rates.
    pub fn no_contact(params: &ModelParams) -> Self {
        let p_frac = params.n;
        let h = params.h;
        let p = [
            [h + (1.0 - h) * p_frac[0], (1.0 - h) * p_frac[1]],
            [(1.0 - h) * p_frac[0], h + (1.0 - h) * p_frac[1]],
        ];
        MixingMatrix {
            p_frac,
            p,
            beta: [0.0, 0.0],
        }
    }
}

/// Probability that a quarantined case dies, `pi / alpha_i`.
///
/// Every death passes through quarantine, so this keeps the per-infection
/// fatality at `pi` in both groups.
pub fn mortality_given_detection(params: &ModelParams) -> [f64; 2] {
    params.alpha.map(|a| if a > 0.0 { params.pi / a } else { 0.0 })
}
