//! Integration-free final-size predictions.
//!
//! Only undetected cases transmit and each of them stays infectious for
//! `1/gamma` on average, so integrating the susceptible equations gives
//!
//! ```text
//! S_i(inf) = S_i(0) * exp(-R0_i * sum_j p_ij (1 - alpha_j) (N_j - S_j(inf)) / N_j)
//! ```
//!
//! where `S_i(0) = (1 - seed) N_i`. With `seed = 0` this is the classical
//! final-size relation and `S = N` is always a (trivial) solution; with the
//! simulator's seeding the relation is exact for the integrated system.

use thiserror::Error;

use crate::mixing::{mixing_matrix, MixingError, MixingMatrix};
use crate::params::ModelParams;

/// Residual bound every prediction must meet.
pub const RESIDUAL_TOL: f64 = 1e-12;
/// Iteration cap of the two-group fixed-point solver.
pub const MAX_ITERATIONS: usize = 1_000_000;
const DAMPING: f64 = 0.5;
const STALL_TOL: f64 = 1e-16;

/// Which initial condition the prediction starts from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Seeding {
    /// The limit of a vanishing seed.
    Vanishing,
    /// The simulator's seed, `params.seed_fraction` of each group.
    FromParams,
}

impl Seeding {
    fn fraction(self, params: &ModelParams) -> f64 {
        match self {
            Seeding::Vanishing => 0.0,
            Seeding::FromParams => params.seed_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("homogeneous oracle needs h = 0 and equal R0, got h = {h}, R0 = {r0:?}")]
    NotHomogeneous { h: f64, r0: [f64; 2] },
    #[error(transparent)]
    Mixing(#[from] MixingError),
    #[error("fixed-point iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalSizePrediction {
    /// Predicted `S_i(inf)`.
    pub s_inf: [f64; 2],
    pub attack_rate: [f64; 2],
    pub total_infected: f64,
    pub reported_cumulative: f64,
    pub deaths: f64,
    pub solver_residual: f64,
}

impl FinalSizePrediction {
    fn from_s_inf(params: &ModelParams, s_inf: [f64; 2], solver_residual: f64) -> Self {
        let infected = [0, 1].map(|g| params.n[g] - s_inf[g]);
        let attack_rate = [0, 1].map(|g| {
            if params.n[g] > 0.0 {
                infected[g] / params.n[g]
            } else {
                0.0
            }
        });
        let total_infected = infected[0] + infected[1];
        FinalSizePrediction {
            s_inf,
            attack_rate,
            total_infected,
            reported_cumulative: params.alpha[0] * infected[0] + params.alpha[1] * infected[1],
            deaths: params.pi * total_infected,
            solver_residual,
        }
    }
}

/// Largest root in `[lo, hi]` of a function that is positive on `(0, root)`
/// and non-positive after it, by bisection down to adjacent floats.
fn bisect_last_positive(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Starting just above zero, halves `x` until `f(x) > 0`, for maps that
/// vanish at 0 and grow on the right when supercritical.
fn positive_point(f: &impl Fn(f64) -> f64, hi: f64) -> Option<f64> {
    let mut x = hi;
    while x > 1e-300 {
        if f(x) > 0.0 {
            return Some(x);
        }
        x *= 0.5;
    }
    None
}

/// Attack rate `z` of a single group: the largest root in `[0, 1)` of
/// `z = 1 - exp(-r0 (1 - alpha) z)`; zero when `r0 (1 - alpha) <= 1`.
pub fn single_group_final_size(r0: f64, alpha: f64) -> f64 {
    let r_eff = r0 * (1.0 - alpha);
    if !(r_eff > 1.0) {
        return 0.0;
    }
    let g = |z: f64| 1.0 - (-r_eff * z).exp() - z;
    match positive_point(&g, 1.0) {
        Some(lo) => bisect_last_positive(g, lo, 1.0),
        None => 0.0,
    }
}

/// Final size for `h = 0` and `R0_1 = R0_2`, where both groups deplete at the
/// same relative rate and share the cumulative hazard `L`:
///
/// ```text
/// L = R0 * sum_j (1 - alpha_j) (N_j - S_j(0) e^{-L}) / (N_1 + N_2),   S_i(inf) = S_i(0) e^{-L}
/// ```
pub fn homogeneous_final_size(
    params: &ModelParams,
    seeding: Seeding,
) -> Result<FinalSizePrediction, OracleError> {
    if params.h != 0.0 || params.r0[0] != params.r0[1] {
        return Err(OracleError::NotHomogeneous {
            h: params.h,
            r0: params.r0,
        });
    }
    let r0 = params.r0[0];
    let seed = seeding.fraction(params);
    let n_tot = params.n[0] + params.n[1];
    let s0 = params.n.map(|n| (1.0 - seed) * n);
    let weight = [0, 1].map(|j| r0 * (1.0 - params.alpha[j]) / n_tot);
    let g = |l: f64| {
        let hazard: f64 = (0..2)
            .map(|j| weight[j] * (params.n[j] - s0[j] * (-l).exp()))
            .sum();
        hazard - l
    };
    let hi = weight[0] * params.n[0] + weight[1] * params.n[1];
    let hazard = if seed > 0.0 {
        bisect_last_positive(g, 0.0, hi)
    } else {
        match positive_point(&g, hi) {
            Some(lo) if hi > 1.0 => bisect_last_positive(g, lo, hi),
            _ => 0.0,
        }
    };
    let s_inf = s0.map(|s| s * (-hazard).exp());
    let residual = two_group_residual(params, &mixing_or_flat(params)?, s0, s_inf);
    Ok(FinalSizePrediction::from_s_inf(params, s_inf, residual))
}

fn mixing_or_flat(params: &ModelParams) -> Result<MixingMatrix, OracleError> {
    match mixing_matrix(params) {
        Err(MixingError::Degenerate) => Ok(MixingMatrix::no_contact(params)),
        other => Ok(other?),
    }
}

fn final_size_map(params: &ModelParams, mix: &MixingMatrix, s0: [f64; 2], s: [f64; 2]) -> [f64; 2] {
    let undetected = [0, 1].map(|j| {
        if params.n[j] > 0.0 {
            (1.0 - params.alpha[j]) * (params.n[j] - s[j]) / params.n[j]
        } else {
            0.0
        }
    });
    [0, 1].map(|i| {
        let exposure = mix.p[i][0] * undetected[0] + mix.p[i][1] * undetected[1];
        s0[i] * (-params.r0[i] * exposure).exp()
    })
}

fn two_group_residual(params: &ModelParams, mix: &MixingMatrix, s0: [f64; 2], s: [f64; 2]) -> f64 {
    let f = final_size_map(params, mix, s0, s);
    (f[0] - s[0]).abs().max((f[1] - s[1]).abs())
}

/// Coupled two-group final size by damped fixed-point iteration.
///
/// The map is order-preserving, so iterating from `S = 0` climbs
/// monotonically to its least fixed point: the epidemic branch when
/// supercritical, `S = N` otherwise.
pub fn two_group_final_size(
    params: &ModelParams,
    seeding: Seeding,
) -> Result<FinalSizePrediction, OracleError> {
    let mix = mixing_or_flat(params)?;
    let seed = seeding.fraction(params);
    let s0 = params.n.map(|n| (1.0 - seed) * n);
    let mut s = [0.0; 2];
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let f = final_size_map(params, &mix, s0, s);
        residual = (f[0] - s[0]).abs().max((f[1] - s[1]).abs());
        let next = [0, 1].map(|g| (1.0 - DAMPING) * s[g] + DAMPING * f[g]);
        // Run on to the floating-point fixed point: a residual of 1e-12
        // alone leaves an error of 1e-12 / (1 - contraction) in S.
        if residual <= STALL_TOL || next == s {
            if residual < RESIDUAL_TOL {
                return Ok(FinalSizePrediction::from_s_inf(params, s, residual));
            }
            break;
        }
        s = next;
    }
    Err(OracleError::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual,
    })
}

/// `K[i][j]`: expected new infections in group i caused by one new infection
/// in group j, at the disease-free state.
pub fn next_generation_matrix(params: &ModelParams) -> Result<[[f64; 2]; 2], OracleError> {
    let mix = mixing_or_flat(params)?;
    let mut k = [[0.0; 2]; 2];
    for (i, row) in k.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            if params.n[j] > 0.0 {
                *cell = params.r0[i] * mix.p[i][j] * (1.0 - params.alpha[j]) * params.n[i]
                    / params.n[j];
            }
        }
    }
    Ok(k)
}

/// Dominant eigenvalue of a non-negative 2x2 matrix.
pub fn spectral_radius(k: &[[f64; 2]; 2]) -> f64 {
    let tr = k[0][0] + k[1][1];
    let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
    let disc = (tr * tr - 4.0 * det).max(0.0);
    0.5 * (tr + disc.sqrt())
}
