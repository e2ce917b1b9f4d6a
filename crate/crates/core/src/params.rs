//! Scalar parameters of the two-group system and their validation.

use thiserror::Error;

/// Tolerance on `n[0] + n[1] == 1`.
pub const SIZE_SUM_TOL: f64 = 1e-9;

/// Group index convention: `[0]` is the compliant majority, `[1]` the skeptics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Removal rate, one over the duration of illness.
    pub gamma: f64,
    /// Per-infection death probability, shared by both groups.
    pub pi: f64,
    /// Basic reproduction numbers per group.
    pub r0: [f64; 2],
    /// Probability that a new infection is detected and quarantined.
    pub alpha: [f64; 2],
    /// Homophily: share of contacts reserved for the own group.
    pub h: f64,
    /// Initial group sizes; they sum to one.
    pub n: [f64; 2],
    /// Initially infected fraction of each group.
    pub seed_fraction: f64,
}

impl Default for ModelParams {
    /// The baseline calibration: one-week illness, 1% fatality, R0 = 2.5 in
    /// both groups, detection 0.45 vs 0.27, proportionate mixing, equal sizes.
    fn default() -> Self {
        ModelParams {
            gamma: 1.0 / 7.0,
            pi: 0.01,
            r0: [2.5, 2.5],
            alpha: [0.45, 0.27],
            h: 0.0,
            n: [0.5, 0.5],
            seed_fraction: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("gamma must be positive and finite, got {0}")]
    NonPositiveGamma(f64),
    #[error("pi must lie in [0, 1], got {0}")]
    PiOutOfRange(f64),
    #[error("r0{group} must be non-negative and finite, got {value}")]
    NegativeR0 { group: usize, value: f64 },
    #[error("alpha{group} = {alpha} is below pi = {pi} (or above 1)")]
    AlphaBelowPi { group: usize, alpha: f64, pi: f64 },
    #[error("h must lie in [0, 1], got {0}")]
    HOutOfRange(f64),
    #[error("group sizes must be non-negative and sum to 1, got {0} + {1}")]
    SizesNotNormalized(f64, f64),
    #[error("seed fraction {seed} must lie in (0, {max})")]
    SeedOutOfRange { seed: f64, max: f64 },
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

/// Returns the candidate unchanged iff every invariant holds.
///
/// Checks run in a fixed order so the first violated invariant is reported.
pub fn validate_params(p: ModelParams) -> Result<ModelParams, ParamError> {
    if !(p.gamma > 0.0 && p.gamma.is_finite()) {
        return Err(ParamError::NonPositiveGamma(p.gamma));
    }
    if !in_unit(p.pi) {
        return Err(ParamError::PiOutOfRange(p.pi));
    }
    for (g, &r) in p.r0.iter().enumerate() {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(ParamError::NegativeR0 { group: g + 1, value: r });
        }
    }
    for (g, &a) in p.alpha.iter().enumerate() {
        if !(a >= p.pi && a <= 1.0) {
            return Err(ParamError::AlphaBelowPi {
                group: g + 1,
                alpha: a,
                pi: p.pi,
            });
        }
    }
    if !in_unit(p.h) {
        return Err(ParamError::HOutOfRange(p.h));
    }
    let [n1, n2] = p.n;
    if !(n1 >= 0.0 && n2 >= 0.0 && (n1 + n2 - 1.0).abs() <= SIZE_SUM_TOL) {
        return Err(ParamError::SizesNotNormalized(n1, n2));
    }
    let max = n1.min(n2);
    if !(p.seed_fraction > 0.0 && p.seed_fraction < max) {
        return Err(ParamError::SeedOutOfRange {
            seed: p.seed_fraction,
            max,
        });
    }
    Ok(p)
}

impl ModelParams {
    pub fn validated(self) -> Result<Self, ParamError> {
        validate_params(self)
    }

    /// Sets the skeptic share, keeping the population normalized.
    pub fn with_n2(mut self, n2: f64) -> Self {
        self.n = [1.0 - n2, n2];
        self
    }
}
