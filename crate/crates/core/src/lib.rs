//! Two-group SIRD model with quarantine, group-specific testing propensity
//! and preferred (homophilic) mixing.
//!
//! Detected infections are quarantined and stop transmitting; every death
//! passes through quarantine, with per-infection fatality `pi` in both
//! groups. A group that tests less therefore produces as many deaths per
//! infection but fewer reported cases, which is what the sweeps in
//! [`experiments`] expose.

pub mod belief;
pub mod experiments;
pub mod integrator;
pub mod mixing;
pub mod model;
pub mod oracle;
pub mod params;

pub use integrator::{
    initial_state, rk4_step, run, simulate, summarize, IntegrationConfig, RunSummary, SimError,
    Trajectory,
};
pub use mixing::{mixing_fractions, mixing_matrix, mortality_given_detection, MixingMatrix};
pub use model::{derivatives, Derivatives, StateVector};
pub use oracle::{
    homogeneous_final_size, single_group_final_size, two_group_final_size, FinalSizePrediction,
    Seeding,
};
pub use params::{validate_params, ModelParams, ParamError};
