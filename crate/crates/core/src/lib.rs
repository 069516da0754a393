//! Multipath time-delay estimation under impulsive noise.
//!
//! The received signal is modeled as `y = A x + e`, where `A` stacks shifted
//! copies of a known transmit waveform and `x` is sparse over a delay grid.
//! [`solver`] implements LL-BCS, a sparse Bayesian learner with a Laplacian
//! likelihood (robust to impulsive noise) and a Laplacian prior. [`baseline`]
//! provides LASSO, Gaussian SBL and Laplacian-prior SBL for comparison, and
//! [`harness`] runs seeded Monte Carlo experiments over SINR.

pub mod baseline;
pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod noise;
pub mod rng;
pub mod signal;
pub mod solver;

pub use baseline::{bcs_solve, l_bcs_solve, lasso_solve, BaselineOptions, Method};
pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use harness::{pick_peaks, rmse, run_sweep, run_trial, Rmse, Scenario, SweepResult, TrialResult};
pub use noise::{compose_noise, sample_gaussian, sample_gmm_impulse, scale_to_snr, GmmSpec, NoiseConfig};
pub use signal::{
    build_sensing_matrix, generate_lfm, random_channel, synthesize_clean, SensingMatrix, SparseChannel, TimeGrid,
    Waveform,
};
pub use solver::{ll_bcs_solve, DelaySpectrum, SolverOptions, SolverState};
