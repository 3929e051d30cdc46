//! Channel estimation for fluid antenna systems (FAS) by iterative sparse
//! covariance fitting.
//!
//! A FAS receiver has `N` candidate antenna positions ("ports") but only `M`
//! RF chains, so each pilot slot observes `M` of the `N` port gains. This
//! crate models that setting end to end:
//!
//! - [`array`] and [`channel`]: port geometry, steering dictionaries and
//!   sparse clustered channel draws.
//! - [`schedule`]: per-slot switch matrices and the stacked selector.
//! - [`pilot`]: noisy pilot observations and SNR calibration.
//! - [`samv`]: the iterative maximum-likelihood grid-power estimator and
//!   channel reconstruction.
//! - [`baseline`]: least-squares-with-interpolation and orthogonal matching
//!   pursuit reference estimators.
//! - [`metrics`]: NMSE, QPSK bit error rate and selected-port capacity.
//! - [`experiment`]: seeded Monte-Carlo sweeps that emit CSV.

pub mod array;
pub mod baseline;
pub mod channel;
pub mod error;
pub mod experiment;
mod linalg;
pub mod metrics;
pub mod pilot;
pub mod rng;
pub mod samv;
pub mod schedule;

pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;

pub use array::{build_dictionary, steering_vector, ArrayGeometry, GridKind, SteeringDictionary};
pub use baseline::{ls_estimate, omp_estimate, BaselineConfig, Interpolation, OmpEstimate};
pub use channel::{sample_ssc_channel, ChannelRealization, PathComponent, SscParams};
pub use error::{Error, Result};
pub use metrics::{ber_qpsk, bootstrap_mean_ci, capacity, nmse, select_port, TrialRecord};
pub use pilot::{sigma_for_snr, synthesize_observation, PilotObservation};
pub use samv::{
    assemble_covariance, initialize, negative_log_likelihood, reconstruct_channel,
    robust_sample_covariance, run, samv_update, EffectiveDictionary, EstimatorConfig,
    IterationRecord, SigmaFloor, SpectrumEstimate, UpdateRule, WeightFunction,
};
pub use schedule::{
    random_schedule, sequential_schedule, validate_switch_matrix, StackedSelector, SwitchSchedule,
    Violation,
};
