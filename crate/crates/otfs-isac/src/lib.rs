//! Link-level simulator for sensing-assisted OTFS transmission in vehicular
//! networks.
//!
//! A roadside unit (RSU) with transmit/receive uniform linear arrays serves a
//! set of single-antenna vehicles moving along a road. Every frame doubles as
//! a radar waveform: the RSU estimates each vehicle's delay, Doppler, and
//! angle from the reflected echoes, converts them to positions and speeds,
//! and predicts the channel parameters one instant ahead. The predictions
//! drive three things:
//!
//! - downlink beamforming plus pre-equalization, so vehicles detect symbols
//!   with a single-tap decision and no channel estimation,
//! - guard-free uplink pilot placement, where a single superimposed pilot
//!   yields per-path gain estimates with a quantified uncertainty,
//! - an uncertainty-aware sum-product detector that folds the estimation
//!   variance into its Gaussian messages.
//!
//! Modules mirror the processing chain:
//!
//! - [`dd_modem`]: delay-Doppler ↔ time-frequency transforms and DD-domain
//!   channel application,
//! - [`array_geometry`]: steering vectors, beamformers, array gains,
//! - [`scenario`]: ground-truth vehicle kinematics and derived parameters,
//! - [`sensing`]: matched filtering, ML angle estimation, state prediction,
//! - [`downlink`]: pre-equalized transmission and single-tap detection,
//! - [`uplink`]: pilot placement, gain estimation, factor-graph SPA detection,
//! - [`sim`]: configuration, Monte Carlo runners, metric CSV emission.
//!
//! The `simulate` binary drives full runs from a TOML config; the `examples/`
//! directory holds one runnable example per capability.

pub mod array_geometry;
pub mod dd_modem;
pub mod downlink;
pub mod scenario;
pub mod sensing;
pub mod sim;
pub mod uplink;

use thiserror::Error;

/// Propagation speed used throughout (m/s).
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Errors surfaced by the simulator library.
#[derive(Debug, Error)]
pub enum SimError {
    /// Grid or parameter dimensions do not match the modem configuration.
    #[error("configuration error: {0}")]
    Configuration(String),
    /// A channel description is unusable (e.g. empty tap list).
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    /// Vehicle and RSU geometry degenerate (zero distance).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    /// A measurement violates its physical domain (e.g. non-positive delay).
    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),
    /// Geometry makes an estimate unreliable (e.g. cos(angle) ~ 0).
    #[error("ill-conditioned geometry: {0}")]
    IllConditioned(String),
    /// A channel prediction is unusable (e.g. zero predicted gain).
    #[error("invalid prediction: {0}")]
    InvalidPrediction(String),
    /// Detection cannot proceed (e.g. zero effective gain).
    #[error("detection impossible: {0}")]
    DetectionImpossible(String),
    /// Symbol placement does not fit the frame.
    #[error("placement error: {0}")]
    Placement(String),
    /// Pilot symbol unusable (zero magnitude).
    #[error("invalid pilot: {0}")]
    InvalidPilot(String),
    /// Configuration file rejected.
    #[error("config error: {0}")]
    Config(String),
    /// Output I/O failure, annotated with the path.
    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, SimError>;
