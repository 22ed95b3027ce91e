//! Uniform linear array steering vectors, beamformers, and array gains.
//!
//! Antennas are spaced half a wavelength apart, so element `n` of a steering
//! vector toward angle `theta` is `exp(j (n-1) pi sin(theta))`. Angles are
//! measured from array broadside and live in `[-pi/2, pi/2]`.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::{Result, SimError};

/// RSU antenna-array configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayConfig {
    /// Transmit antennas.
    pub n_tx: usize,
    /// Receive antennas.
    pub n_rx: usize,
    /// Transmit power allocated per vehicle (W).
    pub per_vehicle_power: f64,
}

impl ArrayConfig {
    pub fn new(n_tx: usize, n_rx: usize, per_vehicle_power: f64) -> Result<Self> {
        if n_tx == 0 || n_rx == 0 {
            return Err(SimError::Configuration("antenna counts must be at least 1".into()));
        }
        if per_vehicle_power <= 0.0 {
            return Err(SimError::Configuration("per-vehicle power must be positive".into()));
        }
        Ok(Self {
            n_tx,
            n_rx,
            per_vehicle_power,
        })
    }
}

/// Per-antenna phase profile toward a given angle.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    /// Unit-modulus entries, one per antenna.
    pub entries: Vec<Complex64>,
    /// Angle the profile points at (rad).
    pub angle: f64,
}

impl SteeringVector {
    /// Hermitian inner product `self^H * other`.
    pub fn dot_conj(&self, other: &SteeringVector) -> Complex64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Which side of the link a beamformer serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamformerKind {
    Transmit,
    Receive,
}

/// Weight vector steering one spatial beam.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    pub weights: Vec<Complex64>,
    pub target_angle: f64,
    pub kind: BeamformerKind,
}

impl Beamformer {
    /// `weights^H * v` for a length-matched vector.
    pub fn combine(&self, v: &[Complex64]) -> Complex64 {
        self.weights.iter().zip(v).map(|(w, x)| w.conj() * x).sum()
    }

    pub fn power(&self) -> f64 {
        self.weights.iter().map(|w| w.norm_sqr()).sum()
    }
}

/// Steering vector with entries `exp(j (n-1) pi sin(angle))`, `n = 1..=n_antennas`.
pub fn steering_vector(angle: f64, n_antennas: usize) -> SteeringVector {
    let s = angle.sin();
    let entries = (0..n_antennas)
        .map(|idx| Complex64::from_polar(1.0, idx as f64 * PI * s))
        .collect();
    SteeringVector { entries, angle }
}

/// Transmit beamformer `sqrt(p / N_t) * a(angle)`; its squared norm equals the
/// allocated per-vehicle power.
pub fn tx_beamformer(predicted_angle: f64, cfg: &ArrayConfig) -> Beamformer {
    let scale = (cfg.per_vehicle_power / cfg.n_tx as f64).sqrt();
    let weights = steering_vector(predicted_angle, cfg.n_tx)
        .entries
        .into_iter()
        .map(|e| e * scale)
        .collect();
    Beamformer {
        weights,
        target_angle: predicted_angle,
        kind: BeamformerKind::Transmit,
    }
}

/// Receive beamformer `b(angle)` (unweighted steering vector).
pub fn rx_beamformer(predicted_angle: f64, cfg: &ArrayConfig) -> Beamformer {
    Beamformer {
        weights: steering_vector(predicted_angle, cfg.n_rx).entries,
        target_angle: predicted_angle,
        kind: BeamformerKind::Receive,
    }
}

/// Squared steering-vector correlation `|a^H(true) a(steered)|^2`.
///
/// Equals `n_antennas^2` when the angles coincide and is bounded by it.
pub fn array_gain(true_angle: f64, steered_angle: f64, n_antennas: usize) -> f64 {
    steering_vector(true_angle, n_antennas)
        .dot_conj(&steering_vector(steered_angle, n_antennas))
        .norm_sqr()
}
