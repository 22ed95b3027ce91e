//! Radar receive chain: matched filtering for delay/Doppler, maximum
//! likelihood angle estimation from beamformed echoes, state estimation, and
//! one-step prediction of the vehicle states.
//!
//! The matched filter operates on raw time samples and is exercised on its
//! own; the per-instant tracking loop works from the post-matched-filter echo
//! observation, whose closed form carries the full matched-filter gain.

use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::array_geometry::{steering_vector, ArrayConfig, Beamformer};
use crate::dd_modem::{complex_gaussian, round_half_up};
use crate::scenario::{RsuState, TruthKinematics, Vec2};
use crate::{Result, SimError};

/// Post-matched-filter echo observation for one vehicle.
#[derive(Debug, Clone)]
pub struct EchoObservation {
    /// Length `N_r` receive-array observation.
    pub vector: Vec<Complex64>,
    /// Matched-filter gain (frame energy).
    pub mf_gain: f64,
    /// Noise variance per element.
    pub noise_var: f64,
}

/// Sensed parameters of one vehicle at the current instant.
#[derive(Debug, Clone, Copy)]
pub struct EstimatedState {
    /// Round-trip delay estimate (s).
    pub delay: f64,
    /// Round-trip Doppler estimate (Hz).
    pub doppler_rt: f64,
    /// Angle estimate (rad).
    pub angle: f64,
    /// Reflection-coefficient estimate `rcs / (c * delay)`.
    pub reflection: f64,
    /// Estimated position (m, m).
    pub position: Vec2,
    /// Estimated signed speed (m/s).
    pub speed: f64,
}

/// One-step-ahead prediction of a vehicle state.
#[derive(Debug, Clone, Copy)]
pub struct PredictedState {
    /// Predicted position (m, m).
    pub position: Vec2,
    /// Predicted speed, equal to the estimate (constant-speed model).
    pub speed: f64,
    /// Predicted angle (rad).
    pub angle: f64,
    /// Predicted downlink LoS amplitude gain.
    pub dl_gain: f64,
    /// Predicted downlink Doppler (Hz).
    pub dl_doppler: f64,
}

/// Predicted delay/Doppler/angle of one uplink path.
#[derive(Debug, Clone, Copy)]
pub struct PredictedPath {
    /// Scattering vehicle index (transmitter itself for the direct path).
    pub via_vehicle: usize,
    /// Excess delay relative to the direct path (s).
    pub delay: f64,
    /// Doppler shift (Hz).
    pub doppler: f64,
    /// Arrival angle, used for receive beamforming (rad).
    pub angle: f64,
}

// ─── Matched filtering ─────────────────────────────────────────────────────────

/// Correlates the received samples against delayed, Doppler-shifted copies of
/// the reference and returns the grid point with the largest magnitude:
/// `(delay_hat, doppler_hat, peak_magnitude)`.
///
/// Delays are rounded to the nearest sample at `sample_rate`. Ties resolve to
/// the earliest grid point scanned (delay-major order).
pub fn matched_filter(
    rx: &[Complex64],
    reference: &[Complex64],
    delay_grid: &[f64],
    doppler_grid: &[f64],
    sample_rate: f64,
) -> Result<(f64, f64, f64)> {
    if delay_grid.is_empty() || doppler_grid.is_empty() {
        return Err(SimError::Configuration("matched-filter grids must be non-empty".into()));
    }
    let mut best = (delay_grid[0], doppler_grid[0], -1.0f64);
    for &delay in delay_grid {
        let shift = round_half_up(delay * sample_rate);
        for &doppler in doppler_grid {
            let mut acc = Complex64::default();
            for (idx, &sample) in rx.iter().enumerate() {
                let ref_idx = idx as i64 - shift;
                if ref_idx < 0 || ref_idx >= reference.len() as i64 {
                    continue;
                }
                let rot = Complex64::from_polar(1.0, -TAU * doppler * idx as f64 / sample_rate);
                acc += sample * reference[ref_idx as usize].conj() * rot;
            }
            let mag = acc.norm();
            if mag > best.2 {
                best = (delay, doppler, mag);
            }
        }
    }
    Ok(best)
}

// ─── Echo model and angle estimation ───────────────────────────────────────────

/// Noise-free post-matched-filter echo
/// `beta * G_m * (a^H(theta) f) * b(theta)` for a vehicle at `angle`.
pub fn echo_model(
    angle: f64,
    reflection: f64,
    mf_gain: f64,
    tx_beam: &Beamformer,
    n_rx: usize,
) -> Vec<Complex64> {
    let a = steering_vector(angle, tx_beam.weights.len());
    let tx_gain: Complex64 = a
        .entries
        .iter()
        .zip(&tx_beam.weights)
        .map(|(an, w)| an.conj() * w)
        .sum();
    let scale = reflection * mf_gain;
    steering_vector(angle, n_rx)
        .entries
        .into_iter()
        .map(|bn| bn * tx_gain * scale)
        .collect()
}

/// Synthesizes the echo observation of one vehicle, adding per-element
/// complex Gaussian noise of the given variance.
pub fn synthesize_echo<R: Rng + ?Sized>(
    truth: &TruthKinematics,
    tx_beam: &Beamformer,
    n_rx: usize,
    mf_gain: f64,
    noise_var: f64,
    rng: &mut R,
) -> EchoObservation {
    let mut vector = echo_model(truth.angle, truth.reflection, mf_gain, tx_beam, n_rx);
    for v in &mut vector {
        *v += complex_gaussian(rng, noise_var);
    }
    EchoObservation {
        vector,
        mf_gain,
        noise_var,
    }
}

/// Uniform angle grid of `n_points` cell centers over `[-pi/2, pi/2]`.
pub fn angle_grid(n_points: usize) -> Vec<f64> {
    (0..n_points)
        .map(|u| -FRAC_PI_2 + PI * (u as f64 + 0.5) / n_points as f64)
        .collect()
}

/// Index of the grid angle closest to `angle`.
pub fn nearest_grid_index(angle: f64, n_points: usize) -> usize {
    let raw = ((angle + FRAC_PI_2) / PI * n_points as f64 - 0.5).round();
    (raw.max(0.0) as usize).min(n_points - 1)
}

/// ML angle estimate over the `N_t`-point grid, restricted to
/// `search_halfwidth` bins on each side of the predicted angle when one is
/// available (full grid otherwise).
///
/// Minimizes the Gaussian-likelihood residual
/// `|| r - beta_hat * G_m * (a^H(theta) f) * b(theta) ||^2`. Candidates are
/// scanned nearest-to-prediction first, so a flat likelihood returns the
/// predicted angle's grid point.
pub fn estimate_angle(
    obs: &EchoObservation,
    predicted_angle: Option<f64>,
    reflection_hat: f64,
    tx_beam: &Beamformer,
    cfg: &ArrayConfig,
    search_halfwidth: usize,
) -> f64 {
    let grid = angle_grid(cfg.n_tx);
    let candidates: Vec<usize> = match predicted_angle {
        Some(pred) => {
            let center = nearest_grid_index(pred, cfg.n_tx);
            let mut list = Vec::with_capacity(2 * search_halfwidth + 1);
            list.push(center);
            for d in 1..=search_halfwidth {
                if center >= d {
                    list.push(center - d);
                }
                if center + d < cfg.n_tx {
                    list.push(center + d);
                }
            }
            list
        }
        None => (0..cfg.n_tx).collect(),
    };
    let mut best_angle = grid[candidates[0]];
    let mut best_residual = f64::INFINITY;
    for &idx in &candidates {
        let theta = grid[idx];
        let model = echo_model(theta, reflection_hat, obs.mf_gain, tx_beam, cfg.n_rx);
        let residual: f64 = obs
            .vector
            .iter()
            .zip(&model)
            .map(|(r, m)| (r - m).norm_sqr())
            .sum();
        if residual < best_residual {
            best_residual = residual;
            best_angle = theta;
        }
    }
    best_angle
}

// ─── State estimation ──────────────────────────────────────────────────────────

/// Inverts delay and angle to a position:
/// `x = x_rsu + c * delay * sin(angle) / 2`, `y = y_rsu + c * delay * cos(angle) / 2`.
pub fn estimate_position(delay_hat: f64, angle_hat: f64, rsu: &RsuState) -> Result<Vec2> {
    if delay_hat <= 0.0 {
        return Err(SimError::InvalidMeasurement(format!(
            "delay estimate {delay_hat} is not positive"
        )));
    }
    let half_range = rsu.modem.propagation_speed() * delay_hat / 2.0;
    Ok(Vec2::new(
        rsu.position.x + half_range * angle_hat.sin(),
        rsu.position.y + half_range * angle_hat.cos(),
    ))
}

/// Inverts the round-trip Doppler to a signed speed:
/// `s = c * doppler_rt / (2 f_c cos(angle))`.
pub fn estimate_speed(doppler_rt_hat: f64, angle_hat: f64, fc: f64) -> Result<f64> {
    let cos = angle_hat.cos();
    if cos.abs() <= 1e-6 {
        return Err(SimError::IllConditioned(
            "cos(angle) too small for speed inversion".into(),
        ));
    }
    Ok(crate::SPEED_OF_LIGHT * doppler_rt_hat / (2.0 * fc * cos))
}

/// Propagates an estimate one interval ahead under the constant-speed model
/// and derives the predicted angle, downlink gain, and downlink Doppler.
pub fn predict_state(est: &EstimatedState, dt: f64, rsu: &RsuState) -> Result<PredictedState> {
    let position = Vec2::new(est.position.x + dt * est.speed, est.position.y);
    let d = position.distance_to(rsu.position);
    if d <= f64::EPSILON {
        return Err(SimError::DegenerateGeometry(
            "predicted position coincides with the RSU".into(),
        ));
    }
    let c = rsu.modem.propagation_speed();
    let angle = ((position.x - rsu.position.x) / d).asin();
    Ok(PredictedState {
        position,
        speed: est.speed,
        angle,
        dl_gain: (c / (4.0 * PI * rsu.modem.fc * d * d)).sqrt(),
        dl_doppler: est.speed * angle.cos() * rsu.modem.fc / c,
    })
}

/// Predicted uplink paths for every vehicle from the predicted states.
///
/// Mirrors the truth-side geometry: path 0 is the direct path with Doppler
/// `-dl_doppler`; vehicle `j` contributes a path with delay
/// `(|q_i - q_j| + |q_j - q_rsu| - |q_i - q_rsu|) / c`, Doppler
/// `cos(theta_j) f_c (s_i - s_j) / c`, and receive-beam angle `theta_j`.
pub fn predict_uplink_paths(predicted: &[PredictedState], rsu: &RsuState) -> Vec<Vec<PredictedPath>> {
    let c = rsu.modem.propagation_speed();
    predicted
        .iter()
        .enumerate()
        .map(|(i, pi)| {
            let di = pi.position.distance_to(rsu.position);
            let mut paths = vec![PredictedPath {
                via_vehicle: i,
                delay: 0.0,
                doppler: -pi.dl_doppler,
                angle: pi.angle,
            }];
            for (j, pj) in predicted.iter().enumerate() {
                if j == i {
                    continue;
                }
                let dj = pj.position.distance_to(rsu.position);
                let dij = pi.position.distance_to(pj.position);
                paths.push(PredictedPath {
                    via_vehicle: j,
                    delay: (dij + dj - di) / c,
                    doppler: pj.angle.cos() * rsu.modem.fc / c * (pi.speed - pj.speed),
                    angle: pj.angle,
                });
            }
            paths
        })
        .collect()
}

/// Quantizes a measurement to a uniform grid of the given step, ties toward
/// positive infinity. Models the matched-filter peak at high SNR.
pub fn quantize_to_grid(value: f64, step: f64) -> f64 {
    round_half_up(value / step) as f64 * step
}
