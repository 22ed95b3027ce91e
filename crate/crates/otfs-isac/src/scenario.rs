//! Ground-truth vehicular network: vehicle states, constant-velocity motion,
//! and the true sensing/communication parameters derived from geometry.
//!
//! The road runs along the x-axis; vehicles move in the positive or negative
//! x direction at constant speed. The RSU sits at a fixed position with its
//! arrays parallel to the road, so a vehicle's angle satisfies
//! `sin(theta) = (x - x_rsu) / distance`.

use num_complex::Complex64;
use rand::Rng;

use crate::array_geometry::ArrayConfig;
use crate::dd_modem::{complex_gaussian, ModemConfig};
use crate::{Result, SimError};

/// 2D point or displacement (meters).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_to(&self, other: Vec2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// One vehicle's ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    /// Position (m, m).
    pub position: Vec2,
    /// Signed speed along the x-axis (m/s).
    pub speed: f64,
    /// Radar cross section.
    pub rcs: f64,
}

/// The fixed roadside unit.
#[derive(Debug, Clone)]
pub struct RsuState {
    pub position: Vec2,
    pub array: ArrayConfig,
    pub modem: ModemConfig,
}

/// True sensing/communication parameters of one vehicle relative to the RSU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthKinematics {
    /// Angle relative to broadside (rad).
    pub angle: f64,
    /// Distance to the RSU (m).
    pub distance: f64,
    /// Round-trip echo delay `2 d / c` (s).
    pub delay: f64,
    /// Round-trip Doppler `2 nu` (Hz).
    pub doppler_rt: f64,
    /// One-way Doppler `s cos(theta) f_c / c` (Hz).
    pub doppler_ow: f64,
    /// Reflection coefficient `rcs / (2 d)`.
    pub reflection: f64,
    /// LoS amplitude gain `sqrt(c / (4 pi f_c d^2))`.
    pub path_gain: f64,
}

/// One uplink propagation path with its true parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UplinkPathTruth {
    /// Path index, 0 = direct.
    pub path_index: usize,
    /// Scattering vehicle index (equals the transmitter for the direct path).
    pub via_vehicle: usize,
    /// Excess delay relative to the direct path (s).
    pub delay: f64,
    /// Doppler shift (Hz).
    pub doppler: f64,
    /// Arrival angle at the RSU (rad).
    pub angle: f64,
    /// Complex path gain drawn from the power-delay profile.
    pub gain: Complex64,
}

/// Advances a vehicle by `dt` seconds at constant velocity.
pub fn evolve(state: &VehicleState, dt: f64) -> VehicleState {
    VehicleState {
        position: Vec2::new(state.position.x + state.speed * dt, state.position.y),
        speed: state.speed,
        rcs: state.rcs,
    }
}

/// Derives the true sensing parameters of a vehicle relative to the RSU.
pub fn truth_kinematics(vehicle: &VehicleState, rsu: &RsuState) -> Result<TruthKinematics> {
    let d = vehicle.position.distance_to(rsu.position);
    if d <= f64::EPSILON {
        return Err(SimError::DegenerateGeometry(
            "vehicle colocated with the RSU".into(),
        ));
    }
    let c = rsu.modem.propagation_speed();
    let angle = ((vehicle.position.x - rsu.position.x) / d).asin();
    let doppler_ow = vehicle.speed * angle.cos() * rsu.modem.fc / c;
    Ok(TruthKinematics {
        angle,
        distance: d,
        delay: 2.0 * d / c,
        doppler_rt: 2.0 * doppler_ow,
        doppler_ow,
        reflection: vehicle.rcs / (2.0 * d),
        path_gain: (c / (4.0 * std::f64::consts::PI * rsu.modem.fc * d * d)).sqrt(),
    })
}

/// Mean path powers of the uplink power-delay profile: free-space power for
/// the direct path, scaled by `exp(-tau / tau_pdp)` with `tau_pdp` equal to
/// one delay bin for each reflected path.
pub fn pdp_mean_power(direct_gain: f64, excess_delay: f64, modem: &ModemConfig) -> f64 {
    let tau_pdp = modem.delay_resolution();
    direct_gain * direct_gain * (-excess_delay / tau_pdp).exp()
}

/// True uplink paths for the transmission of vehicle `tx_idx`.
///
/// Path 0 is the direct path (zero excess delay, Doppler `-nu_i`); each other
/// vehicle `j` contributes one scattered path with delay
/// `(|q_i - q_j| + |q_j - q_rsu| - |q_i - q_rsu|) / c`, Doppler
/// `cos(theta_j) f_c (s_i - s_j) / c`, and arrival angle `theta_j`. Gains are
/// drawn zero-mean complex Gaussian from the power-delay profile, fixed per
/// frame.
pub fn uplink_paths<R: Rng + ?Sized>(
    tx_idx: usize,
    vehicles: &[VehicleState],
    rsu: &RsuState,
    rng: &mut R,
) -> Result<Vec<UplinkPathTruth>> {
    if vehicles.is_empty() || tx_idx >= vehicles.len() {
        return Err(SimError::Configuration("transmitter index out of range".into()));
    }
    let c = rsu.modem.propagation_speed();
    let tx = &vehicles[tx_idx];
    let tx_truth = truth_kinematics(tx, rsu)?;
    let mut paths = Vec::with_capacity(vehicles.len());
    paths.push(UplinkPathTruth {
        path_index: 0,
        via_vehicle: tx_idx,
        delay: 0.0,
        doppler: -tx_truth.doppler_ow,
        angle: tx_truth.angle,
        gain: complex_gaussian(rng, pdp_mean_power(tx_truth.path_gain, 0.0, &rsu.modem)),
    });
    for (j, scatterer) in vehicles.iter().enumerate() {
        if j == tx_idx {
            continue;
        }
        let j_truth = truth_kinematics(scatterer, rsu)?;
        let excess = (tx.position.distance_to(scatterer.position) + j_truth.distance
            - tx_truth.distance)
            / c;
        let doppler = j_truth.angle.cos() * rsu.modem.fc / c * (tx.speed - scatterer.speed);
        paths.push(UplinkPathTruth {
            path_index: paths.len(),
            via_vehicle: j,
            delay: excess,
            doppler,
            angle: j_truth.angle,
            gain: complex_gaussian(rng, pdp_mean_power(tx_truth.path_gain, excess, &rsu.modem)),
        });
    }
    Ok(paths)
}

/// Initial vehicle coordinates of the default four-vehicle scenario (m).
pub fn default_vehicle_positions() -> [Vec2; 4] {
    [
        Vec2::new(-30.0, 50.0),
        Vec2::new(20.0, 50.0),
        Vec2::new(5.0, 20.0),
        Vec2::new(40.0, 20.0),
    ]
}

/// Draws a speed with magnitude uniform in `[lo, hi]` and random sign.
pub fn draw_speed<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    let mag = rng.gen_range(lo..=hi);
    if rng.gen::<bool>() {
        mag
    } else {
        -mag
    }
}
