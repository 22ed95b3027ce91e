//! Downlink RSU-to-vehicle transmission: prediction-based beamforming with
//! transmitter-side pre-equalization and single-tap ML detection.
//!
//! The RSU divides the transmit signal by the predicted gain and Doppler
//! ramp, so an exactly predicted channel collapses to
//! `y[k,l] = sqrt(p N_t) x[k,l] + w[k,l]` at the vehicle. Frame format: cell
//! `(0,0)` carries a known phase-reference symbol (the first constellation
//! point); all other cells carry data. The vehicle knows only the
//! deterministic constant `sqrt(p N_t)` and the reference cell, so beam
//! misalignment appears as an uncompensated amplitude loss.

use num_complex::Complex64;
use rand::Rng;

use crate::array_geometry::{steering_vector, ArrayConfig};
use crate::dd_modem::{complex_gaussian, round_half_up, DDGrid, ModemConfig};
use crate::scenario::TruthKinematics;
use crate::sensing::PredictedState;
use crate::{Result, SimError};

/// Modulation alphabet with its mean symbol energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    /// Constellation points.
    pub points: Vec<Complex64>,
    /// Mean symbol energy `sum |chi_q|^2 / |A|`.
    pub symbol_energy: f64,
}

impl Constellation {
    /// BPSK alphabet `{ +sqrt(E_s), -sqrt(E_s) }`.
    pub fn bpsk(symbol_energy: f64) -> Self {
        let a = symbol_energy.sqrt();
        Self {
            points: vec![Complex64::new(a, 0.0), Complex64::new(-a, 0.0)],
            symbol_energy,
        }
    }

    /// Bits per symbol (`log2 |A|`).
    pub fn bits_per_symbol(&self) -> usize {
        self.points.len().trailing_zeros() as usize
    }

    /// Nearest constellation index to `value` under gain `gain`; ties take
    /// the smallest index.
    pub fn nearest_index(&self, value: Complex64, gain: Complex64) -> usize {
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for (q, chi) in self.points.iter().enumerate() {
            let dist = (value - gain * chi).norm_sqr();
            if dist < best_dist {
                best_dist = dist;
                best = q;
            }
        }
        best
    }
}

/// Outcome of one downlink frame.
#[derive(Debug, Clone)]
pub struct DownlinkFrameResult {
    pub tx_bits: Vec<u8>,
    pub rx_bits: Vec<u8>,
    /// Realized receive SNR (linear).
    pub receive_snr: f64,
    pub bit_errors: usize,
}

/// Complex scalar seen by the vehicle after pre-equalization:
/// `(h / h_bar) * sqrt(p N_t) * a^H(theta) a(theta_bar) / N_t`.
pub fn effective_downlink_gain(
    truth: &TruthKinematics,
    pred: &PredictedState,
    array: &ArrayConfig,
) -> Complex64 {
    let correlation = steering_vector(truth.angle, array.n_tx)
        .dot_conj(&steering_vector(pred.angle, array.n_tx));
    let scale = (truth.path_gain / pred.dl_gain)
        * (array.per_vehicle_power * array.n_tx as f64).sqrt()
        / array.n_tx as f64;
    correlation * scale
}

/// Residual Doppler tap after pre-equalization, `round((nu - nu_bar) N T)`.
pub fn residual_doppler_tap(truth: &TruthKinematics, pred: &PredictedState, modem: &ModemConfig) -> i64 {
    round_half_up((truth.doppler_ow - pred.dl_doppler) * modem.frame_duration())
}

/// Passes a downlink DD frame through the pre-equalized LoS channel:
/// `y[k,l] = g * x[(k - dk) mod N, l] + w[k,l]` with `g` the effective gain,
/// `dk` the residual Doppler tap, and `w ~ CN(0, noise_psd)`.
pub fn transmit_downlink<R: Rng + ?Sized>(
    frame: &DDGrid,
    truth: &TruthKinematics,
    pred: &PredictedState,
    array: &ArrayConfig,
    modem: &ModemConfig,
    noise_psd: f64,
    rng: &mut R,
) -> Result<DDGrid> {
    if pred.dl_gain == 0.0 {
        return Err(SimError::InvalidPrediction("predicted gain is zero".into()));
    }
    let gain = effective_downlink_gain(truth, pred, array);
    let dk = residual_doppler_tap(truth, pred, modem).rem_euclid(modem.n as i64) as usize;
    let (n, m) = (frame.rows(), frame.cols());
    let mut rx = DDGrid::zeros(n, m);
    for k in 0..n {
        let src_k = (k + n - dk) % n;
        for l in 0..m {
            let mut y = gain * frame[(src_k, l)];
            if noise_psd > 0.0 {
                y += complex_gaussian(rng, noise_psd);
            }
            rx[(k, l)] = y;
        }
    }
    Ok(rx)
}

/// Per-cell single-tap ML detection against a known effective gain:
/// `argmin_q | y[k,l] - g chi_q |^2`. Returns constellation indices.
pub fn detect_single_tap(
    rx: &DDGrid,
    gain: Complex64,
    constellation: &Constellation,
) -> Result<Vec<usize>> {
    if gain.norm() == 0.0 {
        return Err(SimError::DetectionImpossible("effective gain is zero".into()));
    }
    Ok(rx
        .cells()
        .iter()
        .map(|&y| constellation.nearest_index(y, gain))
        .collect())
}

/// Receive SNR under the pre-equalized model:
/// `p N_t E_s |a^H(theta) a(theta_bar)|^2 / (N_t^2 N_0)`.
///
/// Maximized when the predicted angle matches the truth, where it equals
/// `p N_t E_s / N_0`.
pub fn receive_snr(
    truth: &TruthKinematics,
    pred: &PredictedState,
    array: &ArrayConfig,
    constellation: &Constellation,
    noise_psd: f64,
) -> f64 {
    let gain = crate::array_geometry::array_gain(truth.angle, pred.angle, array.n_tx);
    array.per_vehicle_power * array.n_tx as f64 * constellation.symbol_energy * gain
        / ((array.n_tx * array.n_tx) as f64 * noise_psd)
}

// ─── Frame format ──────────────────────────────────────────────────────────────

/// Cell reserved for the phase-reference symbol.
pub const REFERENCE_CELL: (usize, usize) = (0, 0);

/// Payload bits carried by one downlink frame (all cells except the
/// reference).
pub fn payload_bits(modem: &ModemConfig, constellation: &Constellation) -> usize {
    (modem.n * modem.m - 1) * constellation.bits_per_symbol()
}

/// Maps payload bits onto a DD frame, writing the phase-reference symbol at
/// [`REFERENCE_CELL`] and data symbols row-major elsewhere.
pub fn frame_from_bits(
    bits: &[u8],
    modem: &ModemConfig,
    constellation: &Constellation,
) -> Result<DDGrid> {
    if bits.len() != payload_bits(modem, constellation) {
        return Err(SimError::Placement(format!(
            "expected {} payload bits, got {}",
            payload_bits(modem, constellation),
            bits.len()
        )));
    }
    let bps = constellation.bits_per_symbol();
    let mut grid = DDGrid::zeros(modem.n, modem.m);
    let mut cursor = 0usize;
    for k in 0..modem.n {
        for l in 0..modem.m {
            if (k, l) == REFERENCE_CELL {
                grid[(k, l)] = constellation.points[0];
                continue;
            }
            let mut index = 0usize;
            for b in 0..bps {
                index = (index << 1) | bits[cursor + b] as usize;
            }
            cursor += bps;
            grid[(k, l)] = constellation.points[index];
        }
    }
    Ok(grid)
}

/// Recovers payload bits from per-cell constellation indices, skipping the
/// reference cell.
pub fn bits_from_decisions(
    decisions: &[usize],
    modem: &ModemConfig,
    constellation: &Constellation,
) -> Vec<u8> {
    let bps = constellation.bits_per_symbol();
    let mut bits = Vec::with_capacity(payload_bits(modem, constellation));
    for k in 0..modem.n {
        for l in 0..modem.m {
            if (k, l) == REFERENCE_CELL {
                continue;
            }
            let index = decisions[k * modem.m + l];
            for b in (0..bps).rev() {
                bits.push(((index >> b) & 1) as u8);
            }
        }
    }
    bits
}

/// Gain the vehicle assumes for detection: the deterministic constant
/// `sqrt(p N_t)` rotated by the phase read off the reference cell.
pub fn reference_compensated_gain(
    rx: &DDGrid,
    array: &ArrayConfig,
    constellation: &Constellation,
) -> Complex64 {
    let reference = rx[REFERENCE_CELL] / constellation.points[0];
    let magnitude = (array.per_vehicle_power * array.n_tx as f64).sqrt();
    if reference.norm() == 0.0 {
        return Complex64::new(magnitude, 0.0);
    }
    Complex64::from_polar(magnitude, reference.arg())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{truth_kinematics, RsuState, Vec2, VehicleState};
    use crate::sensing::predict_state;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn test_rsu() -> RsuState {
        RsuState {
            position: Vec2::new(0.0, 0.0),
            array: ArrayConfig::new(64, 64, 1.0).unwrap(),
            modem: ModemConfig::new(8, 16, 6e3, 3e9).unwrap(),
        }
    }

    fn exact_prediction(truth: &TruthKinematics, v: &VehicleState) -> PredictedState {
        PredictedState {
            position: v.position,
            speed: v.speed,
            angle: truth.angle,
            dl_gain: truth.path_gain,
            dl_doppler: truth.doppler_ow,
        }
    }

    fn random_bits(len: usize, rng: &mut ChaCha12Rng) -> Vec<u8> {
        (0..len).map(|_| rng.gen_range(0..=1u8)).collect()
    }

    #[test]
    fn exact_prediction_gives_flat_scaled_channel() {
        let rsu = test_rsu();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let v = VehicleState {
            position: Vec2::new(20.0, 50.0),
            speed: 12.0,
            rcs: 1.0,
        };
        let truth = truth_kinematics(&v, &rsu).unwrap();
        let pred = exact_prediction(&truth, &v);
        let bpsk = Constellation::bpsk(1.0);
        let bits = random_bits(payload_bits(&rsu.modem, &bpsk), &mut rng);
        let frame = frame_from_bits(&bits, &rsu.modem, &bpsk).unwrap();
        let rx = transmit_downlink(&frame, &truth, &pred, &rsu.array, &rsu.modem, 0.0, &mut rng).unwrap();
        let expect = (rsu.array.per_vehicle_power * rsu.array.n_tx as f64).sqrt();
        for (y, x) in rx.cells().iter().zip(frame.cells()) {
            assert!((y - x * expect).norm() < 1e-9);
        }
    }

    #[test]
    fn one_bin_angle_error_scales_by_array_correlation() {
        let rsu = test_rsu();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let v = VehicleState {
            position: Vec2::new(20.0, 50.0),
            speed: 12.0,
            rcs: 1.0,
        };
        let truth = truth_kinematics(&v, &rsu).unwrap();
        let mut pred = exact_prediction(&truth, &v);
        pred.angle += std::f64::consts::PI / rsu.array.n_tx as f64;
        let bpsk = Constellation::bpsk(1.0);
        let bits = random_bits(payload_bits(&rsu.modem, &bpsk), &mut rng);
        let frame = frame_from_bits(&bits, &rsu.modem, &bpsk).unwrap();
        let rx = transmit_downlink(&frame, &truth, &pred, &rsu.array, &rsu.modem, 0.0, &mut rng).unwrap();
        let expected_mag = (crate::array_geometry::array_gain(truth.angle, pred.angle, rsu.array.n_tx))
            .sqrt()
            * (rsu.array.per_vehicle_power * rsu.array.n_tx as f64).sqrt()
            / rsu.array.n_tx as f64;
        let full = (rsu.array.per_vehicle_power * rsu.array.n_tx as f64).sqrt();
        for (y, x) in rx.cells().iter().zip(frame.cells()) {
            assert!((y.norm() - expected_mag * x.norm()).abs() < 1e-9);
        }
        assert!(expected_mag < full);
    }

    #[test]
    fn one_bin_doppler_misprediction_shifts_rows_cyclically() {
        let rsu = test_rsu();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let v = VehicleState {
            position: Vec2::new(20.0, 50.0),
            speed: 12.0,
            rcs: 1.0,
        };
        let truth = truth_kinematics(&v, &rsu).unwrap();
        let mut pred = exact_prediction(&truth, &v);
        pred.dl_doppler -= rsu.modem.doppler_resolution();
        let bpsk = Constellation::bpsk(1.0);
        let bits = random_bits(payload_bits(&rsu.modem, &bpsk), &mut rng);
        let frame = frame_from_bits(&bits, &rsu.modem, &bpsk).unwrap();
        let rx = transmit_downlink(&frame, &truth, &pred, &rsu.array, &rsu.modem, 0.0, &mut rng).unwrap();
        let g = (rsu.array.per_vehicle_power * rsu.array.n_tx as f64).sqrt();
        for k in 0..rsu.modem.n {
            for l in 0..rsu.modem.m {
                let src = (k + rsu.modem.n - 1) % rsu.modem.n;
                assert!((rx[(k, l)] - frame[(src, l)] * g).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_predicted_gain_is_rejected() {
        let rsu = test_rsu();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let v = VehicleState {
            position: Vec2::new(20.0, 50.0),
            speed: 12.0,
            rcs: 1.0,
        };
        let truth = truth_kinematics(&v, &rsu).unwrap();
        let mut pred = exact_prediction(&truth, &v);
        pred.dl_gain = 0.0;
        let frame = DDGrid::zeros(rsu.modem.n, rsu.modem.m);
        assert!(matches!(
            transmit_downlink(&frame, &truth, &pred, &rsu.array, &rsu.modem, 0.0, &mut rng),
            Err(SimError::InvalidPrediction(_))
        ));
    }

    #[test]
    fn noiseless_aligned_frame_detects_without_errors() {
        let rsu = test_rsu();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let v = VehicleState {
            position: Vec2::new(20.0, 50.0),
            speed: 12.0,
            rcs: 1.0,
        };
        let truth = truth_kinematics(&v, &rsu).unwrap();
        let pred = exact_prediction(&truth, &v);
        let bpsk = Constellation::bpsk(1.0);
        let tx_bits = random_bits(payload_bits(&rsu.modem, &bpsk), &mut rng);
        let frame = frame_from_bits(&tx_bits, &rsu.modem, &bpsk).unwrap();
        let rx = transmit_downlink(&frame, &truth, &pred, &rsu.array, &rsu.modem, 0.0, &mut rng).unwrap();
        let gain = reference_compensated_gain(&rx, &rsu.array, &bpsk);
        let decisions = detect_single_tap(&rx, gain, &bpsk).unwrap();
        let rx_bits = bits_from_decisions(&decisions, &rsu.modem, &bpsk);
        assert_eq!(tx_bits, rx_bits);
    }

    #[test]
    fn antipodal_symbol_with_tiny_noise_detects_opposite_point() {
        let bpsk = Constellation::bpsk(1.0);
        let g = Complex64::new(2.0, 0.0);
        let y = -g * bpsk.points[0] + Complex64::new(1e-6, -1e-6);
        let mut rx = DDGrid::zeros(1, 1);
        rx[(0, 0)] = y;
        let decisions = detect_single_tap(&rx, g, &bpsk).unwrap();
        assert_eq!(decisions[0], 1);
    }

    #[test]
    fn zero_gain_detection_is_impossible() {
        let bpsk = Constellation::bpsk(1.0);
        let rx = DDGrid::zeros(2, 2);
        assert!(matches!(
            detect_single_tap(&rx, Complex64::default(), &bpsk),
            Err(SimError::DetectionImpossible(_))
        ));
    }

    #[test]
    fn bpsk_over_awgn_matches_q_function() {
        // Closed-form AWGN BER oracle evaluated in test code.
        let bpsk = Constellation::bpsk(1.0);
        let snr_linear = 10f64.powf(0.4); // 4 dB
        let n0 = 1.0 / snr_linear;
        let g = Complex64::new(1.0, 0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let bits = 1_000_000usize;
        let mut errors = 0usize;
        let mut grid = DDGrid::zeros(1, 1);
        for _ in 0..bits {
            let tx = if rng.gen::<bool>() { 0 } else { 1 };
            grid[(0, 0)] = g * bpsk.points[tx] + complex_gaussian(&mut rng, n0);
            if detect_single_tap(&grid, g, &bpsk).unwrap()[0] != tx {
                errors += 1;
            }
        }
        let ber = errors as f64 / bits as f64;
        let expect = q_function((2.0 * snr_linear).sqrt());
        let se = (expect * (1.0 - expect) / bits as f64).sqrt();
        assert!(
            (ber - expect).abs() <= 3.0 * se,
            "ber {ber} vs {expect} (3se {})",
            3.0 * se
        );
    }

    #[test]
    fn receive_snr_is_maximal_when_aligned() {
        let rsu = test_rsu();
        let v = VehicleState {
            position: Vec2::new(20.0, 50.0),
            speed: 12.0,
            rcs: 1.0,
        };
        let truth = truth_kinematics(&v, &rsu).unwrap();
        let bpsk = Constellation::bpsk(1.0);
        let aligned = exact_prediction(&truth, &v);
        let n0 = 0.1;
        let best = receive_snr(&truth, &aligned, &rsu.array, &bpsk, n0);
        let expect = rsu.array.per_vehicle_power * rsu.array.n_tx as f64 * bpsk.symbol_energy / n0;
        assert!((best - expect).abs() / expect < 1e-12);
        for offset in [-0.2, -0.05, 0.05, 0.2] {
            let mut off = aligned;
            off.angle += offset;
            assert!(receive_snr(&truth, &off, &rsu.array, &bpsk, n0) <= best + 1e-9);
        }
    }

    #[test]
    fn single_antenna_receive_snr_ignores_angles() {
        let rsu = RsuState {
            position: Vec2::new(0.0, 0.0),
            array: ArrayConfig::new(1, 1, 2.0).unwrap(),
            modem: ModemConfig::new(8, 16, 6e3, 3e9).unwrap(),
        };
        let v = VehicleState {
            position: Vec2::new(20.0, 50.0),
            speed: 12.0,
            rcs: 1.0,
        };
        let truth = truth_kinematics(&v, &rsu).unwrap();
        let bpsk = Constellation::bpsk(1.0);
        let mut pred = exact_prediction(&truth, &v);
        pred.angle = -0.9;
        let snr = receive_snr(&truth, &pred, &rsu.array, &bpsk, 0.5);
        assert!((snr - 2.0 * 1.0 / 0.5).abs() < 1e-12);
    }

    #[test]
    fn one_beamwidth_offset_matches_array_gain_oracle() {
        let rsu = test_rsu();
        let v = VehicleState {
            position: Vec2::new(20.0, 50.0),
            speed: 12.0,
            rcs: 1.0,
        };
        let truth = truth_kinematics(&v, &rsu).unwrap();
        let bpsk = Constellation::bpsk(1.0);
        let mut pred = exact_prediction(&truth, &v);
        pred.angle += std::f64::consts::PI / rsu.array.n_tx as f64;
        let n0 = 0.2;
        let snr = receive_snr(&truth, &pred, &rsu.array, &bpsk, n0);
        let oracle = crate::array_geometry::array_gain(truth.angle, pred.angle, rsu.array.n_tx);
        let expect = rsu.array.per_vehicle_power * rsu.array.n_tx as f64 * bpsk.symbol_energy * oracle
            / ((rsu.array.n_tx * rsu.array.n_tx) as f64 * n0);
        assert!((snr - expect).abs() / expect < 1e-12);
    }

    #[test]
    fn prediction_from_estimate_keeps_detection_error_free_without_noise() {
        // Exact estimates + constant velocity: prediction matches next truth,
        // so the noiseless frame at the next instant is error-free.
        let rsu = test_rsu();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let v = VehicleState {
            position: Vec2::new(5.0, 20.0),
            speed: 12.0,
            rcs: 1.0,
        };
        let truth_now = truth_kinematics(&v, &rsu).unwrap();
        let est = crate::sensing::EstimatedState {
            delay: truth_now.delay,
            doppler_rt: truth_now.doppler_rt,
            angle: truth_now.angle,
            reflection: truth_now.reflection,
            position: v.position,
            speed: v.speed,
        };
        let dt = 0.02;
        let pred = predict_state(&est, dt, &rsu).unwrap();
        let next = crate::scenario::evolve(&v, dt);
        let truth_next = truth_kinematics(&next, &rsu).unwrap();
        let bpsk = Constellation::bpsk(1.0);
        let tx_bits = random_bits(payload_bits(&rsu.modem, &bpsk), &mut rng);
        let frame = frame_from_bits(&tx_bits, &rsu.modem, &bpsk).unwrap();
        let rx =
            transmit_downlink(&frame, &truth_next, &pred, &rsu.array, &rsu.modem, 0.0, &mut rng).unwrap();
        let gain = reference_compensated_gain(&rx, &rsu.array, &bpsk);
        let decisions = detect_single_tap(&rx, gain, &bpsk).unwrap();
        let rx_bits = bits_from_decisions(&decisions, &rsu.modem, &bpsk);
        assert_eq!(tx_bits, rx_bits);
    }

    /// Q(x) = erfc(x / sqrt(2)) / 2.
    fn q_function(x: f64) -> f64 {
        0.5 * erfc(x / std::f64::consts::SQRT_2)
    }

    /// erfc via power series (small x) or continued fraction (large x).
    fn erfc(x: f64) -> f64 {
        if x < 0.0 {
            return 2.0 - erfc(-x);
        }
        if x < 2.0 {
            let mut term = x;
            let mut sum = x;
            let x2 = x * x;
            for n in 1..200 {
                term *= -x2 / n as f64;
                let add = term / (2 * n + 1) as f64;
                sum += add;
                if add.abs() < 1e-17 * sum.abs() {
                    break;
                }
            }
            1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum
        } else {
            let mut f = 0.0;
            for k in (1..60).rev() {
                f = 0.5 * k as f64 / (x + f);
            }
            (-x * x).exp() / ((x + f) * std::f64::consts::PI.sqrt())
        }
    }

    #[test]
    fn erfc_oracle_matches_known_values() {
        // Reference values from standard tables.
        assert!((erfc(0.0) - 1.0).abs() < 1e-12);
        assert!((erfc(1.0) - 0.157_299_207_050_285).abs() < 1e-12);
        assert!((erfc(2.0) - 0.004_677_734_981_063_1).abs() < 1e-12);
        assert!((erfc(3.0) - 2.209_049_699_858_544e-5).abs() < 1e-15);
    }
}
