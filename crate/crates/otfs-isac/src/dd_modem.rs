//! OTFS delay-Doppler ↔ time-frequency transforms and DD-domain channels.
//!
//! Symbols live on an `N x M` delay-Doppler grid (`N` Doppler bins = time
//! slots, `M` delay bins = subcarriers). The inverse symplectic finite
//! Fourier transform spreads them over the time-frequency grid; the channel
//! acts on the DD grid as a sparse 2D circular convolution with integer
//! delay/Doppler taps.

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;
use std::f64::consts::TAU;

use crate::{Result, SimError, SPEED_OF_LIGHT};

/// OTFS frame and carrier parameters.
///
/// Stores the subcarrier spacing and derives the symbol duration from
/// `T * delta_f = 1`, so the orthogonality constraint holds exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModemConfig {
    /// Doppler bins / time slots per frame.
    pub n: usize,
    /// Delay bins / subcarriers per frame.
    pub m: usize,
    /// Subcarrier spacing (Hz).
    pub delta_f: f64,
    /// Carrier frequency (Hz).
    pub fc: f64,
}

impl ModemConfig {
    pub fn new(n: usize, m: usize, delta_f: f64, fc: f64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(SimError::Configuration(
                "grid dimensions must be at least 1".into(),
            ));
        }
        if delta_f <= 0.0 || fc <= 0.0 {
            return Err(SimError::Configuration(
                "subcarrier spacing and carrier frequency must be positive".into(),
            ));
        }
        Ok(Self { n, m, delta_f, fc })
    }

    /// Symbol duration `T = 1 / delta_f` (s).
    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.delta_f
    }

    /// OTFS frame duration `N * T` (s).
    pub fn frame_duration(&self) -> f64 {
        self.n as f64 * self.symbol_duration()
    }

    /// Propagation speed (m/s).
    pub fn propagation_speed(&self) -> f64 {
        SPEED_OF_LIGHT
    }

    /// Doppler resolution `1 / (N T)` (Hz).
    pub fn doppler_resolution(&self) -> f64 {
        1.0 / self.frame_duration()
    }

    /// Delay resolution `1 / (M delta_f)` (s).
    pub fn delay_resolution(&self) -> f64 {
        1.0 / (self.m as f64 * self.delta_f)
    }

    /// Quantizes a Doppler shift (Hz) to its integer grid index `round(nu * N * T)`.
    ///
    /// Ties round toward positive infinity.
    pub fn doppler_tap(&self, doppler: f64) -> i64 {
        round_half_up(doppler * self.frame_duration())
    }

    /// Quantizes a delay (s) to its integer grid index `round(tau * M * delta_f)`.
    ///
    /// Ties round toward positive infinity.
    pub fn delay_tap(&self, delay: f64) -> i64 {
        round_half_up(delay * self.m as f64 * self.delta_f)
    }
}

/// Rounds to the nearest integer with half-way ties toward positive infinity.
pub fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

// ─── Grids ─────────────────────────────────────────────────────────────────────

macro_rules! complex_grid {
    ($name:ident, $rows_doc:literal, $cols_doc:literal) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            rows: usize,
            cols: usize,
            cells: Vec<Complex64>,
        }

        impl $name {
            #[doc = concat!("All-zero grid with ", $rows_doc, " rows and ", $cols_doc, " columns.")]
            pub fn zeros(rows: usize, cols: usize) -> Self {
                Self {
                    rows,
                    cols,
                    cells: vec![Complex64::default(); rows * cols],
                }
            }

            /// Builds a grid by evaluating `f(row, col)` at every cell.
            pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
                let mut g = Self::zeros(rows, cols);
                for r in 0..rows {
                    for c in 0..cols {
                        g[(r, c)] = f(r, c);
                    }
                }
                g
            }

            pub fn rows(&self) -> usize {
                self.rows
            }

            pub fn cols(&self) -> usize {
                self.cols
            }

            /// Sum of squared cell magnitudes.
            pub fn energy(&self) -> f64 {
                self.cells.iter().map(|c| c.norm_sqr()).sum()
            }

            pub fn cells(&self) -> &[Complex64] {
                &self.cells
            }

            pub fn cells_mut(&mut self) -> &mut [Complex64] {
                &mut self.cells
            }

            fn matches(&self, cfg: &ModemConfig) -> bool {
                self.rows == cfg.n && self.cols == cfg.m
            }
        }

        impl std::ops::Index<(usize, usize)> for $name {
            type Output = Complex64;
            fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
                &self.cells[r * self.cols + c]
            }
        }

        impl std::ops::IndexMut<(usize, usize)> for $name {
            fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
                &mut self.cells[r * self.cols + c]
            }
        }
    };
}

complex_grid!(DDGrid, "Doppler (k)", "delay (l)");
complex_grid!(TFGrid, "time (n)", "frequency (m)");

/// One integer-shift tap of a DD-domain channel.
///
/// The phase factor carries `exp(-j 2 pi tau nu)` from the continuous channel
/// and is kept separate from the gain so both are visible to tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DDChannelTap {
    /// Complex path gain.
    pub gain: Complex64,
    /// Doppler index shift, canonical in `0..N`.
    pub k_shift: usize,
    /// Delay index shift, canonical in `0..M`.
    pub l_shift: usize,
    /// Unit-modulus rotation `exp(-j 2 pi tau nu)`.
    pub phase: Complex64,
}

impl DDChannelTap {
    /// Builds a tap from signed shift indices, reducing them modulo the grid.
    pub fn new(gain: Complex64, k_shift: i64, l_shift: i64, phase: Complex64, n: usize, m: usize) -> Self {
        Self {
            gain,
            k_shift: k_shift.rem_euclid(n as i64) as usize,
            l_shift: l_shift.rem_euclid(m as i64) as usize,
            phase,
        }
    }

    /// Tap with unit phase, from physical delay (s) and Doppler (Hz).
    pub fn from_physical(gain: Complex64, delay: f64, doppler: f64, cfg: &ModemConfig) -> Self {
        let phase = Complex64::from_polar(1.0, -TAU * delay * doppler);
        Self::new(
            gain,
            cfg.doppler_tap(doppler),
            cfg.delay_tap(delay),
            phase,
            cfg.n,
            cfg.m,
        )
    }

    /// Effective gain applied to the shifted symbol.
    pub fn effective_gain(&self) -> Complex64 {
        self.gain * self.phase
    }
}

// ─── Transforms ────────────────────────────────────────────────────────────────

/// Applies an FFT of the given direction along each column of a row-major buffer.
fn fft_columns(cells: &mut [Complex64], rows: usize, cols: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(rows)
    } else {
        planner.plan_fft_forward(rows)
    };
    let mut column = vec![Complex64::default(); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = cells[r * cols + c];
        }
        fft.process(&mut column);
        for r in 0..rows {
            cells[r * cols + c] = column[r];
        }
    }
}

/// Applies an FFT of the given direction along each row of a row-major buffer.
fn fft_rows(cells: &mut [Complex64], rows: usize, cols: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(cols)
    } else {
        planner.plan_fft_forward(cols)
    };
    for r in 0..rows {
        fft.process(&mut cells[r * cols..(r + 1) * cols]);
    }
}

/// Inverse symplectic finite Fourier transform, DD -> TF:
/// `X[n,m] = 1/sqrt(MN) sum_k sum_l x[k,l] exp(j 2 pi (nk/N - ml/M))`.
///
/// Unitary: preserves grid energy.
pub fn isfft(grid: &DDGrid, cfg: &ModemConfig) -> Result<TFGrid> {
    if !grid.matches(cfg) {
        return Err(SimError::Configuration(format!(
            "DD grid is {}x{}, config expects {}x{}",
            grid.rows(),
            grid.cols(),
            cfg.n,
            cfg.m
        )));
    }
    let (n, m) = (cfg.n, cfg.m);
    let mut out = TFGrid::zeros(n, m);
    out.cells_mut().copy_from_slice(grid.cells());
    // Forward DFT along the delay axis (l -> m), inverse along Doppler (k -> n).
    fft_rows(out.cells_mut(), n, m, false);
    fft_columns(out.cells_mut(), n, m, true);
    let scale = 1.0 / ((n * m) as f64).sqrt();
    for c in out.cells_mut() {
        *c *= scale;
    }
    Ok(out)
}

/// Symplectic finite Fourier transform, TF -> DD:
/// `x[k,l] = 1/sqrt(NM) sum_n sum_m X[n,m] exp(-j 2 pi (kn/N - lm/M))`.
///
/// Exact inverse of [`isfft`].
pub fn sfft(grid: &TFGrid, cfg: &ModemConfig) -> Result<DDGrid> {
    if !grid.matches(cfg) {
        return Err(SimError::Configuration(format!(
            "TF grid is {}x{}, config expects {}x{}",
            grid.rows(),
            grid.cols(),
            cfg.n,
            cfg.m
        )));
    }
    let (n, m) = (cfg.n, cfg.m);
    let mut out = DDGrid::zeros(n, m);
    out.cells_mut().copy_from_slice(grid.cells());
    fft_rows(out.cells_mut(), n, m, true);
    fft_columns(out.cells_mut(), n, m, false);
    let scale = 1.0 / ((n * m) as f64).sqrt();
    for c in out.cells_mut() {
        *c *= scale;
    }
    Ok(out)
}

/// DD-domain filter response to a (possibly fractional) index offset:
/// `phi(dk, dl) = 1/(MN) sum_n sum_m exp(-j 2 pi n dk / N) exp(-j 2 pi m dl / M)`.
///
/// For integer offsets this is 1 when `dk = 0 (mod N)` and `dl = 0 (mod M)`,
/// and 0 otherwise.
pub fn dd_filter_phi(dk: f64, dl: f64, cfg: &ModemConfig) -> Complex64 {
    let num = geometric_phase_sum(dk, cfg.n) * geometric_phase_sum(dl, cfg.m);
    num / (cfg.n * cfg.m) as f64
}

/// `sum_{n=0}^{N-1} exp(-j 2 pi n d / N)` in closed form.
fn geometric_phase_sum(d: f64, n: usize) -> Complex64 {
    let ratio = d / n as f64;
    let frac = ratio - ratio.round();
    if frac.abs() < 1e-12 {
        return Complex64::new(n as f64, 0.0);
    }
    // Dirichlet kernel: e^{-j pi (N-1) d / N} sin(pi d) / sin(pi d / N)
    let phase = Complex64::from_polar(1.0, -std::f64::consts::PI * (n as f64 - 1.0) * ratio);
    phase * ((std::f64::consts::PI * d).sin() / (std::f64::consts::PI * ratio).sin())
}

// ─── Channel application ──────────────────────────────────────────────────────

/// Draws a zero-mean complex Gaussian sample with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    if variance <= 0.0 {
        return Complex64::default();
    }
    // Box-Muller, variance/2 per real dimension.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    let mag = (-variance * u1.ln()).sqrt();
    Complex64::from_polar(mag, TAU * u2)
}

/// Passes a DD frame through an integer-tap channel plus additive noise:
/// `y[k,l] = sum_taps gain * phase * x[(k - k_shift) mod N, (l - l_shift) mod M] + w[k,l]`
/// with `w ~ CN(0, noise_psd)` per cell.
pub fn apply_dd_channel<R: Rng + ?Sized>(
    tx: &DDGrid,
    taps: &[DDChannelTap],
    noise_psd: f64,
    rng: &mut R,
) -> Result<DDGrid> {
    if taps.is_empty() {
        return Err(SimError::InvalidChannel("empty tap list".into()));
    }
    let (n, m) = (tx.rows(), tx.cols());
    let mut rx = DDGrid::zeros(n, m);
    for tap in taps {
        let g = tap.effective_gain();
        let (ks, ls) = (tap.k_shift % n, tap.l_shift % m);
        for k in 0..n {
            let src_k = (k + n - ks) % n;
            for l in 0..m {
                let src_l = (l + m - ls) % m;
                rx[(k, l)] += g * tx[(src_k, src_l)];
            }
        }
    }
    if noise_psd > 0.0 {
        for c in rx.cells_mut() {
            *c += complex_gaussian(rng, noise_psd);
        }
    }
    Ok(rx)
}

// ─── Time-domain samples ───────────────────────────────────────────────────────

/// Discrete samples of the transmitted frame at rate `oversample * M * delta_f`
/// over one frame of duration `N T`, using a rectangular transmit pulse.
///
/// Samples are scaled so total sample energy equals the TF grid energy; for
/// `oversample = 1` this is the critically sampled Heisenberg transform.
pub fn generate_time_samples(tf: &TFGrid, cfg: &ModemConfig, oversample: usize) -> Result<Vec<Complex64>> {
    if !tf.matches(cfg) {
        return Err(SimError::Configuration(format!(
            "TF grid is {}x{}, config expects {}x{}",
            tf.rows(),
            tf.cols(),
            cfg.n,
            cfg.m
        )));
    }
    if oversample == 0 {
        return Err(SimError::Configuration("oversample must be at least 1".into()));
    }
    let (n, m) = (cfg.n, cfg.m);
    let len = oversample * m;
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(len);
    let scale = 1.0 / (len as f64).sqrt();
    let mut samples = Vec::with_capacity(n * len);
    let mut slot = vec![Complex64::default(); len];
    for slot_idx in 0..n {
        slot.fill(Complex64::default());
        for freq in 0..m {
            slot[freq] = tf[(slot_idx, freq)];
        }
        ifft.process(&mut slot);
        samples.extend(slot.iter().map(|c| c * scale));
    }
    Ok(samples)
}
