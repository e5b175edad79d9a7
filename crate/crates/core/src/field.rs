//! Finite-mode realizations of the zero-point field.
//!
//! The scalar field seen by the particle is a band-limited stationary Gaussian
//! process
//!
//! ```text
//! E(t) = sum_j c_j (a_j cos w_j t + b_j sin w_j t),   a_j, b_j ~ N(0, 1)
//! ```
//!
//! with `c_j^2 = S_E(w_j) dw` and one-sided power spectral density
//! `S_E(w) = (4 pi / 3) rho_zpf(w)`, `rho_zpf(w) = hbar w^3 / (2 pi^2 c^3)`.
//! With the calibrated coupling (see [`crate::params::calibrated_coupling`])
//! this drives a weakly damped oscillator to mean energy `hbar w0 / 2`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::PhysicalParams;
use crate::sum;

/// Zero-point spectral energy density `hbar w^3 / (2 pi^2 c^3)`.
pub fn spectral_density(omega: f64, params: &PhysicalParams) -> Result<f64> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidSpectrum(format!("frequency must be positive, got {omega}")));
    }
    Ok(params.hbar * omega.powi(3) / (2.0 * PI * PI * params.light_speed.powi(3)))
}

/// One-sided power spectral density of the projected scalar field.
pub fn field_psd(omega: f64, params: &PhysicalParams) -> Result<f64> {
    Ok(4.0 * PI / 3.0 * spectral_density(omega, params)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_modes: usize,
    pub seed: u64,
    /// Offset each frequency by a quasi-random fraction of the spacing.
    #[serde(default)]
    pub jitter: bool,
}

impl SpectralConfig {
    /// Band `[w0 (1 - delta), w0 (1 + delta)]`.
    pub fn band(omega0: f64, delta: f64, n_modes: usize, seed: u64) -> Self {
        Self { omega_min: omega0 * (1.0 - delta), omega_max: omega0 * (1.0 + delta), n_modes, seed, jitter: false }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_min > 0.0 && self.omega_max > self.omega_min && self.omega_max.is_finite()) {
            return Err(Error::InvalidSpectrum(format!(
                "need 0 < omega_min < omega_max, got [{}, {}]",
                self.omega_min, self.omega_max
            )));
        }
        if self.n_modes < 2 {
            return Err(Error::InvalidSpectrum(format!("need at least 2 modes, got {}", self.n_modes)));
        }
        Ok(())
    }
}

/// Discretized spectrum: frequencies and amplitude scales.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    frequencies: Vec<f64>,
    amplitudes: Vec<f64>,
    spacing: f64,
    seed: u64,
    jittered: bool,
}

/// Build the mode set for a configuration.
pub fn build_mode_set(cfg: &SpectralConfig, params: &PhysicalParams) -> Result<ModeSet> {
    cfg.validate()?;
    let n = cfg.n_modes;
    let spacing = (cfg.omega_max - cfg.omega_min) / (n - 1) as f64;
    // Golden-ratio offsets keep the jittered set free of short recurrences.
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let frequencies: Vec<f64> = (0..n)
        .map(|j| {
            let base = cfg.omega_min + spacing * j as f64;
            if cfg.jitter && j > 0 && j + 1 < n {
                base + spacing * 0.5 * ((j as f64 * golden).fract() - 0.5)
            } else {
                base
            }
        })
        .collect();
    let amplitudes = frequencies
        .iter()
        .map(|&w| field_psd(w, params).map(|s| (s * spacing).sqrt()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ModeSet { frequencies, amplitudes, spacing, seed: cfg.seed, jittered: cfg.jitter })
}

impl ModeSet {
    /// Mode set from explicit frequencies and amplitudes (uniform spacing assumed
    /// from the first two frequencies).
    pub fn from_parts(frequencies: Vec<f64>, amplitudes: Vec<f64>, seed: u64) -> Result<Self> {
        if frequencies.is_empty() || frequencies.len() != amplitudes.len() {
            return Err(Error::InvalidSpectrum("frequency/amplitude length mismatch".into()));
        }
        let spacing = if frequencies.len() > 1 { frequencies[1] - frequencies[0] } else { frequencies[0] };
        let uniform = frequencies.windows(2).all(|w| ((w[1] - w[0]) - spacing).abs() <= 1e-12 * spacing.abs());
        if !(spacing > 0.0) {
            return Err(Error::InvalidSpectrum("frequencies must increase".into()));
        }
        Ok(Self { frequencies, amplitudes, spacing, seed, jittered: !uniform })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }
    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }
    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn omega_max(&self) -> f64 {
        *self.frequencies.last().unwrap()
    }

    /// Period of the unjittered mode sum, `2 pi / dw`.
    pub fn recurrence_time(&self) -> f64 {
        2.0 * PI / self.spacing
    }

    /// Process variance `sum_j c_j^2`.
    pub fn variance(&self) -> f64 {
        sum::kahan(self.amplitudes.iter().map(|c| c * c))
    }

    /// Exact autocorrelation of the mode sum at lag `dt`.
    pub fn correlation(&self, dt: f64) -> f64 {
        sum::kahan(self.frequencies.iter().zip(&self.amplitudes).map(|(w, c)| c * c * (w * dt).cos()))
    }

    /// Largest half-step `h <= h_max` that makes the frequency lattice
    /// commensurate with the time lattice (`dw * h = 2 pi / M`, `M` 5-smooth),
    /// so the field can be tabulated with one FFT. `None` for jittered sets.
    pub fn commensurate_half_step(&self, h_max: f64) -> Option<(f64, usize)> {
        if self.jittered || !(h_max > 0.0) {
            return None;
        }
        let t_rec = self.recurrence_time();
        let needed = ((t_rec / h_max).ceil() as usize).max(self.len());
        let m = next_smooth(needed);
        Some((t_rec / m as f64, m))
    }

    fn lattice_size(&self, h: f64) -> Option<usize> {
        if self.jittered {
            return None;
        }
        let m = 2.0 * PI / (self.spacing * h);
        let mr = m.round();
        if mr >= self.len() as f64 && (m - mr).abs() <= 1e-9 * mr && mr < 1e9 {
            Some(mr as usize)
        } else {
            None
        }
    }
}

fn next_smooth(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut k = m;
        for p in [2, 3, 5] {
            while k % p == 0 {
                k /= p;
            }
        }
        if k == 1 {
            return m;
        }
        m += 1;
    }
}

/// One sampled field history.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRealization {
    modes: Arc<ModeSet>,
    index: u64,
    a: Vec<f64>,
    b: Vec<f64>,
}

/// Draw realization `index` of the mode set. Streams are keyed by
/// `(seed, index)`, so the result is independent of sampling order.
pub fn sample_realization(modes: &Arc<ModeSet>, index: u64) -> FieldRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(modes.seed);
    rng.set_stream(index);
    let n = modes.len();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for _ in 0..n {
        a.push(StandardNormal.sample(&mut rng));
        b.push(StandardNormal.sample(&mut rng));
    }
    FieldRealization { modes: Arc::clone(modes), index, a, b }
}

impl FieldRealization {
    pub fn from_coefficients(modes: Arc<ModeSet>, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != modes.len() || b.len() != modes.len() {
            return Err(Error::InvalidSpectrum("coefficient count does not match mode count".into()));
        }
        Ok(Self { modes, index: 0, a, b })
    }

    pub fn modes(&self) -> &Arc<ModeSet> {
        &self.modes
    }
    pub fn index(&self) -> u64 {
        self.index
    }
    pub fn cos_coefficients(&self) -> &[f64] {
        &self.a
    }
    pub fn sin_coefficients(&self) -> &[f64] {
        &self.b
    }

    /// Field amplitude at time `t` by direct summation.
    pub fn eval(&self, t: f64) -> f64 {
        let m = &self.modes;
        sum::kahan(m.frequencies.iter().zip(&m.amplitudes).zip(self.a.iter().zip(&self.b)).map(|((w, c), (a, b))| {
            let (s, co) = (w * t).sin_cos();
            c * (a * co + b * s)
        }))
    }

    /// Field on the lattice `t_n = start + n h`, `n = 0..count`.
    ///
    /// Uses a single FFT when `h` is commensurate with the mode spacing and
    /// `start` lies on the lattice, and phasor recursion (periodically
    /// re-anchored) otherwise.
    pub fn sample_lattice(&self, start: f64, h: f64, count: usize) -> Vec<f64> {
        let offset = (start / h).round();
        let on_lattice = (start - offset * h).abs() <= 1e-12 * h.max(start.abs()) && offset >= 0.0;
        match self.modes.lattice_size(h) {
            Some(m) if on_lattice => self.lattice_fft(offset as usize, h, count, m),
            _ => self.lattice_recursive(start, h, count),
        }
    }

    fn lattice_fft(&self, offset: usize, h: f64, count: usize, m: usize) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (j, slot) in buf.iter_mut().take(self.modes.len()).enumerate() {
            let c = self.modes.amplitudes[j];
            *slot = Complex64::new(c * self.a[j], -c * self.b[j]);
        }
        FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
        let w0 = self.modes.frequencies[0];
        (offset..offset + count)
            .map(|n| {
                let carrier = Complex64::from_polar(1.0, w0 * h * n as f64);
                (carrier * buf[n % m]).re
            })
            .collect()
    }

    fn lattice_recursive(&self, start: f64, h: f64, count: usize) -> Vec<f64> {
        const RESYNC: usize = 256;
        let nm = self.modes.len();
        let coeff: Vec<Complex64> = (0..nm)
            .map(|j| Complex64::new(self.modes.amplitudes[j] * self.a[j], -self.modes.amplitudes[j] * self.b[j]))
            .collect();
        let rot: Vec<Complex64> = self.modes.frequencies.iter().map(|w| Complex64::from_polar(1.0, w * h)).collect();
        let mut phasor = vec![Complex64::new(1.0, 0.0); nm];
        let mut out = Vec::with_capacity(count);
        for n in 0..count {
            if n % RESYNC == 0 {
                let t = start + h * n as f64;
                for (p, w) in phasor.iter_mut().zip(&self.modes.frequencies) {
                    *p = Complex64::from_polar(1.0, w * t);
                }
            }
            out.push(sum::kahan(coeff.iter().zip(&phasor).map(|(c, p)| (c * p).re)));
            for (p, r) in phasor.iter_mut().zip(&rot) {
                *p *= r;
            }
        }
        out
    }
}

/// Monte-Carlo estimate of the field autocorrelation at one lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationEstimate {
    pub lag: f64,
    pub mean: f64,
    pub std_error: f64,
}

/// Estimate `<E(t) E(t + lag)>` over realizations, averaging each realization
/// over `base_times` (stationarity) before forming the ensemble statistics.
pub fn estimate_autocorrelation(
    realizations: &[FieldRealization],
    lags: &[f64],
    base_times: &[f64],
) -> Result<Vec<CorrelationEstimate>> {
    const MIN_REALIZATIONS: usize = 100;
    if realizations.len() < MIN_REALIZATIONS {
        return Err(Error::TooFewSamples { needed: MIN_REALIZATIONS, got: realizations.len() });
    }
    if base_times.is_empty() {
        return Err(Error::Invalid("at least one base time is required".into()));
    }
    Ok(lags
        .iter()
        .map(|&lag| {
            let per: Vec<f64> = realizations
                .iter()
                .map(|r| sum::mean(&base_times.iter().map(|&t| r.eval(t) * r.eval(t + lag)).collect::<Vec<_>>()))
                .collect();
            let (mean, var) = sum::mean_var(&per);
            CorrelationEstimate { lag, mean, std_error: (var / per.len() as f64).sqrt() }
        })
        .collect())
}
