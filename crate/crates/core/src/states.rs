//! Analytic reference states used as oracles and as initial data.
//! All take `hbar` explicitly; in this crate `hbar = 2 beta`.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Harmonic-oscillator eigenfunction `n` (real), by the stable three-term recurrence.
pub fn ho_eigenstate(n: usize, x: f64, mass: f64, omega: f64, hbar: f64) -> f64 {
    let scale = (mass * omega / hbar).sqrt();
    let xi = x * scale;
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * xi * xi).exp();
    for k in 0..n {
        let next = (2.0 / (k + 1) as f64).sqrt() * xi * cur - (k as f64 / (k + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur * scale.sqrt()
}

/// Classical phase-space orbit of the oscillator.
pub fn ho_orbit(x0: f64, p0: f64, t: f64, mass: f64, omega: f64) -> (f64, f64) {
    let (s, c) = (omega * t).sin_cos();
    (x0 * c + p0 / (mass * omega) * s, p0 * c - mass * omega * x0 * s)
}

/// Coherent state of the oscillator whose center starts at `(x0, p0)`,
/// including the time-dependent global phase.
pub fn coherent_state(x: f64, t: f64, x0: f64, p0: f64, mass: f64, omega: f64, hbar: f64) -> Complex64 {
    let (xc, pc) = ho_orbit(x0, p0, t, mass, omega);
    let a = mass * omega / (2.0 * hbar);
    let norm = (mass * omega / (PI * hbar)).powf(0.25);
    let gamma = -0.5 * omega * t - (pc * xc - p0 * x0) / (2.0 * hbar);
    let dx = x - xc;
    Complex64::from_polar(norm * (-a * dx * dx).exp(), pc * x / hbar + gamma)
}

/// Free Gaussian packet whose density starts with standard deviation `sigma0`
/// centred at `x0` and moves with momentum `p0`.
pub fn free_gaussian(x: f64, t: f64, sigma0: f64, x0: f64, p0: f64, mass: f64, hbar: f64) -> Complex64 {
    let spread = Complex64::new(1.0, hbar * t / (2.0 * mass * sigma0 * sigma0));
    let d = x - x0 - p0 * t / mass;
    let expo = -Complex64::new(d * d, 0.0) / (4.0 * sigma0 * sigma0 * spread)
        + Complex64::new(0.0, (p0 * (x - x0) - p0 * p0 * t / (2.0 * mass)) / hbar);
    (2.0 * PI * sigma0 * sigma0).powf(-0.25) * expo.exp() / spread.sqrt()
}

/// Density standard deviation of the free packet at time `t`.
pub fn free_gaussian_width(t: f64, sigma0: f64, mass: f64, hbar: f64) -> f64 {
    (sigma0 * sigma0 + (hbar * t / (2.0 * mass * sigma0)).powi(2)).sqrt()
}

/// Ground state of a box with walls at `lo` and `hi`.
pub fn box_ground_state(x: f64, lo: f64, hi: f64) -> f64 {
    let l = hi - lo;
    (2.0 / l).sqrt() * (PI * (x - lo) / l).sin()
}

/// Analytic Wigner function of oscillator eigenstate 0 or 1 (`hbar` general).
pub fn ho_wigner(n: usize, x: f64, p: f64, mass: f64, omega: f64, hbar: f64) -> f64 {
    let u = mass * omega * x * x / hbar + p * p / (mass * omega * hbar);
    let base = (-u).exp() / (PI * hbar);
    match n {
        0 => base,
        1 => base * (2.0 * u - 1.0),
        2 => base * (2.0 * u * u - 4.0 * u + 1.0),
        _ => unimplemented!("analytic Wigner functions are provided for n <= 2"),
    }
}
