//! Finite-difference and spectral derivatives on uniform grids.
//!
//! Non-periodic stencils are fourth-order centered in the interior, drop to
//! second-order centered next to the ends and to second-order one-sided at the
//! ends. Masked quantities are differentiated by passing the in-mask slice,
//! which gives the one-sided fallback at mask edges.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::grid::{Boundary, Grid1};

/// First derivative.
pub fn d1(f: &[f64], h: f64, boundary: Boundary) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        if n == 2 {
            let d = (f[1] - f[0]) / h;
            out.fill(d);
        }
        return out;
    }
    match boundary {
        Boundary::Periodic => {
            for i in 0..n {
                let at = |k: isize| f[(i as isize + k).rem_euclid(n as isize) as usize];
                out[i] = (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * h);
            }
        }
        Boundary::Box => {
            for i in 0..n {
                out[i] = if i >= 2 && i + 2 < n {
                    (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h)
                } else if i >= 1 && i + 1 < n {
                    (f[i + 1] - f[i - 1]) / (2.0 * h)
                } else if i == 0 {
                    (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
                } else {
                    (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h)
                };
            }
        }
    }
    out
}

/// Second derivative.
pub fn d2(f: &[f64], h: f64, boundary: Boundary) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    let h2 = h * h;
    match boundary {
        Boundary::Periodic => {
            for i in 0..n {
                let at = |k: isize| f[(i as isize + k).rem_euclid(n as isize) as usize];
                out[i] = (-at(-2) + 16.0 * at(-1) - 30.0 * at(0) + 16.0 * at(1) - at(2)) / (12.0 * h2);
            }
        }
        Boundary::Box => {
            if n < 4 {
                if n == 3 {
                    out.fill((f[0] - 2.0 * f[1] + f[2]) / h2);
                }
                return out;
            }
            for i in 0..n {
                out[i] = if i >= 2 && i + 2 < n {
                    (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) / (12.0 * h2)
                } else if i >= 1 && i + 1 < n {
                    (f[i - 1] - 2.0 * f[i] + f[i + 1]) / h2
                } else if i == 0 {
                    (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2
                } else {
                    (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2
                };
            }
        }
    }
    out
}

/// Spectral first derivative of a complex field.
///
/// Periodic grids use the FFT directly. Box grids are differentiated through
/// the odd extension across the walls, where the field is taken to vanish.
pub fn spectral_d1(psi: &[Complex64], grid: &Grid1) -> Vec<Complex64> {
    let n = psi.len();
    match grid.boundary() {
        Boundary::Periodic => spectral_periodic(psi, grid.step()),
        Boundary::Box => {
            // [0, psi_0..psi_{n-1}, 0, -psi_{n-1}..-psi_0]
            let m = 2 * (n + 1);
            let mut ext = vec![Complex64::new(0.0, 0.0); m];
            for i in 0..n {
                ext[i + 1] = psi[i];
                ext[m - 1 - i] = -psi[i];
            }
            let d = spectral_periodic(&ext, grid.step());
            d[1..=n].to_vec()
        }
    }
}

fn spectral_periodic(f: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = f.len();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf = f.to_vec();
    fwd.process(&mut buf);
    let dk = 2.0 * std::f64::consts::PI / (n as f64 * h);
    for (j, c) in buf.iter_mut().enumerate() {
        let k = wavenumber(j, n) * dk;
        // The Nyquist mode has no well-defined derivative for real data.
        let k = if n % 2 == 0 && j == n / 2 { 0.0 } else { k };
        *c *= Complex64::new(0.0, k) / n as f64;
    }
    inv.process(&mut buf);
    buf
}

/// Signed FFT bin index.
#[inline]
pub fn wavenumber(j: usize, n: usize) -> f64 {
    if j <= n / 2 {
        j as f64
    } else {
        j as f64 - n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourth_order_exact_on_quartic_interior() {
        let h = 0.1;
        let f: Vec<f64> = (0..20).map(|i| (i as f64 * h).powi(4)).collect();
        let d = d2(&f, h, Boundary::Box);
        for i in 2..18 {
            let x = i as f64 * h;
            assert!((d[i] - 12.0 * x * x).abs() < 1e-9, "{i}: {}", d[i]);
        }
        let g = d1(&f, h, Boundary::Box);
        for i in 2..18 {
            let x = i as f64 * h;
            assert!((g[i] - 4.0 * x.powi(3)).abs() < 1e-9);
        }
    }

    #[test]
    fn one_sided_ends_exact_on_quadratics() {
        let h = 0.25;
        let f: Vec<f64> = (0..6).map(|i| { let x = i as f64 * h; 1.0 + 2.0 * x - 3.0 * x * x }).collect();
        let d = d1(&f, h, Boundary::Box);
        let dd = d2(&f, h, Boundary::Box);
        for i in 0..6 {
            let x = i as f64 * h;
            assert!((d[i] - (2.0 - 6.0 * x)).abs() < 1e-12);
            assert!((dd[i] + 6.0).abs() < 1e-11);
        }
    }

    #[test]
    fn spectral_derivative_of_gaussian() {
        let g = Grid1::periodic(-12.0, 12.0, 256).unwrap();
        let psi: Vec<Complex64> = g.points().iter().map(|x| Complex64::new((-x * x / 2.0).exp(), 0.0)).collect();
        let d = spectral_d1(&psi, &g);
        for (i, x) in g.points().iter().enumerate() {
            assert!((d[i].re + x * (-x * x / 2.0).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_derivative_box_sine() {
        let g = Grid1::box_interior(0.0, 1.0, 63).unwrap();
        let pi = std::f64::consts::PI;
        let psi: Vec<Complex64> = g.points().iter().map(|x| Complex64::new((pi * x).sin(), 0.0)).collect();
        let d = spectral_d1(&psi, &g);
        for (i, x) in g.points().iter().enumerate() {
            assert!((d[i].re - pi * (pi * x).cos()).abs() < 1e-10);
        }
    }
}
