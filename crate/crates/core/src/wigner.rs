//! Wigner functions of wave functions, reconstruction of phase-space
//! densities from characteristic functions, and the diagnostics that tell a
//! quasi-distribution from a true probability density.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::grid::{Boundary, Grid1};
use crate::phase_stats::{self, Bandwidth, CharacteristicGrid, Estimator};
use crate::schrod::{momentum_density, WaveFunction};
use crate::{Error, Result};

/// Largest `|psi|` tolerated at the walls of a box grid.
pub const EDGE_TOLERANCE: f64 = 1e-8;

/// Real quasi-distribution on an `(x, p)` grid, stored x-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WignerGrid {
    pub x: Grid1,
    pub p: Grid1,
    pub values: Vec<f64>,
    pub source: String,
    /// Largest imaginary part discarded when the values were formed.
    pub max_imag: f64,
}

impl WignerGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let np = self.p.len();
        &self.values[i * np..(i + 1) * np]
    }

    /// `int W dp` at each x.
    pub fn position_marginal(&self) -> Vec<f64> {
        (0..self.x.len()).map(|i| self.p.integrate(self.row(i))).collect()
    }

    /// `int W dx` at each p.
    pub fn momentum_marginal(&self) -> Vec<f64> {
        let nx = self.x.len();
        (0..self.p.len())
            .map(|j| self.x.integrate(&(0..nx).map(|i| self.at(i, j)).collect::<Vec<_>>()))
            .collect()
    }

    /// Integral of an arbitrary function of the cell values.
    pub fn integrate_with(&self, f: impl Fn(f64) -> f64) -> f64 {
        let rows: Vec<f64> = (0..self.x.len())
            .map(|i| self.p.integrate(&self.row(i).iter().map(|&w| f(w)).collect::<Vec<_>>()))
            .collect();
        self.x.integrate(&rows)
    }

    pub fn integral(&self) -> f64 {
        self.integrate_with(|w| w)
    }
}

/// `W(x, p) = (1/(pi hbar)) int psi*(x+y) psi(x-y) exp(-2ipy/hbar) dy` with
/// `y` on the position lattice.
pub fn wigner_transform(w: &WaveFunction, p_grid: &Grid1) -> Result<WignerGrid> {
    let n = w.psi.len();
    let periodic = w.grid.boundary() == Boundary::Periodic;
    if !periodic {
        let edge = w.psi[0].norm().max(w.psi[n - 1].norm());
        if edge > EDGE_TOLERANCE {
            return Err(Error::Resolution(format!("|psi| = {edge:e} at the box walls; widen the grid")));
        }
    }
    let hbar = w.hbar();
    let dx = w.grid.step();
    let ps = p_grid.points();
    let np = ps.len();
    let psi = &w.psi;
    let at = |i: isize| -> Complex64 {
        if periodic {
            psi[i.rem_euclid(n as isize) as usize]
        } else if i >= 0 && (i as usize) < n {
            psi[i as usize]
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    let kmax = if periodic { (n / 2) as isize } else { n as isize - 1 };
    let rows: Vec<(Vec<f64>, f64)> = (0..n as isize)
        .into_par_iter()
        .map(|i| {
            // Kernel values for this x; only the overlap range contributes.
            let (klo, khi) = if periodic { (-kmax, kmax) } else { (-(i.min(n as isize - 1 - i)), i.min(n as isize - 1 - i)) };
            let kernel: Vec<(f64, Complex64)> = (klo..=khi).map(|k| (k as f64, at(i + k).conj() * at(i - k))).collect();
            let mut row = Vec::with_capacity(np);
            let mut imag = 0.0f64;
            for &p in &ps {
                let theta = -2.0 * p * dx / hbar;
                let (mut re, mut im) = (0.0, 0.0);
                for &(k, c) in &kernel {
                    let e = Complex64::from_polar(1.0, theta * k);
                    let z = c * e;
                    re += z.re;
                    im += z.im;
                }
                let s = dx / (std::f64::consts::PI * hbar);
                row.push(re * s);
                imag = imag.max((im * s).abs());
            }
            (row, imag)
        })
        .collect();
    let max_imag = rows.iter().fold(0.0f64, |a, r| a.max(r.1));
    let values = rows.into_iter().flat_map(|r| r.0).collect();
    Ok(WignerGrid { x: w.grid, p: *p_grid, values, source: "wigner-transform".into(), max_imag })
}

/// Characteristic function built from the wave function,
/// `Q~(x, z) = psi*(x + beta z) psi(x - beta z)`, with `z_k = k dx / beta`.
///
/// `z_window` limits `|z|`; `None` keeps every lattice offset.
pub fn psi_characteristic(w: &WaveFunction, z_window: Option<f64>) -> Result<CharacteristicGrid> {
    let n = w.psi.len();
    let dz = w.grid.step() / w.beta;
    let mut kmax = n - 1;
    if let Some(zw) = z_window {
        if !(zw > 0.0) {
            return Err(Error::Invalid("z window must be positive".into()));
        }
        kmax = kmax.min((zw / dz).floor() as usize);
    }
    let z = Grid1::symmetric(kmax as f64 * dz, kmax)?;
    let at = |i: isize| -> Complex64 {
        if i >= 0 && (i as usize) < n {
            w.psi[i as usize]
        } else if w.grid.boundary() == Boundary::Periodic {
            w.psi[i.rem_euclid(n as isize) as usize]
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    let k = kmax as isize;
    let mut values = Vec::with_capacity(n * (2 * kmax + 1));
    for i in 0..n as isize {
        for j in -k..=k {
            values.push(at(i + j).conj() * at(i - j));
        }
    }
    CharacteristicGrid::from_values(w.grid, z, values)
}

/// Relative Hermitian defect tolerated by [`inverse_characteristic`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// `Q(x, p) = (1/2 pi) int Q~(x, z) exp(-ipz) dz` by the trapezoid rule.
pub fn inverse_characteristic(q: &CharacteristicGrid, p_grid: &Grid1) -> Result<WignerGrid> {
    let z = q.z_grid();
    if (z.start() + z.end()).abs() > 1e-9 * z.extent().max(1.0) || z.len() % 2 == 0 {
        return Err(Error::Invalid("z grid must be symmetric about 0".into()));
    }
    let scale = q.values().iter().fold(0.0f64, |a, v| a.max(v.norm()));
    let defect = q.hermitian_defect()?;
    if defect > SYMMETRY_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Symmetry(defect));
    }
    let zs = z.points();
    let zw = phase_stats::trapezoid_weights(z);
    let ps = p_grid.points();
    let nx = q.x_grid().len();
    let nz = zs.len();
    let phases: Vec<Vec<Complex64>> = ps
        .iter()
        .map(|&p| zs.iter().zip(&zw).map(|(&zz, &w)| Complex64::from_polar(w / std::f64::consts::TAU, -p * zz)).collect())
        .collect();
    let rows: Vec<(Vec<f64>, f64)> = (0..nx)
        .into_par_iter()
        .map(|i| {
            let vals = &q.values()[i * nz..(i + 1) * nz];
            let mut imag = 0.0f64;
            let row = phases
                .iter()
                .map(|ph| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (v, e) in vals.iter().zip(ph) {
                        let c = v * e;
                        re += c.re;
                        im += c.im;
                    }
                    imag = imag.max(im.abs());
                    re
                })
                .collect();
            (row, imag)
        })
        .collect();
    let max_imag = rows.iter().fold(0.0f64, |a, r| a.max(r.1));
    Ok(WignerGrid {
        x: *q.x_grid(),
        p: *p_grid,
        values: rows.into_iter().flat_map(|r| r.0).collect(),
        source: "inverse-characteristic".into(),
        max_imag,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginalErrors {
    /// `max |int W dp - |psi|^2|`.
    pub position: f64,
    /// `max |int W dx - |phi(p)|^2|`.
    pub momentum: f64,
}

pub fn marginals_check(wg: &WignerGrid, w: &WaveFunction) -> Result<MarginalErrors> {
    wg.x.require_same(&w.grid, "Wigner grid and wave function use different x grids")?;
    let rho = w.density();
    let position = wg.position_marginal().iter().zip(&rho).fold(0.0f64, |a, (m, r)| a.max((m - r).abs()));
    let phi = momentum_density(w, &wg.p);
    let momentum = wg.momentum_marginal().iter().zip(&phi).fold(0.0f64, |a, (m, r)| a.max((m - r).abs()));
    Ok(MarginalErrors { position, momentum })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NegativityReport {
    pub min: f64,
    /// `int |min(W, 0)| dx dp`.
    pub negative_volume: f64,
    pub min_x: f64,
    pub min_p: f64,
}

pub fn negativity_report(wg: &WignerGrid) -> NegativityReport {
    let np = wg.p.len();
    let (k, min) = wg.values.iter().enumerate().fold((0, f64::INFINITY), |(bk, bv), (k, &v)| if v < bv { (k, v) } else { (bk, bv) });
    NegativityReport {
        min,
        negative_volume: wg.integrate_with(|v| (-v).max(0.0)),
        min_x: wg.x.x(k / np),
        min_p: wg.p.x(k % np),
    }
}

/// `2 pi hbar int int W^2`, equal to one for pure states.
pub fn purity(wg: &WignerGrid, hbar: f64) -> f64 {
    std::f64::consts::TAU * hbar * wg.integrate_with(|v| v * v)
}

/// `2 pi hbar int int W_a W_b = |<a|b>|^2`.
pub fn overlap(a: &WignerGrid, b: &WignerGrid, hbar: f64) -> Result<f64> {
    a.x.require_same(&b.x, "Wigner grids differ in x")?;
    a.p.require_same(&b.p, "Wigner grids differ in p")?;
    let prod = WignerGrid { values: a.values.iter().zip(&b.values).map(|(u, v)| u * v).collect(), ..a.clone() };
    Ok(std::f64::consts::TAU * hbar * prod.integral())
}

/// Largest kernel transform allowed at the edge of the z grid.
pub const KERNEL_CUTOFF: f64 = 1e-6;

/// Reconstruction of `Q` from an ensemble through its characteristic
/// function, with a Monte-Carlo noise floor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleReconstruction {
    pub q: WignerGrid,
    /// Pointwise standard error from disjoint member groups.
    pub noise: Vec<f64>,
    /// Roundoff and kernel-truncation allowance added to the noise floor.
    pub roundoff: f64,
    /// `min (Q + 3 noise + roundoff)`; nonnegative when `Q` is nonnegative
    /// within its noise.
    pub margin: f64,
    pub negativity: NegativityReport,
}

/// Estimate `Q` (KDE), form `Q~` on `z_grid` and transform back. The noise
/// floor comes from `groups` disjoint sample subsets, all using the
/// full-sample kernel widths.
pub fn ensemble_reconstruction(
    x: &[f64],
    p: &[f64],
    x_grid: &Grid1,
    p_grid: &Grid1,
    z_grid: &Grid1,
    groups: usize,
) -> Result<EnsembleReconstruction> {
    if groups < 2 {
        return Err(Error::Invalid("need at least two groups for a noise floor".into()));
    }
    let full_q = phase_stats::estimate_density(x, p, x_grid, p_grid, Estimator::default())?;
    let (hx, hp) = full_q.meta().bandwidth.unwrap_or((x_grid.step(), p_grid.step()));
    // A z grid that cuts into the kernel spectrum rings below zero in the tails.
    let zmax = z_grid.start().abs().max(z_grid.end().abs());
    if (-0.5 * (hp * zmax).powi(2)).exp() > KERNEL_CUTOFF {
        return Err(Error::Resolution(format!(
            "max|z| = {zmax:.3} truncates the momentum kernel; need at least {:.3}",
            (-2.0 * KERNEL_CUTOFF.ln()).sqrt() / hp
        )));
    }
    let fixed = Estimator::Kde(Bandwidth::Fixed { x: hx, p: hp });
    let recon = |qd: &phase_stats::PhaseDensity| -> Result<WignerGrid> {
        let c = phase_stats::characteristic_fn(qd, z_grid)?;
        inverse_characteristic(&c, p_grid)
    };
    let mut q = recon(&full_q)?;
    q.source = "ensemble-reconstruction".into();
    let n = x.len();
    let mut parts = Vec::with_capacity(groups);
    for g in 0..groups {
        let r = (g * n / groups)..((g + 1) * n / groups);
        let qd = phase_stats::estimate_density(&x[r.clone()], &p[r], x_grid, p_grid, fixed)?;
        parts.push(recon(&qd)?.values);
    }
    let noise = phase_stats::grouped_standard_error(&parts);
    let peak = q.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let roundoff = (1e-12 + KERNEL_CUTOFF) * peak;
    let margin = q.values.iter().zip(&noise).map(|(v, s)| v + 3.0 * s + roundoff).fold(f64::INFINITY, f64::min);
    let negativity = negativity_report(&q);
    Ok(EnsembleReconstruction { q, noise, roundoff, margin, negativity })
}

/// `max |W_a - W_b|` over matching grids.
pub fn max_difference(a: &WignerGrid, b: &WignerGrid) -> Result<f64> {
    a.x.require_same(&b.x, "Wigner grids differ in x")?;
    a.p.require_same(&b.p, "Wigner grids differ in p")?;
    Ok(a.values.iter().zip(&b.values).fold(0.0f64, |m, (u, v)| m.max((u - v).abs())))
}
