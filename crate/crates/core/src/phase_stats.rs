//! Phase-space density estimation, its partial Fourier transform in momentum,
//! local momentum moments and the residuals of the reduced moment hierarchy.

use num_complex::Complex64;
use serde::Serialize;

use crate::deriv;
use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid1};
use crate::params::Potential;
use crate::sum;

/// Default support threshold, relative to the peak density.
pub const SUPPORT_THRESHOLD: f64 = 1e-3;

/// Below this many samples the estimate is flagged as low-confidence.
pub const MIN_CONFIDENT_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Bandwidth {
    /// Silverman's rule for a two-dimensional product kernel.
    Silverman,
    /// Silverman's rule times a factor.
    Scaled(f64),
    Fixed { x: f64, p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Estimator {
    Histogram,
    Kde(Bandwidth),
}

impl Default for Estimator {
    fn default() -> Self {
        Estimator::Kde(Bandwidth::Silverman)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityMeta {
    pub estimator: Estimator,
    /// Kernel widths actually used (KDE only).
    pub bandwidth: Option<(f64, f64)>,
    pub bin_widths: (f64, f64),
    pub samples: usize,
    /// Fewer than [`MIN_CONFIDENT_SAMPLES`] samples went into the estimate.
    pub low_confidence: bool,
}

/// Gridded phase-space density `Q(x, p)`, stored x-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDensity {
    x: Grid1,
    p: Grid1,
    values: Vec<f64>,
    meta: DensityMeta,
}

impl PhaseDensity {
    /// Wrap precomputed values. Normalizes to unit integral unless the total
    /// is zero. Values need not be nonnegative (quasi-densities).
    pub fn from_values(x: Grid1, p: Grid1, values: Vec<f64>) -> Result<Self> {
        if values.len() != x.len() * p.len() {
            return Err(Error::GridMismatch(format!("{} values for a {}x{} grid", values.len(), x.len(), p.len())));
        }
        let meta = DensityMeta {
            estimator: Estimator::Histogram,
            bandwidth: None,
            bin_widths: (x.step(), p.step()),
            samples: 0,
            low_confidence: false,
        };
        let mut q = Self { x, p, values, meta };
        q.normalize();
        Ok(q)
    }

    pub fn x_grid(&self) -> &Grid1 {
        &self.x
    }
    pub fn p_grid(&self) -> &Grid1 {
        &self.p
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn meta(&self) -> &DensityMeta {
        &self.meta
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let np = self.p.len();
        &self.values[i * np..(i + 1) * np]
    }

    /// Trapezoidal integral over the whole grid.
    pub fn integral(&self) -> f64 {
        let rows: Vec<f64> = (0..self.x.len()).map(|i| self.p.integrate(self.row(i))).collect();
        self.x.integrate(&rows)
    }

    fn normalize(&mut self) {
        let total = self.integral();
        if total != 0.0 && total.is_finite() {
            self.values.iter_mut().for_each(|v| *v /= total);
        }
    }
}

/// Estimate `Q(x, p)` from samples.
pub fn estimate_density(x: &[f64], p: &[f64], x_grid: &Grid1, p_grid: &Grid1, estimator: Estimator) -> Result<PhaseDensity> {
    if x.len() != p.len() {
        return Err(Error::Invalid("x and p sample counts differ".into()));
    }
    let n = x.len();
    if n == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let (dx, dp) = (x_grid.step(), p_grid.step());
    let (xlo, xhi) = (x_grid.start() - 0.5 * dx, x_grid.end() + 0.5 * dx);
    let (plo, phi) = (p_grid.start() - 0.5 * dp, p_grid.end() + 0.5 * dp);
    let inside = x.iter().zip(p).filter(|(&a, &b)| a >= xlo && a <= xhi && b >= plo && b <= phi).count();
    let covered = inside as f64 / n as f64;
    if covered < 0.99 {
        return Err(Error::Coverage { covered, required: 0.99 });
    }
    let (nx, np) = (x_grid.len(), p_grid.len());
    let mut values = vec![0.0; nx * np];
    let mut bandwidth = None;
    match estimator {
        Estimator::Histogram => {
            for (&a, &b) in x.iter().zip(p) {
                let i = ((a - x_grid.start()) / dx).round();
                let j = ((b - p_grid.start()) / dp).round();
                if i >= 0.0 && (i as usize) < nx && j >= 0.0 && (j as usize) < np {
                    values[i as usize * np + j as usize] += 1.0;
                }
            }
        }
        Estimator::Kde(bw) => {
            let (hx, hp) = kde_bandwidth(x, p, bw, dx, dp);
            bandwidth = Some((hx, hp));
            let reach_x = (6.0 * hx / dx).ceil() as isize;
            let reach_p = (6.0 * hp / dp).ceil() as isize;
            let mut kx = Vec::with_capacity(2 * reach_x as usize + 1);
            let mut kp = Vec::with_capacity(2 * reach_p as usize + 1);
            for (&a, &b) in x.iter().zip(p) {
                let ci = ((a - x_grid.start()) / dx).round() as isize;
                let cj = ((b - p_grid.start()) / dp).round() as isize;
                let i0 = (ci - reach_x).max(0);
                let i1 = (ci + reach_x).min(nx as isize - 1);
                let j0 = (cj - reach_p).max(0);
                let j1 = (cj + reach_p).min(np as isize - 1);
                if i0 > i1 || j0 > j1 {
                    continue;
                }
                kx.clear();
                kp.clear();
                kx.extend((i0..=i1).map(|i| gauss((x_grid.x(i as usize) - a) / hx)));
                kp.extend((j0..=j1).map(|j| gauss((p_grid.x(j as usize) - b) / hp)));
                for (ii, wx) in (i0..=i1).zip(&kx) {
                    let row = &mut values[ii as usize * np..(ii as usize + 1) * np];
                    for (jj, wp) in (j0..=j1).zip(&kp) {
                        row[jj as usize] += wx * wp;
                    }
                }
            }
        }
    }
    let meta = DensityMeta { estimator, bandwidth, bin_widths: (dx, dp), samples: n, low_confidence: n < MIN_CONFIDENT_SAMPLES };
    let mut q = PhaseDensity { x: *x_grid, p: *p_grid, values, meta };
    q.normalize();
    Ok(q)
}

#[inline]
fn gauss(u: f64) -> f64 {
    (-0.5 * u * u).exp()
}

/// Kernel widths; never narrower than the grid spacing.
fn kde_bandwidth(x: &[f64], p: &[f64], bw: Bandwidth, dx: f64, dp: f64) -> (f64, f64) {
    let silverman = |v: &[f64]| {
        let (_, var) = sum::mean_var(v);
        var.sqrt() * (v.len() as f64).powf(-1.0 / 6.0)
    };
    let (hx, hp) = match bw {
        Bandwidth::Silverman => (silverman(x), silverman(p)),
        Bandwidth::Scaled(s) => (s * silverman(x), s * silverman(p)),
        Bandwidth::Fixed { x, p } => (x, p),
    };
    (hx.max(dx), hp.max(dp))
}

/// Partial Fourier transform `Q~(x, z) = int Q(x, p) e^{i p z} dp`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicGrid {
    x: Grid1,
    z: Grid1,
    values: Vec<Complex64>,
}

impl CharacteristicGrid {
    pub fn from_values(x: Grid1, z: Grid1, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != x.len() * z.len() {
            return Err(Error::GridMismatch("characteristic grid size".into()));
        }
        Ok(Self { x, z, values })
    }
    pub fn x_grid(&self) -> &Grid1 {
        &self.x
    }
    pub fn z_grid(&self) -> &Grid1 {
        &self.z
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    #[inline]
    pub fn at(&self, i: usize, k: usize) -> Complex64 {
        self.values[i * self.z.len() + k]
    }

    /// Largest `|Q~*(x, z) - Q~(x, -z)|` over the grid; the z-grid must be
    /// symmetric about zero.
    pub fn hermitian_defect(&self) -> Result<f64> {
        let nz = self.z.len();
        if (self.z.start() + self.z.end()).abs() > 1e-9 * self.z.step() {
            return Err(Error::GridMismatch("z-grid is not symmetric about zero".into()));
        }
        let mut worst = 0.0f64;
        for i in 0..self.x.len() {
            for k in 0..nz {
                worst = worst.max((self.at(i, k).conj() - self.at(i, nz - 1 - k)).norm());
            }
        }
        Ok(worst)
    }
}

pub fn characteristic_fn(q: &PhaseDensity, z_grid: &Grid1) -> Result<CharacteristicGrid> {
    let zmax = z_grid.start().abs().max(z_grid.end().abs());
    if zmax * q.p.step() > std::f64::consts::FRAC_PI_4 * (1.0 + 1e-12) {
        return Err(Error::Resolution(format!(
            "max|z| * dp = {:.4} exceeds pi/4",
            zmax * q.p.step()
        )));
    }
    let (nx, np, nz) = (q.x.len(), q.p.len(), z_grid.len());
    let pw: Vec<f64> = trapezoid_weights(&q.p);
    let ps = q.p.points();
    let mut values = Vec::with_capacity(nx * nz);
    // Phase factors are shared by every x-row.
    let phases: Vec<Vec<Complex64>> = z_grid
        .points()
        .iter()
        .map(|&z| ps.iter().zip(&pw).map(|(&pp, &w)| Complex64::from_polar(w, pp * z)).collect())
        .collect();
    let zs = z_grid.points();
    for i in 0..nx {
        let row = q.row(i);
        for (ph, &z) in phases.iter().zip(&zs) {
            if z == 0.0 {
                // Same quadrature as the marginal, so the column matches it exactly.
                values.push(Complex64::new(q.p.integrate(row), 0.0));
                continue;
            }
            let (mut re, mut im) = (0.0, 0.0);
            for j in 0..np {
                re += row[j] * ph[j].re;
                im += row[j] * ph[j].im;
            }
            values.push(Complex64::new(re, im));
        }
    }
    Ok(CharacteristicGrid { x: q.x, z: *z_grid, values })
}

pub(crate) fn trapezoid_weights(g: &Grid1) -> Vec<f64> {
    let mut w = vec![g.step(); g.len()];
    if g.boundary() == Boundary::Box {
        w[0] *= 0.5;
        let n = g.len();
        w[n - 1] *= 0.5;
    }
    w
}

/// Position marginal `rho(x) = int Q dp`.
pub fn marginal_rho(q: &PhaseDensity) -> Vec<f64> {
    (0..q.x.len()).map(|i| q.p.integrate(q.row(i))).collect()
}

/// Local momentum moments on a position grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalMoments {
    pub x: Grid1,
    pub rho: Vec<f64>,
    pub mean_p: Vec<f64>,
    pub mean_p2: Vec<f64>,
    pub var_p: Vec<f64>,
    pub mask: Vec<bool>,
}

impl LocalMoments {
    /// Build from analytic or externally computed profiles.
    pub fn from_profiles(x: Grid1, rho: Vec<f64>, mean_p: Vec<f64>, mean_p2: Vec<f64>, threshold: f64) -> Result<Self> {
        let n = x.len();
        if rho.len() != n || mean_p.len() != n || mean_p2.len() != n {
            return Err(Error::GridMismatch("profile lengths differ from the grid".into()));
        }
        let mask = support_mask(&rho, threshold);
        let var_p = mean_p.iter().zip(&mean_p2).map(|(m, m2)| m2 - m * m).collect();
        Ok(Self { x, rho, mean_p, mean_p2, var_p, mask })
    }

    pub fn mask_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// `rho > threshold * max(rho)`.
pub fn support_mask(rho: &[f64], threshold: f64) -> Vec<bool> {
    let peak = rho.iter().cloned().fold(0.0f64, f64::max);
    rho.iter().map(|&r| peak > 0.0 && r > threshold * peak).collect()
}

/// Maximal runs of `true` in a mask, as half-open index ranges.
pub fn mask_components(mask: &[bool]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &m) in mask.iter().enumerate() {
        match (m, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(s..mask.len());
    }
    out
}

pub fn local_moments(q: &PhaseDensity) -> LocalMoments {
    local_moments_with(q, SUPPORT_THRESHOLD)
}

pub fn local_moments_with(q: &PhaseDensity, threshold: f64) -> LocalMoments {
    let ps = q.p.points();
    let nx = q.x.len();
    let mut rho = Vec::with_capacity(nx);
    let mut mean_p = Vec::with_capacity(nx);
    let mut mean_p2 = Vec::with_capacity(nx);
    for i in 0..nx {
        let row = q.row(i);
        let r = q.p.integrate(row);
        let m1 = q.p.integrate(&row.iter().zip(&ps).map(|(v, p)| v * p).collect::<Vec<_>>());
        let m2 = q.p.integrate(&row.iter().zip(&ps).map(|(v, p)| v * p * p).collect::<Vec<_>>());
        rho.push(r);
        if r.abs() > 1e-300 {
            mean_p.push(m1 / r);
            mean_p2.push(m2 / r);
        } else {
            mean_p.push(0.0);
            mean_p2.push(0.0);
        }
    }
    let mask = support_mask(&rho, threshold);
    let var_p = mean_p.iter().zip(&mean_p2).map(|(m, m2)| m2 - m * m).collect();
    LocalMoments { x: q.x, rho, mean_p, mean_p2, var_p, mask }
}

/// Second derivative of `ln rho` on each mask component (NaN outside).
pub fn log_density_curvature(rho: &[f64], mask: &[bool], h: f64) -> Vec<f64> {
    let mut out = vec![f64::NAN; rho.len()];
    for c in mask_components(mask) {
        if c.len() < 3 {
            continue;
        }
        let ln: Vec<f64> = rho[c.clone()].iter().map(|r| r.ln()).collect();
        let d = deriv::d2(&ln, h, Boundary::Box);
        out[c].copy_from_slice(&d);
    }
    out
}

/// First derivative of `ln rho` on each mask component (NaN outside).
pub fn log_density_slope(rho: &[f64], mask: &[bool], h: f64) -> Vec<f64> {
    let mut out = vec![f64::NAN; rho.len()];
    for c in mask_components(mask) {
        if c.len() < 3 {
            continue;
        }
        let ln: Vec<f64> = rho[c.clone()].iter().map(|r| r.ln()).collect();
        out[c.clone()].copy_from_slice(&deriv::d1(&ln, h, Boundary::Box));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionResidual {
    /// `sigma_p^2 + beta^2 d^2 ln rho` on the mask, NaN elsewhere.
    pub residual: Vec<f64>,
    /// Discrete L2 norm over the mask.
    pub l2: f64,
    pub linf: f64,
    pub mask_points: usize,
    /// Support components; more than one means nodes were excluded.
    pub components: Vec<(usize, usize)>,
}

/// Residual of `sigma_p^2(x) = -beta^2 d^2 ln rho / dx^2`.
pub fn dispersion_identity_residual(m: &LocalMoments, beta: f64) -> Result<DispersionResidual> {
    let pts = m.mask_len();
    if pts < 5 {
        return Err(Error::MaskTooSmall { points: pts, needed: 5 });
    }
    let curv = log_density_curvature(&m.rho, &m.mask, m.x.step());
    let residual: Vec<f64> = (0..m.rho.len())
        .map(|i| if m.mask[i] && curv[i].is_finite() { m.var_p[i] + beta * beta * curv[i] } else { f64::NAN })
        .collect();
    let (l2, linf) = masked_norms(&residual, m.x.step());
    Ok(DispersionResidual {
        residual,
        l2,
        linf,
        mask_points: pts,
        components: mask_components(&m.mask).into_iter().map(|r| (r.start, r.end)).collect(),
    })
}

/// L2 (with grid weight) and L-infinity norms over finite entries.
pub fn masked_norms(v: &[f64], h: f64) -> (f64, f64) {
    let finite = v.iter().filter(|r| r.is_finite());
    let l2 = (sum::kahan(finite.clone().map(|r| r * r)) * h).sqrt();
    let linf = finite.fold(0.0f64, |a, r| a.max(r.abs()));
    (l2, linf)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HierarchyResidual {
    /// Index of the time slice the residual is centered on.
    pub slice: usize,
    /// `d rho/dt + (1/m) d(<p> rho)/dx` on the mask.
    pub continuity: Vec<f64>,
    /// `d(<p> rho)/dt + (1/m) d(<p^2> rho)/dx - f rho` on the mask.
    pub momentum: Vec<f64>,
    pub continuity_linf: f64,
    pub momentum_linf: f64,
}

/// Residuals of the truncated continuity and momentum-transfer equations,
/// with centered differences in time over consecutive slices.
pub fn hierarchy_residuals(series: &[LocalMoments], dt: f64, potential: &Potential, mass: f64) -> Result<Vec<HierarchyResidual>> {
    if series.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: series.len() });
    }
    let g = series[0].x;
    for s in &series[1..] {
        g.require_same(&s.x, "local-moment slices use different grids")?;
    }
    let h = g.step();
    let force: Vec<f64> = g.points().iter().map(|&x| potential.force(x).0).collect();
    let current = |m: &LocalMoments| m.mean_p.iter().zip(&m.rho).map(|(a, r)| a * r).collect::<Vec<f64>>();
    let stress = |m: &LocalMoments| m.mean_p2.iter().zip(&m.rho).map(|(a, r)| a * r).collect::<Vec<f64>>();
    let mut out = Vec::with_capacity(series.len() - 2);
    for k in 1..series.len() - 1 {
        let (prev, mid, next) = (&series[k - 1], &series[k], &series[k + 1]);
        let j_mid = current(mid);
        let dj_dx = deriv::d1(&j_mid, h, g.boundary());
        let dpi_dx = deriv::d1(&stress(mid), h, g.boundary());
        let (j_prev, j_next) = (current(prev), current(next));
        let mut cont = vec![f64::NAN; g.len()];
        let mut mom = vec![f64::NAN; g.len()];
        for i in 0..g.len() {
            if !mid.mask[i] {
                continue;
            }
            let drho_dt = (next.rho[i] - prev.rho[i]) / (2.0 * dt);
            let dj_dt = (j_next[i] - j_prev[i]) / (2.0 * dt);
            cont[i] = drho_dt + dj_dx[i] / mass;
            mom[i] = dj_dt + dpi_dx[i] / mass - force[i] * mid.rho[i];
        }
        let (_, cl) = masked_norms(&cont, h);
        let (_, ml) = masked_norms(&mom, h);
        out.push(HierarchyResidual { slice: k, continuity: cont, momentum: mom, continuity_linf: cl, momentum_linf: ml });
    }
    Ok(out)
}

/// Both forms of the phase-space-averaged momentum dispersion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentumFluctuation {
    /// `-beta^2 int rho d^2 ln rho dx`.
    pub curvature_form: f64,
    /// `beta^2 int rho (d ln rho / dx)^2 dx`.
    pub gradient_form: f64,
}

/// Relative size of the density at the integration boundary that still counts
/// as vanishing.
pub const SURFACE_TOLERANCE: f64 = 1e-10;

/// Evaluate both forms with a summation-by-parts-compatible pair of stencils:
/// the curvature form uses second differences of `ln rho`, the gradient form
/// products of first differences of `rho` and `ln rho`. The two agree up to
/// the boundary terms, which must vanish.
pub fn avg_momentum_fluctuation(grid: &Grid1, rho: &[f64], beta: f64) -> Result<MomentumFluctuation> {
    let n = rho.len();
    if n != grid.len() {
        return Err(Error::GridMismatch("density length differs from grid".into()));
    }
    let h = grid.step();
    let b2 = beta * beta;
    let peak = rho.iter().cloned().fold(0.0f64, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Invalid("density has no positive support".into()));
    }
    if grid.boundary() == Boundary::Periodic {
        if rho.iter().any(|&r| r <= 0.0) {
            return Err(Error::Invalid("periodic density must be strictly positive".into()));
        }
        let g: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
        let at = |v: &[f64], i: isize| v[i.rem_euclid(n as isize) as usize];
        let a = -b2 * sum::kahan((0..n as isize).map(|i| at(rho, i) * (at(&g, i + 1) - 2.0 * at(&g, i) + at(&g, i - 1)))) / h;
        let b = b2 * sum::kahan((0..n as isize).map(|i| (at(rho, i + 1) - at(rho, i)) * (at(&g, i + 1) - at(&g, i)))) / h;
        return Ok(MomentumFluctuation { curvature_form: a, gradient_form: b });
    }
    // Largest positive run around the peak.
    let ipk = rho.iter().position(|&r| r == peak).unwrap();
    let mut lo = ipk;
    while lo > 0 && rho[lo - 1] > 0.0 {
        lo -= 1;
    }
    let mut hi = ipk;
    while hi + 1 < n && rho[hi + 1] > 0.0 {
        hi += 1;
    }
    let edge = rho[lo].max(rho[hi]) / peak;
    if edge > SURFACE_TOLERANCE {
        return Err(Error::SurfaceTerm(edge));
    }
    if hi - lo < 4 {
        return Err(Error::MaskTooSmall { points: hi - lo + 1, needed: 5 });
    }
    let g: Vec<f64> = rho.iter().map(|r| if *r > 0.0 { r.ln() } else { 0.0 }).collect();
    let a = -b2 * sum::kahan((lo + 1..hi).map(|i| rho[i] * (g[i + 1] - 2.0 * g[i] + g[i - 1]))) / h;
    let b = b2 * sum::kahan((lo + 1..hi - 1).map(|i| (rho[i + 1] - rho[i]) * (g[i + 1] - g[i]))) / h;
    Ok(MomentumFluctuation { curvature_form: a, gradient_form: b })
}

/// Pointwise standard error across independent group estimates of a field.
pub fn grouped_standard_error(groups: &[Vec<f64>]) -> Vec<f64> {
    let k = groups.len();
    if k < 2 {
        return vec![f64::NAN; groups.first().map_or(0, |g| g.len())];
    }
    let n = groups[0].len();
    (0..n)
        .map(|i| {
            let col: Vec<f64> = groups.iter().map(|g| g[i]).collect();
            if col.iter().any(|v| !v.is_finite()) {
                return f64::NAN;
            }
            // Each group holds 1/k of the data, so the full-sample error is
            // the group spread divided by k.
            let (_, var) = sum::mean_var(&col);
            (var / k as f64).sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian_q(x: &Grid1, p: &Grid1, sx: f64, sp: f64, mu: f64) -> PhaseDensity {
        let mut v = Vec::new();
        for xi in x.points() {
            for pj in p.points() {
                v.push((-xi * xi / (2.0 * sx * sx) - (pj - mu) * (pj - mu) / (2.0 * sp * sp)).exp() / (2.0 * PI * sx * sp));
            }
        }
        PhaseDensity::from_values(*x, *p, v).unwrap()
    }

    #[test]
    fn histogram_single_cell() {
        let x = Grid1::linspace(-1.0, 1.0, 21).unwrap();
        let p = Grid1::linspace(-1.0, 1.0, 21).unwrap();
        let xs = vec![0.2; 200];
        let ps = vec![-0.3; 200];
        let q = estimate_density(&xs, &ps, &x, &p, Estimator::Histogram).unwrap();
        let nonzero: Vec<_> = q.values().iter().enumerate().filter(|(_, v)| **v > 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0].0, 12 * 21 + 7);
        assert!((q.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_sample_runs_flagged() {
        let x = Grid1::linspace(-3.0, 3.0, 31).unwrap();
        let xs: Vec<f64> = (0..10).map(|i| -1.0 + 0.2 * i as f64).collect();
        let q = estimate_density(&xs, &xs, &x, &x, Estimator::default()).unwrap();
        assert!(q.meta().low_confidence);
        assert!(q.meta().bandwidth.is_some());
        assert!((q.integral() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn coverage_violation() {
        let x = Grid1::linspace(-1.0, 1.0, 11).unwrap();
        let xs = vec![5.0; 100];
        assert!(matches!(estimate_density(&xs, &xs, &x, &x, Estimator::Histogram), Err(Error::Coverage { .. })));
    }

    #[test]
    fn gaussian_characteristic_function_and_shift() {
        let x = Grid1::linspace(-4.0, 4.0, 41).unwrap();
        let p = Grid1::linspace(-10.0, 10.0, 401).unwrap();
        let z = Grid1::symmetric(3.0, 30).unwrap();
        let sp = 0.8;
        let q = gaussian_q(&x, &p, 1.0, sp, 0.0);
        let c = characteristic_fn(&q, &z).unwrap();
        let rho = marginal_rho(&q);
        for i in (0..41).step_by(5) {
            for (k, zk) in z.points().iter().enumerate() {
                let expect = rho[i] * (-sp * sp * zk * zk / 2.0).exp();
                assert!((c.at(i, k) - Complex64::new(expect, 0.0)).norm() < 1e-10);
            }
            assert_eq!(c.at(i, 30).re, rho[i]);
        }
        assert!(c.hermitian_defect().unwrap() < 1e-10);
        let p0 = 1.5;
        let shifted = gaussian_q(&x, &p, 1.0, sp, p0);
        let cs = characteristic_fn(&shifted, &z).unwrap();
        for (k, zk) in z.points().iter().enumerate() {
            let expect = c.at(20, k) * Complex64::from_polar(1.0, p0 * zk);
            assert!((cs.at(20, k) - expect).norm() < 1e-9);
        }
        let coarse = Grid1::symmetric(20.0, 10).unwrap();
        assert!(matches!(characteristic_fn(&q, &coarse), Err(Error::Resolution(_))));
    }

    #[test]
    fn marginal_of_product_density() {
        let x = Grid1::linspace(-6.0, 6.0, 121).unwrap();
        let p = Grid1::linspace(-6.0, 6.0, 121).unwrap();
        let q = gaussian_q(&x, &p, 1.0, 1.0, 0.0);
        let rho = marginal_rho(&q);
        assert!((x.integrate(&rho) - 1.0).abs() < 1e-6);
        for (i, xi) in x.points().iter().enumerate() {
            assert!((rho[i] - (-xi * xi / 2.0).exp() / (2.0 * PI).sqrt()).abs() < 1e-8);
        }
    }

    #[test]
    fn local_moments_of_shifted_gaussian() {
        let x = Grid1::linspace(-4.0, 4.0, 81).unwrap();
        let p = Grid1::linspace(-8.0, 10.0, 361).unwrap();
        let q = gaussian_q(&x, &p, 1.0, 0.7, 1.2);
        let m = local_moments(&q);
        for i in 0..81 {
            if m.mask[i] {
                assert!((m.mean_p[i] - 1.2).abs() < 1e-9);
                assert!((m.var_p[i] - 0.49).abs() < 1e-9);
            }
        }
        assert!(!m.mask[0]);
    }

    #[test]
    fn dispersion_residual_ground_state_and_classical() {
        let g = Grid1::linspace(-5.0, 5.0, 201).unwrap();
        let rho: Vec<f64> = g.points().iter().map(|x| (-x * x).exp() / PI.sqrt()).collect();
        let zeros = vec![0.0; 201];
        let m = LocalMoments::from_profiles(g, rho, zeros.clone(), vec![0.5; 201], SUPPORT_THRESHOLD).unwrap();
        let r = dispersion_identity_residual(&m, 0.5).unwrap();
        assert!(r.linf <= 1e-6, "{}", r.linf);
        let flat = LocalMoments::from_profiles(g, vec![0.1; 201], zeros, vec![0.3; 201], SUPPORT_THRESHOLD).unwrap();
        let r = dispersion_identity_residual(&flat, 0.5).unwrap();
        assert!(r.residual.iter().all(|v| (v - 0.3).abs() < 1e-12));
    }

    #[test]
    fn dispersion_mask_too_small() {
        let g = Grid1::linspace(-1.0, 1.0, 11).unwrap();
        let mut rho = vec![0.0; 11];
        rho[5] = 1.0;
        let m = LocalMoments::from_profiles(g, rho, vec![0.0; 11], vec![0.0; 11], SUPPORT_THRESHOLD).unwrap();
        assert!(matches!(dispersion_identity_residual(&m, 0.5), Err(Error::MaskTooSmall { .. })));
    }

    #[test]
    fn momentum_fluctuation_forms() {
        let g = Grid1::linspace(-10.0, 10.0, 2001).unwrap();
        let rho: Vec<f64> = g.points().iter().map(|x| (-x * x).exp() / PI.sqrt()).collect();
        let f = avg_momentum_fluctuation(&g, &rho, 0.5).unwrap();
        assert!((f.curvature_form - 0.5).abs() < 1e-10);
        assert!((f.gradient_form - f.curvature_form).abs() < 1e-10);
        let ring = Grid1::periodic(0.0, 1.0, 64).unwrap();
        let f = avg_momentum_fluctuation(&ring, &[1.0; 64], 0.5).unwrap();
        assert_eq!((f.curvature_form, f.gradient_form), (0.0, 0.0));
        let wide: Vec<f64> = g.points().iter().map(|x| (-x * x / 50.0).exp()).collect();
        assert!(matches!(avg_momentum_fluctuation(&g, &wide, 0.5), Err(Error::SurfaceTerm(_))));
    }

    #[test]
    fn components_split_at_gaps() {
        let m = [false, true, true, false, true, false];
        assert_eq!(mask_components(&m), vec![1..3, 4..5]);
    }
}
