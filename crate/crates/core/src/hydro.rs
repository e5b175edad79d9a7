//! Madelung hydrodynamics: continuity plus the quantum Hamilton-Jacobi
//! equation for `(rho, S)` with `psi = sqrt(rho) exp(i S)` and
//! `v = (2 beta / m) dS/dx`.

use serde::Serialize;

use crate::deriv;
use crate::grid::{Boundary, Grid1};
use crate::params::{PhysicalParams, Potential};
use crate::phase_stats::{mask_components, support_mask, SUPPORT_THRESHOLD};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HydroState {
    pub grid: Grid1,
    pub rho: Vec<f64>,
    /// Phase of the wave function (dimensionless).
    pub s: Vec<f64>,
    pub t: f64,
}

impl HydroState {
    /// Build a state, rescaling `rho` to unit mass.
    pub fn new(grid: Grid1, rho: Vec<f64>, s: Vec<f64>, t: f64) -> Result<Self> {
        if rho.len() != grid.len() || s.len() != grid.len() {
            return Err(Error::GridMismatch("density/phase length differs from grid".into()));
        }
        if let Some(i) = rho.iter().position(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::Invalid(format!("density is negative or not finite at index {i}")));
        }
        let mass = grid.integrate(&rho);
        if !(mass > 0.0) {
            return Err(Error::Invalid("density has zero mass".into()));
        }
        let rho = rho.into_iter().map(|r| r / mass).collect();
        Ok(HydroState { grid, rho, s, t })
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.rho)
    }

    /// Flow velocity on the default support mask (NaN outside).
    pub fn velocity(&self, params: &PhysicalParams) -> Vec<f64> {
        let mask = support_mask(&self.rho, SUPPORT_THRESHOLD);
        let ds = masked_d1(&self.s, &mask, &self.grid);
        ds.into_iter().map(|d| 2.0 * params.beta / params.mass * d).collect()
    }
}

/// First derivative of `f` on each mask component (NaN outside). A mask that
/// covers a whole periodic grid is differentiated periodically.
pub fn masked_d1(f: &[f64], mask: &[bool], grid: &Grid1) -> Vec<f64> {
    masked_apply(f, mask, grid, deriv::d1)
}

/// Second derivative of `f` on each mask component (NaN outside).
pub fn masked_d2(f: &[f64], mask: &[bool], grid: &Grid1) -> Vec<f64> {
    masked_apply(f, mask, grid, deriv::d2)
}

fn masked_apply(f: &[f64], mask: &[bool], grid: &Grid1, op: fn(&[f64], f64, Boundary) -> Vec<f64>) -> Vec<f64> {
    let n = f.len();
    let h = grid.step();
    if grid.boundary() == Boundary::Periodic && mask.iter().all(|&m| m) {
        return op(f, h, Boundary::Periodic);
    }
    let mut out = vec![f64::NAN; n];
    for c in mask_components(mask) {
        if c.len() < 3 {
            continue;
        }
        out[c.clone()].copy_from_slice(&op(&f[c], h, Boundary::Box));
    }
    out
}

/// `(1/sqrt(rho)) d^2 sqrt(rho)/dx^2` from derivatives of `ln rho`.
fn sqrt_curvature(l1: f64, l2: f64) -> f64 {
    0.5 * l2 + 0.25 * l1 * l1
}

/// Quantum potential `-(2 beta^2/m) (1/sqrt(rho)) d^2 sqrt(rho)/dx^2` on the
/// support mask `rho > threshold * max(rho)`, NaN elsewhere.
pub fn quantum_potential(grid: &Grid1, rho: &[f64], beta: f64, mass: f64) -> Result<Vec<f64>> {
    quantum_potential_with(grid, rho, beta, mass, SUPPORT_THRESHOLD)
}

pub fn quantum_potential_with(grid: &Grid1, rho: &[f64], beta: f64, mass: f64, threshold: f64) -> Result<Vec<f64>> {
    if rho.len() != grid.len() {
        return Err(Error::GridMismatch("density length differs from grid".into()));
    }
    let mask = support_mask(rho, threshold);
    let points = mask.iter().filter(|&&m| m).count();
    if points < 3 {
        return Err(Error::MaskTooSmall { points, needed: 3 });
    }
    let ln: Vec<f64> = rho.iter().map(|&r| if r > 0.0 { r.ln() } else { 0.0 }).collect();
    let l1 = masked_d1(&ln, &mask, grid);
    let l2 = masked_d2(&ln, &mask, grid);
    let k = -2.0 * beta * beta / mass;
    Ok(l1.iter().zip(&l2).map(|(&a, &b)| k * sqrt_curvature(a, b)).collect())
}

/// Quantum potential felt by particle 1 when the pair density factorizes as
/// `rho1(x1) rho2(x2) rho12(x1, x2)`.
///
/// `rho12` is row-major with `x1` as the slow index. Entries where either
/// marginal is outside its support mask are NaN.
pub fn quantum_potential_two_particle(
    x1: &Grid1,
    x2: &Grid1,
    rho1: &[f64],
    rho2: &[f64],
    rho12: &[f64],
    beta: f64,
    mass: f64,
) -> Result<Vec<f64>> {
    let (n1, n2) = (x1.len(), x2.len());
    if rho1.len() != n1 || rho2.len() != n2 || rho12.len() != n1 * n2 {
        return Err(Error::GridMismatch("pair density shapes differ from grids".into()));
    }
    if let Some(i) = rho12.iter().position(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::NonPositiveDensity(i));
    }
    let mask1 = support_mask(rho1, SUPPORT_THRESHOLD);
    let mask2 = support_mask(rho2, SUPPORT_THRESHOLD);
    let ln1: Vec<f64> = rho1.iter().map(|&r| if r > 0.0 { r.ln() } else { 0.0 }).collect();
    let a1 = masked_d1(&ln1, &mask1, x1);
    let a2 = masked_d2(&ln1, &mask1, x1);
    let h = x1.step();
    let k = -2.0 * beta * beta / mass;
    let mut out = vec![f64::NAN; n1 * n2];
    let mut column = vec![0.0; n1];
    for j in 0..n2 {
        if !mask2[j] {
            continue;
        }
        for i in 0..n1 {
            column[i] = rho12[i * n2 + j].ln();
        }
        let c1 = deriv::d1(&column, h, x1.boundary());
        let c2 = deriv::d2(&column, h, x1.boundary());
        for i in 0..n1 {
            if mask1[i] {
                let single = sqrt_curvature(a1[i], a2[i]);
                let pair = sqrt_curvature(c1[i], c2[i]);
                out[i * n2 + j] = k * (single + pair + 0.5 * a1[i] * c1[i]);
            }
        }
    }
    Ok(out)
}

/// Controls for the explicit Madelung integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HydroOptions {
    /// Relative density below which the Madelung terms are not evaluated.
    pub mask_threshold: f64,
    /// Bound on `max|v| dt / dx`.
    pub advective_cfl: f64,
    /// Bound on `(2 beta/m) dt / dx^2`.
    pub dispersive_cfl: f64,
}

impl Default for HydroOptions {
    fn default() -> Self {
        HydroOptions { mask_threshold: 1e-8, advective_cfl: 0.5, dispersive_cfl: 0.5 }
    }
}

/// Largest step allowed by the dispersive bound.
pub fn dispersive_step_limit(grid: &Grid1, params: &PhysicalParams, opts: &HydroOptions) -> f64 {
    opts.dispersive_cfl * grid.step() * grid.step() * params.mass / (2.0 * params.beta)
}

/// Advance `(rho, S)` by one RK4 step of
/// `rho_t = -(v rho)_x` and `2 beta S_t = -[(2 beta^2/m) S_x^2 + V + Q]`.
pub fn step_madelung(h: &HydroState, dt: f64, potential: &Potential, params: &PhysicalParams) -> Result<HydroState> {
    step_madelung_with(h, dt, potential, params, &HydroOptions::default())
}

pub fn step_madelung_with(
    h: &HydroState,
    dt: f64,
    potential: &Potential,
    params: &PhysicalParams,
    opts: &HydroOptions,
) -> Result<HydroState> {
    let limit = dispersive_step_limit(&h.grid, params, opts);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl(format!("dispersive bound requires 0 < dt <= {limit:e}, got {dt:e}")));
    }
    let v = potential.sample(&h.grid);
    let rhs = Rhs { grid: &h.grid, v: &v, params, opts };
    let n = h.rho.len();

    let k1 = rhs.eval(&h.rho, &h.s, Some(dt))?;
    let (r2, s2) = axpy(&h.rho, &h.s, &k1, 0.5 * dt);
    let k2 = rhs.eval(&r2, &s2, None)?;
    let (r3, s3) = axpy(&h.rho, &h.s, &k2, 0.5 * dt);
    let k3 = rhs.eval(&r3, &s3, None)?;
    let (r4, s4) = axpy(&h.rho, &h.s, &k3, dt);
    let k4 = rhs.eval(&r4, &s4, None)?;

    let mut rho = vec![0.0; n];
    let mut s = vec![0.0; n];
    for i in 0..n {
        rho[i] = h.rho[i] + dt / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]);
        s[i] = h.s[i] + dt / 6.0 * (k1.1[i] + 2.0 * k2.1[i] + 2.0 * k3.1[i] + k4.1[i]);
        // Truncation error can push the far tail through zero; clamp it.
        if rho[i] < 0.0 {
            rho[i] = 0.0;
        }
    }
    let comps = checked_support(&rho, &h.grid, opts.mask_threshold)?;
    extrapolate_phase(&mut s, comps, &h.grid);
    Ok(HydroState { grid: h.grid, rho, s, t: h.t + dt })
}

type Rates = (Vec<f64>, Vec<f64>);

fn axpy(rho: &[f64], s: &[f64], k: &Rates, a: f64) -> (Vec<f64>, Vec<f64>) {
    (
        rho.iter().zip(&k.0).map(|(r, d)| (r + a * d).max(0.0)).collect(),
        s.iter().zip(&k.1).map(|(x, d)| x + a * d).collect(),
    )
}

struct Rhs<'a> {
    grid: &'a Grid1,
    v: &'a [f64],
    params: &'a PhysicalParams,
    opts: &'a HydroOptions,
}

impl Rhs<'_> {
    /// Time derivatives of `(rho, S)`; checks the advective bound when `dt` is given.
    fn eval(&self, rho: &[f64], s: &[f64], dt: Option<f64>) -> Result<Rates> {
        let (beta, m) = (self.params.beta, self.params.mass);
        let n = rho.len();
        let g = self.grid;
        let c = checked_support(rho, g, self.opts.mask_threshold)?;
        let whole = c.len() == n;
        let bnd = if whole { g.boundary() } else { Boundary::Box };
        let ln: Vec<f64> = rho[c.clone()].iter().map(|r| r.ln()).collect();
        let l1 = deriv::d1(&ln, g.step(), bnd);
        let l2 = deriv::d2(&ln, g.step(), bnd);
        let s1 = deriv::d1(&s[c.clone()], g.step(), bnd);

        let mut vel = vec![0.0; n];
        let mut s_t = vec![0.0; n];
        let kq = -2.0 * beta * beta / m;
        for (k, i) in c.clone().enumerate() {
            vel[i] = 2.0 * beta / m * s1[k];
            let q = kq * sqrt_curvature(l1[k], l2[k]);
            s_t[i] = -(2.0 * beta * beta / m * s1[k] * s1[k] + self.v[i] + q) / (2.0 * beta);
        }
        if !whole {
            // Outside the support the phase is carried along linearly from the edges.
            let (a, b) = (c.start, c.end - 1);
            let slope_lo = (s_t[a + 1] - s_t[a]) / g.step();
            let slope_hi = (s_t[b] - s_t[b - 1]) / g.step();
            for i in 0..a {
                vel[i] = vel[a];
                s_t[i] = s_t[a] - slope_lo * (a - i) as f64 * g.step();
            }
            for i in b + 1..n {
                vel[i] = vel[b];
                s_t[i] = s_t[b] + slope_hi * (i - b) as f64 * g.step();
            }
        }
        if let Some(dt) = dt {
            let vmax = vel[c].iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if vmax * dt > self.opts.advective_cfl * g.step() {
                return Err(Error::Cfl(format!("max|v| dt / dx = {:.3} exceeds {}", vmax * dt / g.step(), self.opts.advective_cfl)));
            }
        }
        let flux: Vec<f64> = vel.iter().zip(rho).map(|(v, r)| v * r).collect();
        Ok((flux_divergence(&flux, g).into_iter().map(|d| -d).collect(), s_t))
    }
}

/// Conservative divergence `(F_{i+1/2} - F_{i-1/2}) / dx` with fourth-order
/// interface values; box walls carry no flux.
fn flux_divergence(f: &[f64], g: &Grid1) -> Vec<f64> {
    let n = f.len();
    let h = g.step();
    let mut face = vec![0.0; n + 1];
    match g.boundary() {
        Boundary::Periodic => {
            let at = |i: isize| f[i.rem_euclid(n as isize) as usize];
            for (k, fc) in face.iter_mut().enumerate().take(n + 1).skip(1) {
                let i = k as isize - 1;
                *fc = (-at(i - 1) + 7.0 * at(i) + 7.0 * at(i + 1) - at(i + 2)) / 12.0;
            }
            face[0] = face[n];
        }
        Boundary::Box => {
            for (k, fc) in face.iter_mut().enumerate().take(n).skip(1) {
                let i = k - 1;
                *fc = if i >= 1 && i + 2 < n {
                    (-f[i - 1] + 7.0 * f[i] + 7.0 * f[i + 1] - f[i + 2]) / 12.0
                } else {
                    0.5 * (f[i] + f[i + 1])
                };
            }
        }
    }
    (0..n).map(|i| (face[i + 1] - face[i]) / h).collect()
}

/// The single support component, or a node/too-small error.
fn checked_support(rho: &[f64], g: &Grid1, threshold: f64) -> Result<std::ops::Range<usize>> {
    let mask = support_mask(rho, threshold);
    let comps = mask_components(&mask);
    let periodic_full = g.boundary() == Boundary::Periodic && comps.len() == 2 && comps[0].start == 0 && comps[1].end == rho.len();
    if comps.len() > 1 && !periodic_full {
        let gap = comps[0].end;
        let gap_end = comps[1].start;
        let imin = (gap..gap_end).min_by(|&a, &b| rho[a].total_cmp(&rho[b])).unwrap_or(gap);
        return Err(Error::NodeFormation { x: g.x(imin) });
    }
    if periodic_full {
        return Err(Error::Invalid("periodic support wrapping across the seam is not supported".into()));
    }
    let c = comps.into_iter().next().unwrap_or(0..0);
    if c.len() < 5 {
        return Err(Error::MaskTooSmall { points: c.len(), needed: 5 });
    }
    // A node between grid points shows up as a deep interior minimum.
    let peak = rho[c.clone()].iter().cloned().fold(0.0f64, f64::max);
    for i in c.start + 1..c.end - 1 {
        if rho[i] < rho[i - 1] && rho[i] <= rho[i + 1] && rho[i] < SUPPORT_THRESHOLD * peak {
            return Err(Error::NodeFormation { x: g.x(i) });
        }
    }
    Ok(c)
}

fn extrapolate_phase(s: &mut [f64], c: std::ops::Range<usize>, g: &Grid1) {
    let n = s.len();
    if c.len() == n {
        return;
    }
    let d = deriv::d1(&s[c.clone()], g.step(), Boundary::Box);
    let (a, b) = (c.start, c.end - 1);
    let (slo, shi) = (d[0], d[d.len() - 1]);
    for i in 0..a {
        s[i] = s[a] - slo * (a - i) as f64 * g.step();
    }
    for i in b + 1..n {
        s[i] = s[b] + shi * (i - b) as f64 * g.step();
    }
}

/// Hamilton-Jacobi residual at the middle slice of each consecutive triple.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HjResidual {
    pub t: f64,
    /// `2 beta S_t + (2 beta^2/m) S_x^2 + Q + V` on the mask, NaN elsewhere.
    pub residual: Vec<f64>,
    pub linf: f64,
}

/// Residual of the quantum Hamilton-Jacobi equation over a time series with
/// uniform spacing. Phase differences in time are wrapped into `(-pi, pi]`,
/// so the series must resolve the phase rotation.
pub fn hamilton_jacobi_residual(series: &[HydroState], potential: &Potential, params: &PhysicalParams) -> Result<Vec<HjResidual>> {
    if series.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: series.len() });
    }
    let g = series[0].grid;
    for h in series {
        g.require_same(&h.grid, "hydro time series uses different grids")?;
    }
    let dt = series[1].t - series[0].t;
    if !(dt > 0.0) || series.windows(2).any(|w| ((w[1].t - w[0].t) - dt).abs() > 1e-9 * dt.max(1.0)) {
        return Err(Error::Invalid("hydro time series must have uniform positive spacing".into()));
    }
    let (beta, m) = (params.beta, params.mass);
    let v = potential.sample(&g);
    let mut out = Vec::with_capacity(series.len() - 2);
    for w in series.windows(3) {
        let mid = &w[1];
        let mask = support_mask(&mid.rho, SUPPORT_THRESHOLD);
        let q = quantum_potential(&g, &mid.rho, beta, m)?;
        let s1 = masked_d1(&mid.s, &mask, &g);
        let residual: Vec<f64> = (0..g.len())
            .map(|i| {
                if !(mask[i] && q[i].is_finite() && s1[i].is_finite()) {
                    return f64::NAN;
                }
                let s_t = wrap_phase(w[2].s[i] - w[0].s[i]) / (2.0 * dt);
                2.0 * beta * s_t + 2.0 * beta * beta / m * s1[i] * s1[i] + q[i] + v[i]
            })
            .collect();
        let linf = residual.iter().filter(|r| r.is_finite()).fold(0.0f64, |a, r| a.max(r.abs()));
        out.push(HjResidual { t: mid.t, residual, linf });
    }
    Ok(out)
}

/// Map a phase difference into `(-pi, pi]`.
pub fn wrap_phase(d: f64) -> f64 {
    use std::f64::consts::PI;
    let w = d.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}
