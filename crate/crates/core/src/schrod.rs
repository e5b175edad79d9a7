//! Reference Schrödinger solver (`hbar = 2 beta`) and the polar
//! decomposition into Madelung variables.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::deriv::{self, wavenumber};
use crate::grid::{Boundary, Grid1};
use crate::hydro::HydroState;
use crate::params::{PhysicalParams, Potential};
use crate::phase_stats::{mask_components, support_mask, SUPPORT_THRESHOLD};
use crate::{sum, Error, Result};

/// Fraction of the spectrum treated as the unresolved tail.
pub const TAIL_START: f64 = 0.8;
/// Largest norm fraction allowed in the tail.
pub const TAIL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    pub grid: Grid1,
    pub psi: Vec<Complex64>,
    pub t: f64,
    pub beta: f64,
    pub mass: f64,
}

impl WaveFunction {
    /// Build a wave function, rescaling it to unit norm.
    pub fn new(grid: Grid1, psi: Vec<Complex64>, t: f64, params: &PhysicalParams) -> Result<Self> {
        if psi.len() != grid.len() {
            return Err(Error::GridMismatch("wave function length differs from grid".into()));
        }
        if psi.iter().any(|z| !z.is_finite()) {
            return Err(Error::Invalid("wave function is not finite".into()));
        }
        let mut w = WaveFunction { grid, psi, t, beta: params.beta, mass: params.mass };
        let norm = w.norm();
        if !(norm > 0.0) {
            return Err(Error::Invalid("wave function vanishes".into()));
        }
        let s = norm.sqrt().recip();
        w.psi.iter_mut().for_each(|z| *z *= s);
        Ok(w)
    }

    /// Sample `f(x)` on the grid and normalize.
    pub fn from_fn(grid: Grid1, t: f64, params: &PhysicalParams, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let psi = grid.points().into_iter().map(f).collect();
        Self::new(grid, psi, t, params)
    }

    pub fn hbar(&self) -> f64 {
        2.0 * self.beta
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn norm(&self) -> f64 {
        self.grid.integrate(&self.density())
    }

    /// `<phi|psi>` with the grid quadrature.
    pub fn overlap(&self, other: &WaveFunction) -> Result<Complex64> {
        self.grid.require_same(&other.grid, "overlap of wave functions on different grids")?;
        let prod: Vec<Complex64> = other.psi.iter().zip(&self.psi).map(|(a, b)| a.conj() * b).collect();
        let re: Vec<f64> = prod.iter().map(|z| z.re).collect();
        let im: Vec<f64> = prod.iter().map(|z| z.im).collect();
        Ok(Complex64::new(self.grid.integrate(&re), self.grid.integrate(&im)))
    }

    /// `<H> = (hbar^2/2m) int |psi'|^2 + int V |psi|^2`, spectral derivative.
    pub fn energy(&self, potential: &Potential) -> f64 {
        let d = deriv::spectral_d1(&self.psi, &self.grid);
        let hb = self.hbar();
        let kin: Vec<f64> = d.iter().map(|z| z.norm_sqr()).collect();
        let v = potential.sample(&self.grid);
        let pot: Vec<f64> = self.psi.iter().zip(&v).map(|(z, v)| v * z.norm_sqr()).collect();
        hb * hb / (2.0 * self.mass) * self.grid.integrate(&kin) + self.grid.integrate(&pot)
    }

    /// Fraction of the norm above `TAIL_START` of the Nyquist wavenumber.
    pub fn spectral_tail(&self) -> f64 {
        let ext = extend(&self.psi, self.grid.boundary());
        let m = ext.len();
        let mut buf = ext;
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        let total = sum::kahan(buf.iter().map(|z| z.norm_sqr()));
        let cut = TAIL_START * (m / 2) as f64;
        let tail = sum::kahan(buf.iter().enumerate().filter(|(j, _)| wavenumber(*j, m).abs() > cut).map(|(_, z)| z.norm_sqr()));
        if total > 0.0 {
            tail / total
        } else {
            0.0
        }
    }

    pub fn check_resolved(&self) -> Result<()> {
        let tail = self.spectral_tail();
        if tail > TAIL_TOLERANCE {
            return Err(Error::Resolution(format!("spectral tail carries {tail:e} of the norm")));
        }
        Ok(())
    }
}

/// Periodic data is used as is; box data is extended oddly across the walls.
fn extend(psi: &[Complex64], boundary: Boundary) -> Vec<Complex64> {
    match boundary {
        Boundary::Periodic => psi.to_vec(),
        Boundary::Box => {
            let n = psi.len();
            let m = 2 * (n + 1);
            let mut ext = vec![Complex64::new(0.0, 0.0); m];
            for i in 0..n {
                ext[i + 1] = psi[i];
                ext[m - 1 - i] = -psi[i];
            }
            ext
        }
    }
}

/// Strang split-step propagator for a fixed grid, step and potential:
/// half potential kick, exact kinetic step in the Fourier basis, half kick.
pub struct SplitStep {
    grid: Grid1,
    dt: f64,
    half_kick: Vec<Complex64>,
    kinetic: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
}

impl SplitStep {
    pub fn new(grid: &Grid1, dt: f64, potential: &Potential, beta: f64, mass: f64) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::Invalid(format!("time step must be finite and nonzero, got {dt}")));
        }
        let hbar = 2.0 * beta;
        let v = potential.sample(grid);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::UnboundedPotential);
        }
        let half_kick = v.iter().map(|&v| Complex64::from_polar(1.0, -v * dt / (2.0 * hbar))).collect();
        let m = match grid.boundary() {
            Boundary::Periodic => grid.len(),
            Boundary::Box => 2 * (grid.len() + 1),
        };
        let dk = std::f64::consts::TAU / (m as f64 * grid.step());
        let kinetic = (0..m)
            .map(|j| {
                let k = wavenumber(j, m) * dk;
                Complex64::from_polar(1.0 / m as f64, -hbar * k * k * dt / (2.0 * mass))
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(SplitStep {
            grid: *grid,
            dt,
            half_kick,
            kinetic,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
            buf: vec![Complex64::new(0.0, 0.0); m],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advance `steps` steps in place.
    pub fn advance(&mut self, w: &mut WaveFunction, steps: usize) -> Result<()> {
        self.grid.require_same(&w.grid, "propagator built for a different grid")?;
        let n = w.psi.len();
        for _ in 0..steps {
            for (z, k) in w.psi.iter_mut().zip(&self.half_kick) {
                *z *= k;
            }
            match self.grid.boundary() {
                Boundary::Periodic => {
                    self.buf.copy_from_slice(&w.psi);
                    self.kinetic_step();
                    w.psi.copy_from_slice(&self.buf);
                }
                Boundary::Box => {
                    let m = self.buf.len();
                    self.buf[0] = Complex64::new(0.0, 0.0);
                    self.buf[n + 1] = Complex64::new(0.0, 0.0);
                    for i in 0..n {
                        self.buf[i + 1] = w.psi[i];
                        self.buf[m - 1 - i] = -w.psi[i];
                    }
                    self.kinetic_step();
                    w.psi.copy_from_slice(&self.buf[1..=n]);
                }
            }
            for (z, k) in w.psi.iter_mut().zip(&self.half_kick) {
                *z *= k;
            }
            w.t += self.dt;
        }
        Ok(())
    }

    fn kinetic_step(&mut self) {
        self.fwd.process(&mut self.buf);
        for (z, k) in self.buf.iter_mut().zip(&self.kinetic) {
            *z *= k;
        }
        self.inv.process(&mut self.buf);
    }
}

/// One split-step of length `dt`. The input must be spectrally resolved.
pub fn step_schrodinger(w: &WaveFunction, dt: f64, potential: &Potential) -> Result<WaveFunction> {
    w.check_resolved()?;
    let mut out = w.clone();
    SplitStep::new(&w.grid, dt, potential, w.beta, w.mass)?.advance(&mut out, 1)?;
    Ok(out)
}

/// Propagate to `t_final` with steps no longer than `dt_max`; returns the
/// state at the end and the step actually used.
pub fn propagate(w: &WaveFunction, t_final: f64, dt_max: f64, potential: &Potential) -> Result<(WaveFunction, f64)> {
    w.check_resolved()?;
    let span = t_final - w.t;
    if !(span >= 0.0 && dt_max > 0.0) {
        return Err(Error::Invalid("propagation needs t_final >= t and dt > 0".into()));
    }
    let steps = (span / dt_max).ceil().max(1.0) as usize;
    let dt = span / steps as f64;
    let mut out = w.clone();
    if span > 0.0 {
        SplitStep::new(&w.grid, dt, potential, w.beta, w.mass)?.advance(&mut out, steps)?;
    }
    out.t = t_final;
    Ok((out, dt))
}

/// Madelung variables of a wave function plus the support bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarDecomposition {
    #[serde(skip)]
    pub state: HydroState,
    /// Support components `[start, end)`; each carries its own phase anchor.
    pub components: Vec<(usize, usize)>,
    /// True when nodes split the support, so relative phases between
    /// components are not determined by unwrapping.
    pub disconnected: bool,
}

/// `rho = |psi|^2` and the phase unwrapped along the grid. Each support
/// component is anchored at its point nearest the grid center with the
/// principal value there; unwrapping continues from the components into the
/// tails.
pub fn polar_decompose(w: &WaveFunction) -> Result<PolarDecomposition> {
    let rho = w.density();
    let mask = support_mask(&rho, SUPPORT_THRESHOLD);
    let comps = mask_components(&mask);
    if comps.is_empty() {
        return Err(Error::MaskTooSmall { points: 0, needed: 1 });
    }
    let n = rho.len();
    let arg: Vec<f64> = w.psi.iter().map(|z| z.arg()).collect();
    let mut s = vec![0.0; n];
    let center = w.grid.center_index();
    for (ci, c) in comps.iter().enumerate() {
        let anchor = c.clone().min_by_key(|&i| i.abs_diff(center)).unwrap();
        s[anchor] = arg[anchor];
        // Each component owns the points up to the midpoint of the gaps on either side.
        let lo = if ci == 0 { 0 } else { (comps[ci - 1].end + c.start) / 2 };
        let hi = if ci + 1 == comps.len() { n } else { (c.end + comps[ci + 1].start) / 2 };
        for i in anchor + 1..hi {
            s[i] = s[i - 1] + crate::hydro::wrap_phase(arg[i] - arg[i - 1]);
        }
        for i in (lo..anchor).rev() {
            s[i] = s[i + 1] + crate::hydro::wrap_phase(arg[i] - arg[i + 1]);
        }
    }
    let state = HydroState { grid: w.grid, rho, s, t: w.t };
    Ok(PolarDecomposition {
        state,
        disconnected: comps.len() > 1,
        components: comps.into_iter().map(|r| (r.start, r.end)).collect(),
    })
}

/// `psi = sqrt(rho) exp(i S)` for a node-free state.
pub fn wavefunction_from_hydro(h: &HydroState, params: &PhysicalParams) -> Result<WaveFunction> {
    let comps = mask_components(&support_mask(&h.rho, SUPPORT_THRESHOLD));
    if comps.len() > 1 {
        return Err(Error::DisconnectedSupport(comps.len()));
    }
    let psi = h.rho.iter().zip(&h.s).map(|(&r, &s)| Complex64::from_polar(r.max(0.0).sqrt(), s)).collect();
    WaveFunction::new(h.grid, psi, h.t, params)
}

/// `psi'/psi` on the support mask, NaN elsewhere.
fn log_derivative(w: &WaveFunction) -> Vec<Complex64> {
    let d = deriv::spectral_d1(&w.psi, &w.grid);
    let mask = support_mask(&w.density(), SUPPORT_THRESHOLD);
    d.iter()
        .zip(&w.psi)
        .zip(&mask)
        .map(|((d, z), &m)| if m { d / z } else { Complex64::new(f64::NAN, f64::NAN) })
        .collect()
}

/// Flow velocity `v = (2 beta/m) Im(psi'/psi)` on the mask.
pub fn flow_velocity(w: &WaveFunction) -> Vec<f64> {
    let k = 2.0 * w.beta / w.mass;
    log_derivative(w).iter().map(|l| k * l.im).collect()
}

/// Stochastic velocity `u = (beta/m) d ln rho/dx = (2 beta/m) Re(psi'/psi)` on the mask.
pub fn stochastic_velocity(w: &WaveFunction) -> Vec<f64> {
    let k = 2.0 * w.beta / w.mass;
    log_derivative(w).iter().map(|l| k * l.re).collect()
}

/// `|-i hbar psi' - m (v - i u) psi|` on the mask, NaN elsewhere.
pub fn momentum_identity_residual(w: &WaveFunction) -> Vec<f64> {
    let d = deriv::spectral_d1(&w.psi, &w.grid);
    let v = flow_velocity(w);
    let u = stochastic_velocity(w);
    let i = Complex64::new(0.0, 1.0);
    (0..w.psi.len())
        .map(|k| {
            if !v[k].is_finite() {
                return f64::NAN;
            }
            let lhs = -i * w.hbar() * d[k];
            let rhs = w.mass * Complex64::new(v[k], -u[k]) * w.psi[k];
            (lhs - rhs).norm()
        })
        .collect()
}

/// `|phi(p)|^2` with `phi(p) = (2 pi hbar)^{-1/2} int psi e^{-i p x/hbar} dx`
/// by direct quadrature on the position grid.
pub fn momentum_density(w: &WaveFunction, p_grid: &Grid1) -> Vec<f64> {
    let hbar = w.hbar();
    let xs = w.grid.points();
    let norm = (std::f64::consts::TAU * hbar).sqrt().recip();
    p_grid
        .points()
        .iter()
        .map(|&p| {
            let re: Vec<f64> = xs.iter().zip(&w.psi).map(|(&x, z)| (z * Complex64::from_polar(1.0, -p * x / hbar)).re).collect();
            let im: Vec<f64> = xs.iter().zip(&w.psi).map(|(&x, z)| (z * Complex64::from_polar(1.0, -p * x / hbar)).im).collect();
            let phi = Complex64::new(w.grid.integrate(&re), w.grid.integrate(&im)) * norm;
            phi.norm_sqr()
        })
        .collect()
}
