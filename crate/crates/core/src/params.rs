//! Physical parameters, unit presets and external potentials.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid1;

/// Parameters shared by every model in the crate.
///
/// Simulations run in dimensionless units. The charge never appears on its
/// own: the particle feels `coupling * E(t)`, and `coupling` is folded into
/// the normalization of the field spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub mass: f64,
    pub hbar: f64,
    /// Action scale of the momentum dispersion; equals `hbar / 2` once calibrated.
    pub beta: f64,
    /// Radiation-reaction time `tau`.
    pub damping_time: f64,
    /// Field coupling `kappa` (plays the role of the charge).
    pub coupling: f64,
    pub light_speed: f64,
    /// Reference oscillator frequency used to place the field band.
    pub omega0: f64,
    /// When set, `beta` is pinned to `hbar / 2`.
    #[serde(default = "yes")]
    pub calibrated: bool,
}

fn yes() -> bool {
    true
}

/// Named parameter presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    DimensionlessHo,
    ElectronLike,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dimensionless-ho" => Ok(Preset::DimensionlessHo),
            "electron-like" => Ok(Preset::ElectronLike),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

/// Gaussian-unit constants used by the electron-like preset.
pub mod cgs {
    pub const ELECTRON_MASS: f64 = 9.109_383_7015e-28;
    pub const ELEMENTARY_CHARGE: f64 = 4.803_204_712_570_263e-10;
    pub const LIGHT_SPEED: f64 = 2.997_924_58e10;
    pub const HBAR: f64 = 1.054_571_817e-27;
    /// Atomic unit of angular frequency, `E_h / hbar`.
    pub const ATOMIC_FREQUENCY: f64 = 4.134_137_333_518e16;
}

/// Coupling for which the field spectrum drives a weakly damped oscillator
/// to mean energy `hbar * omega0 / 2`: `kappa^2 = 3 m c^3 tau / 2`, i.e. the
/// squared charge expressed through the radiation-reaction time.
pub fn calibrated_coupling(mass: f64, light_speed: f64, damping_time: f64) -> f64 {
    (1.5 * mass * light_speed.powi(3) * damping_time).sqrt()
}

/// Look up a preset by name.
pub fn default_params(preset: &str) -> Result<PhysicalParams> {
    let p = match preset.parse::<Preset>()? {
        Preset::DimensionlessHo => PhysicalParams::dimensionless_ho(1e-3),
        Preset::ElectronLike => {
            let tau = 2.0 * cgs::ELEMENTARY_CHARGE.powi(2)
                / (3.0 * cgs::ELECTRON_MASS * cgs::LIGHT_SPEED.powi(3));
            PhysicalParams {
                mass: cgs::ELECTRON_MASS,
                hbar: cgs::HBAR,
                beta: cgs::HBAR / 2.0,
                damping_time: tau,
                coupling: cgs::ELEMENTARY_CHARGE,
                light_speed: cgs::LIGHT_SPEED,
                omega0: cgs::ATOMIC_FREQUENCY,
                calibrated: true,
            }
        }
    };
    p.validate()?;
    Ok(p)
}

impl PhysicalParams {
    /// `m = hbar = omega0 = c = 1`, `beta = 1/2`, calibrated coupling.
    pub fn dimensionless_ho(damping_time: f64) -> Self {
        Self {
            mass: 1.0,
            hbar: 1.0,
            beta: 0.5,
            damping_time,
            coupling: calibrated_coupling(1.0, 1.0, damping_time),
            light_speed: 1.0,
            omega0: 1.0,
            calibrated: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        let finite = [self.mass, self.hbar, self.beta, self.damping_time, self.coupling, self.light_speed, self.omega0];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite");
        }
        if self.mass <= 0.0 {
            return bad("mass must be positive");
        }
        if self.hbar <= 0.0 {
            return bad("hbar must be positive");
        }
        if self.damping_time < 0.0 {
            return bad("damping time must be non-negative");
        }
        if self.coupling < 0.0 {
            return bad("coupling must be non-negative");
        }
        if self.light_speed <= 0.0 {
            return bad("light speed must be positive");
        }
        if self.omega0 <= 0.0 {
            return bad("omega0 must be positive");
        }
        if self.beta < 0.0 {
            return bad("beta must be non-negative");
        }
        if self.calibrated && (self.beta - 0.5 * self.hbar).abs() > 1e-12 * self.hbar {
            return bad("calibrated parameters require beta = hbar/2");
        }
        Ok(())
    }

    /// Return a copy with `beta` set; clears the calibration flag when it no
    /// longer matches `hbar / 2`.
    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self.calibrated = (beta - 0.5 * self.hbar).abs() <= 1e-12 * self.hbar;
        self
    }

    /// Relaxation rate `tau * omega0^2` of the harmonic oscillator.
    pub fn relaxation_rate(&self) -> f64 {
        self.damping_time * self.omega0 * self.omega0
    }
}

/// External potential with analytic or spline-derived force.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Free,
    /// `V = m omega^2 x^2 / 2`.
    Harmonic { omega: f64, mass: f64 },
    /// `V = a x^2 + b x^4`.
    Quartic { a: f64, b: f64 },
    Tabulated(Spline),
}

/// Values of `V`, `f = -V'` and `f' = df/dx` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceEval {
    pub v: f64,
    pub f: f64,
    pub df: f64,
}

impl Potential {
    pub fn harmonic(mass: f64, omega: f64) -> Self {
        Potential::Harmonic { omega, mass }
    }

    pub fn quartic(a: f64, b: f64) -> Self {
        Potential::Quartic { a, b }
    }

    pub fn tabulated(grid: Grid1, values: Vec<f64>) -> Result<Self> {
        Spline::natural(grid, values).map(Potential::Tabulated)
    }

    /// Evaluate `(V, f, f')`.
    pub fn eval(&self, x: f64) -> Result<ForceEval> {
        if !x.is_finite() {
            return Err(Error::Invalid(format!("non-finite position {x}")));
        }
        Ok(match self {
            Potential::Tabulated(s) => s.eval(x)?,
            _ => self.eval_analytic(x),
        })
    }

    #[inline]
    fn eval_analytic(&self, x: f64) -> ForceEval {
        match *self {
            Potential::Free => ForceEval { v: 0.0, f: 0.0, df: 0.0 },
            Potential::Harmonic { omega, mass } => {
                let k = mass * omega * omega;
                ForceEval { v: 0.5 * k * x * x, f: -k * x, df: -k }
            }
            Potential::Quartic { a, b } => {
                let x2 = x * x;
                ForceEval { v: a * x2 + b * x2 * x2, f: -2.0 * a * x - 4.0 * b * x2 * x, df: -2.0 * a - 12.0 * b * x2 }
            }
            Potential::Tabulated(_) => unreachable!(),
        }
    }

    /// Potential energy only; tabulated potentials clamp to their range.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Potential::Tabulated(s) => s.eval_clamped(x).v,
            _ => self.eval_analytic(x).v,
        }
    }

    /// Force `f(x)` and its derivative; tabulated potentials clamp to their range.
    #[inline]
    pub fn force(&self, x: f64) -> (f64, f64) {
        let e = match self {
            Potential::Tabulated(s) => s.eval_clamped(x),
            _ => self.eval_analytic(x),
        };
        (e.f, e.df)
    }

    /// Potential sampled on a grid.
    pub fn sample(&self, grid: &Grid1) -> Vec<f64> {
        grid.points().iter().map(|&x| self.value(x)).collect()
    }
}

/// Natural cubic spline through uniformly spaced samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Spline {
    grid: Grid1,
    values: Vec<f64>,
    curvature: Vec<f64>,
}

impl Spline {
    pub fn natural(grid: Grid1, values: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        if values.len() != n {
            return Err(Error::GridMismatch(format!("{} values for {} grid points", values.len(), n)));
        }
        if n < 3 {
            return Err(Error::Invalid("spline needs at least 3 points".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("tabulated potential not finite at index {i}")));
        }
        let h = grid.step();
        // Tridiagonal system for interior second derivatives (Thomas algorithm).
        let m = n - 2;
        let mut rhs: Vec<f64> = (1..n - 1)
            .map(|i| 6.0 * (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h))
            .collect();
        let mut diag = vec![4.0; m];
        for i in 1..m {
            let w = 1.0 / diag[i - 1];
            diag[i] -= w;
            rhs[i] -= w * rhs[i - 1];
        }
        let mut inner = vec![0.0; m];
        for i in (0..m).rev() {
            let next = if i + 1 < m { inner[i + 1] } else { 0.0 };
            inner[i] = (rhs[i] - next) / diag[i];
        }
        let mut curvature = vec![0.0; n];
        curvature[1..n - 1].copy_from_slice(&inner);
        Ok(Self { grid, values, curvature })
    }

    pub fn eval(&self, x: f64) -> Result<ForceEval> {
        let (lo, hi) = (self.grid.start(), self.grid.end());
        if x < lo - 1e-12 * (1.0 + lo.abs()) || x > hi + 1e-12 * (1.0 + hi.abs()) {
            return Err(Error::OutOfRange { x, lo, hi });
        }
        Ok(self.eval_clamped(x))
    }

    fn eval_clamped(&self, x: f64) -> ForceEval {
        let h = self.grid.step();
        let n = self.grid.len();
        let x = x.clamp(self.grid.start(), self.grid.end());
        let i = (((x - self.grid.start()) / h).floor() as usize).min(n - 2);
        let a = (self.grid.x(i + 1) - x) / h;
        let b = 1.0 - a;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.curvature[i], self.curvature[i + 1]);
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let dv = (y1 - y0) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        let d2v = a * m0 + b * m1;
        ForceEval { v, f: -dv, df: -d2v }
    }
}
