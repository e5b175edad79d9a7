//! Variational ground states: minimize `<H>[rho]` over normalized densities
//! through `psi = sqrt(rho)`, whose stationarity condition is the
//! time-independent Schrödinger equation.

use serde::Serialize;

use crate::grid::{Boundary, Grid1};
use crate::params::{PhysicalParams, Potential};
use crate::phase_stats::{self, support_mask, SUPPORT_THRESHOLD};
use crate::schrod::WaveFunction;
use crate::wigner::EDGE_TOLERANCE;
use crate::{sum, Complex64, Error, Result};

/// `-(hbar^2/2m) D2 + V` with second-order differences and Dirichlet walls
/// one step outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteHamiltonian {
    grid: Grid1,
    diag: Vec<f64>,
    off: f64,
    v_min: f64,
}

impl DiscreteHamiltonian {
    pub fn new(grid: &Grid1, potential: &Potential, params: &PhysicalParams) -> Result<Self> {
        if grid.boundary() != Boundary::Box {
            return Err(Error::Invalid("the variational solver needs a box grid".into()));
        }
        if grid.len() < 3 {
            return Err(Error::MaskTooSmall { points: grid.len(), needed: 3 });
        }
        let unbounded = match *potential {
            Potential::Quartic { a, b } => b < 0.0 || (b == 0.0 && a < 0.0),
            _ => false,
        };
        let v = potential.sample(grid);
        if unbounded || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::UnboundedPotential);
        }
        let hbar = 2.0 * params.beta;
        let k = hbar * hbar / (2.0 * params.mass * grid.step() * grid.step());
        let v_min = v.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(DiscreteHamiltonian { grid: *grid, diag: v.iter().map(|v| v + 2.0 * k).collect(), off: -k, v_min })
    }

    pub fn grid(&self) -> &Grid1 {
        &self.grid
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn off_diagonal(&self) -> f64 {
        self.off
    }

    pub fn apply(&self, psi: &[f64]) -> Vec<f64> {
        let n = psi.len();
        (0..n)
            .map(|i| {
                let left = if i > 0 { psi[i - 1] } else { 0.0 };
                let right = if i + 1 < n { psi[i + 1] } else { 0.0 };
                self.diag[i] * psi[i] + self.off * (left + right)
            })
            .collect()
    }

    /// `<psi|H|psi> / <psi|psi>`.
    pub fn rayleigh(&self, psi: &[f64]) -> f64 {
        let h = self.apply(psi);
        sum::kahan(psi.iter().zip(&h).map(|(a, b)| a * b)) / sum::kahan(psi.iter().map(|a| a * a))
    }

    /// Solve `(1 + eta (H - v_min)) y = rhs` by the Thomas algorithm. The
    /// matrix is a diagonally dominant M-matrix, so no pivoting is needed and
    /// a nonnegative right-hand side gives a nonnegative solution.
    fn solve_shifted(&self, eta: f64, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let a = eta * self.off;
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let b0 = 1.0 + eta * (self.diag[0] - self.v_min);
        c[0] = a / b0;
        d[0] = rhs[0] / b0;
        for i in 1..n {
            let b = 1.0 + eta * (self.diag[i] - self.v_min) - a * c[i - 1];
            c[i] = a / b;
            d[i] = (rhs[i] - a * d[i - 1]) / b;
        }
        let mut y = vec![0.0; n];
        y[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            y[i] = d[i] - c[i] * y[i + 1];
        }
        y
    }
}

/// `||H psi - E psi||_2` with the grid-weighted norm.
pub fn eigen_residual(psi: &[f64], energy: f64, h: &DiscreteHamiltonian) -> f64 {
    let hp = h.apply(psi);
    (sum::kahan(hp.iter().zip(psi).map(|(a, b)| (a - energy * b).powi(2))) * h.grid.step()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarminOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Imaginary-time step of the implicit iteration.
    pub eta: f64,
}

impl Default for VarminOptions {
    fn default() -> Self {
        VarminOptions { tol: 1e-8, max_iterations: 100_000, eta: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationalResult {
    #[serde(skip)]
    pub psi: WaveFunction,
    /// Rayleigh quotient at convergence (the Lagrange multiplier).
    pub energy: f64,
    /// Rayleigh quotient after each iteration.
    pub history: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// Largest `|psi|` at the grid ends; above [`EDGE_TOLERANCE`] the walls
    /// confine the state.
    pub edge_amplitude: f64,
    pub wall_limited: bool,
}

/// Ground state by implicit imaginary-time iteration
/// `psi <- (1 + eta (H - V_min))^{-1} psi`, renormalized each step, starting
/// from the lowest box mode. Stops when the eigen-residual drops below `tol`.
pub fn minimize_ground_state(potential: &Potential, grid: &Grid1, params: &PhysicalParams, opts: &VarminOptions) -> Result<VariationalResult> {
    if !(opts.tol > 0.0 && opts.eta > 0.0) {
        return Err(Error::Invalid("tolerance and eta must be positive".into()));
    }
    let h = DiscreteHamiltonian::new(grid, potential, params)?;
    let n = grid.len();
    let dx = grid.step();
    let normalize = |v: &mut Vec<f64>| {
        let s = (sum::kahan(v.iter().map(|a| a * a)) * dx).sqrt();
        v.iter_mut().for_each(|a| *a /= s);
    };
    let mut psi: Vec<f64> = (0..n).map(|i| (std::f64::consts::PI * (i + 1) as f64 / (n + 1) as f64).sin()).collect();
    normalize(&mut psi);
    let mut history = Vec::new();
    let mut energy = h.rayleigh(&psi);
    let mut residual = eigen_residual(&psi, energy, &h);
    let mut iterations = 0;
    while residual > opts.tol {
        if iterations >= opts.max_iterations {
            return Err(Error::NoConvergence { iterations, residual });
        }
        psi = h.solve_shifted(opts.eta, &psi);
        normalize(&mut psi);
        energy = h.rayleigh(&psi);
        residual = eigen_residual(&psi, energy, &h);
        history.push(energy);
        iterations += 1;
    }
    let edge_amplitude = psi[0].abs().max(psi[n - 1].abs());
    // The Dirichlet sum and the grid quadrature differ only by the end weights.
    let wf = WaveFunction::new(*grid, psi.iter().map(|&a| Complex64::new(a, 0.0)).collect(), 0.0, params)?;
    Ok(VariationalResult {
        psi: wf,
        energy,
        history,
        residual,
        iterations,
        edge_amplitude,
        wall_limited: edge_amplitude > EDGE_TOLERANCE,
    })
}

/// The two equivalent forms of `<H>[rho]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyForms {
    /// `-(hbar^2/8m) int rho d^2 ln rho + int rho V`.
    pub direct: f64,
    /// `(hbar^2/8m) int rho (d ln rho)^2 + int rho V`.
    pub gradient: f64,
    pub potential: f64,
}

/// Evaluate the energy functional of a normalized density vanishing at the
/// grid ends.
pub fn energy_functional(grid: &Grid1, rho: &[f64], potential: &Potential, params: &PhysicalParams) -> Result<EnergyForms> {
    let fluct = phase_stats::avg_momentum_fluctuation(grid, rho, params.beta)?;
    let v = potential.sample(grid);
    let pot = grid.integrate(&rho.iter().zip(&v).map(|(r, v)| r * v).collect::<Vec<_>>());
    // hbar^2 / 8m = beta^2 / 2m and the fluctuation forms carry beta^2.
    let k = 1.0 / (2.0 * params.mass);
    Ok(EnergyForms { direct: k * fluct.curvature_form + pot, gradient: k * fluct.gradient_form + pot, potential: pot })
}

/// Pointwise kinetic integrand `-(hbar^2/8m) rho d^2 ln rho` on the support
/// mask, NaN elsewhere.
pub fn curvature_energy_density(grid: &Grid1, rho: &[f64], params: &PhysicalParams) -> Vec<f64> {
    let mask = support_mask(rho, SUPPORT_THRESHOLD);
    let curv = phase_stats::log_density_curvature(rho, &mask, grid.step());
    let k = -params.beta * params.beta / (2.0 * params.mass);
    rho.iter().zip(&curv).map(|(r, c)| k * r * c).collect()
}
