//! Trajectory ensembles driven by zero-point field realizations, and the
//! energy-balance diagnostics built on them.
//!
//! Each member obeys
//!
//! ```text
//! dx/dt = p / m,   dp/dt = f(x) + (tau / m) p f'(x) + kappa E(t)
//! ```
//!
//! where `E` is the member's own smooth band-limited realization, so a
//! classical RK4 step applies.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{sample_realization, FieldRealization, ModeSet};
use crate::grid::Grid1;
use crate::params::{PhysicalParams, Potential};
use crate::phase_stats::{self, Bandwidth, Estimator};
use crate::sum;

/// Steps per period of the fastest field mode.
pub const STEPS_PER_FIELD_PERIOD: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParticleState {
    pub x: f64,
    pub p: f64,
    pub t: f64,
}

/// What drives the ensemble members.
#[derive(Debug, Clone)]
pub enum Drive {
    /// No field (`E = 0`).
    None,
    /// Member `i` sees realization `first_index + i` of the mode set.
    Zpf { modes: Arc<ModeSet>, first_index: u64 },
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub states: Vec<ParticleState>,
    pub params: PhysicalParams,
    pub potential: Potential,
    pub drive: Drive,
}

/// Largest step allowed by the field band, `(2 pi / omega_max) / 20`.
pub fn max_step(modes: &ModeSet) -> f64 {
    2.0 * PI / modes.omega_max() / STEPS_PER_FIELD_PERIOD
}

#[inline]
fn rhs(x: f64, p: f64, e: f64, pot: &Potential, inv_m: f64, tau_over_m: f64, kappa: f64) -> (f64, f64) {
    let (f, df) = pot.force(x);
    (p * inv_m, f + tau_over_m * p * df + kappa * e)
}

/// RK4 step given the field at the start, middle and end of the step.
#[inline]
fn rk4(x: f64, p: f64, dt: f64, fields: [f64; 3], pot: &Potential, params: &PhysicalParams) -> (f64, f64) {
    let inv_m = 1.0 / params.mass;
    let tm = params.damping_time * inv_m;
    let k = params.coupling;
    let (k1x, k1p) = rhs(x, p, fields[0], pot, inv_m, tm, k);
    let (k2x, k2p) = rhs(x + 0.5 * dt * k1x, p + 0.5 * dt * k1p, fields[1], pot, inv_m, tm, k);
    let (k3x, k3p) = rhs(x + 0.5 * dt * k2x, p + 0.5 * dt * k2p, fields[1], pot, inv_m, tm, k);
    let (k4x, k4p) = rhs(x + dt * k3x, p + dt * k3p, fields[2], pot, inv_m, tm, k);
    (
        x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        p + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
    )
}

/// Advance one particle by `dt`.
pub fn step_trajectory(
    s: ParticleState,
    field: Option<&FieldRealization>,
    dt: f64,
    potential: &Potential,
    params: &PhysicalParams,
) -> Result<ParticleState> {
    if !(dt > 0.0) {
        return Err(Error::Invalid(format!("time step must be positive, got {dt}")));
    }
    let fields = match field {
        Some(r) => {
            let limit = max_step(r.modes());
            if dt > limit * (1.0 + 1e-12) {
                return Err(Error::StepTooLarge { dt, limit });
            }
            [r.eval(s.t), r.eval(s.t + 0.5 * dt), r.eval(s.t + dt)]
        }
        None => [0.0; 3],
    };
    let (x, p) = rk4(s.x, s.p, dt, fields, potential, params);
    Ok(ParticleState { x, p, t: s.t + dt })
}

/// Positions and momenta of every member at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

impl Snapshot {
    pub fn len(&self) -> usize {
        self.x.len()
    }
    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Evolve all members to `t_final` with step `dt`, recording snapshots.
///
/// Snapshot times are snapped to the step lattice; the recorded `t` is the
/// lattice time. Members run in parallel; results do not depend on the
/// thread count.
pub fn evolve_ensemble(e: &Ensemble, t_final: f64, dt: f64, snapshot_times: &[f64]) -> Result<Vec<Snapshot>> {
    e.params.validate()?;
    if e.states.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let t0 = e.states[0].t;
    if e.states.iter().any(|s| s.t != t0) {
        return Err(Error::Invalid("ensemble members must share the same time".into()));
    }
    if !(dt > 0.0) || !(t_final >= t0) {
        return Err(Error::Invalid(format!("need dt > 0 and t_final >= t0, got dt={dt}, t_final={t_final}")));
    }
    let sorted = snapshot_times.windows(2).all(|w| w[1] >= w[0]);
    let inside = snapshot_times.iter().all(|&t| t >= t0 - 1e-9 * dt && t <= t_final + 1e-9 * dt);
    if !sorted || !inside {
        return Err(Error::SnapshotTimes { t0, t_final });
    }
    if let Drive::Zpf { modes, .. } = &e.drive {
        let limit = max_step(modes);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge { dt, limit });
        }
        if t_final - t0 >= modes.recurrence_time() {
            return Err(Error::Recurrence { t_final: t_final - t0, recurrence: modes.recurrence_time() });
        }
    }
    let n_steps = (((t_final - t0) / dt) - 1e-9).ceil().max(0.0) as usize;
    let snap_steps: Vec<usize> = snapshot_times.iter().map(|&t| (((t - t0) / dt).round() as usize).min(n_steps)).collect();

    let per_member: Vec<Vec<(f64, f64)>> = e
        .states
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let lattice = match &e.drive {
                Drive::None => None,
                Drive::Zpf { modes, first_index } => {
                    let r = sample_realization(modes, first_index + i as u64);
                    Some(r.sample_lattice(t0, 0.5 * dt, 2 * n_steps + 1))
                }
            };
            integrate_member(s, n_steps, dt, lattice.as_deref(), &snap_steps, &e.potential, &e.params)
        })
        .collect();

    Ok(snap_steps
        .iter()
        .enumerate()
        .map(|(k, &step)| Snapshot {
            t: t0 + dt * step as f64,
            x: per_member.iter().map(|m| m[k].0).collect(),
            p: per_member.iter().map(|m| m[k].1).collect(),
        })
        .collect())
}

fn integrate_member(
    s: &ParticleState,
    n_steps: usize,
    dt: f64,
    lattice: Option<&[f64]>,
    snap_steps: &[usize],
    pot: &Potential,
    params: &PhysicalParams,
) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(snap_steps.len());
    let mut next = 0;
    let (mut x, mut p) = (s.x, s.p);
    for step in 0..=n_steps {
        while next < snap_steps.len() && snap_steps[next] == step {
            out.push((x, p));
            next += 1;
        }
        if step == n_steps {
            break;
        }
        let fields = match lattice {
            Some(l) => [l[2 * step], l[2 * step + 1], l[2 * step + 2]],
            None => [0.0; 3],
        };
        (x, p) = rk4(x, p, dt, fields, pot, params);
    }
    out
}

/// Ensemble average of `p^2 / 2m + V(x)`.
pub fn mean_energy(e: &Ensemble) -> f64 {
    let x: Vec<f64> = e.states.iter().map(|s| s.x).collect();
    let p: Vec<f64> = e.states.iter().map(|s| s.p).collect();
    snapshot_energy(&x, &p, &e.potential, &e.params)
}

pub fn snapshot_energy(x: &[f64], p: &[f64], potential: &Potential, params: &PhysicalParams) -> f64 {
    let inv2m = 0.5 / params.mass;
    sum::kahan(x.iter().zip(p).map(|(&x, &p)| p * p * inv2m + potential.value(x))) / x.len() as f64
}

/// Larmor-dissipated power `(tau / m^2) <f'(x) p^2>` (negative for confining potentials).
pub fn dissipated_power(x: &[f64], p: &[f64], potential: &Potential, params: &PhysicalParams) -> f64 {
    let c = params.damping_time / (params.mass * params.mass);
    c * sum::kahan(x.iter().zip(p).map(|(&x, &p)| potential.force(x).1 * p * p)) / x.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BalanceReport {
    pub mean_energy: f64,
    /// Least-squares slope of the windowed mean energy.
    pub energy_slope: f64,
    pub dissipated_power: f64,
    /// `energy_slope - dissipated_power`.
    pub absorbed_power: f64,
    /// `(absorbed - |dissipated|) / max(|dissipated|, eps)`: zero at balance,
    /// `-1` when nothing is absorbed.
    pub imbalance: f64,
    pub window: (f64, f64),
    pub snapshots: usize,
}

pub const MIN_BALANCE_SNAPSHOTS: usize = 10;

pub fn balance_report(window: &[Snapshot], potential: &Potential, params: &PhysicalParams) -> Result<BalanceReport> {
    if window.len() < MIN_BALANCE_SNAPSHOTS {
        return Err(Error::TooFewSamples { needed: MIN_BALANCE_SNAPSHOTS, got: window.len() });
    }
    let t: Vec<f64> = window.iter().map(|s| s.t).collect();
    let h: Vec<f64> = window.iter().map(|s| snapshot_energy(&s.x, &s.p, potential, params)).collect();
    let d: Vec<f64> = window.iter().map(|s| dissipated_power(&s.x, &s.p, potential, params)).collect();
    let (slope, _) = sum::linear_fit(&t, &h);
    let mean_energy = sum::mean(&h);
    let dissipated = sum::mean(&d);
    let absorbed = slope - dissipated;
    let eps = 1e-12 * mean_energy.abs().max(f64::MIN_POSITIVE);
    let imbalance = (absorbed - dissipated.abs()) / dissipated.abs().max(eps);
    Ok(BalanceReport {
        mean_energy,
        energy_slope: slope,
        dissipated_power: dissipated,
        absorbed_power: absorbed,
        imbalance,
        window: (t[0], *t.last().unwrap()),
        snapshots: window.len(),
    })
}

/// Exponential decay rate of the mean energy, from a log-linear fit.
pub fn energy_decay_rate(snapshots: &[Snapshot], potential: &Potential, params: &PhysicalParams) -> Result<f64> {
    if snapshots.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: snapshots.len() });
    }
    let t: Vec<f64> = snapshots.iter().map(|s| s.t).collect();
    let lh: Vec<f64> = snapshots.iter().map(|s| snapshot_energy(&s.x, &s.p, potential, params).ln()).collect();
    Ok(-sum::linear_fit(&t, &lh).0)
}

/// Relative change of the mean energy between the two halves of a window.
pub fn energy_drift(snapshots: &[Snapshot], potential: &Potential, params: &PhysicalParams) -> f64 {
    if snapshots.len() < 2 {
        return 0.0;
    }
    let h: Vec<f64> = snapshots.iter().map(|s| snapshot_energy(&s.x, &s.p, potential, params)).collect();
    let half = h.len() / 2;
    let (a, b) = (sum::mean(&h[..half]), sum::mean(&h[half..]));
    (b - a).abs() / (0.5 * (a + b)).abs().max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationOptions {
    /// Region used for the fit, relative to the peak density.
    pub fit_threshold: f64,
    /// Windowed energy drift above which the input counts as non-stationary.
    pub drift_threshold: f64,
    pub bandwidth: Bandwidth,
    pub min_samples: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        // Curvature of ln rho converges at a slower optimal bandwidth rate than
        // the density, so the kernels are wider than Silverman's.
        Self { fit_threshold: 0.1, drift_threshold: 0.05, bandwidth: Bandwidth::Scaled(2.0), min_samples: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaEstimate {
    pub beta: f64,
    pub std_error: f64,
    pub samples: usize,
    pub fit_points: usize,
    pub energy_drift: f64,
}

/// Pool the snapshot samples into one list.
pub fn pool(snapshots: &[Snapshot]) -> (Vec<f64>, Vec<f64>) {
    let x = snapshots.iter().flat_map(|s| s.x.iter().copied()).collect();
    let p = snapshots.iter().flat_map(|s| s.p.iter().copied()).collect();
    (x, p)
}

/// Local-moment profiles from pooled samples, with the momentum-kernel
/// variance removed from `sigma_p^2` (the product kernel adds exactly `h_p^2`).
pub fn sample_moments(x: &[f64], p: &[f64], x_grid: &Grid1, p_grid: &Grid1, bandwidth: Bandwidth) -> Result<phase_stats::LocalMoments> {
    let q = phase_stats::estimate_density(x, p, x_grid, p_grid, Estimator::Kde(bandwidth))?;
    let mut m = phase_stats::local_moments(&q);
    if let Some((_, hp)) = q.meta().bandwidth {
        let h2 = hp * hp;
        for (v, m2) in m.var_p.iter_mut().zip(m.mean_p2.iter_mut()) {
            *v -= h2;
            *m2 -= h2;
        }
    }
    Ok(m)
}

/// Fit `sigma_p^2(x) = -beta^2 d^2 ln rho / dx^2` over the central region.
pub fn calibrate_beta(
    snapshots: &[Snapshot],
    potential: &Potential,
    params: &PhysicalParams,
    x_grid: &Grid1,
    p_grid: &Grid1,
    opts: &CalibrationOptions,
) -> Result<BetaEstimate> {
    let (x, p) = pool(snapshots);
    if x.len() < opts.min_samples {
        return Err(Error::TooFewSamples { needed: opts.min_samples, got: x.len() });
    }
    let drift = energy_drift(snapshots, potential, params);
    if drift > opts.drift_threshold {
        return Err(Error::NotStationary { drift, threshold: opts.drift_threshold });
    }
    let m = sample_moments(&x, &p, x_grid, p_grid, opts.bandwidth)?;
    let curv = phase_stats::log_density_curvature(&m.rho, &m.mask, x_grid.step());
    let peak = m.rho.iter().cloned().fold(0.0f64, f64::max);
    let pts: Vec<(f64, f64)> = (0..m.rho.len())
        .filter(|&i| m.rho[i] > opts.fit_threshold * peak && curv[i].is_finite())
        .map(|i| (-curv[i], m.var_p[i]))
        .collect();
    if pts.len() < 3 {
        return Err(Error::MaskTooSmall { points: pts.len(), needed: 3 });
    }
    let sbb = sum::kahan(pts.iter().map(|(b, _)| b * b));
    let sab = sum::kahan(pts.iter().map(|(b, a)| a * b));
    let beta2 = sab / sbb;
    let rss = sum::kahan(pts.iter().map(|(b, a)| (a - beta2 * b).powi(2)));
    let se_beta2 = (rss / (pts.len() - 1) as f64 / sbb).sqrt();
    let beta = beta2.max(0.0).sqrt();
    let std_error = if beta > 0.0 { se_beta2 / (2.0 * beta) } else { se_beta2.sqrt() };
    Ok(BetaEstimate { beta, std_error, samples: x.len(), fit_points: pts.len(), energy_drift: drift })
}

/// Dispersion residual of sampled data together with a Monte-Carlo noise
/// floor from disjoint member groups.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionCheck {
    pub residual: Vec<f64>,
    pub noise_floor: Vec<f64>,
    /// Root-mean-square residual over the fit region.
    pub rms_residual: f64,
    pub rms_noise: f64,
    pub points: usize,
}

/// Evaluate `sigma_p^2 + beta^2 d^2 ln rho` from snapshots over the region
/// `rho > fit_threshold * peak`, with the noise floor estimated from `groups`
/// disjoint member subsets sharing the full-sample bandwidth.
pub fn dispersion_check(
    snapshots: &[Snapshot],
    beta: f64,
    x_grid: &Grid1,
    p_grid: &Grid1,
    groups: usize,
    fit_threshold: f64,
) -> Result<DispersionCheck> {
    if groups < 2 {
        return Err(Error::Invalid("need at least two groups for a noise floor".into()));
    }
    let (x, p) = pool(snapshots);
    let q = phase_stats::estimate_density(&x, &p, x_grid, p_grid, Estimator::default())?;
    let (hx, hp) = q.meta().bandwidth.unwrap();
    let fixed = Bandwidth::Fixed { x: hx, p: hp };
    let field = |x: &[f64], p: &[f64]| -> Result<Vec<f64>> {
        let m = sample_moments(x, p, x_grid, p_grid, fixed)?;
        let curv = phase_stats::log_density_curvature(&m.rho, &m.mask, x_grid.step());
        Ok((0..m.rho.len()).map(|i| m.var_p[i] + beta * beta * curv[i]).collect())
    };
    let full = field(&x, &p)?;
    let members = snapshots[0].len();
    let mut parts = Vec::with_capacity(groups);
    for g in 0..groups {
        let range = (g * members / groups)..((g + 1) * members / groups);
        let sub: Vec<Snapshot> = snapshots
            .iter()
            .map(|s| Snapshot { t: s.t, x: s.x[range.clone()].to_vec(), p: s.p[range.clone()].to_vec() })
            .collect();
        let (gx, gp) = pool(&sub);
        parts.push(field(&gx, &gp)?);
    }
    let noise = phase_stats::grouped_standard_error(&parts);
    let rho = phase_stats::marginal_rho(&q);
    let peak = rho.iter().cloned().fold(0.0f64, f64::max);
    let region: Vec<usize> = (0..rho.len())
        .filter(|&i| rho[i] > fit_threshold * peak && full[i].is_finite() && noise[i].is_finite())
        .collect();
    if region.len() < 3 {
        return Err(Error::MaskTooSmall { points: region.len(), needed: 3 });
    }
    let rms = |v: &[f64]| (sum::kahan(region.iter().map(|&i| v[i] * v[i])) / region.len() as f64).sqrt();
    Ok(DispersionCheck {
        rms_residual: rms(&full),
        rms_noise: rms(&noise),
        points: region.len(),
        residual: full,
        noise_floor: noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{build_mode_set, SpectralConfig};

    fn ho() -> (Potential, PhysicalParams) {
        (Potential::harmonic(1.0, 1.0), PhysicalParams::dimensionless_ho(0.0).with_beta(0.5))
    }

    #[test]
    fn ballistic_step() {
        let p = PhysicalParams::dimensionless_ho(0.0);
        let s = step_trajectory(ParticleState { x: 0.0, p: 1.0, t: 0.0 }, None, 0.1, &Potential::Free, &p).unwrap();
        assert!((s.x - 0.1).abs() < 1e-15 && (s.p - 1.0).abs() < 1e-15 && (s.t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn oscillator_period_returns() {
        let (pot, params) = ho();
        let dt = 2.0 * PI / 1000.0;
        let mut s = ParticleState { x: 1.0, p: 0.3, t: 0.0 };
        for _ in 0..1000 {
            s = step_trajectory(s, None, dt, &pot, &params).unwrap();
        }
        assert!((s.x - 1.0).abs() < 1e-8 && (s.p - 0.3).abs() < 1e-8, "{s:?}");
    }

    #[test]
    fn step_limit_enforced() {
        let (pot, params) = ho();
        let m = Arc::new(build_mode_set(&SpectralConfig::band(1.0, 0.1, 10, 0), &params).unwrap());
        let r = sample_realization(&m, 0);
        let s = ParticleState { x: 0.0, p: 0.0, t: 0.0 };
        assert!(matches!(step_trajectory(s, Some(&r), 0.5, &pot, &params), Err(Error::StepTooLarge { .. })));
        assert!(step_trajectory(s, Some(&r), 0.2, &pot, &params).is_ok());
    }

    #[test]
    fn mean_energy_examples() {
        let (pot, params) = ho();
        let mk = |xs: &[f64]| Ensemble {
            states: xs.iter().map(|&x| ParticleState { x, p: 0.0, t: 0.0 }).collect(),
            params,
            potential: pot.clone(),
            drive: Drive::None,
        };
        assert_eq!(mean_energy(&mk(&[0.0, 0.0])), 0.0);
        assert_eq!(mean_energy(&mk(&[1.0, -1.0])), 0.5);
    }

    #[test]
    fn evolve_validates_inputs() {
        let (pot, mut params) = ho();
        params.damping_time = 1e-3;
        let m = Arc::new(build_mode_set(&SpectralConfig::band(1.0, 0.1, 11, 0), &params).unwrap());
        let e = Ensemble {
            states: vec![ParticleState { x: 0.0, p: 0.0, t: 0.0 }],
            params,
            potential: pot,
            drive: Drive::Zpf { modes: Arc::clone(&m), first_index: 0 },
        };
        let rec = m.recurrence_time();
        assert!(matches!(evolve_ensemble(&e, rec + 1.0, 0.1, &[]), Err(Error::Recurrence { .. })));
        assert!(matches!(evolve_ensemble(&e, 10.0, 0.1, &[5.0, 1.0]), Err(Error::SnapshotTimes { .. })));
        assert!(matches!(evolve_ensemble(&e, 10.0, 0.1, &[11.0]), Err(Error::SnapshotTimes { .. })));
    }

    #[test]
    fn evolve_matches_manual_stepping() {
        let (pot, mut params) = ho();
        params.damping_time = 1e-2;
        params.coupling = crate::params::calibrated_coupling(1.0, 1.0, 1e-2);
        let m = Arc::new(build_mode_set(&SpectralConfig::band(1.0, 0.1, 40, 3), &params).unwrap());
        let (h, _) = m.commensurate_half_step(0.5 * max_step(&m)).unwrap();
        let dt = 2.0 * h;
        let e = Ensemble {
            states: vec![ParticleState { x: 0.2, p: -0.1, t: 0.0 }; 3],
            params,
            potential: pot.clone(),
            drive: Drive::Zpf { modes: Arc::clone(&m), first_index: 5 },
        };
        let n = 400;
        let snaps = evolve_ensemble(&e, dt * n as f64, dt, &[dt * n as f64]).unwrap();
        let r = sample_realization(&m, 6);
        let mut s = e.states[1];
        for _ in 0..n {
            s = step_trajectory(s, Some(&r), dt, &pot, &params).unwrap();
        }
        assert!((snaps[0].x[1] - s.x).abs() < 1e-10 && (snaps[0].p[1] - s.p).abs() < 1e-10);
    }

    #[test]
    fn balance_needs_window() {
        let (pot, params) = ho();
        let s = Snapshot { t: 0.0, x: vec![0.0], p: vec![0.0] };
        assert!(matches!(balance_report(&vec![s; 5], &pot, &params), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn beta_zero_for_deterministic_momentum() {
        let (pot, params) = ho();
        let n = 4000;
        let x: Vec<f64> = (0..n).map(|i| {
            // Logistic quantiles: a smooth deterministic position sample.
            let u = (i as f64 + 0.5) / n as f64;
            (u / (1.0 - u)).ln() * 0.4
        }).collect();
        let snap = Snapshot { t: 0.0, p: vec![0.0; n], x };
        let xg = Grid1::linspace(-5.0, 5.0, 201).unwrap();
        let pg = Grid1::linspace(-1.0, 1.0, 41).unwrap();
        let b = calibrate_beta(&[snap], &pot, &params, &xg, &pg, &CalibrationOptions::default()).unwrap();
        assert!(b.beta < 1e-3, "{b:?}");
    }
}
