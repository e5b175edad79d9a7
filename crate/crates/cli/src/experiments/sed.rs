//! Driven ensembles: relaxation to the zero-point fixed point and the power
//! balance that holds it there.

use std::sync::Arc;

use sedqm_core::ensemble::{
    self, balance_report, calibrate_beta, dispersion_check, energy_decay_rate, evolve_ensemble, max_step, snapshot_energy, CalibrationOptions,
    Drive, Ensemble, ParticleState, Snapshot,
};
use sedqm_core::field::{build_mode_set, ModeSet};
use sedqm_core::phase_stats::{estimate_density, Bandwidth, Estimator};
use sedqm_core::{Error, PhysicalParams, Potential};

use crate::config::{PotentialConfig, RunConfig};
use crate::manifest::{Recorder, StageError};

/// An evolved ensemble and the settings that produced it.
pub struct SedRun {
    pub params: PhysicalParams,
    pub potential: Potential,
    pub modes: Arc<ModeSet>,
    pub dt: f64,
    pub snapshots: Vec<Snapshot>,
    /// Index of the first snapshot in the stationary window.
    pub window_start: usize,
}

impl SedRun {
    pub fn window(&self) -> &[Snapshot] {
        &self.snapshots[self.window_start..]
    }

    /// Pool the window member by member, so that contiguous ranges of the
    /// result are disjoint member groups.
    pub fn pooled_by_member(&self) -> (Vec<f64>, Vec<f64>) {
        let w = self.window();
        let members = w[0].len();
        let mut x = Vec::with_capacity(members * w.len());
        let mut p = Vec::with_capacity(members * w.len());
        for i in 0..members {
            for s in w {
                x.push(s.x[i]);
                p.push(s.p[i]);
            }
        }
        (x, p)
    }
}

/// Snapshot times: the stationary window evenly spaced up to `t_final`, and
/// the same spacing continued back to the start for the energy history.
fn snapshot_times(t_final: f64, window_start: f64, count: usize) -> (Vec<f64>, usize) {
    let t0 = window_start * t_final;
    let spacing = (t_final - t0) / (count - 1) as f64;
    let back = (t_final / spacing + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=back).rev().map(|k| (t_final - k as f64 * spacing).max(0.0)).collect();
    if times[0] > 0.0 {
        times.insert(0, 0.0);
    }
    let start = times.len() - count;
    (times, start)
}

/// Step actually used: the largest step below the bound whose half-step puts
/// the field on an FFT lattice.
fn resolve_step(modes: &ModeSet, bound: Option<f64>) -> Result<f64, Error> {
    let limit = max_step(modes);
    let bound = bound.unwrap_or(0.5 * limit);
    if bound > limit * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt: bound, limit });
    }
    let (h, _) = modes
        .commensurate_half_step(0.5 * bound)
        .ok_or_else(|| Error::Invalid("no commensurate step for this mode set".into()))?;
    Ok(2.0 * h)
}

pub fn simulate(cfg: &RunConfig, rec: &mut Recorder) -> Result<SedRun, StageError> {
    let (params, potential, modes, dt) = rec.stage("setup", |rec| -> Result<_, Error> {
        let params = cfg.physical_params();
        params.validate()?;
        let modes = Arc::new(build_mode_set(&cfg.spectral_config(), &params)?);
        let dt = resolve_step(&modes, cfg.times.dt)?;
        rec.diagnostic("dt", dt);
        rec.diagnostic("t_final", cfg.t_final());
        rec.diagnostic("recurrence_time", modes.recurrence_time());
        rec.diagnostic("field_variance", modes.variance());
        rec.diagnostic("coupling", params.coupling);
        Ok((params, cfg.potential(), modes, dt))
    })?;
    let t_final = cfg.t_final();
    let (times, window_start) = snapshot_times(t_final, cfg.times.window_start, cfg.times.snapshots);
    let snapshots = rec.stage("evolve", |_| {
        let e = Ensemble {
            states: vec![ParticleState { x: cfg.ensemble.x0, p: cfg.ensemble.p0, t: 0.0 }; cfg.ensemble.members],
            params,
            potential: potential.clone(),
            drive: Drive::Zpf { modes: Arc::clone(&modes), first_index: 0 },
        };
        evolve_ensemble(&e, t_final, dt, &times)
    })?;
    rec.stage("history", |rec| {
        let t: Vec<f64> = snapshots.iter().map(|s| s.t).collect();
        let h: Vec<f64> = snapshots.iter().map(|s| snapshot_energy(&s.x, &s.p, &potential, &params)).collect();
        let d: Vec<f64> = snapshots.iter().map(|s| ensemble::dissipated_power(&s.x, &s.p, &potential, &params)).collect();
        rec.write_columns("energy_history.csv", &["t", "mean_energy", "dissipated_power"], &[&t, &h, &d])
    })?;
    Ok(SedRun { params, potential, modes, dt, snapshots, window_start })
}

fn harmonic_omega(cfg: &RunConfig) -> f64 {
    match cfg.potential {
        PotentialConfig::Harmonic { omega } => omega,
        _ => cfg.params.omega0,
    }
}

/// Power balance over the stationary window.
fn balance_stage(cfg: &RunConfig, run: &SedRun, rec: &mut Recorder) -> Result<f64, StageError> {
    rec.stage("balance", |rec| -> Result<f64, Error> {
        let b = balance_report(run.window(), &run.potential, &run.params)?;
        rec.diagnostic("mean_energy", b.mean_energy);
        rec.diagnostic("energy_slope", b.energy_slope);
        rec.diagnostic("dissipated_power", b.dissipated_power);
        rec.diagnostic("absorbed_power", b.absorbed_power);
        rec.diagnostic("imbalance", b.imbalance);
        rec.diagnostic("window_start", b.window.0);
        rec.diagnostic("window_end", b.window.1);
        rec.check_below("imbalance", b.imbalance.abs(), cfg.tolerances.imbalance);
        Ok(b.mean_energy)
    })
}

/// Switch the field off at the end of the run and fit the energy decay.
fn control_stage(cfg: &RunConfig, run: &SedRun, rec: &mut Recorder) -> Result<(), StageError> {
    rec.stage("control", |rec| -> Result<(), Error> {
        let last = run.snapshots.last().expect("at least one snapshot");
        let target = run.params.damping_time * harmonic_omega(cfg).powi(2) / run.params.mass;
        let duration = cfg.times.control_relaxation_times / target;
        let states = last.x.iter().zip(&last.p).map(|(&x, &p)| ParticleState { x, p, t: last.t }).collect();
        let e = Ensemble { states, params: run.params, potential: run.potential.clone(), drive: Drive::None };
        let times: Vec<f64> = (0..=40).map(|k| last.t + duration * k as f64 / 40.0).collect();
        let snaps = evolve_ensemble(&e, last.t + duration, run.dt, &times)?;
        let rate = energy_decay_rate(&snaps, &run.potential, &run.params)?;
        let t: Vec<f64> = snaps.iter().map(|s| s.t).collect();
        let h: Vec<f64> = snaps.iter().map(|s| snapshot_energy(&s.x, &s.p, &run.potential, &run.params)).collect();
        rec.write_columns("control_energy.csv", &["t", "mean_energy"], &[&t, &h])
            .map_err(|e| Error::Invalid(e.to_string()))?;
        rec.diagnostic("control_decay_rate", rate);
        rec.diagnostic("control_target_rate", target);
        rec.check_near("control_decay_rate_ratio", rate / target, 1.0, cfg.tolerances.decay_rel);
        Ok(())
    })
}

fn io_err(e: std::io::Error) -> Error {
    Error::Invalid(e.to_string())
}

pub fn relax(cfg: &RunConfig, rec: &mut Recorder) -> Result<(), StageError> {
    let run = simulate(cfg, rec)?;
    let ground = 0.5 * cfg.params.hbar * harmonic_omega(cfg);
    let mean_energy = balance_stage(cfg, &run, rec)?;
    rec.check_near("mean_energy_ratio", mean_energy / ground, 1.0, cfg.tolerances.energy_rel);
    let x_grid = cfg.grids.x.linspace();
    let p_grid = cfg.grids.p.linspace();
    let beta_target = 0.5 * cfg.params.hbar;
    rec.stage("calibrate", |rec| -> Result<(), Error> {
        let b = calibrate_beta(run.window(), &run.potential, &run.params, &x_grid, &p_grid, &CalibrationOptions::default())?;
        rec.diagnostic("beta", b.beta);
        rec.diagnostic("beta_std_error", b.std_error);
        rec.diagnostic("beta_fit_points", b.fit_points as f64);
        rec.diagnostic("samples", b.samples as f64);
        rec.diagnostic("window_energy_drift", b.energy_drift);
        rec.check_near("beta_ratio", b.beta / beta_target, 1.0, cfg.tolerances.beta_rel);
        Ok(())
    })?;
    rec.stage("dispersion", |rec| -> Result<(), Error> {
        let window = run.window();
        let d = dispersion_check(window, beta_target, &x_grid, &p_grid, cfg.ensemble.groups, CalibrationOptions::default().fit_threshold)?;
        rec.diagnostic("dispersion_rms_residual", d.rms_residual);
        rec.diagnostic("dispersion_rms_noise", d.rms_noise);
        rec.diagnostic("dispersion_points", d.points as f64);
        let factor = cfg.tolerances.noise_factor;
        rec.check(
            "dispersion_residual_over_noise",
            d.rms_residual / d.rms_noise,
            format!("rms residual <= {factor} x rms noise floor"),
            d.rms_residual <= factor * d.rms_noise,
        );
        let (x, p) = ensemble::pool(window);
        let m = ensemble::sample_moments(&x, &p, &x_grid, &p_grid, Bandwidth::Silverman)?;
        let xs = x_grid.points();
        rec.write_columns(
            "moments.csv",
            &["x", "rho", "mean_p", "var_p", "dispersion_residual", "noise_floor"],
            &[&xs, &m.rho, &m.mean_p, &m.var_p, &d.residual, &d.noise_floor],
        )
        .map_err(io_err)?;
        let q = estimate_density(&x, &p, &x_grid, &p_grid, Estimator::default())?;
        rec.write_grid("q_density", &x_grid, &p_grid, "q", q.values()).map_err(io_err)?;
        rec.write_grid_binary("q_density", &x_grid, &p_grid, q.values()).map_err(io_err)?;
        Ok(())
    })?;
    rec.stage("snapshots", |rec| -> Result<(), std::io::Error> {
        let window = run.window();
        let ids: Vec<f64> = (0..window[0].len()).map(|i| i as f64).collect();
        for k in [0, window.len() / 2, window.len() - 1] {
            let s = &window[k];
            rec.write_columns(&format!("snapshot_{:04}.csv", run.window_start + k), &["member_id", "x", "p"], &[&ids, &s.x, &s.p])?;
        }
        Ok(())
    })?;
    control_stage(cfg, &run, rec)
}

pub fn balance(cfg: &RunConfig, rec: &mut Recorder) -> Result<(), StageError> {
    let run = simulate(cfg, rec)?;
    balance_stage(cfg, &run, rec)?;
    control_stage(cfg, &run, rec)
}
