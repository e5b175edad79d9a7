//! Quantum-potential maps: the oscillator ground state, a plane wave and the
//! two-particle form.

use std::f64::consts::TAU;

use sedqm_core::hydro::{quantum_potential, quantum_potential_two_particle};
use sedqm_core::schrod::WaveFunction;
use sedqm_core::{states, Complex64, Error, Grid1};

use super::finite_max_abs;
use crate::config::{PotentialConfig, RunConfig};
use crate::manifest::{Recorder, StageError};

fn io_err(e: std::io::Error) -> Error {
    Error::Invalid(e.to_string())
}

pub fn run(cfg: &RunConfig, rec: &mut Recorder) -> Result<(), StageError> {
    let params = cfg.physical_params();
    let (m, hbar, beta) = (params.mass, params.hbar, params.beta);
    let omega = match cfg.potential {
        PotentialConfig::Harmonic { omega } => omega,
        _ => unreachable!("validated as harmonic"),
    };
    let tol = cfg.tolerances;
    let g = cfg.grids.wave.interior();
    let rho: Vec<f64> = g.points().iter().map(|&x| states::ho_eigenstate(0, x, m, omega, hbar).powi(2)).collect();

    let q = rec.stage("single", |rec| -> Result<Vec<f64>, Error> {
        let q = quantum_potential(&g, &rho, beta, m)?;
        let v = cfg.potential().sample(&g);
        let total: Vec<f64> = q.iter().zip(&v).map(|(a, b)| a + b).collect();
        let e0 = 0.5 * hbar * omega;
        let dev = finite_max_abs(&total.iter().map(|t| t - e0).collect::<Vec<_>>());
        rec.diagnostic("qpot_points", total.iter().filter(|t| t.is_finite()).count() as f64);
        rec.check_below("qpot_plus_v_deviation", dev, tol.qpot_constant);
        let xs = g.points();
        rec.write_columns("qpot_ground.csv", &["x", "rho", "q", "v", "q_plus_v"], &[&xs, &rho, &q, &v, &total]).map_err(io_err)?;
        Ok(q)
    })?;

    rec.stage("plane-wave", |rec| -> Result<(), Error> {
        let k = 3.0;
        let pg = Grid1::periodic(0.0, TAU, 128)?;
        let w = WaveFunction::from_fn(pg, 0.0, &params, |x| Complex64::from_polar(1.0, k * x))?;
        let qp = quantum_potential(&pg, &w.density(), beta, m)?;
        rec.check_below("plane_wave_qpot", finite_max_abs(&qp), tol.plane_wave);
        rec.write_columns("qpot_plane_wave.csv", &["x", "q"], &[&pg.points(), &qp]).map_err(io_err)
    })?;

    rec.stage("two-particle", |rec| -> Result<(), Error> {
        let x2 = Grid1::linspace(-5.0, 5.0, 41)?;
        let rho2: Vec<f64> = x2.points().iter().map(|&x| states::ho_eigenstate(0, x - 1.0, m, omega, hbar).powi(2)).collect();
        let (n1, n2) = (g.len(), x2.len());
        let flat = quantum_potential_two_particle(&g, &x2, &rho, &rho2, &vec![1.0; n1 * n2], beta, m)?;
        let mut dev = 0.0f64;
        for i in 0..n1 {
            for j in 0..n2 {
                let (a, b) = (flat[i * n2 + j], q[i]);
                if a.is_finite() && b.is_finite() {
                    dev = dev.max((a - b).abs());
                }
            }
        }
        rec.check_below("two_particle_reduction", dev, tol.two_particle);
        // A correlated pair, rho12 = exp(c x1 x2), for the map.
        let c = 0.4;
        let rho12: Vec<f64> = g.points().iter().flat_map(|&a| x2.points().into_iter().map(move |b| (c * a * b).exp())).collect();
        let corr = quantum_potential_two_particle(&g, &x2, &rho, &rho2, &rho12, beta, m)?;
        let (c1, c2): (Vec<f64>, Vec<f64>) = g.points().iter().flat_map(|&a| x2.points().into_iter().map(move |b| (a, b))).unzip();
        rec.write_columns("qpot_two_particle.csv", &["x1", "x2", "q_uncorrelated", "q_correlated"], &[&c1, &c2, &flat, &corr]).map_err(io_err)
    })
}
