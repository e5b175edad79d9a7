//! Variational ground states checked against a dense eigensolve of the same
//! discrete operator and against random trial densities.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sedqm_core::varmin::{minimize_ground_state, DiscreteHamiltonian, VarminOptions};
use sedqm_core::wigner::EDGE_TOLERANCE;
use sedqm_core::{Error, Grid1, Potential};

use crate::config::{GroundCase, RunConfig};
use crate::manifest::{Recorder, StageError};

/// Lowest eigenvalue of the tridiagonal operator, by a dense symmetric eigensolve.
pub fn dense_ground_energy(h: &DiscreteHamiltonian) -> f64 {
    let d = h.diagonal();
    let n = d.len();
    let off = h.off_diagonal();
    let m = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => d[i],
        1 => off,
        _ => 0.0,
    });
    m.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn setup(cfg: &RunConfig, case: GroundCase) -> Result<(Grid1, Potential, Option<f64>), Error> {
    let p = cfg.physical_params();
    Ok(match case {
        GroundCase::Harmonic => (Grid1::box_interior(-10.0, 10.0, 1023)?, Potential::harmonic(p.mass, 1.0), Some(0.5 * p.hbar)),
        GroundCase::Box => (Grid1::box_interior(0.0, 1.0, 255)?, Potential::Free, Some(PI * PI * p.hbar * p.hbar / (2.0 * p.mass))),
        GroundCase::Quartic => (Grid1::box_interior(-4.0, 4.0, 255)?, Potential::quartic(0.0, 1.0), None),
        GroundCase::Configured => (cfg.grids.wave.interior(), cfg.potential(), None),
    })
}

/// Smooth random trial: a Gaussian bump with a cosine ripple, placed inside
/// the grid.
fn trial(rng: &mut ChaCha8Rng, g: &Grid1) -> Vec<f64> {
    let (lo, hi) = (g.start(), g.end());
    let span = hi - lo;
    let c = lo + span * (0.25 + 0.5 * rng.gen::<f64>());
    let w = span * (0.03 + 0.25 * rng.gen::<f64>());
    let a = 0.9 * rng.gen::<f64>();
    let k = (1.0 + 20.0 * rng.gen::<f64>()) / span;
    let phase = 2.0 * PI * rng.gen::<f64>();
    g.points().iter().map(|&x| (-(x - c).powi(2) / (2.0 * w * w)).exp() * (1.0 + a * (k * x + phase).cos())).collect()
}

pub fn run(cfg: &RunConfig, rec: &mut Recorder) -> Result<(), StageError> {
    let gs = &cfg.ground_state;
    let tol = cfg.tolerances;
    let params = cfg.physical_params();
    let opts = VarminOptions { tol: gs.tol, max_iterations: gs.max_iterations, ..VarminOptions::default() };
    for (k, &case) in gs.cases.iter().enumerate() {
        let name = case.name();
        rec.stage(&format!("solve-{name}"), |rec| -> Result<(), Error> {
            let (grid, pot, exact) = setup(cfg, case)?;
            let r = minimize_ground_state(&pot, &grid, &params, &opts)?;
            let h = DiscreteHamiltonian::new(&grid, &pot, &params)?;
            let dense = dense_ground_energy(&h);
            rec.diagnostic(&format!("{name}_energy"), r.energy);
            rec.diagnostic(&format!("{name}_dense_energy"), dense);
            rec.diagnostic(&format!("{name}_residual"), r.residual);
            rec.diagnostic(&format!("{name}_iterations"), r.iterations as f64);
            rec.diagnostic(&format!("{name}_edge_amplitude"), r.edge_amplitude);
            rec.check_below(&format!("{name}_oracle"), (r.energy - dense).abs(), tol.oracle_factor * gs.tol);
            if let Some(e) = exact {
                let bound = if case == GroundCase::Box { tol.box_energy } else { tol.harmonic_energy };
                rec.check_near(&format!("{name}_energy"), r.energy, e, bound);
            }
            if case != GroundCase::Box {
                rec.check_below(&format!("{name}_edge_amplitude"), r.edge_amplitude, EDGE_TOLERANCE);
            }
            // Largest step up in the Rayleigh quotient, relative to its size.
            let rise = r.history.windows(2).map(|w| (w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE)).fold(f64::NEG_INFINITY, f64::max);
            rec.check_below(&format!("{name}_history_rise"), rise.max(0.0), 1e-12);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(k as u64));
            let gap = (0..gs.trials).map(|_| h.rayleigh(&trial(&mut rng, &grid)) - dense).fold(f64::INFINITY, f64::min);
            rec.diagnostic(&format!("{name}_trials"), gs.trials as f64);
            rec.check_above(&format!("{name}_trial_gap"), gap, -1e-12 * dense.abs().max(1.0));
            let xs = grid.points();
            let psi: Vec<f64> = r.psi.psi.iter().map(|z| z.re).collect();
            let rho = r.psi.density();
            let v = pot.sample(&grid);
            rec.write_columns(&format!("ground_{name}.csv"), &["x", "psi", "rho", "v"], &[&xs, &psi, &rho, &v])
                .map_err(|e| Error::Invalid(e.to_string()))?;
            let it: Vec<f64> = (1..=r.history.len()).map(|i| i as f64).collect();
            rec.write_columns(&format!("history_{name}.csv"), &["iteration", "energy"], &[&it, &r.history])
                .map_err(|e| Error::Invalid(e.to_string()))
        })?;
    }
    Ok(())
}
