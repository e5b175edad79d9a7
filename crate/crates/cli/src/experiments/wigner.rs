//! Wigner functions of oscillator states against the phase-space density
//! reconstructed from a driven ensemble.

use std::f64::consts::PI;
use std::fmt::Write as _;

use sedqm_core::schrod::WaveFunction;
use sedqm_core::wigner::{ensemble_reconstruction, inverse_characteristic, marginals_check, negativity_report, psi_characteristic, wigner_transform, WignerGrid};
use sedqm_core::{states, Complex64, Error};

use super::sed::simulate;
use crate::config::{PotentialConfig, RunConfig};
use crate::manifest::{Recorder, StageError};

fn io_err(e: std::io::Error) -> Error {
    Error::Invalid(e.to_string())
}

/// Long-format rows `source,x,p,value`, limited to `|x| <= x_limit`.
fn push_long(out: &mut String, source: &str, wg: &WignerGrid, x_limit: f64) {
    for i in 0..wg.x.len() {
        let x = wg.x.x(i);
        if x.abs() > x_limit {
            continue;
        }
        for (j, v) in wg.row(i).iter().enumerate() {
            let _ = writeln!(out, "{source},{x:e},{:e},{v:e}", wg.p.x(j));
        }
    }
}

pub fn run(cfg: &RunConfig, rec: &mut Recorder) -> Result<(), StageError> {
    let tol = cfg.tolerances;
    let params = cfg.physical_params();
    let (m, hbar) = (params.mass, params.hbar);
    let wave = cfg.grids.wave.interior();
    let wigner_p = cfg.grids.wigner_p.linspace();
    let recon_x = cfg.grids.recon_x.linspace();
    let recon_p = cfg.grids.recon_p.linspace();
    let omega = match cfg.potential {
        PotentialConfig::Harmonic { omega } => omega,
        _ => params.omega0,
    };
    let eigen = |n: usize| WaveFunction::from_fn(wave, 0.0, &params, |x| Complex64::new(states::ho_eigenstate(n, x, m, omega, hbar), 0.0));

    let psi_n1 = rec.stage("psi-wigner", |rec| -> Result<WaveFunction, Error> {
        let cases = [
            ("n0", eigen(0)?),
            ("n1", eigen(1)?),
            (
                "superposition",
                WaveFunction::from_fn(wave, 0.0, &params, |x| {
                    Complex64::new(states::ho_eigenstate(0, x, m, omega, hbar) + states::ho_eigenstate(2, x, m, omega, hbar), 0.0)
                })?,
            ),
        ];
        for (name, w) in &cases {
            let wg = wigner_transform(w, &wigner_p)?;
            let neg = negativity_report(&wg);
            let marg = marginals_check(&wg, w)?;
            rec.diagnostic(&format!("wigner_{name}_min"), neg.min);
            rec.diagnostic(&format!("wigner_{name}_negative_volume"), neg.negative_volume);
            rec.diagnostic(&format!("wigner_{name}_integral"), wg.integral());
            let worst = marg.position.max(marg.momentum);
            rec.check_below(&format!("wigner_{name}_marginals"), worst, tol.marginals);
            match *name {
                "n0" => rec.check_above("wigner_n0_min", neg.min, -tol.wigner_floor),
                "n1" => rec.check_near("wigner_n1_min", neg.min, -1.0 / (PI * hbar), tol.wigner_min),
                _ => rec.check("wigner_superposition_negative", neg.min, "value < 0", neg.min < 0.0),
            }
            rec.write_grid(&format!("wigner_{name}"), &wg.x, &wg.p, "w", &wg.values).map_err(io_err)?;
        }
        let [_, (_, n1), _] = cases;
        Ok(n1)
    })?;

    let run = simulate(cfg, rec)?;
    let recon = rec.stage("reconstruct", |rec| -> Result<WignerGrid, Error> {
        let (x, p) = run.pooled_by_member();
        let r = ensemble_reconstruction(&x, &p, &recon_x, &recon_p, &cfg.grids.z(), cfg.ensemble.groups)?;
        rec.diagnostic("ensemble_q_min", r.negativity.min);
        rec.diagnostic("ensemble_q_roundoff", r.roundoff);
        rec.diagnostic("ensemble_q_noise_max", r.noise.iter().cloned().fold(0.0, f64::max));
        rec.diagnostic("ensemble_samples", x.len() as f64);
        rec.check("ensemble_q_margin", r.margin, "min(Q + 3 x noise + allowance) >= 0", r.margin >= 0.0);
        rec.write_grid("ensemble_q", &r.q.x, &r.q.p, "q", &r.q.values).map_err(io_err)?;
        rec.write_grid("ensemble_q_noise", &r.q.x, &r.q.p, "noise", &r.noise).map_err(io_err)?;
        Ok(r.q)
    })?;

    rec.stage("contrast", |rec| -> Result<(), Error> {
        let psi_q = inverse_characteristic(&psi_characteristic(&psi_n1, None)?, &recon_p)?;
        let min = negativity_report(&psi_q).min;
        rec.diagnostic("psi_n1_characteristic_min", min);
        rec.check_below("psi_n1_characteristic_min", min, -0.3);
        let limit = cfg.grids.recon_x.lo.abs().max(cfg.grids.recon_x.hi.abs());
        let mut text = String::from("source,x,p,value\n");
        push_long(&mut text, "ensemble", &recon, limit);
        push_long(&mut text, "psi_n1", &psi_q, limit);
        rec.write_text("contrast.csv", &text).map_err(io_err)
    })
}
