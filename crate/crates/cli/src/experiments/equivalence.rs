//! Madelung fluid against the split-step Schrödinger solution for a
//! coherent state in the harmonic well.

use std::f64::consts::TAU;

use sedqm_core::hydro::{dispersive_step_limit, step_madelung, HydroOptions};
use sedqm_core::schrod::{polar_decompose, propagate, WaveFunction};
use sedqm_core::{states, Error, Grid1};

use crate::config::{Axis, PotentialConfig, RunConfig};
use crate::manifest::{Recorder, StageError};

struct Comparison {
    grid: Grid1,
    hydro: Vec<f64>,
    schrod: Vec<f64>,
    exact: Vec<f64>,
    mass_drift: f64,
}

impl Comparison {
    fn linf(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }

    fn vs_schrod(&self) -> f64 {
        Self::linf(&self.hydro, &self.schrod)
    }

    fn vs_exact(&self) -> f64 {
        Self::linf(&self.hydro, &self.exact)
    }
}

fn compare(cfg: &RunConfig, n: usize) -> Result<Comparison, Error> {
    let params = cfg.physical_params();
    let pot = cfg.potential();
    let omega = match cfg.potential {
        PotentialConfig::Harmonic { omega } => omega,
        _ => unreachable!("validated as harmonic"),
    };
    let (m, hbar) = (params.mass, params.hbar);
    let e = &cfg.equivalence;
    let axis = Axis { n, ..cfg.grids.wave };
    let g = axis.interior();
    let coherent = |x: f64, t: f64| states::coherent_state(x, t, e.x0, e.p0, m, omega, hbar);
    let w0 = WaveFunction::from_fn(g, 0.0, &params, |x| coherent(x, 0.0))?;
    let t_final = e.periods * TAU / omega;
    let limit = dispersive_step_limit(&g, &params, &HydroOptions::default());
    let steps = (t_final / limit).ceil() as usize;
    let dt = t_final / steps as f64;
    let mut h = polar_decompose(&w0)?.state;
    let m0 = h.mass();
    for _ in 0..steps {
        h = step_madelung(&h, dt, &pot, &params)?;
    }
    let (w, _) = propagate(&w0, t_final, dt, &pot)?;
    Ok(Comparison {
        grid: g,
        mass_drift: (h.mass() - m0).abs(),
        schrod: w.density(),
        exact: g.points().iter().map(|&x| coherent(x, t_final).norm_sqr()).collect(),
        hydro: h.rho,
    })
}

pub fn run(cfg: &RunConfig, rec: &mut Recorder) -> Result<(), StageError> {
    let main = rec.stage("evolve", |rec| -> Result<Comparison, Error> {
        let c = compare(cfg, cfg.grids.wave.n)?;
        rec.diagnostic("linf_hydro_vs_schrod", c.vs_schrod());
        rec.diagnostic("linf_hydro_vs_exact", c.vs_exact());
        rec.diagnostic("linf_schrod_vs_exact", Comparison::linf(&c.schrod, &c.exact));
        rec.diagnostic("mass_drift", c.mass_drift);
        rec.check_below("linf_hydro_vs_schrod", c.vs_schrod(), cfg.tolerances.equivalence_linf);
        Ok(c)
    })?;
    rec.stage("write-density", |rec| {
        let xs = main.grid.points();
        rec.write_columns("density.csv", &["x", "rho_hydro", "rho_schrod", "rho_exact"], &[&xs, &main.hydro, &main.schrod, &main.exact])
    })?;
    rec.stage("refinement", |rec| -> Result<(), Error> {
        let ns = &cfg.equivalence.refinement;
        let mut vs_exact = Vec::with_capacity(ns.len());
        let mut vs_schrod = Vec::with_capacity(ns.len());
        for &n in ns {
            let c = if n == cfg.grids.wave.n { None } else { Some(compare(cfg, n)?) };
            let c = c.as_ref().unwrap_or(&main);
            vs_exact.push(c.vs_exact());
            vs_schrod.push(c.vs_schrod());
        }
        let orders: Vec<f64> = ns
            .windows(2)
            .zip(vs_exact.windows(2))
            .map(|(n, e)| (e[0] / e[1]).ln() / (n[1] as f64 / n[0] as f64).ln())
            .collect();
        let worst = orders.iter().cloned().fold(f64::INFINITY, f64::min);
        rec.diagnostic("refinement_min_order", worst);
        rec.check_above("refinement_order", worst, cfg.tolerances.refinement_order);
        let nf: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        let mut order_col = vec![f64::NAN];
        order_col.extend(&orders);
        rec.write_columns("refinement.csv", &["n", "linf_vs_exact", "linf_vs_schrod", "observed_order"], &[&nf, &vs_exact, &vs_schrod, &order_col])
            .map_err(|e| Error::Invalid(e.to_string()))
    })
}
