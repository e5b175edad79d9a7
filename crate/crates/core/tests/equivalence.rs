//! Madelung evolution against the Schrödinger reference and the analytic
//! coherent state.

use std::f64::consts::TAU;

use sedqm_core::hydro::{self, HydroOptions, HydroState};
use sedqm_core::schrod::{self, WaveFunction};
use sedqm_core::{states, Grid1, PhysicalParams, Potential};

fn unit() -> PhysicalParams {
    PhysicalParams::dimensionless_ho(1e-3)
}

/// Max density error of the Madelung evolution over one period, against the
/// split-step solution and against the exact coherent state.
fn coherent_errors(n: usize) -> (f64, f64) {
    let params = unit();
    let pot = Potential::harmonic(1.0, 1.0);
    let g = Grid1::box_interior(-10.0, 10.0, n).unwrap();
    let (x0, p0) = (1.5, 0.5);
    let w0 = WaveFunction::from_fn(g, 0.0, &params, |x| states::coherent_state(x, 0.0, x0, p0, 1.0, 1.0, 1.0)).unwrap();
    let mut h = schrod::polar_decompose(&w0).unwrap().state;
    let limit = hydro::dispersive_step_limit(&g, &params, &HydroOptions::default());
    let steps = (TAU / limit).ceil() as usize;
    let dt = TAU / steps as f64;
    for _ in 0..steps {
        h = hydro::step_madelung(&h, dt, &pot, &params).unwrap();
    }
    let (w, _) = schrod::propagate(&w0, TAU, dt, &pot).unwrap();
    let rho_s = w.density();
    let vs_schrod = h.rho.iter().zip(&rho_s).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    let vs_exact = g.points().iter().zip(&h.rho).fold(0.0f64, |a, (&x, r)| {
        a.max((r - states::coherent_state(x, TAU, x0, p0, 1.0, 1.0, 1.0).norm_sqr()).abs())
    });
    (vs_schrod, vs_exact)
}

#[test]
fn coherent_state_density_agrees_over_one_period() {
    let (vs_schrod, vs_exact) = coherent_errors(512);
    println!("n=512: |rho_h - rho_s| = {vs_schrod:e}, |rho_h - rho_exact| = {vs_exact:e}");
    assert!(vs_schrod <= 1e-3);
}

/// Interior stencils are fourth order and the mask edges second order, so
/// the global rate is at least two.
#[test]
fn madelung_error_shrinks_under_refinement() {
    let errs: Vec<f64> = [128, 256, 512].iter().map(|&n| coherent_errors(n).1).collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        println!("{:e} -> {:e}: observed order {order:.2}", w[0], w[1]);
        assert!(order >= 1.8);
    }
}

#[test]
fn mass_is_conserved() {
    let params = unit();
    let g = Grid1::box_interior(-10.0, 10.0, 256).unwrap();
    let rho: Vec<f64> = g.points().iter().map(|&x| states::coherent_state(x, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0).norm_sqr()).collect();
    let mut h = HydroState::new(g, rho, vec![0.0; g.len()], 0.0).unwrap();
    let m0 = h.mass();
    let dt = hydro::dispersive_step_limit(&g, &params, &HydroOptions::default());
    for _ in 0..1000 {
        h = hydro::step_madelung(&h, dt, &Potential::harmonic(1.0, 1.0), &params).unwrap();
    }
    assert!((h.mass() - m0).abs() <= 1e-6);
}
