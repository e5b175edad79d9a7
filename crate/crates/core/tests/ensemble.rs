use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sedqm_core::ensemble::{
    balance_report, calibrate_beta, energy_decay_rate, evolve_ensemble, max_step, snapshot_energy, step_trajectory, CalibrationOptions, Drive,
    Ensemble, ParticleState, Snapshot,
};
use sedqm_core::field::{build_mode_set, SpectralConfig};
use sedqm_core::params::calibrated_coupling;
use sedqm_core::{Grid1, PhysicalParams, Potential};

fn ho() -> Potential {
    Potential::harmonic(1.0, 1.0)
}

fn ring(n: usize, radius: f64) -> Vec<ParticleState> {
    (0..n)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / n as f64;
            ParticleState { x: radius * th.cos(), p: radius * th.sin(), t: 0.0 }
        })
        .collect()
}

fn sed(params: PhysicalParams, n_modes: usize, members: usize, seed: u64) -> (Ensemble, f64) {
    let modes = Arc::new(build_mode_set(&SpectralConfig::band(1.0, 0.1, n_modes, seed), &params).unwrap());
    let (h, _) = modes.commensurate_half_step(0.25 * max_step(&modes)).unwrap();
    let e = Ensemble {
        states: vec![ParticleState { x: 0.0, p: 0.0, t: 0.0 }; members],
        params,
        potential: ho(),
        drive: Drive::Zpf { modes, first_index: 0 },
    };
    (e, 2.0 * h)
}

#[test]
fn free_ballistic_snapshots() {
    let params = PhysicalParams::dimensionless_ho(0.0);
    let e = Ensemble {
        states: vec![ParticleState { x: 0.5, p: -2.0, t: 0.0 }],
        params,
        potential: Potential::Free,
        drive: Drive::None,
    };
    let snaps = evolve_ensemble(&e, 3.0, 0.01, &[0.0, 1.0, 3.0]).unwrap();
    for s in &snaps {
        assert!((s.x[0] - (0.5 - 2.0 * s.t)).abs() < 1e-12 && (s.p[0] + 2.0).abs() < 1e-15);
    }
}

#[test]
fn weak_damping_decays_exponentially() {
    let params = PhysicalParams::dimensionless_ho(1e-3);
    let dt = 2.0 * PI / 200.0;
    let mut s = ParticleState { x: 1.0, p: 0.0, t: 0.0 };
    let energy = |s: &ParticleState| 0.5 * (s.x * s.x + s.p * s.p);
    let e0 = energy(&s);
    for k in 1..=4000 {
        s = step_trajectory(s, None, dt, &ho(), &params).unwrap();
        if k % 1000 == 0 {
            let expect = e0 * (-1e-3 * s.t).exp();
            assert!((energy(&s) / expect - 1.0).abs() < 0.01, "t={} {} vs {expect}", s.t, energy(&s));
        }
    }
}

#[test]
fn conservative_limit_keeps_energy() {
    let params = PhysicalParams::dimensionless_ho(0.0);
    let dt = 2.0 * PI / 200.0;
    let e = Ensemble { states: ring(8, 1.3), params, potential: ho(), drive: Drive::None };
    let t_final = 100.0 * 2.0 * PI;
    let snaps = evolve_ensemble(&e, t_final, dt, &[0.0, t_final]).unwrap();
    for i in 0..8 {
        let h0 = 0.5 * (snaps[0].x[i].powi(2) + snaps[0].p[i].powi(2));
        let h1 = 0.5 * (snaps[1].x[i].powi(2) + snaps[1].p[i].powi(2));
        assert!(((h1 - h0) / h0).abs() <= 1e-6, "{i}: {}", (h1 - h0) / h0);
    }
    let window: Vec<Snapshot> = evolve_ensemble(&e, 50.0, dt, &(0..20).map(|k| k as f64 * 2.5).collect::<Vec<_>>()).unwrap();
    let b = balance_report(&window, &ho(), &params).unwrap();
    assert_eq!(b.dissipated_power, 0.0);
    assert!(b.energy_slope.abs() < 1e-9, "{}", b.energy_slope);
}

#[test]
fn pure_dissipation_balance() {
    let params = PhysicalParams::dimensionless_ho(1e-3);
    let e = Ensemble { states: ring(64, 1.0), params, potential: ho(), drive: Drive::None };
    let times: Vec<f64> = (0..=40).map(|k| k as f64 * 50.0).collect();
    let snaps = evolve_ensemble(&e, 2000.0, 2.0 * PI / 200.0, &times).unwrap();
    // A linear slope only tracks the decay over a window short against 1/tau.
    let b = balance_report(&snaps[..5], &ho(), &params);
    assert!(b.is_err());
    let short: Vec<f64> = (0..=20).map(|k| k as f64 * 10.0).collect();
    let b = balance_report(&evolve_ensemble(&e, 200.0, 2.0 * PI / 200.0, &short).unwrap(), &ho(), &params).unwrap();
    assert!((b.imbalance + 1.0).abs() < 0.05, "{b:?}");
    let rate = energy_decay_rate(&snaps, &ho(), &params).unwrap();
    assert!((rate / 1e-3 - 1.0).abs() < 0.05, "{rate}");
}

#[test]
fn beta_from_exact_ground_state_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = Normal::new(0.0, 0.5f64.sqrt()).unwrap();
    let n = 40_000;
    let x: Vec<f64> = (0..n).map(|_| g.sample(&mut rng)).collect();
    let p: Vec<f64> = (0..n).map(|_| g.sample(&mut rng)).collect();
    let params = PhysicalParams::dimensionless_ho(0.0);
    let xg = Grid1::linspace(-4.0, 4.0, 161).unwrap();
    let pg = Grid1::linspace(-4.0, 4.0, 161).unwrap();
    let b = calibrate_beta(&[Snapshot { t: 0.0, x, p }], &ho(), &params, &xg, &pg, &CalibrationOptions::default()).unwrap();
    assert!((b.beta - 0.5).abs() < 0.05, "{b:?}");
}

#[test]
fn calibration_rejects_small_or_drifting_input() {
    let params = PhysicalParams::dimensionless_ho(0.0);
    let xg = Grid1::linspace(-4.0, 4.0, 81).unwrap();
    let small = Snapshot { t: 0.0, x: vec![0.1; 10], p: vec![0.0; 10] };
    assert!(calibrate_beta(&[small], &ho(), &params, &xg, &xg, &CalibrationOptions::default()).is_err());
    let a = Snapshot { t: 0.0, x: vec![0.5; 1500], p: vec![0.0; 1500] };
    let b = Snapshot { t: 1.0, x: vec![1.5; 1500], p: vec![0.0; 1500] };
    let err = calibrate_beta(&[a, b], &ho(), &params, &xg, &xg, &CalibrationOptions::default()).unwrap_err();
    assert!(matches!(err, sedqm_core::Error::NotStationary { .. }), "{err:?}");
}

#[test]
fn response_is_linear_in_coupling() {
    let mut params = PhysicalParams::dimensionless_ho(1e-2);
    params.coupling = calibrated_coupling(1.0, 1.0, 1e-2);
    let (e1, dt) = sed(params, 200, 40, 3);
    let mut e2 = e1.clone();
    e2.params.coupling *= 2.0;
    let s1 = evolve_ensemble(&e1, 500.0, dt, &[500.0]).unwrap();
    let s2 = evolve_ensemble(&e2, 500.0, dt, &[500.0]).unwrap();
    let x2 = |s: &Snapshot| s.x.iter().map(|x| x * x).sum::<f64>();
    assert!((x2(&s2[0]) / x2(&s1[0]) - 4.0).abs() < 1e-9);
}

#[test]
fn driven_oscillator_relaxes_to_half_quantum() {
    let tau = 1e-2;
    let (e, dt) = sed(PhysicalParams::dimensionless_ho(tau), 400, 600, 11);
    let t_final = 20.0 / tau;
    let times: Vec<f64> = (0..=40).map(|k| k as f64 * t_final / 40.0).collect();
    let snaps = evolve_ensemble(&e, t_final, dt, &times).unwrap();
    let window = &snaps[20..];
    let b = balance_report(window, &ho(), &e.params).unwrap();
    assert!((b.mean_energy - 0.5).abs() < 0.05, "{b:?}");
    assert!(b.imbalance.abs() < 0.15, "{b:?}");
    let last = snaps.last().unwrap();
    let n = last.len() as f64;
    let mean = last.x.iter().sum::<f64>() / n;
    let var = last.x.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() < 3.0 * (var / n).sqrt(), "{mean}");
    let halves: Vec<f64> = [&window[..10], &window[10..]].iter().map(|w| w.iter().map(|s| snapshot_energy(&s.x, &s.p, &ho(), &e.params)).sum::<f64>() / w.len() as f64).collect();
    assert!((halves[0] - halves[1]).abs() / halves[0] < 0.05);
}

#[test]
fn evolution_is_deterministic_across_thread_counts() {
    let (e, dt) = sed(PhysicalParams::dimensionless_ho(1e-2), 100, 16, 5);
    let a = evolve_ensemble(&e, 60.0, dt, &[30.0, 60.0]).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| evolve_ensemble(&e, 60.0, dt, &[30.0, 60.0]).unwrap());
    for (u, v) in a.iter().zip(&b) {
        assert!(u.x.iter().zip(&v.x).all(|(p, q)| p.to_bits() == q.to_bits()));
        assert!(u.p.iter().zip(&v.p).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
