use std::f64::consts::PI;
use std::sync::Arc;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sedqm_core::ensemble::{evolve_ensemble, max_step, Drive, Ensemble, ParticleState};
use sedqm_core::field::{build_mode_set, sample_realization, SpectralConfig};
use sedqm_core::phase_stats::{estimate_density, Estimator};
use sedqm_core::schrod::WaveFunction;
use sedqm_core::varmin::{minimize_ground_state, VarminOptions};
use sedqm_core::wigner::wigner_transform;
use sedqm_core::{Complex64, Grid1, PhysicalParams, Potential};

fn params() -> PhysicalParams {
    PhysicalParams::dimensionless_ho(1e-3)
}

fn field_lattice(c: &mut Criterion) {
    let p = params();
    let modes = Arc::new(build_mode_set(&SpectralConfig::band(1.0, 0.1, 1000, 42), &p).unwrap());
    let (h, _) = modes.commensurate_half_step(0.25 * max_step(&modes)).unwrap();
    let r = sample_realization(&modes, 0);
    c.bench_function("field lattice, 1000 modes, 2^16 points", |b| b.iter(|| black_box(r.sample_lattice(0.0, h, 1 << 16))));
}

fn ensemble_evolve(c: &mut Criterion) {
    let p = params();
    let modes = Arc::new(build_mode_set(&SpectralConfig::band(1.0, 0.1, 1000, 42), &p).unwrap());
    let (h, _) = modes.commensurate_half_step(0.25 * max_step(&modes)).unwrap();
    let e = Ensemble {
        states: vec![ParticleState { x: 0.0, p: 0.0, t: 0.0 }; 64],
        params: p,
        potential: Potential::harmonic(1.0, 1.0),
        drive: Drive::Zpf { modes, first_index: 0 },
    };
    let mut g = c.benchmark_group("ensemble");
    g.sample_size(10);
    g.bench_function("64 members to t = 200", |b| b.iter(|| black_box(evolve_ensemble(&e, 200.0, 2.0 * h, &[200.0]).unwrap())));
    g.finish();
}

fn kde(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 50_000;
    let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let p: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let xg = Grid1::linspace(-4.0, 4.0, 161).unwrap();
    let pg = Grid1::linspace(-4.0, 4.0, 161).unwrap();
    let mut g = c.benchmark_group("phase density");
    g.sample_size(10);
    g.bench_function("KDE, 50k samples, 161x161", |b| b.iter(|| black_box(estimate_density(&x, &p, &xg, &pg, Estimator::default()).unwrap())));
    g.finish();
}

fn wigner(c: &mut Criterion) {
    let g = Grid1::box_interior(-10.0, 10.0, 512).unwrap();
    let w = WaveFunction::from_fn(g, 0.0, &params(), |x| Complex64::new(PI.powf(-0.25) * (-x * x / 2.0).exp(), 0.0)).unwrap();
    let pg = Grid1::linspace(-6.0, 6.0, 241).unwrap();
    let mut g = c.benchmark_group("wigner");
    g.sample_size(10);
    g.bench_function("transform, 512 x 241", |b| b.iter(|| black_box(wigner_transform(&w, &pg).unwrap())));
    g.finish();
}

fn varmin(c: &mut Criterion) {
    let g = Grid1::box_interior(-4.0, 4.0, 255).unwrap();
    let pot = Potential::quartic(0.0, 1.0);
    let p = params();
    let opts = VarminOptions::default();
    c.bench_function("varmin, quartic, 255 points", |b| b.iter(|| black_box(minimize_ground_state(&pot, &g, &p, &opts).unwrap())));
}

criterion_group!(benches, field_lattice, ensemble_evolve, kde, wigner, varmin);
criterion_main!(benches);
