use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sedqm_core::phase_stats::{
    avg_momentum_fluctuation, dispersion_identity_residual, estimate_density, hierarchy_residuals, local_moments, Estimator, LocalMoments,
    PhaseDensity, SUPPORT_THRESHOLD,
};
use sedqm_core::{Grid1, Potential};

#[test]
fn kde_recovers_a_correlated_gaussian() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n01 = Normal::new(0.0, 1.0).unwrap();
    let (sx, sp, r) = (0.8, 1.1, 0.4);
    let n = 200_000;
    let mut xs = Vec::with_capacity(n);
    let mut ps = Vec::with_capacity(n);
    for _ in 0..n {
        let (a, b): (f64, f64) = (n01.sample(&mut rng), n01.sample(&mut rng));
        xs.push(sx * a);
        ps.push(sp * (r * a + (1.0 - r * r).sqrt() * b));
    }
    let xg = Grid1::linspace(-5.0, 5.0, 101).unwrap();
    let pg = Grid1::linspace(-6.0, 6.0, 121).unwrap();
    let q = estimate_density(&xs, &ps, &xg, &pg, Estimator::default()).unwrap();
    let det = 1.0 - r * r;
    let pdf = |x: f64, p: f64| {
        let (u, v) = (x / sx, p / sp);
        (-(u * u - 2.0 * r * u * v + v * v) / (2.0 * det)).exp() / (2.0 * PI * sx * sp * det.sqrt())
    };
    let peak = pdf(0.0, 0.0);
    let mut worst = 0.0f64;
    for (i, x) in xg.points().iter().enumerate() {
        for (j, p) in pg.points().iter().enumerate() {
            worst = worst.max((q.at(i, j) - pdf(*x, *p)).abs());
        }
    }
    assert!(worst <= 0.05 * peak, "{worst} vs {peak}");
    assert!((q.integral() - 1.0).abs() < 1e-10);
}

#[test]
fn ground_state_inputs_satisfy_the_dispersion_identity() {
    let g = Grid1::linspace(-6.0, 6.0, 241).unwrap();
    let rho: Vec<f64> = g.points().iter().map(|x| (-x * x).exp() / PI.sqrt()).collect();
    let m = LocalMoments::from_profiles(g, rho, vec![0.0; 241], vec![0.5; 241], SUPPORT_THRESHOLD).unwrap();
    let r = dispersion_identity_residual(&m, 0.5).unwrap();
    assert!(r.linf <= 1e-6, "{}", r.linf);
    assert_eq!(r.components.len(), 1);
}

#[test]
fn classical_uniform_ensemble_violates_it_by_its_variance() {
    let g = Grid1::linspace(0.0, 4.0, 81).unwrap();
    for v in [0.1, 0.7, 2.0] {
        let m = LocalMoments::from_profiles(g, vec![0.25; 81], vec![0.3; 81], vec![v + 0.09; 81], SUPPORT_THRESHOLD).unwrap();
        let r = dispersion_identity_residual(&m, 0.5).unwrap();
        assert!(r.residual.iter().all(|x| (x - v).abs() < 1e-12));
    }
}

#[test]
fn first_excited_state_away_from_the_node() {
    // rho = 2 x^2 e^{-x^2} / sqrt(pi): d^2 ln rho = -2/x^2 - 2.
    let g = Grid1::linspace(-6.0, 6.0, 2401).unwrap();
    let xs = g.points();
    let rho: Vec<f64> = xs.iter().map(|x| 2.0 * x * x * (-x * x).exp() / PI.sqrt()).collect();
    let var: Vec<f64> = xs.iter().map(|x| if *x == 0.0 { 0.0 } else { 0.25 * (2.0 / (x * x) + 2.0) }).collect();
    let m = LocalMoments::from_profiles(g, rho, vec![0.0; 2401], var, SUPPORT_THRESHOLD).unwrap();
    let r = dispersion_identity_residual(&m, 0.5).unwrap();
    assert_eq!(r.components.len(), 2);
    let worst = xs.iter().zip(&r.residual).filter(|(x, v)| x.abs() > 0.5 && v.is_finite()).fold(0.0f64, |a, (_, v)| a.max(v.abs()));
    assert!(worst <= 1e-4, "{worst}");
}

#[test]
fn stationary_ground_state_hierarchy() {
    let g = Grid1::linspace(-6.0, 6.0, 241).unwrap();
    let rho: Vec<f64> = g.points().iter().map(|x| (-x * x).exp() / PI.sqrt()).collect();
    let m = LocalMoments::from_profiles(g, rho, vec![0.0; 241], vec![0.5; 241], SUPPORT_THRESHOLD).unwrap();
    let series = vec![m.clone(), m.clone(), m];
    let r = hierarchy_residuals(&series, 0.1, &Potential::harmonic(1.0, 1.0), 1.0).unwrap();
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].continuity_linf, 0.0);
    // The momentum residual is the truncation error of the centered derivative.
    assert!(r[0].momentum_linf <= 1e-3, "{}", r[0].momentum_linf);
    let fine = Grid1::linspace(-6.0, 6.0, 2401).unwrap();
    let rho: Vec<f64> = fine.points().iter().map(|x| (-x * x).exp() / PI.sqrt()).collect();
    let m = LocalMoments::from_profiles(fine, rho, vec![0.0; 2401], vec![0.5; 2401], SUPPORT_THRESHOLD).unwrap();
    let r = hierarchy_residuals(&[m.clone(), m.clone(), m], 0.1, &Potential::harmonic(1.0, 1.0), 1.0).unwrap();
    assert!(r[0].momentum_linf <= 1e-5, "{}", r[0].momentum_linf);
}

/// Free Gaussian packet with hbar = m = 1: density width `s(t)`, velocity
/// field and local momentum variance `1/(4 s^2)`.
fn free_packet(g: Grid1, t: f64, s0: f64, x0: f64, p0: f64) -> LocalMoments {
    let s2 = s0 * s0 + t * t / (4.0 * s0 * s0);
    let xc = x0 + p0 * t;
    let mut rho = Vec::new();
    let mut m1 = Vec::new();
    let mut m2 = Vec::new();
    for x in g.points() {
        let d = x - xc;
        rho.push((-d * d / (2.0 * s2)).exp() / (2.0 * PI * s2).sqrt());
        let v = p0 + d * t / (4.0 * s0 * s0 * s2);
        m1.push(v);
        m2.push(v * v + 0.25 / s2);
    }
    LocalMoments::from_profiles(g, rho, m1, m2, SUPPORT_THRESHOLD).unwrap()
}

fn free_residual(n: usize, dt: f64) -> (f64, f64) {
    let g = Grid1::linspace(-12.0, 12.0, n).unwrap();
    let series: Vec<_> = (0..3).map(|k| free_packet(g, 1.0 + (k as f64 - 1.0) * dt, 0.7, -1.0, 0.8)).collect();
    let r = hierarchy_residuals(&series, dt, &Potential::Free, 1.0).unwrap();
    (r[0].continuity_linf, r[0].momentum_linf)
}

#[test]
fn free_packet_hierarchy_is_second_order() {
    let coarse = free_residual(241, 0.1);
    let fine = free_residual(481, 0.05);
    let finer = free_residual(961, 0.025);
    for (a, b) in [(coarse, fine), (fine, finer)] {
        assert!(a.0 / b.0 > 3.5 && a.1 / b.1 > 3.5, "{a:?} {b:?}");
    }
    let h = 24.0 / 960.0;
    let bound = 1.0 * (h * h + 0.025 * 0.025);
    assert!(finer.0 <= bound && finer.1 <= bound, "{finer:?} {bound}");
}

#[test]
fn ground_state_fluctuation_forms() {
    let g = Grid1::linspace(-10.0, 10.0, 4001).unwrap();
    let rho: Vec<f64> = g.points().iter().map(|x| (-x * x).exp() / PI.sqrt()).collect();
    let f = avg_momentum_fluctuation(&g, &rho, 0.5).unwrap();
    assert!((f.curvature_form - 0.5).abs() < 1e-8);
    assert!((f.gradient_form - 0.5).abs() < 1e-8);
}

#[test]
fn compact_bump_fluctuation_forms() {
    let g = Grid1::linspace(-2.0, 2.0, 4001).unwrap();
    let rho: Vec<f64> = g.points().iter().map(|x| if x.abs() < 1.0 { (1.0 - x * x).powi(6) } else { 0.0 }).collect();
    let f = avg_momentum_fluctuation(&g, &rho, 0.5).unwrap();
    assert!(((f.curvature_form - f.gradient_form) / f.curvature_form).abs() <= 1e-8, "{f:?}");
}

fn random_density(a: f64, s: f64, c: f64, k: f64, phi: f64) -> (Grid1, Vec<f64>) {
    let g = Grid1::linspace(-15.0, 15.0, 3001).unwrap();
    let rho = g.points().iter().map(|x| (-(x - a).powi(2) / (2.0 * s * s)).exp() * (1.0 + c * (k * x + phi).sin())).collect();
    (g, rho)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fluctuation_forms_agree(a in -1.0f64..1.0, s in 0.5f64..1.5, c in 0.0f64..0.5, k in 0.5f64..3.0, phi in 0.0f64..6.0) {
        let (g, rho) = random_density(a, s, c, k, phi);
        let f = avg_momentum_fluctuation(&g, &rho, 0.5).unwrap();
        prop_assert!(((f.curvature_form - f.gradient_form) / f.curvature_form).abs() <= 1e-8);
        prop_assert!(f.gradient_form > 0.0);
    }

    #[test]
    fn total_variance_splits(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Grid1::linspace(-1.0, 1.0, 9).unwrap();
        let p = Grid1::linspace(-2.0, 3.0, 11).unwrap();
        let u = rand_distr::Uniform::new(0.01, 1.0);
        let values: Vec<f64> = (0..99).map(|_| u.sample(&mut rng)).collect();
        let q = PhaseDensity::from_values(x, p, values).unwrap();
        let m = local_moments(&q);
        let ps = p.points();
        let mut total = 0.0;
        let mut mean = 0.0;
        let mut mean2 = 0.0;
        for i in 0..x.len() {
            for j in 0..p.len() {
                // Trapezoid weights, as used by the grid quadrature.
                let wx = if i == 0 || i + 1 == x.len() { 0.5 } else { 1.0 };
                let wp = if j == 0 || j + 1 == p.len() { 0.5 } else { 1.0 };
                let w = q.at(i, j) * wx * wp;
                total += w;
                mean += w * ps[j];
                mean2 += w * ps[j] * ps[j];
            }
        }
        let var = mean2 / total - (mean / total).powi(2);
        let within = x.integrate(&m.rho.iter().zip(&m.var_p).map(|(r, v)| r * v).collect::<Vec<_>>());
        let between = x.integrate(&m.rho.iter().zip(&m.mean_p).map(|(r, a)| r * (a - mean / total).powi(2)).collect::<Vec<_>>());
        let norm = x.integrate(&m.rho);
        prop_assert!(((within + between) / norm - var).abs() <= 1e-10 * var.abs().max(1.0));
    }

    #[test]
    fn moments_are_consistent(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Grid1::linspace(-1.0, 1.0, 7).unwrap();
        let p = Grid1::linspace(-2.0, 2.0, 15).unwrap();
        let u = rand_distr::Uniform::new(0.0, 1.0);
        let values: Vec<f64> = (0..105).map(|_| u.sample(&mut rng)).collect();
        let q = PhaseDensity::from_values(x, p, values).unwrap();
        let m = local_moments(&q);
        for i in 0..x.len() {
            prop_assert!(m.var_p[i] >= -1e-12);
            prop_assert!((m.mean_p2[i] - m.mean_p[i].powi(2) - m.var_p[i]).abs() < 1e-12);
        }
    }
}
