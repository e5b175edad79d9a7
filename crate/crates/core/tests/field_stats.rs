use std::sync::Arc;

use sedqm_core::field::{build_mode_set, estimate_autocorrelation, field_psd, sample_realization, FieldRealization, ModeSet, SpectralConfig};
use sedqm_core::PhysicalParams;

fn unit() -> PhysicalParams {
    PhysicalParams::dimensionless_ho(1e-3)
}

fn band(n: usize, seed: u64) -> Arc<ModeSet> {
    Arc::new(build_mode_set(&SpectralConfig::band(1.0, 0.1, n, seed), &unit()).unwrap())
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn amplitudes_follow_the_spectrum() {
    let params = unit();
    let m = band(1000, 1);
    let dw = m.spacing();
    for (w, c) in m.frequencies().iter().zip(m.amplitudes()) {
        let expect = field_psd(*w, &params).unwrap() * dw;
        assert!((c * c - expect).abs() <= 1e-12 * expect);
    }
    // Riemann sum against the integral of w^3 over the band, up to the end corrections.
    let k = field_psd(1.0, &params).unwrap();
    let exact = k * (1.1f64.powi(4) - 0.9f64.powi(4)) / 4.0;
    let smax = field_psd(1.1, &params).unwrap();
    assert!((m.variance() - exact).abs() <= 2.0 * dw * smax, "{} {}", m.variance(), exact);
}

#[test]
fn coefficients_are_standard_normal() {
    let m = band(500, 7);
    let mut a = Vec::new();
    for i in 0..40 {
        let r = sample_realization(&m, i);
        a.extend_from_slice(r.cos_coefficients());
        a.extend_from_slice(r.sin_coefficients());
    }
    let (mean, var) = mean_var(&a);
    let se = (1.0 / a.len() as f64).sqrt();
    assert!(mean.abs() < 4.0 * se, "{mean}");
    assert!((var - 1.0).abs() < 4.0 * (2.0 / a.len() as f64).sqrt(), "{var}");
}

/// Jarque-Bera statistic: `n/6 (S^2 + (K - 3)^2 / 4)`, chi-squared with two
/// degrees of freedom under normality.
fn jarque_bera(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n;
    let m3 = v.iter().map(|a| (a - m).powi(3)).sum::<f64>() / n;
    let m4 = v.iter().map(|a| (a - m).powi(4)).sum::<f64>() / n;
    let s = m3 / m2.powf(1.5);
    let k = m4 / (m2 * m2);
    n / 6.0 * (s * s + (k - 3.0).powi(2) / 4.0)
}

#[test]
fn field_values_are_gaussian() {
    let m = band(1000, 3);
    let values: Vec<f64> = (0..10_000).map(|i| sample_realization(&m, i).eval(17.3)).collect();
    let jb = jarque_bera(&values);
    // 1% critical value of chi-squared(2).
    assert!(jb < 9.21, "{jb}");
    let (mean, var) = mean_var(&values);
    let sd = m.variance().sqrt();
    assert!(mean.abs() < 4.0 * sd / 100.0);
    assert!((var / m.variance() - 1.0).abs() < 4.0 * (2.0f64 / 10_000.0).sqrt());
}

#[test]
fn single_mode_correlation() {
    let m = Arc::new(ModeSet::from_parts(vec![1.3], vec![0.7], 11).unwrap());
    let rs: Vec<_> = (0..4000).map(|i| sample_realization(&m, i)).collect();
    let lags = [0.0, 0.5, 1.0, 2.0, 3.0];
    let est = estimate_autocorrelation(&rs, &lags, &[0.0, 5.0, 11.0]).unwrap();
    for (k, &lag) in lags.iter().enumerate() {
        let exact = 0.49 * (1.3 * lag).cos();
        assert!((est[k].mean - exact).abs() < 4.0 * est[k].std_error.max(1e-3), "{lag}: {} vs {exact}", est[k].mean);
        assert!((m.correlation(lag) - exact).abs() < 1e-14);
    }
}

#[test]
fn zero_lag_correlation_is_the_variance() {
    let m = band(1000, 5);
    let rs: Vec<_> = (0..400).map(|i| sample_realization(&m, i)).collect();
    let est = estimate_autocorrelation(&rs, &[0.0, 3.0], &[0.0, 1.0, 2.0, 7.5]).unwrap();
    assert!((est[0].mean - m.variance()).abs() < 3.0 * est[0].std_error, "{:?} {}", est, m.variance());
    assert!((est[1].mean - m.correlation(3.0)).abs() < 4.0 * est[1].std_error);
}

#[test]
fn periodogram_follows_cubic_spectrum() {
    // 100 modes over the band; projecting a record of one recurrence time onto
    // each mode frequency isolates that mode's power.
    let params = unit();
    let m = band(100, 21);
    let (h, count) = m.commensurate_half_step(0.25).unwrap();
    let t_rec = m.recurrence_time();
    let realizations = 120;
    let mut power = vec![0.0; m.len()];
    for i in 0..realizations {
        let r = sample_realization(&m, i);
        let e = r.sample_lattice(0.0, h, count);
        for (j, w) in m.frequencies().iter().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, v) in e.iter().enumerate() {
                let (s, c) = (w * h * n as f64).sin_cos();
                re += v * c;
                im += v * s;
            }
            let scale = 2.0 * h / t_rec;
            power[j] += ((re * scale).powi(2) + (im * scale).powi(2)) / 2.0;
        }
    }
    power.iter_mut().for_each(|p| *p /= realizations as f64);
    let dw = m.spacing();
    for chunk in 0..5 {
        let idx = chunk * 20..(chunk + 1) * 20;
        let est: f64 = power[idx.clone()].iter().sum();
        let expect: f64 = m.frequencies()[idx].iter().map(|w| field_psd(*w, &params).unwrap() * dw).sum();
        assert!((est / expect - 1.0).abs() < 0.2, "bin {chunk}: {est} vs {expect}");
    }
}

#[test]
fn realizations_depend_only_on_seed_and_index() {
    let a = band(200, 9);
    let b = band(200, 9);
    for i in [0u64, 5, 1_000_000] {
        let (ra, rb) = (sample_realization(&a, i), sample_realization(&b, i));
        assert_eq!(ra.cos_coefficients(), rb.cos_coefficients());
        let la = ra.sample_lattice(0.0, 0.1, 64);
        let lb = rb.sample_lattice(0.0, 0.1, 64);
        assert!(la.iter().zip(&lb).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert_ne!(sample_realization(&band(200, 10), 0).cos_coefficients(), sample_realization(&a, 0).cos_coefficients());
}

#[test]
fn linear_in_coefficients() {
    let m = band(30, 2);
    let r1 = sample_realization(&m, 0);
    let r2 = sample_realization(&m, 1);
    let sum = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| 2.0 * a - b).collect::<Vec<_>>();
    let r = FieldRealization::from_coefficients(
        Arc::clone(&m),
        sum(r1.cos_coefficients(), r2.cos_coefficients()),
        sum(r1.sin_coefficients(), r2.sin_coefficients()),
    )
    .unwrap();
    for t in [0.0, 1.5, 40.0] {
        assert!((r.eval(t) - (2.0 * r1.eval(t) - r2.eval(t))).abs() < 1e-12);
    }
}
