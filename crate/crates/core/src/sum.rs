//! Compensated reductions. Aggregates over ensemble members go through these
//! so results do not depend on accumulation error growth.

/// Neumaier-compensated sum.
pub fn kahan<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    kahan(values.iter().copied()) / values.len() as f64
}

/// Sample mean and unbiased variance.
pub fn mean_var(values: &[f64]) -> (f64, f64) {
    let m = mean(values);
    if values.len() < 2 {
        return (m, 0.0);
    }
    let v = kahan(values.iter().map(|x| (x - m) * (x - m))) / (values.len() - 1) as f64;
    (m, v)
}

/// Ordinary least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxy = kahan(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = kahan(x.iter().map(|a| (a - mx) * (a - mx)));
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut v = vec![1e16, 1.0, -1e16];
        v.extend(std::iter::repeat(1.0).take(10));
        assert_eq!(kahan(v), 11.0);
    }

    #[test]
    fn fit_recovers_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|t| 2.5 * t - 1.0).collect();
        let (s, c) = linear_fit(&x, &y);
        assert!((s - 2.5).abs() < 1e-12 && (c + 1.0).abs() < 1e-12);
    }
}
