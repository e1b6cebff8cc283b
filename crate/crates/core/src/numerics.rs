//! Small numerical helpers shared across modules: composite quadrature,
//! least-squares fits, binomial intervals and smooth cutoffs.

/// Composite Simpson rule on a uniform grid with spacing `h`.
///
/// Falls back to Simpson on all but the last interval plus a trapezoid on the
/// last one when the number of intervals is odd.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (values[0] + values[1]),
        _ => {
            let intervals = n - 1;
            let even = intervals - intervals % 2;
            let mut acc = values[0] + values[even];
            for (i, v) in values.iter().enumerate().take(even).skip(1) {
                acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            let mut total = acc * h / 3.0;
            if even < intervals {
                total += 0.5 * h * (values[even] + values[even + 1]);
            }
            total
        }
    }
}

/// Simpson weights for `n` nodes with spacing `h`, consistent with [`simpson`].
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    if n < 2 {
        return w;
    }
    if n == 2 {
        w[0] = 0.5 * h;
        w[1] = 0.5 * h;
        return w;
    }
    let intervals = n - 1;
    let even = intervals - intervals % 2;
    w[0] = h / 3.0;
    w[even] = h / 3.0;
    for (i, wi) in w.iter_mut().enumerate().take(even).skip(1) {
        *wi = if i % 2 == 1 { 4.0 * h / 3.0 } else { 2.0 * h / 3.0 };
    }
    if even < intervals {
        w[even] += 0.5 * h;
        w[even + 1] += 0.5 * h;
    }
    w
}

/// Ordinary least-squares fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Root-mean-square residual.
    pub rms_residual: f64,
    pub n_points: usize,
}

impl LinearFit {
    /// Root of the fitted line, `x` where `intercept + slope * x = 0`.
    pub fn root(&self) -> f64 {
        -self.intercept / self.slope
    }
}

/// Returns `None` with fewer than two points or degenerate abscissae.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss_res = 0.0;
    for i in 0..n {
        let r = y[i] - (intercept + slope * x[i]);
        ss_res += r * r;
    }
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
        rms_residual: (ss_res / nf).sqrt(),
        n_points: n,
    })
}

/// Wilson score interval for a binomial proportion at `z` standard deviations.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let low = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let high = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    (low, high)
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

/// Quintic smoothstep on `[0, 1]`: C² with zero first and second derivatives
/// at both ends.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (t * (6.0 * t - 15.0) + 10.0)
    }
}

/// C^∞ transition from 1 (at `x <= inner`) to 0 (at `x >= outer`).
pub fn smooth_cutoff(x: f64, inner: f64, outer: f64) -> f64 {
    if x <= inner {
        return 1.0;
    }
    if x >= outer {
        return 0.0;
    }
    let s = (x - inner) / (outer - inner);
    let a = (-1.0 / (1.0 - s)).exp();
    let b = (-1.0 / s).exp();
    a / (a + b)
}

/// Standard normal upper tail `P(Z >= x)`.
pub fn normal_upper_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_cubics_exactly() {
        let n = 11;
        let h = 1.0 / 10.0;
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * h).powi(3)).collect();
        assert!((simpson(&v, h) - 0.25).abs() < 1e-15);
        let w = simpson_weights(n, h);
        let s: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!((s - 0.25).abs() < 1e-15);
    }

    #[test]
    fn simpson_odd_interval_count_is_consistent() {
        let h = 0.1;
        let v: Vec<f64> = (0..10).map(|i| i as f64 * h).collect();
        let w = simpson_weights(10, h);
        let s: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!((s - simpson(&v, h)).abs() < 1e-15);
        assert!((s - 0.405).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|x| 2.0 - 0.5 * x).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!((f.root() - 4.0).abs() < 1e-13);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn normal_tail_reference_values() {
        assert!((normal_upper_tail(2.0) - 0.022_750_131_948_179_2).abs() < 1e-14);
        assert!((normal_upper_tail(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn wilson_interval_contains_estimate() {
        let (lo, hi) = wilson_interval(5, 50, 1.96);
        assert!(lo < 0.1 && 0.1 < hi);
        assert_eq!(wilson_interval(0, 10, 1.96).0, 0.0);
    }

    #[test]
    fn cutoffs_hit_plateaus() {
        assert_eq!(smoothstep(-1.0), 0.0);
        assert_eq!(smoothstep(2.0), 1.0);
        assert!((smoothstep(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(smooth_cutoff(1.0, 2.0, 3.0), 1.0);
        assert_eq!(smooth_cutoff(3.5, 2.0, 3.0), 0.0);
        assert!((smooth_cutoff(2.5, 2.0, 3.0) - 0.5).abs() < 1e-15);
    }
}
