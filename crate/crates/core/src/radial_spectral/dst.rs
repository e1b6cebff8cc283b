//! Type-I discrete sine transform through a complex FFT of the odd extension.

use std::cell::RefCell;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized DST-I: `out[k-1] = Σ_{j=1}^{m} x[j-1] sin(π j k / (m+1))`
/// for `k = 1..=m`. Applying it twice multiplies by `(m+1)/2`.
pub fn dst1(x: &[f64]) -> Vec<f64> {
    let m = x.len();
    if m == 0 {
        return Vec::new();
    }
    let n = m + 1;
    let len = 2 * n;
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for (j, &v) in x.iter().enumerate() {
        buf[j + 1].re = v;
        buf[len - j - 1].re = -v;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len));
    fft.process(&mut buf);
    buf[1..=m].iter().map(|c| -0.5 * c.im).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[f64]) -> Vec<f64> {
        let m = x.len();
        (1..=m)
            .map(|k| {
                (1..=m)
                    .map(|j| x[j - 1] * (std::f64::consts::PI * (j * k) as f64 / (m + 1) as f64).sin())
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_direct_sum() {
        let x: Vec<f64> = (0..37).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let fast = dst1(&x);
        let slow = naive(&x);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn involution_up_to_scale() {
        let x: Vec<f64> = (0..63).map(|i| (i as f64 * 0.37).cos()).collect();
        let y = dst1(&dst1(&x));
        for (a, b) in x.iter().zip(&y) {
            assert!((a * 32.0 - b).abs() < 1e-11);
        }
    }
}
