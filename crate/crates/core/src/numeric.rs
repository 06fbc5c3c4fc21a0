//! Summation helpers with a fixed reduction order.
//!
//! Every estimator in the crate evaluates its terms (possibly in parallel)
//! into an ordered buffer and then reduces that buffer with [`pairwise_sum`].
//! The reduction tree depends only on the buffer length, so results are
//! bit-identical regardless of the number of worker threads.

use num_complex::Complex64;
use std::ops::Add;

const BLOCK: usize = 8;

/// Pairwise (cascade) summation over a fixed binary tree.
pub fn pairwise_sum<T>(values: &[T]) -> T
where
    T: Copy + Add<Output = T> + Default,
{
    if values.len() <= BLOCK {
        let mut acc = T::default();
        for &v in values {
            acc = acc + v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn pairwise_sum_c(values: &[Complex64]) -> Complex64 {
    pairwise_sum(values)
}

/// `e^{2πiθ}`.
#[inline]
pub fn cis_turns(theta: f64) -> Complex64 {
    let (s, c) = (std::f64::consts::TAU * theta).sin_cos();
    Complex64::new(c, s)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Sample mean and standard error from contiguous batch means.
pub fn batch_means(values: &[Complex64], batches: usize) -> (Complex64, f64) {
    let n = values.len();
    let mean = pairwise_sum(values) / n as f64;
    let b = batches.min(n);
    if b < 2 {
        return (mean, f64::NAN);
    }
    let means: Vec<Complex64> = (0..b)
        .map(|i| {
            let lo = i * n / b;
            let hi = (i + 1) * n / b;
            pairwise_sum(&values[lo..hi]) / (hi - lo) as f64
        })
        .collect();
    let grand = pairwise_sum(&means) / b as f64;
    let var: f64 = means.iter().map(|m| (m - grand).norm_sqr()).sum::<f64>() / (b - 1) as f64;
    (mean, (var / b as f64).sqrt())
}

/// `sin(x)/x` with the removable singularity filled in.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `(e^{iz} - 1)/(iz)`, i.e. `∫_0^1 e^{izs} ds`.
#[inline]
pub fn expm1_over(z: f64) -> Complex64 {
    if z.abs() < 1e-4 {
        // 1 + iz/2 - z²/6 - iz³/24
        let z2 = z * z;
        Complex64::new(1.0 - z2 / 6.0, z / 2.0 - z * z2 / 24.0)
    } else {
        let e = Complex64::new(z.cos() - 1.0, z.sin());
        e / Complex64::new(0.0, z)
    }
}
