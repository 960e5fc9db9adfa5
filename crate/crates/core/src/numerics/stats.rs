use serde::{Deserialize, Serialize};

/// Standard normal density.
#[inline]
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF, `Phi(z) = erfc(-z / sqrt 2) / 2`.
///
/// `erfc` (musl's implementation via `libm`) keeps full relative precision in the
/// lower tail, so `Phi(-40)` is accurate rather than rounding to zero early.
#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanError {
    pub mean: f64,
    pub stderr: f64,
}

/// Mean and batch-means standard error of a sequence.
///
/// The sequence is cut into `n_batches` contiguous batches of equal length (the
/// remainder is folded into the mean but not the error estimate). With fewer values
/// than batches every value forms its own batch.
pub fn batch_means(values: &[f64], n_batches: usize) -> MeanError {
    let n = values.len();
    if n == 0 {
        return MeanError {
            mean: f64::NAN,
            stderr: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let nb = n_batches.clamp(1, n);
    if nb < 2 {
        return MeanError { mean, stderr: 0.0 };
    }
    let size = n / nb;
    let bm: Vec<f64> = values
        .chunks_exact(size)
        .take(nb)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let m = bm.iter().sum::<f64>() / nb as f64;
    let var = bm.iter().map(|b| (b - m).powi(2)).sum::<f64>() / (nb - 1) as f64;
    MeanError {
        mean,
        stderr: (var / nb as f64).sqrt(),
    }
}
