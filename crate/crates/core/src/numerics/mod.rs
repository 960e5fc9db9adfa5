//! Numerical substrate: random streams, Hermitian eigensolves, least-squares fits,
//! quadrature and a few dense kernels shared by the models.

pub mod eigen;
pub mod fit;
pub mod quad;
pub mod rng;
pub mod stats;

pub use eigen::{hermitian_eigh, hermitian_eigvals, symmetric_eigvals, Eigh};
pub use fit::{fit_entropy_scaling, fit_power_law, FitResult, PowerLawFit, ScalingTerms};
pub use quad::integrate_1d;
pub use rng::{gaussian_draw, replica_seed, RngStream};
pub use stats::{batch_means, normal_cdf, normal_pdf, MeanError};

/// `y = W x` for a row-major `rows x cols` matrix.
#[inline]
pub(crate) fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    for (r, out) in y.iter_mut().enumerate().take(rows) {
        let row = &w[r * cols..(r + 1) * cols];
        *out = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

/// `y += W^T x` for a row-major `rows x cols` matrix (`x` has `rows` entries).
#[inline]
pub(crate) fn matvec_t_acc(w: &[f64], rows: usize, cols: usize, x: &[f64], y: &mut [f64]) {
    for (r, &xr) in x.iter().enumerate().take(rows) {
        if xr == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (yc, wc) in y.iter_mut().zip(row) {
            *yc += wc * xr;
        }
    }
}

/// `G += a b^T` into a row-major `a.len() x b.len()` block.
#[inline]
pub(crate) fn outer_acc(g: &mut [f64], a: &[f64], b: &[f64]) {
    let cols = b.len();
    for (r, &ar) in a.iter().enumerate() {
        if ar == 0.0 {
            continue;
        }
        let row = &mut g[r * cols..(r + 1) * cols];
        for (gc, bc) in row.iter_mut().zip(b) {
            *gc += ar * bc;
        }
    }
}

/// Numerically stable `ln(e^a + e^b)`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}
