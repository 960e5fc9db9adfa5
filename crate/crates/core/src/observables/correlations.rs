//! Connected `sigma^z` correlations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelSpec, Network, ParameterSet};
use crate::numerics::RngStream;
use crate::sampling::sample_any;

pub const CORRELATION_BATCHES: usize = 50;

/// Correlation decay with separation: `|<s_i s_j>_c|` is averaged over all pairs at
/// distance `d` (and over replicas when curves are combined) before taking the log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCurve {
    pub distances: Vec<usize>,
    pub mean_abs_corr: Vec<f64>,
    /// `ln` of `mean_abs_corr`.
    pub mean_log_abs_corr: Vec<f64>,
    /// Error of `mean_log_abs_corr`.
    pub stderr: Vec<f64>,
}

impl CorrelationCurve {
    fn from_abs(distances: Vec<usize>, mean_abs: Vec<f64>, abs_stderr: Vec<f64>) -> Self {
        let stderr = mean_abs.iter().zip(&abs_stderr).map(|(m, e)| e / m).collect();
        Self {
            distances,
            mean_log_abs_corr: mean_abs.iter().map(|m| m.ln()).collect(),
            mean_abs_corr: mean_abs,
            stderr,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub l: usize,
    /// Row-major `L x L` connected correlations; the diagonal holds `1 - <s_i>^2`.
    pub matrix: Vec<f64>,
    pub matrix_stderr: Vec<f64>,
    pub curve: CorrelationCurve,
}

impl Correlations {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.l + j]
    }
}

#[inline]
fn z(s: u8) -> f64 {
    1.0 - 2.0 * s as f64
}

/// Connected matrix from sample rows weighted by `w` (weights sum to one).
fn connected<'a>(l: usize, rows: impl Iterator<Item = (&'a [u8], f64)>) -> Vec<f64> {
    let mut m1 = vec![0.0; l];
    let mut m2 = vec![0.0; l * l];
    for (row, w) in rows {
        for i in 0..l {
            let zi = w * z(row[i]);
            m1[i] += zi;
            for j in i..l {
                m2[i * l + j] += zi * z(row[j]);
            }
        }
    }
    let mut c = vec![0.0; l * l];
    for i in 0..l {
        for j in i..l {
            let v = m2[i * l + j] - m1[i] * m1[j];
            c[i * l + j] = v;
            c[j * l + i] = v;
        }
    }
    c
}

fn curve_values(l: usize, c: &[f64]) -> Vec<f64> {
    (1..l)
        .map(|d| {
            let sum: f64 = (0..l - d).map(|i| c[i * l + i + d].abs()).sum();
            sum / (l - d) as f64
        })
        .collect()
}

fn spread(estimates: &[Vec<f64>], k: usize) -> f64 {
    let nb = estimates.len() as f64;
    let m = estimates.iter().map(|e| e[k]).sum::<f64>() / nb;
    let var = estimates.iter().map(|e| (e[k] - m).powi(2)).sum::<f64>() / (nb - 1.0);
    (var / nb).sqrt()
}

/// Monte Carlo estimate over `n_samples` configurations; errors from batch means.
pub fn connected_correlations(
    spec: &ModelSpec,
    params: &ParameterSet,
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<Correlations> {
    connected_correlations_net(&Network::new(spec, params)?, n_samples, rng)
}

pub fn connected_correlations_net(net: &Network, n_samples: usize, rng: &mut RngStream) -> Result<Correlations> {
    if n_samples < 1000 {
        return Err(Error::InvalidArgument(format!("{n_samples} samples; at least 1000 needed")));
    }
    let l = net.n_sites();
    if l < 2 {
        return Err(Error::InvalidArgument("correlations need at least two sites".into()));
    }
    let batch = sample_any(net, n_samples, rng)?;
    let n = batch.len();
    let matrix = connected(l, batch.rows().map(|r| (r, 1.0 / n as f64)));

    let size = n / CORRELATION_BATCHES;
    let per_batch: Vec<Vec<f64>> = (0..CORRELATION_BATCHES)
        .map(|b| connected(l, (b * size..(b + 1) * size).map(|i| (batch.row(i), 1.0 / size as f64))))
        .collect();
    let matrix_stderr = (0..l * l).map(|k| spread(&per_batch, k)).collect();
    let curves: Vec<Vec<f64>> = per_batch.iter().map(|c| curve_values(l, c)).collect();
    let curve = CorrelationCurve::from_abs(
        (1..l).collect(),
        curve_values(l, &matrix),
        (0..l - 1).map(|k| spread(&curves, k)).collect(),
    );
    Ok(Correlations {
        l,
        matrix,
        matrix_stderr,
        curve,
    })
}

/// Exact connected matrix from full enumeration.
pub fn exact_connected_correlations(net: &Network) -> Vec<f64> {
    let l = net.n_sites();
    let (lp, _) = net.enumerate();
    let max = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let p: Vec<f64> = lp.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = p.iter().sum();
    let rows: Vec<Vec<u8>> = (0..1usize << l)
        .map(|idx| (0..l).map(|s| ((idx >> (l - 1 - s)) & 1) as u8).collect())
        .collect();
    connected(l, rows.iter().zip(&p).map(|(r, &w)| (r.as_slice(), w / total)))
}

/// Average `|C|` of several replicas point by point; errors from the replica spread.
pub fn average_curves(curves: &[CorrelationCurve]) -> Result<CorrelationCurve> {
    let first = curves
        .first()
        .ok_or_else(|| Error::InvalidArgument("no curves to average".into()))?;
    let k = first.distances.len();
    if curves.iter().any(|c| c.distances != first.distances) {
        return Err(Error::Dimension("curves with different distances".into()));
    }
    let values: Vec<Vec<f64>> = curves.iter().map(|c| c.mean_abs_corr.clone()).collect();
    let nr = curves.len() as f64;
    let mean: Vec<f64> = (0..k).map(|d| values.iter().map(|v| v[d]).sum::<f64>() / nr).collect();
    let abs_err = if curves.len() > 1 {
        (0..k).map(|d| spread(&values, d)).collect()
    } else {
        first.stderr.iter().zip(&first.mean_abs_corr).map(|(e, m)| e * m).collect()
    };
    Ok(CorrelationCurve::from_abs(first.distances.clone(), mean, abs_err))
}
