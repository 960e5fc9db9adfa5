//! Entropy versus system size and the `a L^nu + b ln L + c` fit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{aggregate, Aggregate, Estimator, MIN_SUCCESS_FRACTION};
use crate::error::{Error, Result};
use crate::models::{init_gaussian, ModelSpec, Network};
use crate::numerics::{fit_entropy_scaling, replica_seed, FitResult, RngStream};

/// A point is excluded when the mean relative error of the purity estimate exceeds this.
pub const MAX_RELATIVE_PURITY_ERROR: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub l: usize,
    /// Statistics of `S_2` over successful replicas.
    pub stats: Option<Aggregate>,
    pub n_failed: usize,
    /// Mean over replicas of `stderr(Tr rho^2) / Tr rho^2` (0 for the exact estimator).
    pub relative_purity_error: f64,
    pub excluded: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub sigma: f64,
    pub points: Vec<ScalingPoint>,
    pub fit: Option<FitResult>,
    pub fit_skipped: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    pub template: ModelSpec,
    pub l_list: Vec<usize>,
    pub n_init: usize,
    pub base_seed: u64,
    pub estimator: Estimator,
    pub rows: Vec<ScalingRow>,
}

/// Stream for the swap sampler of replica `replica` at size `l`, independent of the size list.
fn sampler_stream(base_seed: u64, replica: u64, l: usize) -> RngStream {
    RngStream::new(replica_seed(base_seed ^ ((l as u64) << 40) ^ 0x5eed, replica))
}

/// Mean `S_2(L)` per sigma followed by the scaling fit.
///
/// RNN parameters do not depend on `L`, so one draw per `(sigma, replica)` serves every size.
/// Transformer draws are repeated per size from the same replica stream.
pub fn run_scaling_study(
    template: &ModelSpec,
    sigma_list: &[f64],
    l_list: &[usize],
    n_init: usize,
    base_seed: u64,
    estimator: Estimator,
) -> Result<ScalingResult> {
    template.validate()?;
    if sigma_list.is_empty() || l_list.is_empty() || n_init == 0 {
        return Err(Error::InvalidArgument("sigma list, L list and n_init must be nonempty".into()));
    }
    if l_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("L list must be strictly ascending".into()));
    }
    for &l in l_list {
        estimator.resolve(l)?;
    }
    let shared = template.shares_parameters_across_sizes();
    let mut jobs = Vec::new();
    for s in 0..sigma_list.len() {
        for li in 0..l_list.len() {
            for r in 0..n_init as u64 {
                jobs.push((s, li, r));
            }
        }
    }
    let results: Vec<Result<(f64, f64)>> = jobs
        .par_iter()
        .map(|&(s, li, r)| {
            let sigma = sigma_list[s];
            let l = l_list[li];
            let spec = template.with_sites(l);
            let draw_spec = if shared { template } else { &spec };
            let params = init_gaussian(draw_spec, sigma, &mut RngStream::for_replica(base_seed, r));
            let net = Network::new(&spec, &params)?;
            let rep = estimator.entropy(&net, &mut sampler_stream(base_seed, r, l))?;
            let rel = if rep.purity_stderr > 0.0 { rep.purity_stderr / rep.purity } else { 0.0 };
            Ok((rep.s2, rel))
        })
        .collect();

    let mut rows = Vec::with_capacity(sigma_list.len());
    for (s, &sigma) in sigma_list.iter().enumerate() {
        let mut points = Vec::with_capacity(l_list.len());
        for (li, &l) in l_list.iter().enumerate() {
            let base = (s * l_list.len() + li) * n_init;
            let chunk = &results[base..base + n_init];
            let ok: Vec<(f64, f64)> = chunk.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
            let n_failed = n_init - ok.len();
            let keep = !ok.is_empty() && ok.len() as f64 >= MIN_SUCCESS_FRACTION * n_init as f64;
            let s2: Vec<f64> = ok.iter().map(|v| v.0).collect();
            let rel = if ok.is_empty() { f64::NAN } else { ok.iter().map(|v| v.1).sum::<f64>() / ok.len() as f64 };
            let excluded = if !keep {
                Some(format!("{n_failed} of {n_init} replicas failed"))
            } else if rel > MAX_RELATIVE_PURITY_ERROR {
                Some(format!("relative purity error {rel:.3} exceeds {MAX_RELATIVE_PURITY_ERROR}"))
            } else {
                None
            };
            points.push(ScalingPoint {
                l,
                stats: if keep { aggregate(&s2).ok() } else { None },
                n_failed,
                relative_purity_error: rel,
                excluded,
            });
        }
        let used: Vec<&ScalingPoint> = points.iter().filter(|p| p.excluded.is_none()).collect();
        let (fit, fit_skipped) = if used.len() < 5 {
            (None, Some(format!("{} usable points; the fit needs 5", used.len())))
        } else {
            let ls: Vec<usize> = used.iter().map(|p| p.l).collect();
            let ys: Vec<f64> = used.iter().map(|p| p.stats.unwrap().mean).collect();
            let es: Vec<f64> = used.iter().map(|p| p.stats.unwrap().stderr).collect();
            match fit_entropy_scaling(&ls, &ys, &es) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            }
        };
        rows.push(ScalingRow {
            sigma,
            points,
            fit,
            fit_skipped,
        });
    }
    Ok(ScalingResult {
        template: template.clone(),
        l_list: l_list.to_vec(),
        n_init,
        base_seed,
        estimator,
        rows,
    })
}

impl ScalingResult {
    /// `sigma,L,mean,std,stderr,n,relative_purity_error,excluded`
    pub fn write_points_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["sigma", "L", "mean", "std", "stderr", "n", "relative_purity_error", "excluded"])?;
        for row in &self.rows {
            for p in &row.points {
                let (m, sd, se, n) = match p.stats {
                    Some(s) => (s.mean.to_string(), s.std.to_string(), s.stderr.to_string(), s.n.to_string()),
                    None => (String::new(), String::new(), String::new(), "0".into()),
                };
                w.write_record([
                    row.sigma.to_string(),
                    p.l.to_string(),
                    m,
                    sd,
                    se,
                    n,
                    p.relative_purity_error.to_string(),
                    p.excluded.clone().unwrap_or_default(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// `sigma,a,nu,b,c,terms,residual_norm,converged,skipped`
    pub fn write_fits_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["sigma", "a", "nu", "b", "c", "terms", "residual_norm", "converged", "skipped"])?;
        for row in &self.rows {
            let rec = match &row.fit {
                Some(f) => [
                    row.sigma.to_string(),
                    f.a.to_string(),
                    f.nu.to_string(),
                    f.b.to_string(),
                    f.c.to_string(),
                    f.terms.as_str().to_string(),
                    f.residual_norm.to_string(),
                    f.converged.to_string(),
                    String::new(),
                ],
                None => [
                    row.sigma.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    row.fit_skipped.clone().unwrap_or_default(),
                ],
            };
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ActivationKind, AtfSpec, AttentionKind, CellKind, PhaseMode, RnnSpec};

    fn rnn() -> ModelSpec {
        ModelSpec::Rnn(RnnSpec {
            l: 4,
            d_h: 5,
            cell: CellKind::Vanilla,
            f: ActivationKind::Tanh,
            g: ActivationKind::Softmax,
            phase_mode: PhaseMode::Complex,
        })
    }

    #[test]
    fn product_state_curve_fits_to_zero() {
        let r = run_scaling_study(&rnn(), &[0.0], &[4, 6, 8, 10, 12], 2, 1, Estimator::Exact).unwrap();
        let row = &r.rows[0];
        assert!(row.points.iter().all(|p| p.stats.unwrap().mean == 0.0));
        let f = row.fit.as_ref().expect("fit runs");
        assert!(f.a.abs() < 1e-8 && f.b.abs() < 1e-8 && f.c.abs() < 1e-8, "{f:?}");
    }

    #[test]
    fn too_few_points_skip_the_fit() {
        let r = run_scaling_study(&rnn(), &[0.5], &[4, 6, 8], 2, 1, Estimator::Exact).unwrap();
        assert!(r.rows[0].fit.is_none());
        assert!(r.rows[0].fit_skipped.as_ref().unwrap().contains("3 usable"));
    }

    #[test]
    fn noisy_swap_points_are_excluded() {
        // Ten samples cannot resolve the purity of a strongly entangled state.
        let r = run_scaling_study(&rnn(), &[1.0], &[10, 12], 3, 5, Estimator::Swap { n_samples: 10 }).unwrap();
        assert!(r.rows[0].points.iter().any(|p| p.excluded.is_some()));
    }

    #[test]
    fn rnn_parameters_are_shared_across_sizes() {
        // The replica's draw is the same for every L, so the first-site conditional matches.
        let spec = rnn();
        let p = init_gaussian(&spec, 0.8, &mut RngStream::for_replica(3, 1));
        let a = Network::new(&spec.with_sites(6), &p).unwrap();
        let b = Network::new(&spec.with_sites(9), &p).unwrap();
        assert_eq!(a.head_outputs(&[0; 6])[0], b.head_outputs(&[0; 9])[0]);
    }

    #[test]
    fn transformer_scaling_runs() {
        let spec = ModelSpec::Atf(AtfSpec {
            l: 4,
            d_emb: 4,
            heads: 2,
            attention: AttentionKind::Circulant,
            f_fl: ActivationKind::Relu,
            g: ActivationKind::Softmax,
            d_fl: None,
            n_ffl: 1,
            phase_mode: PhaseMode::Complex,
        });
        let r = run_scaling_study(&spec, &[0.5], &[4, 6], 2, 9, Estimator::Exact).unwrap();
        assert!(r.rows[0].points.iter().all(|p| p.stats.is_some()));
    }

    #[test]
    fn rejects_unsorted_sizes() {
        assert!(run_scaling_study(&rnn(), &[0.5], &[8, 4], 1, 0, Estimator::Exact).is_err());
    }
}
