//! Pooled entanglement-spectrum level statistics per sigma.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{aggregate, replica_network, Aggregate};
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::observables::{
    exact_entanglement_with_spectrum, mean_r_min, reference_density, Histogram, Partition, ReferenceKind, RDM_CAP,
    STATE_VECTOR_CAP,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStatsRow {
    pub sigma: f64,
    pub n_spectra: usize,
    pub n_failed: usize,
    pub n_ratios: usize,
    pub skipped_gaps: usize,
    pub mean_r: f64,
    pub median_r: f64,
    pub mean_r_min: f64,
    pub median_r_min: f64,
    /// Spread of per-replica mean `r_min`.
    pub r_min_replicas: Option<Aggregate>,
    pub hist_r: Histogram,
    pub hist_r_min: Histogram,
    /// Replica average of the sorted (descending) eigenvalues of `rho_A`.
    pub mean_eigenvalues: Vec<f64>,
    pub mean_s2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCurve {
    pub kind: ReferenceKind,
    /// `P(r)` at the centers of the `r` histogram.
    pub density_r: Vec<f64>,
    /// `2 P(r)` at the centers of the `r_min` histogram.
    pub density_r_min: Vec<f64>,
    pub mean_r_min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStatsResult {
    pub template: ModelSpec,
    pub n_init: usize,
    pub base_seed: u64,
    pub cutoff: f64,
    pub rows: Vec<LevelStatsRow>,
    pub references: Vec<ReferenceCurve>,
}

struct ReplicaSpectrum {
    r: Vec<f64>,
    r_min: Vec<f64>,
    skipped: usize,
    eigenvalues: Vec<f64>,
    s2: f64,
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Gap ratios of the half-chain entanglement spectrum of `n_init` replicas per sigma,
/// pooled across replicas in replica order.
pub fn run_level_stats(
    template: &ModelSpec,
    sigma_list: &[f64],
    n_init: usize,
    base_seed: u64,
    cutoff: f64,
) -> Result<LevelStatsResult> {
    template.validate()?;
    let l = template.n_sites();
    if l > STATE_VECTOR_CAP || l / 2 > RDM_CAP {
        return Err(Error::SizeCap {
            size: l,
            cap: STATE_VECTOR_CAP.min(2 * RDM_CAP),
            hint: "level statistics need exact reduced density matrices",
        });
    }
    if sigma_list.is_empty() || n_init == 0 {
        return Err(Error::InvalidArgument("sigma list and n_init must be nonempty".into()));
    }
    let part = Partition::half(l);
    let jobs: Vec<(usize, u64)> = (0..sigma_list.len())
        .flat_map(|s| (0..n_init as u64).map(move |r| (s, r)))
        .collect();
    let results: Vec<Result<ReplicaSpectrum>> = jobs
        .par_iter()
        .map(|&(s, r)| {
            let (net, _) = replica_network(template, sigma_list[s], base_seed, r)?;
            let (rep, spec, ratios) = exact_entanglement_with_spectrum(&net, &part, cutoff)?;
            Ok(ReplicaSpectrum {
                r: ratios.r,
                r_min: ratios.r_min,
                skipped: ratios.skipped_gaps,
                eigenvalues: spec.eigenvalues,
                s2: rep.s2,
            })
        })
        .collect();

    let mut rows = Vec::with_capacity(sigma_list.len());
    for (s, &sigma) in sigma_list.iter().enumerate() {
        let chunk = &results[s * n_init..(s + 1) * n_init];
        let ok: Vec<&ReplicaSpectrum> = chunk.iter().filter_map(|r| r.as_ref().ok()).collect();
        let r: Vec<f64> = ok.iter().flat_map(|x| x.r.iter().copied()).collect();
        let r_min: Vec<f64> = ok.iter().flat_map(|x| x.r_min.iter().copied()).collect();
        let per_replica: Vec<f64> = ok.iter().filter(|x| !x.r_min.is_empty()).map(|x| mean(&x.r_min)).collect();
        let dim = 1usize << part.size_a();
        let mut mean_eigenvalues = vec![0.0; dim];
        for x in &ok {
            mean_eigenvalues.iter_mut().zip(&x.eigenvalues).for_each(|(a, b)| *a += b);
        }
        if !ok.is_empty() {
            mean_eigenvalues.iter_mut().for_each(|a| *a /= ok.len() as f64);
        }
        rows.push(LevelStatsRow {
            sigma,
            n_spectra: ok.len(),
            n_failed: n_init - ok.len(),
            n_ratios: r.len(),
            skipped_gaps: ok.iter().map(|x| x.skipped).sum(),
            mean_r: mean(&r),
            median_r: median(&r),
            mean_r_min: mean(&r_min),
            median_r_min: median(&r_min),
            r_min_replicas: aggregate(&per_replica).ok(),
            hist_r: Histogram::ratios(&r),
            hist_r_min: Histogram::ratio_minima(&r_min),
            mean_eigenvalues,
            mean_s2: mean(&ok.iter().map(|x| x.s2).collect::<Vec<_>>()),
        });
    }

    let centers_r = Histogram::ratios(&[]).centers();
    let centers_min = Histogram::ratio_minima(&[]).centers();
    let references = ReferenceKind::GAP_RATIO_KINDS
        .iter()
        .map(|&kind| {
            Ok(ReferenceCurve {
                kind,
                density_r: centers_r.iter().map(|&x| reference_density(kind, x)).collect(),
                density_r_min: centers_min.iter().map(|&x| 2.0 * reference_density(kind, x)).collect(),
                mean_r_min: mean_r_min(kind)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LevelStatsResult {
        template: template.clone(),
        n_init,
        base_seed,
        cutoff,
        rows,
        references,
    })
}

impl LevelStatsResult {
    pub fn row(&self, sigma: f64) -> Option<&LevelStatsRow> {
        self.rows.iter().find(|r| r.sigma == sigma)
    }

    /// `sigma,n_spectra,n_ratios,skipped_gaps,mean_r,median_r,mean_r_min,median_r_min,r_min_stderr,mean_s2`
    pub fn write_summary_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "sigma",
            "n_spectra",
            "n_ratios",
            "skipped_gaps",
            "mean_r",
            "median_r",
            "mean_r_min",
            "median_r_min",
            "r_min_stderr",
            "mean_s2",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.sigma.to_string(),
                r.n_spectra.to_string(),
                r.n_ratios.to_string(),
                r.skipped_gaps.to_string(),
                r.mean_r.to_string(),
                r.median_r.to_string(),
                r.mean_r_min.to_string(),
                r.median_r_min.to_string(),
                r.r_min_replicas.map(|a| a.stderr.to_string()).unwrap_or_default(),
                r.mean_s2.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Long format `sigma,variable,bin_center,density`; reference curves use their kind as `sigma`.
    pub fn write_histograms_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["sigma", "variable", "bin_center", "density"])?;
        for r in &self.rows {
            for (name, h) in [("r", &r.hist_r), ("r_min", &r.hist_r_min)] {
                for (c, d) in h.centers().iter().zip(&h.density) {
                    w.write_record([r.sigma.to_string(), name.into(), c.to_string(), d.to_string()])?;
                }
            }
        }
        let centers_r = Histogram::ratios(&[]).centers();
        let centers_min = Histogram::ratio_minima(&[]).centers();
        for rc in &self.references {
            let label = serde_json::to_value(rc.kind)?.as_str().unwrap_or_default().to_string();
            for (c, d) in centers_r.iter().zip(&rc.density_r) {
                w.write_record([label.clone(), "r".into(), c.to_string(), d.to_string()])?;
            }
            for (c, d) in centers_min.iter().zip(&rc.density_r_min) {
                w.write_record([label.clone(), "r_min".into(), c.to_string(), d.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// `sigma,index,eigenvalue` of the replica-averaged eigenvalues of `rho_A`.
    pub fn write_eigenvalues_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["sigma", "index", "eigenvalue"])?;
        for r in &self.rows {
            for (k, e) in r.mean_eigenvalues.iter().enumerate() {
                w.write_record([r.sigma.to_string(), k.to_string(), e.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ActivationKind, CellKind, PhaseMode, RnnSpec};
    use crate::observables::DEFAULT_CUTOFF;

    fn rnn(l: usize) -> ModelSpec {
        ModelSpec::Rnn(RnnSpec {
            l,
            d_h: 10,
            cell: CellKind::Vanilla,
            f: ActivationKind::Tanh,
            g: ActivationKind::Softmax,
            phase_mode: PhaseMode::Complex,
        })
    }

    #[test]
    fn bookkeeping_and_reproducibility() {
        let a = run_level_stats(&rnn(8), &[0.4, 3.0], 6, 21, DEFAULT_CUTOFF).unwrap();
        let b = run_level_stats(&rnn(8), &[0.4, 3.0], 6, 21, DEFAULT_CUTOFF).unwrap();
        assert_eq!(a, b);
        for r in &a.rows {
            assert_eq!(r.n_spectra + r.n_failed, 6);
            assert_eq!(r.n_ratios, r.hist_r.counts.iter().sum::<u64>() as usize + r.hist_r.outside as usize);
            let mass: f64 = r.hist_r_min.density.iter().map(|d| d * r.hist_r_min.width()).sum();
            assert!(r.n_ratios == 0 || (mass - 1.0).abs() < 1e-12);
            assert!(r.mean_r_min > 0.0 && r.mean_r_min < 1.0);
            let trace: f64 = r.mean_eigenvalues.iter().sum();
            assert!((trace - 1.0).abs() < 1e-9);
        }
        assert_eq!(a.references.len(), 5);
    }

    #[test]
    fn peak_region_exceeds_localized_region() {
        let r = run_level_stats(&rnn(10), &[0.4, 8.0], 20, 3, DEFAULT_CUTOFF).unwrap();
        let near_peak = r.row(0.4).unwrap().mean_r_min;
        let far = r.row(8.0).unwrap().mean_r_min;
        assert!(near_peak > far + 0.05, "{near_peak} vs {far}");
    }

    #[test]
    fn csv_outputs() {
        let r = run_level_stats(&rnn(6), &[0.5], 2, 1, DEFAULT_CUTOFF).unwrap();
        let dir = tempfile::tempdir().unwrap();
        r.write_summary_csv(&dir.path().join("s.csv")).unwrap();
        r.write_histograms_csv(&dir.path().join("h.csv")).unwrap();
        r.write_eigenvalues_csv(&dir.path().join("e.csv")).unwrap();
        let h = std::fs::read_to_string(dir.path().join("h.csv")).unwrap();
        assert!(h.lines().any(|l| l.starts_with("GUE,r_min,")));
        assert_eq!(h.lines().count(), 1 + 100 + 5 * 100);
    }

    #[test]
    fn size_cap() {
        assert!(run_level_stats(&rnn(30), &[0.5], 1, 1, DEFAULT_CUTOFF).is_err());
    }
}
