//! Replica sweeps over (width, sigma) grids and their aggregation.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{init_gaussian, ModelSpec, Network};
use crate::numerics::RngStream;
use crate::observables::{renyi2_exact_state, renyi2_swap_net, EntanglementReport, Partition, STATE_VECTOR_CAP};

/// Fraction of replicas that must succeed for a cell to be reported.
pub const MIN_SUCCESS_FRACTION: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    /// `s / sqrt(n)` with `s` the sample (n - 1) standard deviation; 0 for one value.
    pub stderr: f64,
    pub n: usize,
}

/// Two-pass mean and spread, summed in input order.
pub fn aggregate(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("aggregate of no values".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let stderr = if values.len() > 1 { (ss / (n - 1.0) / n).sqrt() } else { 0.0 };
    Ok(Aggregate {
        mean,
        std: (ss / n).sqrt(),
        stderr,
        n: values.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    /// Hidden or embedding widths.
    pub arch_axis: Vec<usize>,
    pub sigma_axis: Vec<f64>,
    pub n_init: usize,
    pub base_seed: u64,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.arch_axis.is_empty() || self.sigma_axis.is_empty() {
            return Err(Error::InvalidArgument("grid axes must be nonempty".into()));
        }
        if self.n_init == 0 {
            return Err(Error::InvalidArgument("n_init must be at least 1".into()));
        }
        if self.sigma_axis.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument("sigma values must be finite and nonnegative".into()));
        }
        Ok(())
    }

    /// `(arch index, sigma index, replica)` in output order.
    pub(crate) fn jobs(&self) -> Vec<(usize, usize, u64)> {
        let mut v = Vec::with_capacity(self.arch_axis.len() * self.sigma_axis.len() * self.n_init);
        for a in 0..self.arch_axis.len() {
            for s in 0..self.sigma_axis.len() {
                for r in 0..self.n_init as u64 {
                    v.push((a, s, r));
                }
            }
        }
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Estimator {
    Exact,
    Swap { n_samples: usize },
    /// Exact up to `exact_max_l` sites, swap beyond.
    Auto { n_samples: usize, exact_max_l: usize },
}

impl Estimator {
    /// The concrete estimator used at `l` sites.
    pub fn resolve(self, l: usize) -> Result<Estimator> {
        match self {
            Estimator::Exact if l > STATE_VECTOR_CAP => Err(Error::SizeCap {
                size: l,
                cap: STATE_VECTOR_CAP,
                hint: "use the swap estimator",
            }),
            Estimator::Auto { n_samples, exact_max_l } => Ok(if l <= exact_max_l.min(STATE_VECTOR_CAP) {
                Estimator::Exact
            } else {
                Estimator::Swap { n_samples }
            }),
            e => Ok(e),
        }
    }

    /// Half-chain entropy of one network; `rng` feeds the swap sampler.
    pub(crate) fn entropy(self, net: &Network, rng: &mut RngStream) -> Result<EntanglementReport> {
        let part = Partition::half(net.n_sites());
        match self.resolve(net.n_sites())? {
            Estimator::Exact => renyi2_exact_state(net, &part),
            Estimator::Swap { n_samples } => renyi2_swap_net(net, &part, n_samples, rng),
            Estimator::Auto { .. } => unreachable!("resolved"),
        }
    }
}

/// One replica's outcome; `error` is set when it failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicaValue {
    pub arch_value: usize,
    pub sigma: f64,
    pub replica: u64,
    pub value: f64,
    pub stderr: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub arch_value: usize,
    pub sigma: f64,
    /// `None` when fewer than 80% of replicas succeeded.
    pub stats: Option<Aggregate>,
    pub n_failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub template: ModelSpec,
    pub grid: SweepGrid,
    pub estimator: Estimator,
    pub cells: Vec<GridCell>,
    pub raw: Vec<ReplicaValue>,
}

/// Seeded parameters for one replica: the stream is `base_seed ^ replica`, so every sigma
/// of a given width draws the same standard normals scaled by sigma.
pub(crate) fn replica_network(spec: &ModelSpec, sigma: f64, base_seed: u64, replica: u64) -> Result<(Network, RngStream)> {
    let mut rng = RngStream::for_replica(base_seed, replica);
    let params = init_gaussian(spec, sigma, &mut rng);
    Ok((Network::new(spec, &params)?, rng))
}

/// Map `f` over every grid job in parallel, returning results in job order.
pub(crate) fn map_jobs<T: Send>(
    grid: &SweepGrid,
    f: impl Fn(usize, f64, u64) -> Result<T> + Sync,
) -> Vec<Result<T>> {
    let jobs = grid.jobs();
    jobs.par_iter()
        .map(|&(a, s, r)| f(grid.arch_axis[a], grid.sigma_axis[s], r))
        .collect()
}

/// Group replica values into cells (in job order) with the 80% success rule.
pub(crate) fn collect_cells(grid: &SweepGrid, raw: &[ReplicaValue]) -> Vec<GridCell> {
    raw.chunks(grid.n_init)
        .map(|chunk| {
            let ok: Vec<f64> = chunk.iter().filter(|v| v.error.is_none()).map(|v| v.value).collect();
            let n_failed = chunk.len() - ok.len();
            let keep = ok.len() as f64 >= MIN_SUCCESS_FRACTION * chunk.len() as f64 && !ok.is_empty();
            GridCell {
                arch_value: chunk[0].arch_value,
                sigma: chunk[0].sigma,
                stats: if keep { aggregate(&ok).ok() } else { None },
                n_failed,
            }
        })
        .collect()
}

/// Mean of `S_2 / (L_A ln 2)` per `(width, sigma)` cell.
pub fn run_entropy_grid(template: &ModelSpec, grid: &SweepGrid, estimator: Estimator) -> Result<GridResult> {
    grid.validate()?;
    template.validate()?;
    let l = template.n_sites();
    estimator.resolve(l)?;
    let max_entropy = (l / 2) as f64 * std::f64::consts::LN_2;
    let results = map_jobs(grid, |arch, sigma, replica| {
        let spec = template.with_width(arch);
        let (net, mut rng) = replica_network(&spec, sigma, grid.base_seed, replica)?;
        estimator.entropy(&net, &mut rng)
    });
    let jobs = grid.jobs();
    let raw: Vec<ReplicaValue> = jobs
        .iter()
        .zip(results)
        .map(|(&(a, s, r), res)| {
            let (value, stderr, error) = match res {
                Ok(rep) => (rep.s2 / max_entropy, rep.s2_stderr / max_entropy, None),
                Err(e) => (f64::NAN, f64::NAN, Some(e.to_string())),
            };
            ReplicaValue {
                arch_value: grid.arch_axis[a],
                sigma: grid.sigma_axis[s],
                replica: r,
                value,
                stderr,
                error,
            }
        })
        .collect();
    Ok(GridResult {
        template: template.clone(),
        grid: grid.clone(),
        estimator,
        cells: collect_cells(grid, &raw),
        raw,
    })
}

impl GridResult {
    /// Sigma with the largest cell mean for a given width.
    pub fn argmax_sigma(&self, arch_value: usize) -> Option<(f64, Aggregate)> {
        self.cells
            .iter()
            .filter(|c| c.arch_value == arch_value)
            .filter_map(|c| c.stats.map(|s| (c.sigma, s)))
            .fold(None, |best: Option<(f64, Aggregate)>, (sigma, s)| match best {
                Some((_, b)) if b.mean >= s.mean => best,
                _ => Some((sigma, s)),
            })
    }

    pub fn cell(&self, arch_value: usize, sigma: f64) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.arch_value == arch_value && c.sigma == sigma)
    }

    /// `arch_value,sigma,mean,std,stderr,n`; dropped cells have empty statistics and `n = 0`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_cells_csv(path, &self.cells)
    }

    /// `arch_value,sigma,replica,value,stderr,error`
    pub fn write_raw_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["arch_value", "sigma", "replica", "value", "stderr", "error"])?;
        for v in &self.raw {
            w.write_record([
                v.arch_value.to_string(),
                v.sigma.to_string(),
                v.replica.to_string(),
                v.value.to_string(),
                v.stderr.to_string(),
                v.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn write_cells_csv(path: &Path, cells: &[GridCell]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["arch_value", "sigma", "mean", "std", "stderr", "n"])?;
    for c in cells {
        let row = match c.stats {
            Some(s) => [
                c.arch_value.to_string(),
                c.sigma.to_string(),
                s.mean.to_string(),
                s.std.to_string(),
                s.stderr.to_string(),
                s.n.to_string(),
            ],
            None => [
                c.arch_value.to_string(),
                c.sigma.to_string(),
                String::new(),
                String::new(),
                String::new(),
                "0".into(),
            ],
        };
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Provenance written next to every grid output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub template: ModelSpec,
    /// Spec hash of each width on the arch axis.
    pub spec_hashes: Vec<(usize, String)>,
    pub base_seed: u64,
    pub replica_seed_rule: String,
    pub settings: serde_json::Value,
    pub code_version: String,
    pub source_hash: String,
}

impl Manifest {
    pub fn new(command: &str, template: &ModelSpec, arch_axis: &[usize], base_seed: u64, settings: serde_json::Value) -> Self {
        Self {
            command: command.into(),
            template: template.clone(),
            spec_hashes: arch_axis.iter().map(|&a| (a, template.with_width(a).hash_hex())).collect(),
            base_seed,
            replica_seed_rule: "replica stream seed = base_seed XOR replica_index".into(),
            settings,
            code_version: env!("CARGO_PKG_VERSION").into(),
            source_hash: env!("ARNQS_SOURCE_HASH").into(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ActivationKind, CellKind, PhaseMode, RnnSpec};
    use approx::assert_abs_diff_eq;

    fn template(l: usize) -> ModelSpec {
        ModelSpec::Rnn(RnnSpec {
            l,
            d_h: 4,
            cell: CellKind::Vanilla,
            f: ActivationKind::Tanh,
            g: ActivationKind::Softmax,
            phase_mode: PhaseMode::Complex,
        })
    }

    #[test]
    fn aggregate_examples() {
        let a = aggregate(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((a.mean, a.std, a.stderr), (1.0, 0.0, 0.0));
        let a = aggregate(&[0.0, 2.0]).unwrap();
        assert_eq!((a.mean, a.std), (1.0, 1.0));
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn aggregate_against_two_pass_oracle() {
        let mut rng = RngStream::new(17);
        let v: Vec<f64> = (0..100_000).map(|_| 3.0 + 2.0 * rng.normal()).collect();
        // Welford as an independent oracle.
        let (mut m, mut s2) = (0.0, 0.0);
        for (k, &x) in v.iter().enumerate() {
            let d = x - m;
            m += d / (k + 1) as f64;
            s2 += d * (x - m);
        }
        let a = aggregate(&v).unwrap();
        assert_abs_diff_eq!(a.mean, m, epsilon = 1e-12);
        assert_abs_diff_eq!(a.std, (s2 / 1e5).sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(a.stderr, (s2 / 99_999.0 / 1e5).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn zero_sigma_column_is_exactly_zero() {
        let grid = SweepGrid {
            arch_axis: vec![3, 5],
            sigma_axis: vec![0.0, 0.5],
            n_init: 3,
            base_seed: 7,
        };
        let r = run_entropy_grid(&template(6), &grid, Estimator::Exact).unwrap();
        assert_eq!(r.cells.len(), 4);
        assert_eq!(r.raw.len(), 12);
        for c in &r.cells {
            let s = c.stats.unwrap();
            if c.sigma == 0.0 {
                assert_eq!(s.mean, 0.0);
            } else {
                assert!(s.mean > 0.0 && s.mean <= 1.0);
            }
        }
    }

    #[test]
    fn cells_recompute_from_raw() {
        let grid = SweepGrid {
            arch_axis: vec![4],
            sigma_axis: vec![0.3, 1.0],
            n_init: 5,
            base_seed: 99,
        };
        let r = run_entropy_grid(&template(6), &grid, Estimator::Exact).unwrap();
        for c in &r.cells {
            let vals: Vec<f64> = r
                .raw
                .iter()
                .filter(|v| v.sigma == c.sigma && v.arch_value == c.arch_value)
                .map(|v| v.value)
                .collect();
            assert_eq!(aggregate(&vals).unwrap(), c.stats.unwrap());
        }
    }

    #[test]
    fn grid_is_deterministic_and_worker_independent() {
        let grid = SweepGrid {
            arch_axis: vec![3, 6],
            sigma_axis: vec![0.2, 0.7, 1.5],
            n_init: 4,
            base_seed: 1234,
        };
        let est = Estimator::Swap { n_samples: 500 };
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run_entropy_grid(&template(6), &grid, est).unwrap())
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        a.write_csv(&dir.path().join("a.csv")).unwrap();
        b.write_csv(&dir.path().join("b.csv")).unwrap();
        assert_eq!(
            std::fs::read(dir.path().join("a.csv")).unwrap(),
            std::fs::read(dir.path().join("b.csv")).unwrap()
        );
    }

    #[test]
    fn common_random_numbers_across_sigma() {
        let spec = template(5);
        let (a, _) = replica_network(&spec, 0.5, 11, 2).unwrap();
        let (b, _) = replica_network(&spec, 1.0, 11, 2).unwrap();
        let pa = init_gaussian(&spec, 0.5, &mut RngStream::for_replica(11, 2));
        let pb = init_gaussian(&spec, 1.0, &mut RngStream::for_replica(11, 2));
        for (x, y) in pa.as_slice().iter().zip(pb.as_slice()) {
            assert_eq!(2.0 * x, *y);
        }
        assert_eq!(a.n_sites(), b.n_sites());
    }

    #[test]
    fn failing_replicas_drop_the_cell() {
        let grid = SweepGrid {
            arch_axis: vec![1],
            sigma_axis: vec![0.1],
            n_init: 5,
            base_seed: 0,
        };
        let mut raw: Vec<ReplicaValue> = (0..5)
            .map(|r| ReplicaValue {
                arch_value: 1,
                sigma: 0.1,
                replica: r,
                value: r as f64,
                stderr: 0.0,
                error: None,
            })
            .collect();
        raw[0].error = Some("x".into());
        let cells = collect_cells(&grid, &raw);
        assert_eq!(cells[0].stats.unwrap().n, 4);
        raw[1].error = Some("x".into());
        let cells = collect_cells(&grid, &raw);
        assert!(cells[0].stats.is_none());
        assert_eq!(cells[0].n_failed, 2);
    }

    #[test]
    fn csv_and_manifest_layout() {
        let grid = SweepGrid {
            arch_axis: vec![2],
            sigma_axis: vec![0.0],
            n_init: 2,
            base_seed: 3,
        };
        let t = template(4);
        let r = run_entropy_grid(&t, &grid, Estimator::Exact).unwrap();
        let dir = tempfile::tempdir().unwrap();
        r.write_csv(&dir.path().join("g.csv")).unwrap();
        r.write_raw_csv(&dir.path().join("raw.csv")).unwrap();
        let text = std::fs::read_to_string(dir.path().join("g.csv")).unwrap();
        assert_eq!(text, "arch_value,sigma,mean,std,stderr,n\n2,0,0,0,0,2\n");
        let m = Manifest::new("phase-diagram", &t, &grid.arch_axis, 3, serde_json::json!({"n_init": 2}));
        m.write(&dir.path().join("m.json")).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("m.json")).unwrap()).unwrap();
        assert_eq!(v["base_seed"], 3);
        assert_eq!(v["source_hash"].as_str().unwrap().len(), 16);
    }

    #[test]
    fn exact_estimator_respects_cap() {
        let grid = SweepGrid {
            arch_axis: vec![2],
            sigma_axis: vec![0.1],
            n_init: 1,
            base_seed: 0,
        };
        assert!(run_entropy_grid(&template(24), &grid, Estimator::Exact).is_err());
        assert_eq!(
            Estimator::Auto { n_samples: 10, exact_max_l: 12 }.resolve(14).unwrap(),
            Estimator::Swap { n_samples: 10 }
        );
    }
}
