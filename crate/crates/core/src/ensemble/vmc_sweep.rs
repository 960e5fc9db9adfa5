//! Convergence-time sweeps over (width, sigma) and the Gaussian vs Xavier-Glorot comparison.

use std::path::Path;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{aggregate, Aggregate, SweepGrid};
use crate::error::{Error, Result};
use crate::models::{init_gaussian, init_xavier_glorot, ModelSpec};
use crate::numerics::{fit_power_law, PowerLawFit, RngStream};
use crate::vmc::{exact_ground_energy, vmc_optimize, Hamiltonian, VmcConfig};

/// Cells where fewer than this fraction of runs converge are flagged.
pub const MIN_CONVERGED_FRACTION: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    Gaussian,
    XavierGlorot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmcRun {
    pub arch_value: usize,
    pub sigma: Option<f64>,
    pub replica: u64,
    pub tau_conv: Option<usize>,
    pub iterations: usize,
    pub final_energy: f64,
    pub wall_ms: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmcCell {
    pub arch_value: usize,
    pub sigma: Option<f64>,
    /// `tau_conv` statistics over converged runs.
    pub stats: Option<Aggregate>,
    pub n_runs: usize,
    pub n_converged: usize,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmcSweepResult {
    pub template: ModelSpec,
    pub hamiltonian: Hamiltonian,
    pub init: InitScheme,
    pub e_ref: f64,
    pub grid: SweepGrid,
    pub config: VmcConfig,
    pub cells: Vec<VmcCell>,
    pub runs: Vec<VmcRun>,
    /// `(arch_value, sigma)` minimizing mean `tau_conv`, Gaussian only.
    pub argmin: Vec<(usize, f64)>,
    pub argmin_fit: Option<PowerLawFit>,
    pub argmin_fit_note: Option<String>,
}

/// Train `n_init` networks per cell and record the iteration at which each converges.
///
/// Replica `r` draws its parameters from `base_seed ^ r` and then forks the sampler seed from
/// the same stream, so cells sharing a width differ only through sigma.
pub fn run_vmc_sweep(
    template: &ModelSpec,
    ham: &Hamiltonian,
    grid: &SweepGrid,
    cfg: &VmcConfig,
    init: InitScheme,
    e_ref: Option<f64>,
) -> Result<VmcSweepResult> {
    grid.validate()?;
    template.validate()?;
    cfg.validate()?;
    if ham.l != template.n_sites() {
        return Err(Error::InvalidArgument(format!(
            "hamiltonian has {} sites but the model has {}",
            ham.l,
            template.n_sites()
        )));
    }
    let e_ref = match e_ref {
        Some(e) => e,
        None => exact_ground_energy(ham)?,
    };
    let sigmas: Vec<Option<f64>> = match init {
        InitScheme::Gaussian => grid.sigma_axis.iter().map(|&s| Some(s)).collect(),
        InitScheme::XavierGlorot => vec![None],
    };
    let mut jobs = Vec::new();
    for &a in &grid.arch_axis {
        for &s in &sigmas {
            for r in 0..grid.n_init as u64 {
                jobs.push((a, s, r));
            }
        }
    }
    let runs: Vec<VmcRun> = jobs
        .par_iter()
        .map(|&(arch_value, sigma, replica)| {
            let spec = template.with_width(arch_value);
            let mut rng = RngStream::for_replica(grid.base_seed, replica);
            let params = match sigma {
                Some(s) => init_gaussian(&spec, s, &mut rng),
                None => init_xavier_glorot(&spec, &mut rng),
            };
            let mut run_cfg = cfg.clone();
            run_cfg.seed = rng.next_u64();
            let mut run = VmcRun {
                arch_value,
                sigma,
                replica,
                tau_conv: None,
                iterations: 0,
                final_energy: f64::NAN,
                wall_ms: 0.0,
                error: None,
            };
            match vmc_optimize(&spec, &params, ham, &run_cfg, e_ref) {
                Ok(res) => {
                    run.tau_conv = res.tau_conv;
                    run.iterations = res.energy_trace.len();
                    run.final_energy = res.energy_trace.last().copied().unwrap_or(f64::NAN);
                    run.wall_ms = res.wall_ms.last().copied().unwrap_or(0.0);
                }
                Err(e) => run.error = Some(e.to_string()),
            }
            run
        })
        .collect();

    let cells: Vec<VmcCell> = runs
        .chunks(grid.n_init)
        .map(|chunk| {
            let taus: Vec<f64> = chunk.iter().filter_map(|r| r.tau_conv).map(|t| t as f64).collect();
            VmcCell {
                arch_value: chunk[0].arch_value,
                sigma: chunk[0].sigma,
                stats: aggregate(&taus).ok(),
                n_runs: chunk.len(),
                n_converged: taus.len(),
                flagged: (taus.len() as f64) < MIN_CONVERGED_FRACTION * chunk.len() as f64,
            }
        })
        .collect();

    let mut argmin = Vec::new();
    if init == InitScheme::Gaussian {
        for &a in &grid.arch_axis {
            if let Some(c) = best_cell(&cells, a) {
                argmin.push((a, c.sigma.unwrap_or(f64::NAN)));
            }
        }
    }
    let (argmin_fit, argmin_fit_note) = match init {
        InitScheme::XavierGlorot => (None, Some("no sigma axis".to_string())),
        InitScheme::Gaussian => {
            let x: Vec<f64> = argmin.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = argmin.iter().map(|p| p.1).collect();
            match fit_power_law(&x, &y) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            }
        }
    };
    Ok(VmcSweepResult {
        template: template.clone(),
        hamiltonian: ham.clone(),
        init,
        e_ref,
        grid: grid.clone(),
        config: cfg.clone(),
        cells,
        runs,
        argmin,
        argmin_fit,
        argmin_fit_note,
    })
}

/// Unflagged cell with the smallest mean `tau_conv` at a width; ties keep the smaller sigma.
fn best_cell(cells: &[VmcCell], arch_value: usize) -> Option<&VmcCell> {
    cells
        .iter()
        .filter(|c| c.arch_value == arch_value && !c.flagged && c.stats.is_some())
        .fold(None, |best: Option<&VmcCell>, c| match best {
            Some(b) if b.stats.unwrap().mean <= c.stats.unwrap().mean => best,
            _ => Some(c),
        })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitComparison {
    pub arch_value: usize,
    pub best_sigma: Option<f64>,
    pub gaussian: Option<Aggregate>,
    pub gaussian_converged: usize,
    pub xavier_glorot: Option<Aggregate>,
    pub xavier_glorot_converged: usize,
    pub n_runs: usize,
}

/// Best Gaussian cell per width against the Xavier-Glorot cell of the same width.
pub fn compare_initializations(gauss: &VmcSweepResult, xg: &VmcSweepResult) -> Result<Vec<InitComparison>> {
    if gauss.init != InitScheme::Gaussian || xg.init != InitScheme::XavierGlorot {
        return Err(Error::InvalidArgument("expected one Gaussian and one Xavier-Glorot sweep".into()));
    }
    let rows = gauss
        .grid
        .arch_axis
        .iter()
        .map(|&a| {
            let g = best_cell(&gauss.cells, a);
            let x = xg.cells.iter().find(|c| c.arch_value == a);
            InitComparison {
                arch_value: a,
                best_sigma: g.and_then(|c| c.sigma),
                gaussian: g.and_then(|c| c.stats),
                gaussian_converged: g.map_or(0, |c| c.n_converged),
                xavier_glorot: x.and_then(|c| c.stats),
                xavier_glorot_converged: x.map_or(0, |c| c.n_converged),
                n_runs: gauss.grid.n_init,
            }
        })
        .collect();
    Ok(rows)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl VmcSweepResult {
    pub fn cell(&self, arch_value: usize, sigma: Option<f64>) -> Option<&VmcCell> {
        self.cells.iter().find(|c| c.arch_value == arch_value && c.sigma == sigma)
    }

    /// `arch_value,sigma,mean_tau,std_tau,stderr_tau,n_converged,n_runs,flagged`
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["arch_value", "sigma", "mean_tau", "std_tau", "stderr_tau", "n_converged", "n_runs", "flagged"])?;
        for c in &self.cells {
            w.write_record([
                c.arch_value.to_string(),
                opt(c.sigma),
                opt(c.stats.map(|s| s.mean)),
                opt(c.stats.map(|s| s.std)),
                opt(c.stats.map(|s| s.stderr)),
                c.n_converged.to_string(),
                c.n_runs.to_string(),
                c.flagged.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `arch_value,sigma,replica,tau_conv,iterations,final_energy,error`
    ///
    /// Wall times stay in the JSON result so the CSV is reproducible byte for byte.
    pub fn write_runs_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["arch_value", "sigma", "replica", "tau_conv", "iterations", "final_energy", "error"])?;
        for r in &self.runs {
            w.write_record([
                r.arch_value.to_string(),
                opt(r.sigma),
                r.replica.to_string(),
                opt(r.tau_conv),
                r.iterations.to_string(),
                r.final_energy.to_string(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `arch_value,best_sigma,gauss_mean,gauss_stderr,gauss_converged,xg_mean,xg_stderr,xg_converged,n_runs`
pub fn write_comparison_csv(path: &Path, rows: &[InitComparison]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "arch_value",
        "best_sigma",
        "gauss_mean",
        "gauss_stderr",
        "gauss_converged",
        "xg_mean",
        "xg_stderr",
        "xg_converged",
        "n_runs",
    ])?;
    for r in rows {
        w.write_record([
            r.arch_value.to_string(),
            opt(r.best_sigma),
            opt(r.gaussian.map(|s| s.mean)),
            opt(r.gaussian.map(|s| s.stderr)),
            r.gaussian_converged.to_string(),
            opt(r.xavier_glorot.map(|s| s.mean)),
            opt(r.xavier_glorot.map(|s| s.stderr)),
            r.xavier_glorot_converged.to_string(),
            r.n_runs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
