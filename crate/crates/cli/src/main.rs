//! `arnqs`: batch front-end for the random autoregressive wavefunction studies.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use arnqs::appendix::run_appendix_checks;
use arnqs::ensemble::{
    compare_initializations, run_correlation_study, run_entropy_grid, run_level_stats, run_scaling_study, run_vmc_sweep,
    write_comparison_csv, Estimator, InitScheme, Manifest,
};
use config::{
    parse_config, AppendixConfig, CorrelationsConfig, LevelStatsConfig, PhaseDiagramConfig, ScalingConfig, Validate,
    VmcSweepConfig,
};

const PHASE_HELP: &str = "Outputs:
  grid.csv      arch_value,sigma,mean,std,stderr,n   (S2 / (L_A ln 2) per cell; dropped cells have empty stats)
  replicas.csv  arch_value,sigma,replica,value,stderr,error
  manifest.json, summary.txt
Exit 3 if a sigma = 0 cell is not exactly zero under the exact estimator.";

const SCALING_HELP: &str = "Outputs:
  points.csv  sigma,L,mean,std,stderr,n,relative_purity_error,excluded
  fits.csv    sigma,a,nu,b,c,terms,residual_norm,converged,skipped   (S = a L^nu + b ln L + c)
  manifest.json, summary.txt";

const LEVEL_HELP: &str = "Outputs:
  level_summary.csv  sigma,n_spectra,n_ratios,skipped_gaps,mean_r,median_r,mean_r_min,median_r_min,r_min_stderr,mean_s2
  histograms.csv     sigma,variable,bin_center,density   (reference curves carry their kind in the sigma column)
  eigenvalues.csv    sigma,index,eigenvalue
  manifest.json, summary.txt";

const CORR_HELP: &str = "Outputs:
  correlations.csv  sigma,distance,mean_abs_corr,log_mean_abs_corr,stderr_log
  manifest.json, summary.txt";

const VMC_HELP: &str = "Outputs (suffix _gaussian / _xavier_glorot):
  tau_<init>.csv    arch_value,sigma,mean_tau,std_tau,stderr_tau,n_converged,n_runs,flagged
  runs_<init>.csv   arch_value,sigma,replica,tau_conv,iterations,final_energy,error
  comparison.csv    arch_value,best_sigma,gauss_mean,gauss_stderr,gauss_converged,xg_mean,xg_stderr,xg_converged,n_runs
                    (init = both only)
  manifest.json, summary.txt";

const APPENDIX_HELP: &str = "Outputs:
  appendix_b.json  every check with value, threshold, pass flag and advisory flag
  manifest.json
Exit 3 unless every non-advisory check passes.";

#[derive(Parser)]
#[command(name = "arnqs", version, about = "Ensembles of random autoregressive neural quantum states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean half-chain entropy over a (width, sigma) grid.
    #[command(after_help = PHASE_HELP)]
    PhaseDiagram(RunArgs),
    /// Entropy against system size with the scaling fit.
    #[command(after_help = SCALING_HELP)]
    Scaling(RunArgs),
    /// Entanglement-spectrum gap-ratio statistics.
    #[command(after_help = LEVEL_HELP)]
    LevelStats(RunArgs),
    /// Connected correlation decay.
    #[command(after_help = CORR_HELP)]
    Correlations(RunArgs),
    /// VMC convergence times over a (width, sigma) grid.
    #[command(after_help = VMC_HELP)]
    VmcSweep(RunArgs),
    /// Built-in validation suites.
    Check {
        #[command(subcommand)]
        suite: CheckSuite,
    },
}

#[derive(Subcommand)]
enum CheckSuite {
    /// Logit-normal marginal and large-sigma collapse checks.
    #[command(name = "appendix-b", after_help = APPENDIX_HELP)]
    AppendixB(CheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CheckArgs {
    /// Optional JSON settings; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Output directory (created if missing).
    #[arg(long)]
    output: PathBuf,
    /// Overrides the configured base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of processors.
    #[arg(long)]
    workers: Option<usize>,
}

enum Failure {
    Config(String),
    Compute(String),
    Check(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Compute(_) => 2,
            Failure::Check(_) => 3,
        }
    }
}

impl From<arnqs::Error> for Failure {
    fn from(e: arnqs::Error) -> Self {
        Failure::Compute(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Compute(e.to_string())
    }
}

type Outcome = Result<String, Failure>;

fn load<T: serde::de::DeserializeOwned + Validate>(path: &Path, seed: Option<u64>) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut cfg: T = parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    Ok(cfg)
}

fn prepare(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Compute(format!("{}: {e}", dir.display())))
}

fn settings<T: Serialize>(cfg: &T) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

fn finish(dir: &Path, summary: String) -> Outcome {
    std::fs::write(dir.join("summary.txt"), &summary)?;
    Ok(summary)
}

fn phase_diagram(cfg: PhaseDiagramConfig, dir: &Path) -> Outcome {
    let grid = cfg.grid();
    let res = run_entropy_grid(&cfg.model, &grid, cfg.estimator)?;
    res.write_csv(&dir.join("grid.csv"))?;
    res.write_raw_csv(&dir.join("replicas.csv"))?;
    Manifest::new("phase-diagram", &cfg.model, &cfg.arch_axis, cfg.base_seed, settings(&cfg)).write(&dir.join("manifest.json"))?;

    let mut s = String::from("phase-diagram\n");
    for &a in &cfg.arch_axis {
        match res.argmax_sigma(a) {
            Some((sigma, st)) => writeln!(s, "width {a}: peak {:.4} +- {:.4} at sigma {sigma}", st.mean, st.stderr).unwrap(),
            None => writeln!(s, "width {a}: no surviving cells").unwrap(),
        }
    }
    let dropped = res.cells.iter().filter(|c| c.stats.is_none()).count();
    writeln!(s, "dropped cells: {dropped}").unwrap();
    let summary = finish(dir, s)?;

    if cfg.estimator.resolve(cfg.model.n_sites())? == Estimator::Exact {
        let bad: Vec<usize> = res
            .cells
            .iter()
            .filter(|c| c.sigma == 0.0 && c.stats.map_or(true, |st| st.mean != 0.0))
            .map(|c| c.arch_value)
            .collect();
        if !bad.is_empty() {
            return Err(Failure::Check(format!("sigma = 0 cells not exactly zero for widths {bad:?}")));
        }
    }
    Ok(summary)
}

fn scaling(cfg: ScalingConfig, dir: &Path) -> Outcome {
    let res = run_scaling_study(&cfg.model, &cfg.sigma_list, &cfg.l_list, cfg.n_init, cfg.base_seed, cfg.estimator)?;
    res.write_points_csv(&dir.join("points.csv"))?;
    res.write_fits_csv(&dir.join("fits.csv"))?;
    Manifest::new("scaling", &cfg.model, &[cfg.model.width()], cfg.base_seed, settings(&cfg)).write(&dir.join("manifest.json"))?;
    let mut s = String::from("scaling\n");
    for row in &res.rows {
        match &row.fit {
            Some(f) => writeln!(s, "sigma {}: a {:.4} nu {:.4} b {:.4} c {:.4}", row.sigma, f.a, f.nu, f.b, f.c).unwrap(),
            None => writeln!(s, "sigma {}: no fit ({})", row.sigma, row.fit_skipped.as_deref().unwrap_or("")).unwrap(),
        }
    }
    finish(dir, s)
}

fn level_stats(cfg: LevelStatsConfig, dir: &Path) -> Outcome {
    let res = run_level_stats(&cfg.model, &cfg.sigma_list, cfg.n_init, cfg.base_seed, cfg.cutoff)?;
    res.write_summary_csv(&dir.join("level_summary.csv"))?;
    res.write_histograms_csv(&dir.join("histograms.csv"))?;
    res.write_eigenvalues_csv(&dir.join("eigenvalues.csv"))?;
    Manifest::new("level-stats", &cfg.model, &[cfg.model.width()], cfg.base_seed, settings(&cfg)).write(&dir.join("manifest.json"))?;
    let mut s = String::from("level-stats\n");
    for r in &res.rows {
        writeln!(s, "sigma {}: <r_min> {:.4} from {} ratios ({} spectra)", r.sigma, r.mean_r_min, r.n_ratios, r.n_spectra).unwrap();
    }
    for rc in &res.references {
        writeln!(s, "reference {:?}: <r_min> {:.5}", rc.kind, rc.mean_r_min).unwrap();
    }
    finish(dir, s)
}

fn correlations(cfg: CorrelationsConfig, dir: &Path) -> Outcome {
    let res = run_correlation_study(&cfg.model, &cfg.sigma_list, cfg.n_init, cfg.n_samples, cfg.base_seed)?;
    res.write_csv(&dir.join("correlations.csv"))?;
    Manifest::new("correlations", &cfg.model, &[cfg.model.width()], cfg.base_seed, settings(&cfg)).write(&dir.join("manifest.json"))?;
    let mut s = String::from("correlations\n");
    for row in &res.rows {
        if let Some(c) = &row.curve {
            writeln!(s, "sigma {}: ln|C| at distance 1 = {:.4}, at {} = {:.4}", row.sigma, c.mean_log_abs_corr[0], c.distances.len(), c.mean_log_abs_corr[c.distances.len() - 1]).unwrap();
        }
    }
    finish(dir, s)
}

fn vmc_sweep(cfg: VmcSweepConfig, dir: &Path) -> Outcome {
    let grid = cfg.grid();
    let mut s = String::from("vmc-sweep\n");
    let mut results = Vec::new();
    for scheme in cfg.init.schemes() {
        let res = run_vmc_sweep(&cfg.model, &cfg.hamiltonian, &grid, &cfg.vmc, scheme, cfg.e_ref)?;
        let tag = match scheme {
            InitScheme::Gaussian => "gaussian",
            InitScheme::XavierGlorot => "xavier_glorot",
        };
        res.write_csv(&dir.join(format!("tau_{tag}.csv")))?;
        res.write_runs_csv(&dir.join(format!("runs_{tag}.csv")))?;
        writeln!(s, "{tag}: reference energy {:.10}", res.e_ref).unwrap();
        for c in &res.cells {
            let sigma = c.sigma.map_or("-".to_string(), |x| x.to_string());
            let mean = c.stats.map_or("-".to_string(), |st| format!("{:.1} +- {:.1}", st.mean, st.stderr));
            let flag = if c.flagged { " (flagged)" } else { "" };
            writeln!(s, "  width {} sigma {sigma}: tau {mean}, {}/{} converged{flag}", c.arch_value, c.n_converged, c.n_runs).unwrap();
        }
        if let Some(f) = &res.argmin_fit {
            writeln!(s, "  argmin sigma ~ {:.4} d^-{:.4} + {:.4}", f.amplitude, f.exponent, f.offset).unwrap();
        } else if let Some(n) = &res.argmin_fit_note {
            writeln!(s, "  argmin fit skipped: {n}").unwrap();
        }
        results.push(res);
    }
    if results.len() == 2 {
        let cmp = compare_initializations(&results[0], &results[1])?;
        write_comparison_csv(&dir.join("comparison.csv"), &cmp)?;
    }
    Manifest::new("vmc-sweep", &cfg.model, &cfg.arch_axis, cfg.base_seed, settings(&cfg)).write(&dir.join("manifest.json"))?;
    finish(dir, s)
}

fn appendix_b(cfg: AppendixConfig, dir: &Path) -> Outcome {
    let report = run_appendix_checks(&cfg.settings, cfg.base_seed)?;
    report.write(&dir.join("appendix_b.json"))?;
    let spec = arnqs::appendix::collapse_spec(cfg.settings.collapse_l, cfg.settings.collapse_d_h, arnqs::models::ActivationKind::Softmax);
    Manifest::new("check appendix-b", &spec, &[spec.width()], cfg.base_seed, settings(&cfg)).write(&dir.join("manifest.json"))?;
    let mut s = String::from("check appendix-b\n");
    for c in &report.checks {
        let verdict = match (c.passed, c.advisory) {
            (true, _) => "PASS",
            (false, true) => "FAIL (advisory)",
            (false, false) => "FAIL",
        };
        writeln!(s, "{verdict} {}: {} (want {})", c.name, c.value, c.threshold).unwrap();
    }
    if report.all_passed {
        Ok(s)
    } else {
        print!("{s}");
        Err(Failure::Check("appendix-b checks failed".into()))
    }
}

fn run(cli: Cli) -> Outcome {
    let (common, job): (&Common, Box<dyn FnOnce(&Path) -> Outcome + Send>) = match &cli.command {
        Command::PhaseDiagram(a) => {
            let cfg: PhaseDiagramConfig = load(&a.config, a.common.seed)?;
            (&a.common, Box::new(move |d| phase_diagram(cfg, d)))
        }
        Command::Scaling(a) => {
            let cfg: ScalingConfig = load(&a.config, a.common.seed)?;
            (&a.common, Box::new(move |d| scaling(cfg, d)))
        }
        Command::LevelStats(a) => {
            let cfg: LevelStatsConfig = load(&a.config, a.common.seed)?;
            (&a.common, Box::new(move |d| level_stats(cfg, d)))
        }
        Command::Correlations(a) => {
            let cfg: CorrelationsConfig = load(&a.config, a.common.seed)?;
            (&a.common, Box::new(move |d| correlations(cfg, d)))
        }
        Command::VmcSweep(a) => {
            let cfg: VmcSweepConfig = load(&a.config, a.common.seed)?;
            (&a.common, Box::new(move |d| vmc_sweep(cfg, d)))
        }
        Command::Check {
            suite: CheckSuite::AppendixB(a),
        } => {
            let mut cfg: AppendixConfig = match &a.config {
                Some(p) => load(p, None)?,
                None => AppendixConfig {
                    base_seed: 0,
                    settings: Default::default(),
                },
            };
            if let Some(s) = a.common.seed {
                cfg.set_seed(s);
            }
            (&a.common, Box::new(move |d| appendix_b(cfg, d)))
        }
    };
    if common.workers == Some(0) {
        return Err(Failure::Config("--workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.workers.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Compute(e.to_string()))?;
    prepare(&common.output)?;
    let dir = common.output.clone();
    pool.install(move || job(&dir))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            let msg = match &f {
                Failure::Config(m) => format!("config error: {m}"),
                Failure::Compute(m) => format!("error: {m}"),
                Failure::Check(m) => format!("check failed: {m}"),
            };
            eprintln!("{msg}");
            ExitCode::from(f.code())
        }
    }
}
