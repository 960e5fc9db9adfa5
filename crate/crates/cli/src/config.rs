//! JSON run configurations, one schema per subcommand.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use arnqs::appendix::AppendixSettings;
use arnqs::ensemble::{Estimator, InitScheme, SweepGrid};
use arnqs::models::ModelSpec;
use arnqs::observables::DEFAULT_CUTOFF;
use arnqs::vmc::{Hamiltonian, VmcConfig};

fn default_estimator() -> Estimator {
    Estimator::Auto {
        n_samples: 100_000,
        exact_max_l: 16,
    }
}

fn default_cutoff() -> f64 {
    DEFAULT_CUTOFF
}

fn default_correlation_samples() -> usize {
    20_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseDiagramConfig {
    pub model: ModelSpec,
    pub arch_axis: Vec<usize>,
    pub sigma_axis: Vec<f64>,
    pub n_init: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_estimator")]
    pub estimator: Estimator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    pub model: ModelSpec,
    pub sigma_list: Vec<f64>,
    pub l_list: Vec<usize>,
    pub n_init: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_estimator")]
    pub estimator: Estimator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelStatsConfig {
    pub model: ModelSpec,
    pub sigma_list: Vec<f64>,
    pub n_init: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationsConfig {
    pub model: ModelSpec,
    pub sigma_list: Vec<f64>,
    pub n_init: usize,
    #[serde(default = "default_correlation_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub base_seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitChoice {
    Gaussian,
    XavierGlorot,
    /// Both sweeps plus the comparison table.
    Both,
}

impl InitChoice {
    pub fn schemes(self) -> Vec<InitScheme> {
        match self {
            InitChoice::Gaussian => vec![InitScheme::Gaussian],
            InitChoice::XavierGlorot => vec![InitScheme::XavierGlorot],
            InitChoice::Both => vec![InitScheme::Gaussian, InitScheme::XavierGlorot],
        }
    }
}

fn default_init() -> InitChoice {
    InitChoice::Gaussian
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VmcSweepConfig {
    pub model: ModelSpec,
    pub hamiltonian: Hamiltonian,
    pub arch_axis: Vec<usize>,
    pub sigma_axis: Vec<f64>,
    pub n_init: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// The per-run sampler seed is derived from the replica stream; `vmc.seed` is ignored.
    pub vmc: VmcConfig,
    #[serde(default = "default_init")]
    pub init: InitChoice,
    /// Ground energy to measure against; exact diagonalization when absent.
    #[serde(default)]
    pub e_ref: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppendixConfig {
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub settings: AppendixSettings,
}

impl PhaseDiagramConfig {
    pub fn grid(&self) -> SweepGrid {
        SweepGrid {
            arch_axis: self.arch_axis.clone(),
            sigma_axis: self.sigma_axis.clone(),
            n_init: self.n_init,
            base_seed: self.base_seed,
        }
    }
}

impl VmcSweepConfig {
    pub fn grid(&self) -> SweepGrid {
        SweepGrid {
            arch_axis: self.arch_axis.clone(),
            sigma_axis: self.sigma_axis.clone(),
            n_init: self.n_init,
            base_seed: self.base_seed,
        }
    }
}

/// Checks beyond the schema, run before any compute.
pub trait Validate {
    fn validate(&self) -> Result<(), String>;
    fn set_seed(&mut self, seed: u64);
}

fn check_model(model: &ModelSpec, widths: &[usize]) -> Result<(), String> {
    model.validate().map_err(|e| e.to_string())?;
    for &w in widths {
        model.with_width(w).validate().map_err(|e| format!("width {w}: {e}"))?;
    }
    Ok(())
}

fn check_sigmas(s: &[f64], name: &str) -> Result<(), String> {
    if s.is_empty() {
        return Err(format!("{name} must be nonempty"));
    }
    if s.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(format!("{name} entries must be finite and nonnegative"));
    }
    Ok(())
}

fn check_count(n: usize, name: &str) -> Result<(), String> {
    if n == 0 {
        Err(format!("{name} must be at least 1"))
    } else {
        Ok(())
    }
}

impl Validate for PhaseDiagramConfig {
    fn validate(&self) -> Result<(), String> {
        if self.arch_axis.is_empty() {
            return Err("arch_axis must be nonempty".into());
        }
        check_model(&self.model, &self.arch_axis)?;
        check_sigmas(&self.sigma_axis, "sigma_axis")?;
        check_count(self.n_init, "n_init")?;
        self.estimator.resolve(self.model.n_sites()).map_err(|e| e.to_string())?;
        Ok(())
    }
    fn set_seed(&mut self, seed: u64) {
        self.base_seed = seed;
    }
}

impl Validate for ScalingConfig {
    fn validate(&self) -> Result<(), String> {
        check_model(&self.model, &[])?;
        check_sigmas(&self.sigma_list, "sigma_list")?;
        check_count(self.n_init, "n_init")?;
        if self.l_list.is_empty() || self.l_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err("l_list must be nonempty and strictly ascending".into());
        }
        for &l in &self.l_list {
            self.model.with_sites(l).validate().map_err(|e| format!("L = {l}: {e}"))?;
            self.estimator.resolve(l).map_err(|e| format!("L = {l}: {e}"))?;
        }
        Ok(())
    }
    fn set_seed(&mut self, seed: u64) {
        self.base_seed = seed;
    }
}

impl Validate for LevelStatsConfig {
    fn validate(&self) -> Result<(), String> {
        check_model(&self.model, &[])?;
        check_sigmas(&self.sigma_list, "sigma_list")?;
        check_count(self.n_init, "n_init")?;
        if !(self.cutoff > 0.0 && self.cutoff < 1.0) {
            return Err("cutoff must lie in (0, 1)".into());
        }
        Ok(())
    }
    fn set_seed(&mut self, seed: u64) {
        self.base_seed = seed;
    }
}

impl Validate for CorrelationsConfig {
    fn validate(&self) -> Result<(), String> {
        check_model(&self.model, &[])?;
        check_sigmas(&self.sigma_list, "sigma_list")?;
        check_count(self.n_init, "n_init")?;
        if self.n_samples < 1000 {
            return Err("n_samples must be at least 1000".into());
        }
        Ok(())
    }
    fn set_seed(&mut self, seed: u64) {
        self.base_seed = seed;
    }
}

impl Validate for VmcSweepConfig {
    fn validate(&self) -> Result<(), String> {
        if self.arch_axis.is_empty() {
            return Err("arch_axis must be nonempty".into());
        }
        check_model(&self.model, &self.arch_axis)?;
        check_sigmas(&self.sigma_axis, "sigma_axis")?;
        check_count(self.n_init, "n_init")?;
        self.vmc.validate().map_err(|e| e.to_string())?;
        if self.hamiltonian.l != self.model.n_sites() {
            return Err(format!(
                "hamiltonian.l = {} but the model has {} sites",
                self.hamiltonian.l,
                self.model.n_sites()
            ));
        }
        if self.e_ref == Some(0.0) {
            return Err("e_ref must be nonzero".into());
        }
        Ok(())
    }
    fn set_seed(&mut self, seed: u64) {
        self.base_seed = seed;
    }
}

impl Validate for AppendixConfig {
    fn validate(&self) -> Result<(), String> {
        let s = &self.settings;
        if s.marginal_samples < 10_000 {
            return Err("settings.marginal_samples must be at least 10000".into());
        }
        check_count(s.collapse_l, "settings.collapse_l")?;
        check_count(s.collapse_d_h, "settings.collapse_d_h")?;
        check_count(s.collapse_models, "settings.collapse_models")?;
        check_count(s.collapse_samples, "settings.collapse_samples")?;
        if s.hamming_models < 2 {
            return Err("settings.hamming_models must be at least 2".into());
        }
        Ok(())
    }
    fn set_seed(&mut self, seed: u64) {
        self.base_seed = seed;
    }
}

/// Strict parse: unknown keys and type errors are reported with their key path.
pub fn parse_config<T: DeserializeOwned + Validate>(text: &str) -> Result<T, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: T = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            e.inner().to_string()
        } else {
            format!("{path}: {}", e.inner())
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}
