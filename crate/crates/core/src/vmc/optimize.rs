//! Energy and gradient estimators, Adam and the optimization loop.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::hamiltonian::{local_energies, Hamiltonian};
use crate::error::{Error, Result};
use crate::models::{ModelSpec, Network, ParameterSet};
use crate::numerics::RngStream;
use crate::sampling::ancestral_sample;

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyGradient {
    pub energy: f64,
    /// Standard error of `energy` (i.i.d. ancestral samples).
    pub energy_stderr: f64,
    /// `Var(E_loc) / L`.
    pub var_per_spin: f64,
    pub grad: Vec<f64>,
}

/// Backward weights for `2 Re<(E_loc - E)^* d ln Psi>` with `ln Psi = ln P / 2 + i phi`
/// and `c = E_loc - E`: `Re c` on `ln P` and `2 Im c` on `phi`.
fn gradient_weights(el: &[Complex64], e: f64, p: impl Fn(usize) -> f64) -> (Vec<f64>, Vec<f64>) {
    let w_logp = el.iter().enumerate().map(|(i, c)| p(i) * (c.re - e)).collect();
    let w_phase = el.iter().enumerate().map(|(i, c)| 2.0 * p(i) * c.im).collect();
    (w_logp, w_phase)
}

/// Monte Carlo energy, variance and gradient from `n_samples` ancestral samples.
pub fn energy_and_gradient(
    spec: &ModelSpec,
    params: &ParameterSet,
    ham: &Hamiltonian,
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<EnergyGradient> {
    energy_and_gradient_net(&Network::new(spec, params)?, ham, n_samples, rng)
}

pub fn energy_and_gradient_net(net: &Network, ham: &Hamiltonian, n_samples: usize, rng: &mut RngStream) -> Result<EnergyGradient> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("no samples for the energy estimate".into()));
    }
    let batch = ancestral_sample(net, n_samples, rng)?;
    let el = local_energies(net, ham, &batch.configs, &batch.log_modulus_sq, &batch.phases)?;
    let n = n_samples as f64;
    let mean: Complex64 = el.iter().sum::<Complex64>() / n;
    let var = el.iter().map(|c| (c - mean).norm_sqr()).sum::<f64>() / n;
    let e = mean.re;
    let (w_logp, w_phase) = gradient_weights(&el, e, |_| 1.0 / n);
    Ok(EnergyGradient {
        energy: e,
        energy_stderr: (var / n).sqrt(),
        var_per_spin: var / ham.l as f64,
        grad: net.backward(&batch.configs, &w_logp, &w_phase),
    })
}

/// `<Psi|H|Psi> / <Psi|Psi>` by enumeration.
pub fn exact_energy(net: &Network, ham: &Hamiltonian) -> Result<f64> {
    Ok(exact_energy_and_gradient(net, ham)?.energy)
}

/// Energy, variance and gradient with every configuration weighted by its exact probability.
pub fn exact_energy_and_gradient(net: &Network, ham: &Hamiltonian) -> Result<EnergyGradient> {
    let l = net.n_sites();
    let (lp, ph) = net.enumerate();
    let max = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = lp.iter().map(|&x| (x - max).exp()).sum();
    let keep: Vec<usize> = (0..lp.len()).filter(|&i| lp[i] > f64::NEG_INFINITY).collect();
    let mut configs = Vec::with_capacity(keep.len() * l);
    for &idx in &keep {
        configs.extend((0..l).map(|s| ((idx >> (l - 1 - s)) & 1) as u8));
    }
    let klp: Vec<f64> = keep.iter().map(|&i| lp[i]).collect();
    let kph: Vec<f64> = keep.iter().map(|&i| ph[i]).collect();
    let p: Vec<f64> = klp.iter().map(|&x| (x - max).exp() / z).collect();
    let el = local_energies(net, ham, &configs, &klp, &kph)?;
    let mean: Complex64 = el.iter().zip(&p).map(|(c, w)| c * w).sum();
    let var = el.iter().zip(&p).map(|(c, w)| w * (c - mean).norm_sqr()).sum::<f64>();
    let (w_logp, w_phase) = gradient_weights(&el, mean.re, |i| p[i]);
    Ok(EnergyGradient {
        energy: mean.re,
        energy_stderr: 0.0,
        var_per_spin: var / ham.l as f64,
        grad: net.backward(&configs, &w_logp, &w_phase),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Steps taken so far.
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One bias-corrected Adam step (step number `state.t + 1`).
pub fn adam_step(params: &[f64], grad: &[f64], state: &AdamState, eta: f64, cfg: &AdamConfig) -> (Vec<f64>, AdamState) {
    assert_eq!(params.len(), grad.len());
    let t = state.t + 1;
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    let mut next = AdamState {
        m: Vec::with_capacity(grad.len()),
        v: Vec::with_capacity(grad.len()),
        t,
    };
    let out = params
        .iter()
        .zip(grad)
        .enumerate()
        .map(|(i, (&p, &g))| {
            let m = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
            let v = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
            next.m.push(m);
            next.v.push(v);
            p - eta * (m / c1) / ((v / c2).sqrt() + cfg.eps)
        })
        .collect();
    (out, next)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VmcConfig {
    pub eta: f64,
    pub n_samples_grad: usize,
    #[serde(default = "default_target")]
    pub eps_rel_target: f64,
    #[serde(default = "default_target")]
    pub var_per_spin_target: f64,
    pub max_iters: usize,
    #[serde(default)]
    pub adam: AdamConfig,
    /// Iterations averaged in the convergence test.
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_target() -> f64 {
    1e-3
}

fn default_window() -> usize {
    1
}

impl VmcConfig {
    pub fn new(eta: f64, n_samples_grad: usize, max_iters: usize, seed: u64) -> Self {
        Self {
            eta,
            n_samples_grad,
            eps_rel_target: default_target(),
            var_per_spin_target: default_target(),
            max_iters,
            adam: AdamConfig::default(),
            window: default_window(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eps_rel_target > 0.0 && self.var_per_spin_target > 0.0) {
            return Err(Error::InvalidArgument("learning rate and targets must be positive".into()));
        }
        if self.n_samples_grad == 0 || self.window == 0 {
            return Err(Error::InvalidArgument("n_samples_grad and window must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VmcResult {
    /// First iteration meeting both targets; `None` if `max_iters` passed first.
    pub tau_conv: Option<usize>,
    pub energy_trace: Vec<f64>,
    pub variance_trace: Vec<f64>,
    pub eps_rel_trace: Vec<f64>,
    pub wall_ms: Vec<f64>,
    pub final_params: ParameterSet,
    pub adam: AdamState,
}

fn window_mean(v: &[f64], w: usize) -> f64 {
    let tail = &v[v.len().saturating_sub(w)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Adam descent on the sampled energy until `eps_rel` and `var_per_spin` both meet their targets.
///
/// The test at iteration `t` uses the estimates made with the parameters after `t` updates,
/// averaged over the last `window` iterations.
pub fn vmc_optimize(
    spec: &ModelSpec,
    init_params: &ParameterSet,
    ham: &Hamiltonian,
    cfg: &VmcConfig,
    e_ref: f64,
) -> Result<VmcResult> {
    cfg.validate()?;
    if e_ref == 0.0 {
        return Err(Error::InvalidArgument("reference energy must be nonzero".into()));
    }
    let mut rng = RngStream::new(cfg.seed);
    let mut params = init_params.clone();
    let mut adam = AdamState::new(params.total_count());
    let mut res = VmcResult {
        tau_conv: None,
        energy_trace: Vec::new(),
        variance_trace: Vec::new(),
        eps_rel_trace: Vec::new(),
        wall_ms: Vec::new(),
        final_params: params.clone(),
        adam: adam.clone(),
    };
    let start = Instant::now();
    for it in 0..=cfg.max_iters {
        let net = Network::new(spec, &params)?;
        let eg = energy_and_gradient_net(&net, ham, cfg.n_samples_grad, &mut rng)?;
        if !eg.energy.is_finite() || !eg.var_per_spin.is_finite() || eg.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                iteration: it,
                energy_trace: res.energy_trace,
            });
        }
        res.energy_trace.push(eg.energy);
        res.variance_trace.push(eg.var_per_spin);
        let e = window_mean(&res.energy_trace, cfg.window);
        let var = window_mean(&res.variance_trace, cfg.window);
        let eps_rel = (e - e_ref).abs() / e_ref.abs();
        res.eps_rel_trace.push(eps_rel);
        res.wall_ms.push(start.elapsed().as_secs_f64() * 1e3);
        if eps_rel <= cfg.eps_rel_target && var <= cfg.var_per_spin_target {
            res.tau_conv = Some(it);
            break;
        }
        if it == cfg.max_iters {
            break;
        }
        let (next, state) = adam_step(params.as_slice(), &eg.grad, &adam, cfg.eta, &cfg.adam);
        params.as_mut_slice().copy_from_slice(&next);
        adam = state;
    }
    res.final_params = params;
    res.adam = adam;
    Ok(res)
}

/// `iteration,E_mean,var_per_spin,eps_rel,wall_ms`
pub fn write_trace_csv(path: &Path, res: &VmcResult) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "iteration,E_mean,var_per_spin,eps_rel,wall_ms")?;
    for i in 0..res.energy_trace.len() {
        writeln!(
            w,
            "{i},{},{},{},{:.3}",
            res.energy_trace[i], res.variance_trace[i], res.eps_rel_trace[i], res.wall_ms[i]
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Parameters (`<stem>.bin` + `<stem>.json`) and Adam moments (`<stem>.adam.json`).
pub fn save_checkpoint(stem: &Path, spec: &ModelSpec, params: &ParameterSet, adam: &AdamState) -> Result<()> {
    params.save(spec, stem)?;
    std::fs::write(stem.with_extension("adam.json"), serde_json::to_vec(adam)?)?;
    Ok(())
}

pub fn load_checkpoint(stem: &Path) -> Result<(ModelSpec, ParameterSet, AdamState)> {
    let (spec, params) = ParameterSet::load(stem)?;
    let adam: AdamState = serde_json::from_slice(&std::fs::read(stem.with_extension("adam.json"))?)?;
    if adam.m.len() != params.total_count() || adam.v.len() != params.total_count() {
        return Err(Error::ParamLayout("Adam state does not match the parameter count".into()));
    }
    Ok((spec, params, adam))
}
