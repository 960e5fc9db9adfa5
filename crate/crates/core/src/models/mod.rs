//! Autoregressive wavefunction architectures and their parameters.

mod activation;
mod atf;
mod params;
mod rnn;
mod spec;

pub use activation::{activation_apply, log_conditional, log_conditional_grad, sigmoid, ActivationKind};
pub use atf::{atf_forward, positional_encoding, AtfNet};
pub use params::{init_gaussian, init_xavier_glorot, ParameterSet, TensorEntry, CONTAINER_MAGIC};
pub use rnn::{rnn_heads, rnn_step, RnnNet};
pub use spec::{AtfSpec, AttentionKind, CellKind, ModelSpec, PhaseMode, RnnSpec, TensorLayout, TensorRole};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// Amplitude of one configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Amplitude {
    /// `|Psi|^2`; unnormalized when `normalized` is false.
    pub modulus_sq: f64,
    pub log_modulus_sq: f64,
    pub phase: f64,
    pub normalized: bool,
}

impl Amplitude {
    pub fn value(&self) -> Complex64 {
        Complex64::from_polar(self.modulus_sq.sqrt(), self.phase)
    }
}

/// A wavefunction ready for evaluation.
#[derive(Clone, Debug)]
pub enum Network {
    Rnn(RnnNet),
    Atf(AtfNet),
}

impl Network {
    pub fn new(spec: &ModelSpec, params: &ParameterSet) -> Result<Self> {
        spec.validate()?;
        params.check_layout(spec)?;
        Ok(match spec {
            ModelSpec::Rnn(s) => Network::Rnn(RnnNet::new(s, params)?),
            ModelSpec::Atf(s) => Network::Atf(AtfNet::new(s, params)?),
        })
    }

    pub fn n_sites(&self) -> usize {
        match self {
            Network::Rnn(n) => n.spec().l,
            Network::Atf(n) => n.spec().l,
        }
    }

    pub fn output(&self) -> ActivationKind {
        match self {
            Network::Rnn(n) => n.spec().g,
            Network::Atf(n) => n.spec().g,
        }
    }

    pub fn is_normalized(&self) -> bool {
        self.output().is_normalizing()
    }

    /// `(ln |Psi|^2, phase)` of row-major configurations (`n x L`).
    pub fn log_amplitudes(&self, configs: &[u8]) -> (Vec<f64>, Vec<f64>) {
        debug_assert_eq!(configs.len() % self.n_sites(), 0);
        match self {
            Network::Rnn(n) => n.log_amplitudes(configs),
            Network::Atf(n) => n.log_amplitudes(configs),
        }
    }

    /// `(ln |Psi|^2, phase)` of all `2^L` states, site 0 as the most significant bit.
    pub fn enumerate(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Network::Rnn(n) => n.enumerate(),
            Network::Atf(n) => n.enumerate(),
        }
    }

    /// Exact ancestral samples: `(configs, ln |Psi|^2, phase)`.
    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Result<(Vec<u8>, Vec<f64>, Vec<f64>)> {
        if !self.is_normalized() {
            return Err(Error::NotNormalized(self.output()));
        }
        Ok(match self {
            Network::Rnn(net) => net.sample(n, rng),
            Network::Atf(net) => net.sample(n, rng),
        })
    }

    /// Per-site `(logits, phase components)` of one configuration.
    pub fn head_outputs(&self, config: &[u8]) -> Vec<([f64; 2], [f64; 2])> {
        match self {
            Network::Rnn(n) => n.head_outputs(config),
            Network::Atf(n) => n.head_outputs(config),
        }
    }

    /// Gradient of `sum_i w_logp[i] ln |Psi(s_i)|^2 + w_phase[i] phi(s_i)` in layout order.
    pub fn backward(&self, configs: &[u8], w_logp: &[f64], w_phase: &[f64]) -> Vec<f64> {
        match self {
            Network::Rnn(n) => n.backward(configs, w_logp, w_phase),
            Network::Atf(n) => n.backward(configs, w_logp, w_phase),
        }
    }
}

/// Amplitude of a single configuration.
pub fn amplitude(spec: &ModelSpec, params: &ParameterSet, spins: &[u8]) -> Result<Amplitude> {
    if spins.len() != spec.n_sites() {
        return Err(Error::Dimension(format!("{} spins for L = {}", spins.len(), spec.n_sites())));
    }
    if spins.iter().any(|&s| s > 1) {
        return Err(Error::InvalidArgument("spins must be 0 or 1".into()));
    }
    let net = Network::new(spec, params)?;
    let (lp, ph) = net.log_amplitudes(spins);
    Ok(Amplitude {
        modulus_sq: lp[0].exp(),
        log_modulus_sq: lp[0],
        phase: ph[0],
        normalized: spec.is_normalized(),
    })
}
