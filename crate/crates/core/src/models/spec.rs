use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::activation::ActivationKind;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    Complex,
    Positive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Vanilla,
    Gru,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionKind {
    /// Scaled dot-product attention with a causal mask.
    Softmax,
    /// Masked circulant attention from a trainable length-`L` kernel per head.
    Circulant,
}

/// Recurrent network wavefunction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RnnSpec {
    pub l: usize,
    pub d_h: usize,
    #[serde(default = "default_cell")]
    pub cell: CellKind,
    pub f: ActivationKind,
    pub g: ActivationKind,
    pub phase_mode: PhaseMode,
}

fn default_cell() -> CellKind {
    CellKind::Vanilla
}

/// Autoregressive transformer wavefunction (one attention block, one feed-forward layer).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtfSpec {
    pub l: usize,
    pub d_emb: usize,
    #[serde(default = "default_heads")]
    pub heads: usize,
    pub attention: AttentionKind,
    #[serde(default = "default_f_fl")]
    pub f_fl: ActivationKind,
    pub g: ActivationKind,
    /// Feed-forward width; `None` means `d_emb`.
    #[serde(default)]
    pub d_fl: Option<usize>,
    #[serde(default = "default_n_ffl")]
    pub n_ffl: usize,
    pub phase_mode: PhaseMode,
}

fn default_heads() -> usize {
    2
}
fn default_f_fl() -> ActivationKind {
    ActivationKind::Relu
}
fn default_n_ffl() -> usize {
    1
}

impl AtfSpec {
    pub fn d_k(&self) -> usize {
        self.d_emb / self.heads
    }

    pub fn d_fl(&self) -> usize {
        self.d_fl.unwrap_or(self.d_emb)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "snake_case")]
pub enum ModelSpec {
    Rnn(RnnSpec),
    Atf(AtfSpec),
}

/// How a tensor is initialized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorRole {
    /// Weight of a linear map with the given fan-in.
    Weight { fan_in: usize },
    Bias,
    NormGain,
    NormBias,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorLayout {
    pub name: String,
    pub shape: Vec<usize>,
    pub role: TensorRole,
}

impl TensorLayout {
    fn new(name: impl Into<String>, shape: &[usize], role: TensorRole) -> Self {
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            role,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ModelSpec {
    pub fn n_sites(&self) -> usize {
        match self {
            ModelSpec::Rnn(s) => s.l,
            ModelSpec::Atf(s) => s.l,
        }
    }

    pub fn output(&self) -> ActivationKind {
        match self {
            ModelSpec::Rnn(s) => s.g,
            ModelSpec::Atf(s) => s.g,
        }
    }

    pub fn phase_mode(&self) -> PhaseMode {
        match self {
            ModelSpec::Rnn(s) => s.phase_mode,
            ModelSpec::Atf(s) => s.phase_mode,
        }
    }

    /// Whether the output head yields normalized conditionals (direct sampling possible).
    pub fn is_normalized(&self) -> bool {
        self.output().is_normalizing()
    }

    /// Hidden (RNN) or embedding (ATF) width.
    pub fn width(&self) -> usize {
        match self {
            ModelSpec::Rnn(s) => s.d_h,
            ModelSpec::Atf(s) => s.d_emb,
        }
    }

    /// Copy of the spec with a different hidden/embedding width.
    pub fn with_width(&self, width: usize) -> ModelSpec {
        match self {
            ModelSpec::Rnn(s) => ModelSpec::Rnn(RnnSpec { d_h: width, ..s.clone() }),
            ModelSpec::Atf(s) => ModelSpec::Atf(AtfSpec { d_emb: width, ..s.clone() }),
        }
    }

    /// Copy of the spec at a different system size.
    pub fn with_sites(&self, l: usize) -> ModelSpec {
        match self {
            ModelSpec::Rnn(s) => ModelSpec::Rnn(RnnSpec { l, ..s.clone() }),
            ModelSpec::Atf(s) => ModelSpec::Atf(AtfSpec { l, ..s.clone() }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Rnn(s) => {
                if s.l == 0 {
                    return Err(Error::InvalidSpec("L must be at least 1".into()));
                }
                if s.d_h == 0 {
                    return Err(Error::InvalidSpec("d_h must be at least 1".into()));
                }
                if !s.f.is_elementwise() {
                    return Err(Error::InvalidSpec(format!("hidden activation {:?} must be element-wise", s.f)));
                }
            }
            ModelSpec::Atf(s) => {
                if s.l == 0 {
                    return Err(Error::InvalidSpec("L must be at least 1".into()));
                }
                if s.heads == 0 || s.d_emb == 0 {
                    return Err(Error::InvalidSpec("d_emb and heads must be positive".into()));
                }
                if s.d_emb % s.heads != 0 {
                    return Err(Error::InvalidSpec("d_emb not divisible by heads".into()));
                }
                if s.d_fl() == 0 {
                    return Err(Error::InvalidSpec("d_fl must be positive".into()));
                }
                if s.n_ffl != 1 {
                    return Err(Error::InvalidSpec("exactly one feed-forward layer is supported".into()));
                }
                if !s.f_fl.is_elementwise() {
                    return Err(Error::InvalidSpec(format!(
                        "feed-forward activation {:?} must be element-wise",
                        s.f_fl
                    )));
                }
            }
        }
        Ok(())
    }

    /// Ordered list of trainable tensors.
    pub fn layout(&self) -> Vec<TensorLayout> {
        use TensorRole::*;
        let mut t = Vec::new();
        match self {
            ModelSpec::Rnn(s) => {
                let dh = s.d_h;
                let gates: &[(&str, &str)] = match s.cell {
                    CellKind::Vanilla => &[("w", "b")],
                    CellKind::Gru => &[("w_z", "b_z"), ("w_r", "b_r"), ("w_n", "b_n")],
                };
                for (w, b) in gates {
                    t.push(TensorLayout::new(*w, &[dh, dh + 2], Weight { fan_in: dh + 2 }));
                    t.push(TensorLayout::new(*b, &[dh], Bias));
                }
                t.push(TensorLayout::new("u", &[2, dh], Weight { fan_in: dh }));
                t.push(TensorLayout::new("c", &[2], Bias));
                if s.phase_mode == PhaseMode::Complex {
                    t.push(TensorLayout::new("v", &[2, dh], Weight { fan_in: dh }));
                    t.push(TensorLayout::new("d", &[2], Bias));
                }
            }
            ModelSpec::Atf(s) => {
                let (de, dk, dfl) = (s.d_emb, s.d_k(), s.d_fl());
                t.push(TensorLayout::new("embed", &[2, de], Weight { fan_in: 2 }));
                for i in 0..s.heads {
                    match s.attention {
                        AttentionKind::Softmax => {
                            for m in ["wq", "wk", "wv"] {
                                t.push(TensorLayout::new(format!("{m}_{i}"), &[de, dk], Weight { fan_in: de }));
                            }
                        }
                        AttentionKind::Circulant => {
                            t.push(TensorLayout::new(format!("kernel_{i}"), &[s.l], Weight { fan_in: s.l }));
                        }
                    }
                }
                t.push(TensorLayout::new("ln1_gain", &[de], NormGain));
                t.push(TensorLayout::new("ln1_bias", &[de], NormBias));
                t.push(TensorLayout::new("w1", &[de, dfl], Weight { fan_in: de }));
                t.push(TensorLayout::new("b1", &[dfl], Bias));
                t.push(TensorLayout::new("w2", &[dfl, de], Weight { fan_in: dfl }));
                t.push(TensorLayout::new("b2", &[de], Bias));
                t.push(TensorLayout::new("ln2_gain", &[de], NormGain));
                t.push(TensorLayout::new("ln2_bias", &[de], NormBias));
                t.push(TensorLayout::new("w3", &[de, 2], Weight { fan_in: de }));
                t.push(TensorLayout::new("c3", &[2], Bias));
                if s.phase_mode == PhaseMode::Complex {
                    t.push(TensorLayout::new("w4", &[de, 2], Weight { fan_in: de }));
                    t.push(TensorLayout::new("d4", &[2], Bias));
                }
            }
        }
        t
    }

    pub fn parameter_count(&self) -> usize {
        self.layout().iter().map(TensorLayout::len).sum()
    }

    /// Number of trainable parameters inside the attention mechanism (zero for RNNs).
    pub fn attention_parameter_count(&self) -> usize {
        self.layout()
            .iter()
            .filter(|t| t.name.starts_with("wq_") || t.name.starts_with("wk_") || t.name.starts_with("wv_") || t.name.starts_with("kernel_"))
            .map(TensorLayout::len)
            .sum()
    }

    /// Whether the parameter shapes are independent of the system size, so one
    /// parameter draw can be evaluated at every `L`.
    pub fn shares_parameters_across_sizes(&self) -> bool {
        match self {
            ModelSpec::Rnn(_) => true,
            ModelSpec::Atf(s) => s.attention == AttentionKind::Softmax,
        }
    }

    /// Short stable hash of the canonical JSON form.
    pub fn hash_hex(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serializes");
        let digest = Sha256::digest(&json);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
