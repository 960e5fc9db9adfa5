use thiserror::Error;

use crate::models::ActivationKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |A - A^H| = {max_asymmetry:.3e})")]
    NotHermitian { max_asymmetry: f64 },

    #[error("eigendecomposition did not converge")]
    EigenNoConvergence,

    #[error("{what}: need at least {need} points, got {got}")]
    TooFewPoints {
        what: &'static str,
        need: usize,
        got: usize,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("quadrature did not converge (estimate {estimate}, error {error:.3e})")]
    QuadratureNoConvergence { estimate: f64, error: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("parameter set does not match spec: {0}")]
    ParamLayout(String),

    #[error("output function {0:?} does not normalize the conditionals; use mcmc_sample")]
    NotNormalized(ActivationKind),

    #[error("system size {size} exceeds cap {cap}: {hint}")]
    SizeCap {
        size: usize,
        cap: usize,
        hint: &'static str,
    },

    #[error("density matrix trace {0} deviates from 1")]
    Trace(f64),

    #[error("only {0} eigenvalues above cutoff; at least 3 are needed for gap ratios")]
    SpectrumTooSmall(usize),

    #[error("all spectral gaps are degenerate")]
    DegenerateGaps,

    #[error("swap estimate of Tr(rho_A^2) is nonpositive ({mean:.4e} +/- {stderr:.2e}); more samples needed")]
    SwapNonPositive { mean: f64, stderr: f64 },

    #[error("amplitude vanishes on a sampled configuration")]
    ZeroAmplitude,

    #[error("optimization diverged at iteration {iteration}")]
    Diverged {
        iteration: usize,
        energy_trace: Vec<f64>,
    },

    #[error("malformed parameter container: {0}")]
    Format(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
