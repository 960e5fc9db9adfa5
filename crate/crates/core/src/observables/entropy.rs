//! State vectors, reduced density matrices and Renyi-2 entropy.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelSpec, Network, ParameterSet};
use crate::numerics::{batch_means, RngStream};
use crate::sampling::sample_any;

/// Largest chain enumerated into a dense state vector unless a caller raises it.
pub const STATE_VECTOR_CAP: usize = 22;
/// Largest subsystem whose reduced density matrix is built explicitly.
pub const RDM_CAP: usize = 14;
/// Tolerance on `Tr rho - 1` accepted by the entropy routines.
pub const TRACE_TOL: f64 = 1e-6;
/// Number of batches used for swap-estimator error bars.
pub const SWAP_BATCHES: usize = 100;

/// Subsystem `A` of a bipartition; `B` is the complement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub l: usize,
    pub region_a: Vec<usize>,
}

impl Partition {
    pub fn new(l: usize, region_a: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; l];
        for &s in &region_a {
            if s >= l {
                return Err(Error::InvalidArgument(format!("site {s} outside a chain of {l}")));
            }
            if std::mem::replace(&mut seen[s], true) {
                return Err(Error::InvalidArgument(format!("site {s} listed twice")));
            }
        }
        Ok(Self { l, region_a })
    }

    /// First `L/2` sites.
    pub fn half(l: usize) -> Self {
        Self {
            l,
            region_a: (0..l / 2).collect(),
        }
    }

    pub fn size_a(&self) -> usize {
        self.region_a.len()
    }

    pub fn region_b(&self) -> Vec<usize> {
        (0..self.l).filter(|s| !self.region_a.contains(s)).collect()
    }

    fn is_leading_block(&self) -> bool {
        self.region_a.iter().enumerate().all(|(k, &s)| k == s)
    }

    /// Split of a basis index into `(index in A, index in B)`, each with its first
    /// listed site as the most significant bit.
    fn splitter(&self) -> impl Fn(usize) -> (usize, usize) + '_ {
        let l = self.l;
        let na = self.size_a();
        let nb = l - na;
        let b_sites = self.region_b();
        let leading = self.is_leading_block();
        move |idx| {
            if leading {
                return (idx >> nb, idx & ((1 << nb) - 1));
            }
            let bit = |s: usize| (idx >> (l - 1 - s)) & 1;
            let a = self.region_a.iter().fold(0, |acc, &s| (acc << 1) | bit(s));
            let b = b_sites.iter().fold(0, |acc, &s| (acc << 1) | bit(s));
            (a, b)
        }
    }
}

/// Dense amplitudes of all `2^L` basis states.
#[derive(Clone, Debug)]
pub struct StateVector {
    pub l: usize,
    pub amplitudes: Vec<Complex64>,
    /// `sum |Psi|^2` before normalization. Exactly 1 up to rounding for normalizing outputs.
    pub raw_norm: f64,
}

pub fn exact_state_vector(spec: &ModelSpec, params: &ParameterSet) -> Result<StateVector> {
    exact_state_vector_capped(spec, params, STATE_VECTOR_CAP)
}

pub fn exact_state_vector_capped(spec: &ModelSpec, params: &ParameterSet, cap: usize) -> Result<StateVector> {
    if spec.n_sites() > cap {
        return Err(Error::SizeCap {
            size: spec.n_sites(),
            cap,
            hint: "use the swap estimator for larger chains",
        });
    }
    state_vector_of(&Network::new(spec, params)?)
}

pub fn state_vector_of(net: &Network) -> Result<StateVector> {
    let (lp, ph) = net.enumerate();
    let max = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::ZeroAmplitude);
    }
    let sum: f64 = lp.iter().map(|&x| (x - max).exp()).sum();
    let log_norm = max + sum.ln();
    // Normalizing outputs are left untouched; rescaling would only add rounding.
    let shift = if net.is_normalized() { 0.0 } else { log_norm };
    let amplitudes = lp
        .iter()
        .zip(&ph)
        .map(|(&x, &p)| Complex64::from_polar((0.5 * (x - shift)).exp(), p))
        .collect();
    Ok(StateVector {
        l: net.n_sites(),
        amplitudes,
        raw_norm: log_norm.exp(),
    })
}

/// Amplitudes arranged as a `rows x cols` matrix with real and imaginary parts side by side,
/// `Z = [X Y]`. Rows index the subsystem named by `rows_are_a`.
fn split_matrix(state: &[Complex64], part: &Partition, rows_are_a: bool) -> DMatrix<f64> {
    let na = part.size_a();
    let nb = part.l - na;
    let (rows, cols) = if rows_are_a { (1 << na, 1 << nb) } else { (1 << nb, 1 << na) };
    let mut z = DMatrix::zeros(rows, 2 * cols);
    let split = part.splitter();
    for (idx, v) in state.iter().enumerate() {
        let (a, b) = split(idx);
        let (r, c) = if rows_are_a { (a, b) } else { (b, a) };
        z[(r, c)] = v.re;
        z[(r, cols + c)] = v.im;
    }
    z
}

/// `(Re rho, Im rho)` from `Z = [X Y]`: `rho = (X + iY)(X + iY)^H`.
fn gram(z: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let cols = z.ncols() / 2;
    let mut w = DMatrix::zeros(z.nrows(), z.ncols());
    w.columns_mut(0, cols).copy_from(&z.columns(cols, cols));
    w.columns_mut(cols, cols).copy_from(&(-z.columns(0, cols)));
    let zt = z.transpose();
    (z * &zt, w * zt)
}

fn check_state(state: &[Complex64], part: &Partition) -> Result<()> {
    if state.len() != 1 << part.l {
        return Err(Error::Dimension(format!(
            "state of length {} for a {}-site partition",
            state.len(),
            part.l
        )));
    }
    Ok(())
}

/// `rho_A = Tr_B |Psi><Psi|` with the first site of `A` as the most significant bit.
pub fn reduced_density_matrix(state: &[Complex64], part: &Partition) -> Result<DMatrix<Complex64>> {
    check_state(state, part)?;
    if part.size_a() > RDM_CAP {
        return Err(Error::SizeCap {
            size: part.size_a(),
            cap: RDM_CAP,
            hint: "reduced density matrix too large to diagonalize",
        });
    }
    let (re, im) = gram(&split_matrix(state, part, true));
    Ok(DMatrix::from_fn(re.nrows(), re.ncols(), |i, j| Complex64::new(re[(i, j)], im[(i, j)])))
}

/// `(Tr rho_A, Tr rho_A^2)` straight from the state, using whichever side of the cut is smaller.
pub fn purity_from_state(state: &[Complex64], part: &Partition) -> Result<(f64, f64)> {
    check_state(state, part)?;
    let rows_are_a = 2 * part.size_a() <= part.l;
    let (re, im) = gram(&split_matrix(state, part, rows_are_a));
    Ok((re.trace(), re.norm_squared() + im.norm_squared()))
}

fn s2_from_purity(trace: f64, purity: f64) -> Result<f64> {
    if (trace - 1.0).abs() > TRACE_TOL {
        return Err(Error::Trace(trace));
    }
    // Rounding can push a pure state's purity a hair above 1.
    Ok((-purity.ln()).max(0.0))
}

/// `-ln Tr rho^2`.
pub fn renyi2_exact(rho: &DMatrix<Complex64>) -> Result<f64> {
    let trace: Complex64 = rho.trace();
    let purity: f64 = rho.iter().map(|c| c.norm_sqr()).sum();
    s2_from_purity(trace.re, purity)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMethod {
    Swap,
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementReport {
    pub s2: f64,
    pub s2_stderr: f64,
    pub method: EntropyMethod,
    /// Estimate of `Tr rho_A^2` and its error.
    pub purity: f64,
    pub purity_stderr: f64,
    /// Mean imaginary part of the swap ratios; zero within error for a correct sampler.
    pub imag_mean: Option<f64>,
    /// Entanglement energies, ascending.
    pub spectrum: Option<Vec<f64>>,
    pub gap_ratios: Option<Vec<f64>>,
}

/// Exact `S_2` of a network's state vector.
pub fn renyi2_exact_state(net: &Network, part: &Partition) -> Result<EntanglementReport> {
    let state = state_vector_of(net)?;
    let (trace, purity) = purity_from_state(&state.amplitudes, part)?;
    let s2 = s2_from_purity(trace, purity)?;
    Ok(EntanglementReport {
        s2,
        s2_stderr: 0.0,
        method: EntropyMethod::Exact,
        purity,
        purity_stderr: 0.0,
        imag_mean: None,
        spectrum: None,
        gap_ratios: None,
    })
}

/// Swap-operator estimate of `S_2`.
///
/// Two independent streams `{s}` and `{t}` are drawn from `|Psi|^2`. Each pair contributes
/// `Psi(t_A, s_B) Psi(s_A, t_B) / (Psi(s) Psi(t))`, whose expectation is `Tr rho_A^2`
/// (the conjugate of this ratio has the same real part). The real parts are averaged;
/// the imaginary mean is kept as a diagnostic. Non-normalizing outputs fall back to
/// Metropolis sampling, in which case batch means also absorb the autocorrelation.
pub fn renyi2_swap(
    spec: &ModelSpec,
    params: &ParameterSet,
    part: &Partition,
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<EntanglementReport> {
    renyi2_swap_net(&Network::new(spec, params)?, part, n_samples, rng)
}

pub fn renyi2_swap_net(net: &Network, part: &Partition, n_samples: usize, rng: &mut RngStream) -> Result<EntanglementReport> {
    let l = net.n_sites();
    if part.l != l {
        return Err(Error::Dimension(format!("partition of {} sites for L = {l}", part.l)));
    }
    if n_samples < 2 {
        return Err(Error::InvalidArgument("swap estimator needs at least 2 samples".into()));
    }
    let s = sample_any(net, n_samples, rng)?;
    let t = sample_any(net, n_samples, rng)?;
    let mut in_a = vec![false; l];
    part.region_a.iter().for_each(|&k| in_a[k] = true);

    let mut swapped = Vec::with_capacity(2 * n_samples * l);
    for i in 0..n_samples {
        let (si, ti) = (s.row(i), t.row(i));
        swapped.extend((0..l).map(|k| if in_a[k] { ti[k] } else { si[k] }));
        swapped.extend((0..l).map(|k| if in_a[k] { si[k] } else { ti[k] }));
    }
    let (lp, ph) = net.log_amplitudes(&swapped);
    let mut re = Vec::with_capacity(n_samples);
    let mut im = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let log_mod = 0.5 * (lp[2 * i] + lp[2 * i + 1] - s.log_modulus_sq[i] - t.log_modulus_sq[i]);
        let phase = ph[2 * i] + ph[2 * i + 1] - s.phases[i] - t.phases[i];
        let r = Complex64::from_polar(log_mod.exp(), phase);
        re.push(r.re);
        im.push(r.im);
    }
    let m = batch_means(&re, SWAP_BATCHES);
    let imag = im.iter().sum::<f64>() / n_samples as f64;
    if !(m.mean > 0.0) {
        return Err(Error::SwapNonPositive {
            mean: m.mean,
            stderr: m.stderr,
        });
    }
    Ok(EntanglementReport {
        s2: -m.mean.ln(),
        s2_stderr: m.stderr / m.mean,
        method: EntropyMethod::Swap,
        purity: m.mean,
        purity_stderr: m.stderr,
        imag_mean: Some(imag),
        spectrum: None,
        gap_ratios: None,
    })
}

/// One row of an entropy report stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyRecord {
    pub spec_hash: String,
    pub sigma: f64,
    pub replica: u64,
    pub s2: f64,
    pub stderr: f64,
    pub method: EntropyMethod,
}

impl EntropyRecord {
    pub fn new(spec: &ModelSpec, sigma: f64, replica: u64, report: &EntanglementReport) -> Self {
        Self {
            spec_hash: spec.hash_hex(),
            sigma,
            replica,
            s2: report.s2,
            stderr: report.s2_stderr,
            method: report.method,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{init_gaussian, ActivationKind, CellKind, PhaseMode, RnnSpec};
    use approx::assert_abs_diff_eq;

    fn rnn(l: usize, d_h: usize, g: ActivationKind, mode: PhaseMode) -> ModelSpec {
        ModelSpec::Rnn(RnnSpec {
            l,
            d_h,
            cell: CellKind::Vanilla,
            f: ActivationKind::Tanh,
            g,
            phase_mode: mode,
        })
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Textbook partial trace: rho[a, a'] = sum_b psi(a, b) conj(psi(a', b)).
    fn naive_rdm(state: &[Complex64], l: usize, a_sites: &[usize]) -> DMatrix<Complex64> {
        let na = a_sites.len();
        let b_sites: Vec<usize> = (0..l).filter(|s| !a_sites.contains(s)).collect();
        let compose = |a: usize, b: usize| {
            let mut idx = 0;
            for (k, &s) in a_sites.iter().enumerate() {
                idx |= ((a >> (na - 1 - k)) & 1) << (l - 1 - s);
            }
            for (k, &s) in b_sites.iter().enumerate() {
                idx |= ((b >> (b_sites.len() - 1 - k)) & 1) << (l - 1 - s);
            }
            idx
        };
        DMatrix::from_fn(1 << na, 1 << na, |i, j| {
            (0..1usize << b_sites.len())
                .map(|b| state[compose(i, b)] * state[compose(j, b)].conj())
                .sum()
        })
    }

    fn random_state(l: usize, rng: &mut RngStream) -> Vec<Complex64> {
        let v: Vec<Complex64> = (0..1 << l).map(|_| c(rng.normal(), rng.normal())).collect();
        let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(4, vec![0, 4]).is_err());
        assert!(Partition::new(4, vec![1, 1]).is_err());
        assert_eq!(Partition::half(7).region_a, vec![0, 1, 2]);
        assert_eq!(Partition::new(5, vec![3, 1]).unwrap().region_b(), vec![0, 2, 4]);
    }

    #[test]
    fn zero_width_state_is_uniform() {
        let spec = rnn(3, 4, ActivationKind::Softmax, PhaseMode::Complex);
        let p = init_gaussian(&spec, 0.0, &mut RngStream::new(0));
        let s = exact_state_vector(&spec, &p).unwrap();
        for a in &s.amplitudes {
            assert_abs_diff_eq!(a.re, 8f64.sqrt().recip(), epsilon = 1e-15);
            assert_eq!(a.im, 0.0);
        }
    }

    #[test]
    fn positive_mode_state_is_real_nonnegative() {
        let spec = rnn(6, 5, ActivationKind::Softmax, PhaseMode::Positive);
        let p = init_gaussian(&spec, 1.5, &mut RngStream::new(4));
        let s = exact_state_vector(&spec, &p).unwrap();
        assert!(s.amplitudes.iter().all(|a| a.im == 0.0 && a.re >= 0.0));
    }

    #[test]
    fn normalizing_state_vectors_have_unit_norm() {
        let mut rng = RngStream::new(10);
        for k in 0..20 {
            let g = [ActivationKind::Softmax, ActivationKind::SquareModulus][k % 2];
            let spec = rnn(10, 6, g, PhaseMode::Complex);
            let p = init_gaussian(&spec, 0.1 + 2.0 * rng.uniform(), &mut rng);
            let s = exact_state_vector(&spec, &p).unwrap();
            let n: f64 = s.amplitudes.iter().map(|a| a.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-8);
            assert!((s.raw_norm - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn identity_state_is_normalized_explicitly() {
        let spec = rnn(6, 4, ActivationKind::Identity, PhaseMode::Complex);
        let p = init_gaussian(&spec, 1.0, &mut RngStream::new(2));
        let s = exact_state_vector(&spec, &p).unwrap();
        let n: f64 = s.amplitudes.iter().map(|a| a.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-12);
        assert!((s.raw_norm - 1.0).abs() > 1e-6);
    }

    #[test]
    fn cap_is_enforced() {
        let spec = rnn(12, 2, ActivationKind::Softmax, PhaseMode::Complex);
        let p = init_gaussian(&spec, 1.0, &mut RngStream::new(2));
        assert!(matches!(exact_state_vector_capped(&spec, &p, 10), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn bell_pair_is_maximally_mixed() {
        let h = 0.5f64.sqrt();
        let state = [c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)];
        let rho = reduced_density_matrix(&state, &Partition::half(2)).unwrap();
        assert_abs_diff_eq!(rho[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho[(1, 1)].re, 0.5, epsilon = 1e-15);
        assert_eq!(rho[(0, 1)].norm(), 0.0);
        assert_abs_diff_eq!(renyi2_exact(&rho).unwrap(), 2f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn product_state_is_rank_one() {
        // (a|0> + b|1>) x (c|0> + d|1>) x ...
        let mut rng = RngStream::new(6);
        let sites: Vec<[Complex64; 2]> = (0..6)
            .map(|_| {
                let (x, y) = (c(rng.normal(), rng.normal()), c(rng.normal(), rng.normal()));
                let n = (x.norm_sqr() + y.norm_sqr()).sqrt();
                [x / n, y / n]
            })
            .collect();
        let state: Vec<Complex64> = (0..64usize)
            .map(|idx| (0..6).map(|s| sites[s][(idx >> (5 - s)) & 1]).product())
            .collect();
        let rho = reduced_density_matrix(&state, &Partition::half(6)).unwrap();
        let ev = crate::numerics::hermitian_eigvals(&rho).unwrap();
        assert!(ev[ev.len() - 2].abs() < 1e-12);
        assert!(renyi2_exact(&rho).unwrap() < 1e-12);
    }

    #[test]
    fn rdm_matches_partial_trace_for_any_partition() {
        let mut rng = RngStream::new(3);
        let state = random_state(7, &mut rng);
        for a in [vec![0, 1, 2], vec![4, 1], vec![6], vec![2, 5, 0, 3]] {
            let part = Partition::new(7, a.clone()).unwrap();
            let rho = reduced_density_matrix(&state, &part).unwrap();
            let want = naive_rdm(&state, 7, &a);
            assert!((rho - &want).norm() < 1e-13);
            let ev = crate::numerics::hermitian_eigvals(&want).unwrap();
            assert!(ev[0] > -1e-10);
            assert_abs_diff_eq!(want.trace().re, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn purity_either_side_of_the_cut() {
        let mut rng = RngStream::new(5);
        let state = random_state(9, &mut rng);
        for a in [vec![0, 1], vec![0, 1, 2, 3, 4, 5, 6], vec![8, 3, 1, 0, 5]] {
            let part = Partition::new(9, a).unwrap();
            let rho = reduced_density_matrix(&state, &part).unwrap();
            let (tr, p) = purity_from_state(&state, &part).unwrap();
            assert_abs_diff_eq!(tr, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(-p.ln(), renyi2_exact(&rho).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn renyi2_arithmetic() {
        let diag = |a: f64, b: f64| DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(a, 0.0), c(b, 0.0)]));
        assert_abs_diff_eq!(renyi2_exact(&diag(0.5, 0.5)).unwrap(), 0.693147, epsilon = 1e-6);
        assert_abs_diff_eq!(renyi2_exact(&diag(1.0, 0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(renyi2_exact(&diag(0.25, 0.75)).unwrap(), 0.470004, epsilon = 1e-6);
        assert!(matches!(renyi2_exact(&diag(0.5, 0.6)), Err(Error::Trace(_))));
    }

    #[test]
    fn exact_entropy_is_bounded() {
        let mut rng = RngStream::new(12);
        for k in 0..10 {
            let spec = rnn(8, 6, ActivationKind::Softmax, PhaseMode::Complex);
            let p = init_gaussian(&spec, 0.2 * (k + 1) as f64, &mut rng);
            let net = Network::new(&spec, &p).unwrap();
            let r = renyi2_exact_state(&net, &Partition::half(8)).unwrap();
            assert!(r.s2 >= 0.0 && r.s2 <= 4.0 * 2f64.ln() + 1e-9);
        }
    }

    #[test]
    fn swap_on_product_state() {
        let spec = rnn(8, 4, ActivationKind::Softmax, PhaseMode::Complex);
        let p = init_gaussian(&spec, 0.0, &mut RngStream::new(0));
        let r = renyi2_swap(&spec, &p, &Partition::half(8), 2000, &mut RngStream::new(1)).unwrap();
        assert!(r.s2.abs() <= 3.0 * r.s2_stderr + 1e-12, "{r:?}");
    }

    #[test]
    fn swap_agrees_with_exact() {
        let spec = rnn(8, 8, ActivationKind::Softmax, PhaseMode::Complex);
        let part = Partition::half(8);
        let mut rng = RngStream::new(77);
        for sigma in [0.2, 0.5, 1.0] {
            let p = init_gaussian(&spec, sigma, &mut rng);
            let net = Network::new(&spec, &p).unwrap();
            let exact = renyi2_exact_state(&net, &part).unwrap();
            let swap = renyi2_swap_net(&net, &part, 100_000, &mut rng).unwrap();
            assert!(
                (swap.s2 - exact.s2).abs() <= 4.0 * swap.s2_stderr,
                "sigma {sigma}: swap {} +/- {} vs exact {}",
                swap.s2,
                swap.s2_stderr,
                exact.s2
            );
            assert!(swap.imag_mean.unwrap().abs() < 5.0 * swap.purity_stderr + 1e-3);
        }
    }

    #[test]
    fn swap_with_mcmc_fallback() {
        let spec = rnn(6, 6, ActivationKind::Identity, PhaseMode::Complex);
        let p = init_gaussian(&spec, 0.5, &mut RngStream::new(8));
        let net = Network::new(&spec, &p).unwrap();
        let part = Partition::half(6);
        let exact = renyi2_exact_state(&net, &part).unwrap();
        let swap = renyi2_swap_net(&net, &part, 40_000, &mut RngStream::new(9)).unwrap();
        assert!((swap.s2 - exact.s2).abs() <= 5.0 * swap.s2_stderr, "{} vs {}", swap.s2, exact.s2);
    }

    #[test]
    fn phases_change_the_entropy() {
        let complex = rnn(8, 6, ActivationKind::Softmax, PhaseMode::Complex);
        let positive = rnn(8, 6, ActivationKind::Softmax, PhaseMode::Positive);
        let pc = init_gaussian(&complex, 0.8, &mut RngStream::new(21));
        // Same modulus tensors, phase heads dropped.
        let mut pp = ParameterSet::zeros_for(&positive);
        for e in pp.entries().to_vec() {
            pp.get_mut(&e.name).unwrap().copy_from_slice(pc.get(&e.name).unwrap());
        }
        let part = Partition::half(8);
        let sc = renyi2_exact_state(&Network::new(&complex, &pc).unwrap(), &part).unwrap();
        let sp = renyi2_exact_state(&Network::new(&positive, &pp).unwrap(), &part).unwrap();
        assert!((sc.s2 - sp.s2).abs() > 1e-3, "{} vs {}", sc.s2, sp.s2);
    }

    #[test]
    fn record_serializes() {
        let spec = rnn(4, 2, ActivationKind::Softmax, PhaseMode::Complex);
        let p = init_gaussian(&spec, 0.3, &mut RngStream::new(2));
        let r = renyi2_exact_state(&Network::new(&spec, &p).unwrap(), &Partition::half(4)).unwrap();
        let rec = EntropyRecord::new(&spec, 0.3, 7, &r);
        let j = serde_json::to_value(&rec).unwrap();
        assert_eq!(j["method"], "exact");
        assert_eq!(j["replica"], 7);
        assert_eq!(j["spec_hash"].as_str().unwrap().len(), 16);
    }
}
