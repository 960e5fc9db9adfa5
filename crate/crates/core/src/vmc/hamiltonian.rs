//! Open-chain spin Hamiltonians, local energies and exact ground energies.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelSpec, Network, ParameterSet};
use crate::numerics::{symmetric_eigvals, RngStream};

/// Largest chain handled by `exact_ground_energy`.
pub const EXACT_ENERGY_CAP: usize = 16;
/// Chains up to this size are diagonalized densely; larger ones use Lanczos.
pub const DENSE_ENERGY_CAP: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    /// `-J sum z_i z_{i+1} - h sum x_i`
    TfimOpen,
    /// `-J sum S_i . S_{i+1}` with `S = sigma / 2`
    HeisenbergOpen,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hamiltonian {
    pub kind: HamiltonianKind,
    pub j: f64,
    #[serde(default)]
    pub h: f64,
    pub l: usize,
}

#[inline]
fn z(s: u8) -> f64 {
    1.0 - 2.0 * s as f64
}

impl Hamiltonian {
    pub fn tfim(l: usize, j: f64, h: f64) -> Self {
        Self {
            kind: HamiltonianKind::TfimOpen,
            j,
            h,
            l,
        }
    }

    pub fn heisenberg(l: usize, j: f64) -> Self {
        Self {
            kind: HamiltonianKind::HeisenbergOpen,
            j,
            h: 0.0,
            l,
        }
    }

    /// Diagonal element `<s|H|s>`.
    pub fn diagonal(&self, spins: &[u8]) -> f64 {
        let zz: f64 = spins.windows(2).map(|w| z(w[0]) * z(w[1])).sum();
        match self.kind {
            HamiltonianKind::TfimOpen => -self.j * zz,
            HamiltonianKind::HeisenbergOpen => -0.25 * self.j * zz,
        }
    }

    /// Off-diagonal elements as `(first flipped site, optional second site, <s'|H|s>)`.
    pub fn off_diagonal(&self, spins: &[u8], out: &mut Vec<(usize, Option<usize>, f64)>) {
        out.clear();
        match self.kind {
            HamiltonianKind::TfimOpen => {
                if self.h != 0.0 {
                    out.extend((0..spins.len()).map(|i| (i, None, -self.h)));
                }
            }
            HamiltonianKind::HeisenbergOpen => {
                if self.j != 0.0 {
                    for i in 0..spins.len().saturating_sub(1) {
                        if spins[i] != spins[i + 1] {
                            out.push((i, Some(i + 1), -0.5 * self.j));
                        }
                    }
                }
            }
        }
    }

    /// `y = H x` on the full `2^L` space (site 0 is the most significant bit).
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let l = self.l;
        let mut spins = vec![0u8; l];
        let mut off = Vec::new();
        for (idx, yv) in y.iter_mut().enumerate() {
            for (s, v) in spins.iter_mut().enumerate() {
                *v = ((idx >> (l - 1 - s)) & 1) as u8;
            }
            let mut acc = self.diagonal(&spins) * x[idx];
            self.off_diagonal(&spins, &mut off);
            for &(a, b, c) in &off {
                let mut k = idx ^ (1 << (l - 1 - a));
                if let Some(b) = b {
                    k ^= 1 << (l - 1 - b);
                }
                acc += c * x[k];
            }
            *yv = acc;
        }
    }

    fn dense(&self) -> DMatrix<f64> {
        let n = 1usize << self.l;
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for k in 0..n {
            e[k] = 1.0;
            self.apply(&e, &mut col);
            e[k] = 0.0;
            m.column_mut(k).copy_from_slice(&col);
        }
        m
    }
}

/// Local energies `E_loc(s) = sum_s' H_{s s'} Psi(s') / Psi(s)` of a batch.
///
/// `lp` and `ph` are `ln |Psi|^2` and the phase of each configuration; all connected
/// configurations are evaluated as one batch.
pub fn local_energies(net: &Network, ham: &Hamiltonian, configs: &[u8], lp: &[f64], ph: &[f64]) -> Result<Vec<Complex64>> {
    let l = net.n_sites();
    if ham.l != l {
        return Err(Error::Dimension(format!("Hamiltonian on {} sites for L = {l}", ham.l)));
    }
    let n = lp.len();
    let mut off = Vec::new();
    let mut connected = Vec::new();
    let mut owners = Vec::new();
    let mut energies = Vec::with_capacity(n);
    for i in 0..n {
        if lp[i] == f64::NEG_INFINITY {
            return Err(Error::ZeroAmplitude);
        }
        let row = &configs[i * l..(i + 1) * l];
        energies.push(Complex64::new(ham.diagonal(row), 0.0));
        ham.off_diagonal(row, &mut off);
        for &(a, b, c) in &off {
            let start = connected.len();
            connected.extend_from_slice(row);
            connected[start + a] ^= 1;
            if let Some(b) = b {
                connected[start + b] ^= 1;
            }
            owners.push((i, c));
        }
    }
    if !owners.is_empty() {
        let (lq, pq) = net.log_amplitudes(&connected);
        for (k, &(i, c)) in owners.iter().enumerate() {
            let ratio = Complex64::from_polar((0.5 * (lq[k] - lp[i])).exp(), pq[k] - ph[i]);
            energies[i] += c * ratio;
        }
    }
    Ok(energies)
}

/// Local energy of one configuration.
pub fn local_energy(spec: &ModelSpec, params: &ParameterSet, spins: &[u8], ham: &Hamiltonian) -> Result<Complex64> {
    let net = Network::new(spec, params)?;
    if spins.len() != net.n_sites() {
        return Err(Error::Dimension(format!("{} spins for L = {}", spins.len(), net.n_sites())));
    }
    let (lp, ph) = net.log_amplitudes(spins);
    Ok(local_energies(&net, ham, spins, &lp, &ph)?[0])
}

/// Lowest eigenvalue, dense for `L <= 10` and Lanczos up to `L = 16`.
pub fn exact_ground_energy(ham: &Hamiltonian) -> Result<f64> {
    if ham.l == 0 {
        return Err(Error::InvalidArgument("empty chain".into()));
    }
    if ham.l > EXACT_ENERGY_CAP {
        return Err(Error::SizeCap {
            size: ham.l,
            cap: EXACT_ENERGY_CAP,
            hint: "supply an external reference energy (e.g. from DMRG)",
        });
    }
    if ham.l <= DENSE_ENERGY_CAP {
        return Ok(symmetric_eigvals(&ham.dense())?[0]);
    }
    lanczos_ground_energy(ham, 400, 1e-12)
}

/// Lanczos with full reorthogonalization from a seeded random start.
fn lanczos_ground_energy(ham: &Hamiltonian, max_iter: usize, tol: f64) -> Result<f64> {
    let n = 1usize << ham.l;
    let mut rng = RngStream::new(0x1a2c);
    let mut v: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);

    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut last = f64::INFINITY;
    for k in 0..max_iter.min(n) {
        ham.apply(&basis[k], &mut w);
        let a: f64 = w.iter().zip(&basis[k]).map(|(x, y)| x * y).sum();
        alpha.push(a);
        for q in &basis {
            let d: f64 = w.iter().zip(q).map(|(x, y)| x * y).sum();
            w.iter_mut().zip(q).for_each(|(x, y)| *x -= d * y);
        }
        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let e0 = symmetric_eigvals(&t)?[0];
        let b = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (e0 - last).abs() < tol * e0.abs().max(1.0) || b < 1e-12 {
            return Ok(e0);
        }
        last = e0;
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    Err(Error::EigenNoConvergence)
}
