//! Recurrent wavefunction: vanilla and gated cells, batched over configurations.
//!
//! Hidden states are stored column-wise (`d_h x batch`). Site `n` reads the
//! hidden state `h_{n+1} = cell(h_n, onehot(s_{n-1}))` with `h_0 = 0` and a zero
//! input vector in place of the (nonexistent) spin before site 0.
//!
//! Gated cell:
//!
//! ```text
//! z  = sigmoid(W_z [h; x] + b_z)
//! r  = sigmoid(W_r [h; x] + b_r)
//! n  = f(W_n [r * h; x] + b_n)
//! h' = (1 - z) * n + z * h
//! ```

use nalgebra::{DMatrix, DVector};

use super::activation::{log_conditional, log_conditional_grad, sigmoid, ActivationKind};
use super::params::ParameterSet;
use super::spec::{CellKind, PhaseMode, RnnSpec};
use crate::error::{Error, Result};
use crate::numerics::{matvec, RngStream};

/// Largest number of columns processed in one block.
const BLOCK: usize = 4096;

#[derive(Clone, Debug)]
struct Gate {
    wh: DMatrix<f64>,
    ws: DMatrix<f64>,
    b: DVector<f64>,
}

impl Gate {
    fn load(p: &ParameterSet, w: &str, b: &str, dh: usize) -> Result<Self> {
        let w = p.tensor(w)?;
        let b = p.tensor(b)?;
        if w.len() != dh * (dh + 2) || b.len() != dh {
            return Err(Error::ParamLayout("recurrent weight shape".into()));
        }
        Ok(Self {
            wh: DMatrix::from_fn(dh, dh, |r, c| w[r * (dh + 2) + c]),
            ws: DMatrix::from_fn(dh, 2, |r, c| w[r * (dh + 2) + dh + c]),
            b: DVector::from_column_slice(b),
        })
    }

    fn zeros(dh: usize) -> Self {
        Self {
            wh: DMatrix::zeros(dh, dh),
            ws: DMatrix::zeros(dh, 2),
            b: DVector::zeros(dh),
        }
    }

    /// `W_h h + W_s onehot(spin) + b`, column by column.
    fn preact(&self, h: &DMatrix<f64>, spins: Option<&[u8]>) -> DMatrix<f64> {
        let mut a = &self.wh * h;
        for (j, mut col) in a.column_iter_mut().enumerate() {
            col += &self.b;
            if let Some(s) = spins {
                col += self.ws.column(s[j] as usize);
            }
        }
        a
    }

    /// Accumulate the gradient of a preactivation given its adjoint `da`.
    fn accumulate(&mut self, da: &DMatrix<f64>, h: &DMatrix<f64>, spins: Option<&[u8]>) {
        self.wh.gemm(1.0, da, &h.transpose(), 1.0);
        self.b += da.column_sum();
        if let Some(s) = spins {
            for (j, col) in da.column_iter().enumerate() {
                let mut target = self.ws.column_mut(s[j] as usize);
                target += col;
            }
        }
    }

    fn store(&self, out: &mut ParameterSet, w: &str, b: &str) {
        let dh = self.b.len();
        let wt = out.get_mut(w).expect("layout has weight");
        for r in 0..dh {
            for c in 0..dh {
                wt[r * (dh + 2) + c] = self.wh[(r, c)];
            }
            wt[r * (dh + 2) + dh] = self.ws[(r, 0)];
            wt[r * (dh + 2) + dh + 1] = self.ws[(r, 1)];
        }
        out.get_mut(b).expect("layout has bias").copy_from_slice(self.b.as_slice());
    }
}

#[derive(Clone, Debug)]
enum Cell {
    Vanilla(Gate),
    Gru { z: Gate, r: Gate, n: Gate },
}

/// Intermediate values of one cell application, kept for the backward pass.
struct StepCache {
    h_in: DMatrix<f64>,
    h_out: DMatrix<f64>,
    gru: Option<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)>,
}

/// An RNN wavefunction with its parameters unpacked into dense matrices.
#[derive(Clone, Debug)]
pub struct RnnNet {
    spec: RnnSpec,
    cell: Cell,
    u: DMatrix<f64>,
    c: [f64; 2],
    v: Option<DMatrix<f64>>,
    d: [f64; 2],
}

fn load_head(p: &ParameterSet, w: &str, b: &str, dh: usize) -> Result<(DMatrix<f64>, [f64; 2])> {
    let w = p.tensor(w)?;
    let b = p.tensor(b)?;
    if w.len() != 2 * dh || b.len() != 2 {
        return Err(Error::ParamLayout("output head shape".into()));
    }
    Ok((DMatrix::from_row_slice(2, dh, w), [b[0], b[1]]))
}

impl RnnNet {
    pub fn new(spec: &RnnSpec, params: &ParameterSet) -> Result<Self> {
        let dh = spec.d_h;
        let cell = match spec.cell {
            CellKind::Vanilla => Cell::Vanilla(Gate::load(params, "w", "b", dh)?),
            CellKind::Gru => Cell::Gru {
                z: Gate::load(params, "w_z", "b_z", dh)?,
                r: Gate::load(params, "w_r", "b_r", dh)?,
                n: Gate::load(params, "w_n", "b_n", dh)?,
            },
        };
        let (u, c) = load_head(params, "u", "c", dh)?;
        let (v, d) = match spec.phase_mode {
            PhaseMode::Complex => {
                let (v, d) = load_head(params, "v", "d", dh)?;
                (Some(v), d)
            }
            PhaseMode::Positive => (None, [0.0; 2]),
        };
        Ok(Self {
            spec: spec.clone(),
            cell,
            u,
            c,
            v,
            d,
        })
    }

    pub fn spec(&self) -> &RnnSpec {
        &self.spec
    }

    fn f(&self) -> ActivationKind {
        self.spec.f
    }

    /// Apply the cell to every column of `h`.
    fn step(&self, h: &DMatrix<f64>, spins: Option<&[u8]>) -> DMatrix<f64> {
        self.step_cached(h, spins, false).0
    }

    fn step_cached(
        &self,
        h: &DMatrix<f64>,
        spins: Option<&[u8]>,
        keep: bool,
    ) -> (DMatrix<f64>, Option<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)>) {
        let f = self.f();
        match &self.cell {
            Cell::Vanilla(g) => {
                let mut a = g.preact(h, spins);
                a.apply(|x| *x = f.scalar(*x));
                (a, None)
            }
            Cell::Gru { z, r, n } => {
                let mut zg = z.preact(h, spins);
                zg.apply(|x| *x = sigmoid(*x));
                let mut rg = r.preact(h, spins);
                rg.apply(|x| *x = sigmoid(*x));
                let rh = rg.component_mul(h);
                let mut ng = n.preact(&rh, spins);
                ng.apply(|x| *x = f.scalar(*x));
                let mut out = ng.clone();
                for ((o, &zv), &hv) in out.iter_mut().zip(zg.iter()).zip(h.iter()) {
                    *o = (1.0 - zv) * *o + zv * hv;
                }
                let kept = if keep { Some((zg, rg, ng)) } else { None };
                (out, kept)
            }
        }
    }

    /// Output logits `U h + c` and phase components `V h + d` for every column.
    fn heads(&self, h: &DMatrix<f64>) -> (DMatrix<f64>, Option<DMatrix<f64>>) {
        let mut z = &self.u * h;
        for mut col in z.column_iter_mut() {
            col[0] += self.c[0];
            col[1] += self.c[1];
        }
        let y = self.v.as_ref().map(|v| {
            let mut y = v * h;
            for mut col in y.column_iter_mut() {
                col[0] += self.d[0];
                col[1] += self.d[1];
            }
            y
        });
        (z, y)
    }

    /// Log-probability and phase increments of site-spin `k` for column `j`.
    #[inline]
    fn site_terms(&self, z: &DMatrix<f64>, y: Option<&DMatrix<f64>>, j: usize, k: u8) -> (f64, f64) {
        let (lp, extra) = log_conditional(self.spec.g, [z[(0, j)], z[(1, j)]], k);
        let ph = match y {
            Some(y) => y[(k as usize, j)] + extra,
            None => 0.0,
        };
        (lp, ph)
    }

    fn initial(&self, m: usize) -> DMatrix<f64> {
        self.step(&DMatrix::zeros(self.spec.d_h, m), None)
    }

    /// Raw head outputs per site for one configuration: (logits, phase components).
    pub fn head_outputs(&self, config: &[u8]) -> Vec<([f64; 2], [f64; 2])> {
        let l = self.spec.l;
        let mut h = self.initial(1);
        let mut out = Vec::with_capacity(l);
        for s in 0..l {
            let (z, y) = self.heads(&h);
            let yv = y.map(|y| [y[(0, 0)], y[(1, 0)]]).unwrap_or([0.0; 2]);
            out.push(([z[(0, 0)], z[(1, 0)]], yv));
            if s + 1 < l {
                h = self.step(&h, Some(&config[s..s + 1]));
            }
        }
        out
    }

    /// Log-probabilities and phases of row-major configurations (`n x L`).
    pub fn log_amplitudes(&self, configs: &[u8]) -> (Vec<f64>, Vec<f64>) {
        let l = self.spec.l;
        let n = configs.len() / l;
        let mut lp = vec![0.0; n];
        let mut ph = vec![0.0; n];
        let mut spins = vec![0u8; BLOCK];
        for start in (0..n).step_by(BLOCK) {
            let m = BLOCK.min(n - start);
            let mut h = self.initial(m);
            for s in 0..l {
                for j in 0..m {
                    spins[j] = configs[(start + j) * l + s];
                }
                let (z, y) = self.heads(&h);
                for j in 0..m {
                    let (a, b) = self.site_terms(&z, y.as_ref(), j, spins[j]);
                    lp[start + j] += a;
                    ph[start + j] += b;
                }
                if s + 1 < l {
                    h = self.step(&h, Some(&spins[..m]));
                }
            }
        }
        (lp, ph)
    }

    /// Ancestral sampling. Returns row-major configurations, log-probabilities, phases.
    pub fn sample(&self, n: usize, rng: &mut RngStream) -> (Vec<u8>, Vec<f64>, Vec<f64>) {
        let l = self.spec.l;
        let mut configs = vec![0u8; n * l];
        let mut lp = vec![0.0; n];
        let mut ph = vec![0.0; n];
        let mut spins = vec![0u8; BLOCK];
        for start in (0..n).step_by(BLOCK) {
            let m = BLOCK.min(n - start);
            let mut h = self.initial(m);
            for s in 0..l {
                let (z, y) = self.heads(&h);
                for j in 0..m {
                    let (lp1, _) = log_conditional(self.spec.g, [z[(0, j)], z[(1, j)]], 1);
                    let k = u8::from(rng.uniform() < lp1.exp());
                    spins[j] = k;
                    configs[(start + j) * l + s] = k;
                    let (a, b) = self.site_terms(&z, y.as_ref(), j, k);
                    lp[start + j] += a;
                    ph[start + j] += b;
                }
                if s + 1 < l {
                    h = self.step(&h, Some(&spins[..m]));
                }
            }
        }
        (configs, lp, ph)
    }

    /// Log-probability and phase of every basis state, indexed with site 0 as the
    /// most significant bit. Walks the prefix tree so each prefix is evaluated once.
    pub fn enumerate(&self) -> (Vec<f64>, Vec<f64>) {
        let size = 1usize << self.spec.l;
        let mut lp = vec![0.0; size];
        let mut ph = vec![0.0; size];
        let root = self.initial(1);
        self.expand(0, root, 0, &[0.0], &[0.0], &mut lp, &mut ph);
        (lp, ph)
    }

    #[allow(clippy::too_many_arguments)]
    fn expand(
        &self,
        depth: usize,
        h: DMatrix<f64>,
        base: usize,
        acc_lp: &[f64],
        acc_ph: &[f64],
        out_lp: &mut [f64],
        out_ph: &mut [f64],
    ) {
        let m = h.ncols();
        let (z, y) = self.heads(&h);
        let mut child_lp = vec![0.0; 2 * m];
        let mut child_ph = vec![0.0; 2 * m];
        for j in 0..m {
            for k in 0..2u8 {
                let (a, b) = self.site_terms(&z, y.as_ref(), j, k);
                child_lp[2 * j + k as usize] = acc_lp[j] + a;
                child_ph[2 * j + k as usize] = acc_ph[j] + b;
            }
        }
        if depth + 1 == self.spec.l {
            out_lp[2 * base..2 * base + 2 * m].copy_from_slice(&child_lp);
            out_ph[2 * base..2 * base + 2 * m].copy_from_slice(&child_ph);
            return;
        }
        let children = self.children(&h);
        for start in (0..2 * m).step_by(BLOCK) {
            let width = BLOCK.min(2 * m - start);
            let block = children.columns(start, width).into_owned();
            self.expand(
                depth + 1,
                block,
                2 * base + start,
                &child_lp[start..start + width],
                &child_ph[start..start + width],
                out_lp,
                out_ph,
            );
        }
    }

    /// Hidden states of both children of every column; child `2j + k` appends spin `k`.
    fn children(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        let m = h.ncols();
        let f = self.f();
        match &self.cell {
            Cell::Vanilla(g) => {
                let shared = g.preact(h, None);
                let mut out = DMatrix::zeros(h.nrows(), 2 * m);
                for j in 0..m {
                    for k in 0..2 {
                        let mut col = out.column_mut(2 * j + k);
                        for r in 0..h.nrows() {
                            col[r] = f.scalar(shared[(r, j)] + g.ws[(r, k)]);
                        }
                    }
                }
                out
            }
            Cell::Gru { .. } => {
                let mut dup = DMatrix::zeros(h.nrows(), 2 * m);
                let mut spins = vec![0u8; 2 * m];
                for j in 0..m {
                    dup.column_mut(2 * j).copy_from(&h.column(j));
                    dup.column_mut(2 * j + 1).copy_from(&h.column(j));
                    spins[2 * j + 1] = 1;
                }
                self.step(&dup, Some(&spins))
            }
        }
    }

    /// Gradient of `sum_i w_logp[i] * ln P(s_i) + w_phase[i] * phi(s_i)` with respect
    /// to every parameter, in layout order.
    pub fn backward(&self, configs: &[u8], w_logp: &[f64], w_phase: &[f64]) -> Vec<f64> {
        let l = self.spec.l;
        let dh = self.spec.d_h;
        let n = configs.len() / l;
        let mut gcell = match &self.cell {
            Cell::Vanilla(_) => Cell::Vanilla(Gate::zeros(dh)),
            Cell::Gru { .. } => Cell::Gru {
                z: Gate::zeros(dh),
                r: Gate::zeros(dh),
                n: Gate::zeros(dh),
            },
        };
        let mut gu = DMatrix::zeros(2, dh);
        let mut gc = [0.0; 2];
        let mut gv = DMatrix::zeros(2, dh);
        let mut gd = [0.0; 2];
        let complex = self.v.is_some();
        let f = self.f();

        for start in (0..n).step_by(BLOCK) {
            let m = BLOCK.min(n - start);
            let spins: Vec<Vec<u8>> = (0..l)
                .map(|s| (0..m).map(|j| configs[(start + j) * l + s]).collect())
                .collect();
            // Forward with caches: caches[s] produces h_{s+1} from h_s and s_{s-1}.
            let mut caches: Vec<StepCache> = Vec::with_capacity(l);
            let mut h = DMatrix::zeros(dh, m);
            for s in 0..l {
                let input = if s == 0 { None } else { Some(&spins[s - 1][..]) };
                let (out, gru) = self.step_cached(&h, input, true);
                caches.push(StepCache {
                    h_in: h,
                    h_out: out.clone(),
                    gru,
                });
                h = out;
            }

            let mut dh_next = DMatrix::zeros(dh, m);
            for s in (0..l).rev() {
                let c = &caches[s];
                let (z, _) = self.heads(&c.h_out);
                let mut dz = DMatrix::zeros(2, m);
                let mut dy = DMatrix::zeros(2, m);
                for j in 0..m {
                    let k = spins[s][j];
                    let g = log_conditional_grad(self.spec.g, [z[(0, j)], z[(1, j)]], k);
                    let w = w_logp[start + j];
                    dz[(0, j)] = w * g[0];
                    dz[(1, j)] = w * g[1];
                    if complex {
                        dy[(k as usize, j)] = w_phase[start + j];
                    }
                }
                gu.gemm(1.0, &dz, &c.h_out.transpose(), 1.0);
                let sz = dz.column_sum();
                gc[0] += sz[0];
                gc[1] += sz[1];
                let mut dh_out = dh_next;
                dh_out.gemm(1.0, &self.u.transpose(), &dz, 1.0);
                if let Some(v) = &self.v {
                    gv.gemm(1.0, &dy, &c.h_out.transpose(), 1.0);
                    let sy = dy.column_sum();
                    gd[0] += sy[0];
                    gd[1] += sy[1];
                    dh_out.gemm(1.0, &v.transpose(), &dy, 1.0);
                }
                let input = if s == 0 { None } else { Some(&spins[s - 1][..]) };
                dh_next = self.cell_backward(&mut gcell, c, &dh_out, input, f);
            }
        }

        let spec = super::spec::ModelSpec::Rnn(self.spec.clone());
        let mut out = ParameterSet::zeros_for(&spec);
        match &gcell {
            Cell::Vanilla(g) => g.store(&mut out, "w", "b"),
            Cell::Gru { z, r, n } => {
                z.store(&mut out, "w_z", "b_z");
                r.store(&mut out, "w_r", "b_r");
                n.store(&mut out, "w_n", "b_n");
            }
        }
        out.get_mut("u").unwrap().copy_from_slice(gu.transpose().as_slice());
        out.get_mut("c").unwrap().copy_from_slice(&gc);
        if complex {
            out.get_mut("v").unwrap().copy_from_slice(gv.transpose().as_slice());
            out.get_mut("d").unwrap().copy_from_slice(&gd);
        }
        out.as_slice().to_vec()
    }

    /// Propagate `dh_out` through one cell application; returns the adjoint of `h_in`.
    fn cell_backward(
        &self,
        grads: &mut Cell,
        c: &StepCache,
        dh_out: &DMatrix<f64>,
        input: Option<&[u8]>,
        f: ActivationKind,
    ) -> DMatrix<f64> {
        match (&self.cell, grads) {
            (Cell::Vanilla(g), Cell::Vanilla(gg)) => {
                let mut da = dh_out.clone();
                for (d, &y) in da.iter_mut().zip(c.h_out.iter()) {
                    *d *= f.derivative_from_output(y);
                }
                gg.accumulate(&da, &c.h_in, input);
                g.wh.tr_mul(&da)
            }
            (Cell::Gru { z, r, n }, Cell::Gru { z: gz, r: gr, n: gn }) => {
                let (zg, rg, ng) = c.gru.as_ref().expect("gated cache");
                let h = &c.h_in;
                let mut dan = dh_out.clone();
                let mut daz = dh_out.clone();
                let mut dh = dh_out.component_mul(zg);
                for i in 0..dan.len() {
                    let (zv, nv, hv) = (zg[i], ng[i], h[i]);
                    dan[i] *= (1.0 - zv) * f.derivative_from_output(nv);
                    daz[i] *= (hv - nv) * zv * (1.0 - zv);
                }
                let rh = rg.component_mul(h);
                gn.accumulate(&dan, &rh, input);
                let drh = n.wh.tr_mul(&dan);
                let mut dar = drh.component_mul(h);
                for (d, &rv) in dar.iter_mut().zip(rg.iter()) {
                    *d *= rv * (1.0 - rv);
                }
                dh += drh.component_mul(rg);
                gz.accumulate(&daz, h, input);
                gr.accumulate(&dar, h, input);
                dh += z.wh.tr_mul(&daz);
                dh += r.wh.tr_mul(&dar);
                dh
            }
            _ => unreachable!("gradient cell mirrors the network cell"),
        }
    }
}

/// One recurrent update `h' = cell(h_prev, x)` for a single hidden vector, computed
/// directly from the parameter tensors. `x` is the one-hot previous spin, or zero.
pub fn rnn_step(spec: &RnnSpec, params: &ParameterSet, h_prev: &[f64], x: [f64; 2]) -> Result<Vec<f64>> {
    let dh = spec.d_h;
    if h_prev.len() != dh {
        return Err(Error::Dimension(format!("hidden state has {} entries, expected {dh}", h_prev.len())));
    }
    let mut input = h_prev.to_vec();
    input.extend_from_slice(&x);
    let affine = |w: &str, b: &str, inp: &[f64]| -> Result<Vec<f64>> {
        let wt = params.tensor(w)?;
        let bt = params.tensor(b)?;
        let mut y = vec![0.0; dh];
        matvec(wt, dh, dh + 2, inp, &mut y);
        Ok(y.iter().zip(bt).map(|(a, b)| a + b).collect())
    };
    match spec.cell {
        CellKind::Vanilla => Ok(affine("w", "b", &input)?.into_iter().map(|a| spec.f.scalar(a)).collect()),
        CellKind::Gru => {
            let z: Vec<f64> = affine("w_z", "b_z", &input)?.into_iter().map(sigmoid).collect();
            let r: Vec<f64> = affine("w_r", "b_r", &input)?.into_iter().map(sigmoid).collect();
            let mut gated: Vec<f64> = h_prev.iter().zip(&r).map(|(h, r)| h * r).collect();
            gated.extend_from_slice(&x);
            let n: Vec<f64> = affine("w_n", "b_n", &gated)?.into_iter().map(|a| spec.f.scalar(a)).collect();
            Ok((0..dh).map(|i| (1.0 - z[i]) * n[i] + z[i] * h_prev[i]).collect())
        }
    }
}

/// Conditional vector `g(U h + c)` and phase components `V h + d` (zeros in positive mode).
pub fn rnn_heads(spec: &RnnSpec, params: &ParameterSet, h: &[f64]) -> Result<([f64; 2], [f64; 2])> {
    let dh = spec.d_h;
    if h.len() != dh {
        return Err(Error::Dimension(format!("hidden state has {} entries, expected {dh}", h.len())));
    }
    let affine = |w: &str, b: &str| -> Result<[f64; 2]> {
        let mut y = [0.0; 2];
        matvec(params.tensor(w)?, 2, dh, h, &mut y);
        let bt = params.tensor(b)?;
        Ok([y[0] + bt[0], y[1] + bt[1]])
    };
    let r = affine("u", "c")?;
    let p = super::activation::activation_apply(spec.g, &r);
    let phase = match spec.phase_mode {
        PhaseMode::Complex => affine("v", "d")?,
        PhaseMode::Positive => [0.0; 2],
    };
    Ok(([p[0], p[1]], phase))
}
