//! Autoregressive transformer wavefunction: one masked multi-head attention block
//! followed by one point-wise feed-forward layer, each wrapped in a residual
//! connection and layer normalization.
//!
//! Input row `n` is the embedding of spin `s_{n-1}` plus a sinusoidal position
//! code; row 0 is a start token (zero embedding plus the position-0 code). Output
//! row `n` therefore depends on spins `s_0 .. s_{n-1}` only and yields the
//! conditional for site `n`.
//!
//! Softmax heads use `Q = X W^Q`, `K = X W^K`, `V = X W^V` with a causal mask.
//! Circulant heads weight row `j <= n` by the kernel entry `r[n - j]` and use the
//! head's column block of `X` as values. There is no output projection after the
//! heads are concatenated. The output heads read the block output `X''`.

use super::activation::{log_conditional, log_conditional_grad};
use super::params::ParameterSet;
use super::spec::{AtfSpec, AttentionKind, ModelSpec, PhaseMode};
use crate::error::{Error, Result};
use crate::numerics::{matvec, matvec_t_acc, outer_acc, RngStream};

const LN_EPS: f64 = 1e-5;
const PE_BASE: f64 = 1e4;

#[derive(Clone, Debug)]
enum Head {
    Softmax { wq: Vec<f64>, wk: Vec<f64>, wv: Vec<f64> },
    Circulant { kernel: Vec<f64> },
}

/// Transformer wavefunction with its parameters unpacked.
#[derive(Clone, Debug)]
pub struct AtfNet {
    spec: AtfSpec,
    de: usize,
    dk: usize,
    dfl: usize,
    embed: Vec<f64>,
    pe: Vec<f64>,
    heads: Vec<Head>,
    ln1_g: Vec<f64>,
    ln1_b: Vec<f64>,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
    ln2_g: Vec<f64>,
    ln2_b: Vec<f64>,
    w3: Vec<f64>,
    c3: [f64; 2],
    w4: Option<Vec<f64>>,
    d4: [f64; 2],
}

/// Per-row keys and values of the rows processed so far.
#[derive(Clone, Debug, Default)]
struct Cache {
    keys: Vec<Vec<f64>>,
    vals: Vec<Vec<f64>>,
    rows: usize,
}

impl Cache {
    fn new(h: usize) -> Self {
        Self {
            keys: vec![Vec::new(); h],
            vals: vec![Vec::new(); h],
            rows: 0,
        }
    }

    fn truncate(&mut self, rows: usize, dk: usize) {
        for k in &mut self.keys {
            k.truncate(rows * dk);
        }
        for v in &mut self.vals {
            v.truncate(rows * dk);
        }
        self.rows = rows;
    }
}

/// Intermediates of one row, kept for the backward pass.
#[derive(Clone, Debug, Default)]
struct RowTrace {
    x: Vec<f64>,
    q: Vec<Vec<f64>>,
    attn: Vec<Vec<f64>>,
    xhat1: Vec<f64>,
    inv1: f64,
    x1: Vec<f64>,
    act: Vec<f64>,
    xhat2: Vec<f64>,
    inv2: f64,
    x2: Vec<f64>,
    z: [f64; 2],
}

fn layer_norm(u: &[f64], gain: &[f64], bias: &[f64], xhat: &mut Vec<f64>, out: &mut Vec<f64>) -> f64 {
    let n = u.len() as f64;
    let mean = u.iter().sum::<f64>() / n;
    let var = u.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let inv = 1.0 / (var + LN_EPS).sqrt();
    xhat.clear();
    xhat.extend(u.iter().map(|x| (x - mean) * inv));
    out.clear();
    out.extend(xhat.iter().zip(gain).zip(bias).map(|((x, g), b)| x * g + b));
    inv
}

/// Adjoint of layer normalization; accumulates gain/bias gradients, returns `du`.
fn layer_norm_back(dy: &[f64], xhat: &[f64], inv: f64, gain: &[f64], g_gain: &mut [f64], g_bias: &mut [f64]) -> Vec<f64> {
    let n = dy.len() as f64;
    let mut dxhat = vec![0.0; dy.len()];
    for i in 0..dy.len() {
        g_gain[i] += dy[i] * xhat[i];
        g_bias[i] += dy[i];
        dxhat[i] = dy[i] * gain[i];
    }
    let m1 = dxhat.iter().sum::<f64>() / n;
    let m2 = dxhat.iter().zip(xhat).map(|(a, b)| a * b).sum::<f64>() / n;
    dxhat.iter().zip(xhat).map(|(d, x)| inv * (d - m1 - x * m2)).collect()
}

/// `out = x^T W` for a row-major `rows x cols` matrix.
#[inline]
fn vecmat(x: &[f64], w: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    out.fill(0.0);
    matvec_t_acc(w, rows, cols, x, out);
}

/// Sinusoidal position codes, `L x d` row-major.
pub fn positional_encoding(l: usize, d: usize) -> Vec<f64> {
    let mut pe = vec![0.0; l * d];
    for n in 0..l {
        for i in 0..d {
            let pair = (i / 2) as f64;
            let angle = n as f64 / PE_BASE.powf(2.0 * pair / d as f64);
            pe[n * d + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    pe
}

impl AtfNet {
    pub fn new(spec: &AtfSpec, params: &ParameterSet) -> Result<Self> {
        ModelSpec::Atf(spec.clone()).validate()?;
        let t = |name: &str| params.tensor(name).map(<[f64]>::to_vec);
        let pair = |name: &str| -> Result<[f64; 2]> {
            let v = params.tensor(name)?;
            if v.len() != 2 {
                return Err(Error::ParamLayout(format!("{name} must have 2 entries")));
            }
            Ok([v[0], v[1]])
        };
        let heads = (0..spec.heads)
            .map(|i| match spec.attention {
                AttentionKind::Softmax => Ok(Head::Softmax {
                    wq: t(&format!("wq_{i}"))?,
                    wk: t(&format!("wk_{i}"))?,
                    wv: t(&format!("wv_{i}"))?,
                }),
                AttentionKind::Circulant => Ok(Head::Circulant {
                    kernel: t(&format!("kernel_{i}"))?,
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        let (w4, d4) = match spec.phase_mode {
            PhaseMode::Complex => (Some(t("w4")?), pair("d4")?),
            PhaseMode::Positive => (None, [0.0; 2]),
        };
        Ok(Self {
            spec: spec.clone(),
            de: spec.d_emb,
            dk: spec.d_k(),
            dfl: spec.d_fl(),
            embed: t("embed")?,
            pe: positional_encoding(spec.l, spec.d_emb),
            heads,
            ln1_g: t("ln1_gain")?,
            ln1_b: t("ln1_bias")?,
            w1: t("w1")?,
            b1: t("b1")?,
            w2: t("w2")?,
            b2: t("b2")?,
            ln2_g: t("ln2_gain")?,
            ln2_b: t("ln2_bias")?,
            w3: t("w3")?,
            c3: pair("c3")?,
            w4,
            d4,
        })
    }

    pub fn spec(&self) -> &AtfSpec {
        &self.spec
    }

    /// Input row `n` given the spin before it (`None` for the start token).
    fn input_row(&self, n: usize, prev: Option<u8>) -> Vec<f64> {
        let de = self.de;
        let mut x = self.pe[n * de..(n + 1) * de].to_vec();
        if let Some(s) = prev {
            for (xi, e) in x.iter_mut().zip(&self.embed[s as usize * de..(s as usize + 1) * de]) {
                *xi += e;
            }
        }
        x
    }

    /// Process row `n` with the cache holding rows `0..n`; the row is appended to the
    /// cache. Returns the output logits and phase components.
    fn row(&self, n: usize, x: &[f64], cache: &mut Cache, trace: Option<&mut RowTrace>) -> ([f64; 2], [f64; 2]) {
        debug_assert_eq!(cache.rows, n);
        let (de, dk) = (self.de, self.dk);
        let mut mha = vec![0.0; de];
        let mut qs = Vec::new();
        let mut attns = Vec::new();
        let mut buf = vec![0.0; dk];
        for (i, head) in self.heads.iter().enumerate() {
            let out = &mut mha[i * dk..(i + 1) * dk];
            match head {
                Head::Softmax { wq, wk, wv } => {
                    vecmat(x, wk, de, dk, &mut buf);
                    cache.keys[i].extend_from_slice(&buf);
                    vecmat(x, wv, de, dk, &mut buf);
                    cache.vals[i].extend_from_slice(&buf);
                    let mut q = vec![0.0; dk];
                    vecmat(x, wq, de, dk, &mut q);
                    let scale = 1.0 / (dk as f64).sqrt();
                    let keys = &cache.keys[i];
                    let mut a: Vec<f64> = (0..=n)
                        .map(|j| q.iter().zip(&keys[j * dk..(j + 1) * dk]).map(|(a, b)| a * b).sum::<f64>() * scale)
                        .collect();
                    let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut total = 0.0;
                    for v in a.iter_mut() {
                        *v = (*v - m).exp();
                        total += *v;
                    }
                    for v in a.iter_mut() {
                        *v /= total;
                    }
                    let vals = &cache.vals[i];
                    for (j, &aj) in a.iter().enumerate() {
                        for (o, v) in out.iter_mut().zip(&vals[j * dk..(j + 1) * dk]) {
                            *o += aj * v;
                        }
                    }
                    qs.push(q);
                    attns.push(a);
                }
                Head::Circulant { kernel } => {
                    cache.vals[i].extend_from_slice(&x[i * dk..(i + 1) * dk]);
                    let vals = &cache.vals[i];
                    for j in 0..=n {
                        let aj = kernel[n - j];
                        for (o, v) in out.iter_mut().zip(&vals[j * dk..(j + 1) * dk]) {
                            *o += aj * v;
                        }
                    }
                    qs.push(Vec::new());
                    attns.push(Vec::new());
                }
            }
        }
        cache.rows += 1;

        let u1: Vec<f64> = x.iter().zip(&mha).map(|(a, b)| a + b).collect();
        let mut xhat1 = Vec::with_capacity(de);
        let mut x1 = Vec::with_capacity(de);
        let inv1 = layer_norm(&u1, &self.ln1_g, &self.ln1_b, &mut xhat1, &mut x1);
        let mut act = vec![0.0; self.dfl];
        vecmat(&x1, &self.w1, de, self.dfl, &mut act);
        let f = self.spec.f_fl;
        for (a, b) in act.iter_mut().zip(&self.b1) {
            *a = f.scalar(*a + b);
        }
        let mut f2 = vec![0.0; de];
        vecmat(&act, &self.w2, self.dfl, de, &mut f2);
        let u2: Vec<f64> = (0..de).map(|i| x1[i] + f2[i] + self.b2[i]).collect();
        let mut xhat2 = Vec::with_capacity(de);
        let mut x2 = Vec::with_capacity(de);
        let inv2 = layer_norm(&u2, &self.ln2_g, &self.ln2_b, &mut xhat2, &mut x2);
        let mut z = [0.0; 2];
        vecmat(&x2, &self.w3, de, 2, &mut z);
        z[0] += self.c3[0];
        z[1] += self.c3[1];
        let mut y = [0.0; 2];
        if let Some(w4) = &self.w4 {
            vecmat(&x2, w4, de, 2, &mut y);
            y[0] += self.d4[0];
            y[1] += self.d4[1];
        }
        if let Some(t) = trace {
            *t = RowTrace {
                x: x.to_vec(),
                q: qs,
                attn: attns,
                xhat1,
                inv1,
                x1,
                act,
                xhat2,
                inv2,
                x2,
                z,
            };
        }
        (z, y)
    }

    fn site_terms(&self, z: [f64; 2], y: [f64; 2], k: u8) -> (f64, f64) {
        let (lp, extra) = log_conditional(self.spec.g, z, k);
        let ph = if self.w4.is_some() { y[k as usize] + extra } else { 0.0 };
        (lp, ph)
    }

    /// Raw head outputs per site for one configuration: (logits, phase components).
    pub fn head_outputs(&self, config: &[u8]) -> Vec<([f64; 2], [f64; 2])> {
        let l = self.spec.l;
        let mut cache = Cache::new(self.heads.len());
        (0..l)
            .map(|n| {
                let x = self.input_row(n, if n == 0 { None } else { Some(config[n - 1]) });
                self.row(n, &x, &mut cache, None)
            })
            .collect()
    }

    pub fn log_amplitudes(&self, configs: &[u8]) -> (Vec<f64>, Vec<f64>) {
        let l = self.spec.l;
        configs
            .chunks(l)
            .map(|c| {
                self.head_outputs(c).iter().zip(c).fold((0.0, 0.0), |(lp, ph), (&(z, y), &k)| {
                    let (a, b) = self.site_terms(z, y, k);
                    (lp + a, ph + b)
                })
            })
            .unzip()
    }

    pub fn sample(&self, n: usize, rng: &mut RngStream) -> (Vec<u8>, Vec<f64>, Vec<f64>) {
        let l = self.spec.l;
        let mut configs = vec![0u8; n * l];
        let mut lps = vec![0.0; n];
        let mut phs = vec![0.0; n];
        for i in 0..n {
            let mut cache = Cache::new(self.heads.len());
            let mut prev = None;
            for s in 0..l {
                let x = self.input_row(s, prev);
                let (z, y) = self.row(s, &x, &mut cache, None);
                let (lp1, _) = log_conditional(self.spec.g, z, 1);
                let k = u8::from(rng.uniform() < lp1.exp());
                let (a, b) = self.site_terms(z, y, k);
                lps[i] += a;
                phs[i] += b;
                configs[i * l + s] = k;
                prev = Some(k);
            }
        }
        (configs, lps, phs)
    }

    /// Every basis state by depth-first traversal with a shared key/value cache.
    pub fn enumerate(&self) -> (Vec<f64>, Vec<f64>) {
        let size = 1usize << self.spec.l;
        let mut lp = vec![0.0; size];
        let mut ph = vec![0.0; size];
        let mut cache = Cache::new(self.heads.len());
        let x = self.input_row(0, None);
        self.dfs(0, x, 0, 0.0, 0.0, &mut cache, &mut lp, &mut ph);
        (lp, ph)
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs(&self, depth: usize, x: Vec<f64>, prefix: usize, lp: f64, ph: f64, cache: &mut Cache, out_lp: &mut [f64], out_ph: &mut [f64]) {
        let (z, y) = self.row(depth, &x, cache, None);
        for k in 0..2u8 {
            let (a, b) = self.site_terms(z, y, k);
            let idx = 2 * prefix + k as usize;
            if depth + 1 == self.spec.l {
                out_lp[idx] = lp + a;
                out_ph[idx] = ph + b;
            } else {
                let next = self.input_row(depth + 1, Some(k));
                self.dfs(depth + 1, next, idx, lp + a, ph + b, cache, out_lp, out_ph);
            }
        }
        cache.truncate(depth, self.dk);
    }

    /// Gradient of `sum_i w_logp[i] * ln P(s_i) + w_phase[i] * phi(s_i)`, layout order.
    pub fn backward(&self, configs: &[u8], w_logp: &[f64], w_phase: &[f64]) -> Vec<f64> {
        let spec = ModelSpec::Atf(self.spec.clone());
        let mut grad = ParameterSet::zeros_for(&spec);
        let mut acc = Grads::new(self);
        for (i, c) in configs.chunks(self.spec.l).enumerate() {
            self.backward_one(c, w_logp[i], w_phase[i], &mut acc);
        }
        acc.store(self, &mut grad);
        grad.as_slice().to_vec()
    }

    fn backward_one(&self, config: &[u8], wl: f64, wp: f64, g: &mut Grads) {
        let (l, de, dk, dfl) = (self.spec.l, self.de, self.dk, self.dfl);
        let nh = self.heads.len();
        let mut cache = Cache::new(nh);
        let mut traces = vec![RowTrace::default(); l];
        for n in 0..l {
            let x = self.input_row(n, if n == 0 { None } else { Some(config[n - 1]) });
            self.row(n, &x, &mut cache, Some(&mut traces[n]));
        }
        let mut dx = vec![vec![0.0; de]; l];
        let mut dkeys = vec![vec![0.0; l * dk]; nh];
        let mut dvals = vec![vec![0.0; l * dk]; nh];
        let scale = 1.0 / (dk as f64).sqrt();
        let f = self.spec.f_fl;

        for n in 0..l {
            let t = &traces[n];
            let k = config[n];
            let gz = log_conditional_grad(self.spec.g, t.z, k);
            let dz = [wl * gz[0], wl * gz[1]];
            let mut dx2 = vec![0.0; de];
            outer_acc(&mut g.w3, &t.x2, &dz);
            g.c3[0] += dz[0];
            g.c3[1] += dz[1];
            matvec(&self.w3, de, 2, &dz, &mut dx2);
            if let Some(w4) = &self.w4 {
                let mut dy = [0.0; 2];
                dy[k as usize] = wp;
                outer_acc(&mut g.w4, &t.x2, &dy);
                g.d4[k as usize] += wp;
                let mut tmp = vec![0.0; de];
                matvec(w4, de, 2, &dy, &mut tmp);
                for (a, b) in dx2.iter_mut().zip(&tmp) {
                    *a += b;
                }
            }
            let du2 = layer_norm_back(&dx2, &t.xhat2, t.inv2, &self.ln2_g, &mut g.ln2_g, &mut g.ln2_b);
            // Feed-forward branch.
            outer_acc(&mut g.w2, &t.act, &du2);
            for (a, b) in g.b2.iter_mut().zip(&du2) {
                *a += b;
            }
            let mut dact = vec![0.0; dfl];
            matvec(&self.w2, dfl, de, &du2, &mut dact);
            for (d, &a) in dact.iter_mut().zip(&t.act) {
                *d *= f.derivative_from_output(a);
            }
            outer_acc(&mut g.w1, &t.x1, &dact);
            for (a, b) in g.b1.iter_mut().zip(&dact) {
                *a += b;
            }
            let mut dx1 = du2;
            let mut tmp = vec![0.0; de];
            matvec(&self.w1, de, dfl, &dact, &mut tmp);
            for (a, b) in dx1.iter_mut().zip(&tmp) {
                *a += b;
            }
            let du1 = layer_norm_back(&dx1, &t.xhat1, t.inv1, &self.ln1_g, &mut g.ln1_g, &mut g.ln1_b);
            for (a, b) in dx[n].iter_mut().zip(&du1) {
                *a += b;
            }
            // Attention heads.
            for (i, head) in self.heads.iter().enumerate() {
                let dh = &du1[i * dk..(i + 1) * dk];
                match head {
                    Head::Softmax { wq, .. } => {
                        let a = &t.attn[i];
                        let vals = &cache.vals[i];
                        let keys = &cache.keys[i];
                        let da: Vec<f64> = (0..=n)
                            .map(|j| dh.iter().zip(&vals[j * dk..(j + 1) * dk]).map(|(p, q)| p * q).sum())
                            .collect();
                        let mix: f64 = a.iter().zip(&da).map(|(p, q)| p * q).sum();
                        let mut dq = vec![0.0; dk];
                        for j in 0..=n {
                            for (dv, h) in dvals[i][j * dk..(j + 1) * dk].iter_mut().zip(dh) {
                                *dv += a[j] * h;
                            }
                            let ds = a[j] * (da[j] - mix) * scale;
                            for c in 0..dk {
                                dq[c] += ds * keys[j * dk + c];
                                dkeys[i][j * dk + c] += ds * t.q[i][c];
                            }
                        }
                        outer_acc(&mut g.heads[i].0, &t.x, &dq);
                        let mut tmp = vec![0.0; de];
                        matvec(wq, de, dk, &dq, &mut tmp);
                        for (a, b) in dx[n].iter_mut().zip(&tmp) {
                            *a += b;
                        }
                    }
                    Head::Circulant { kernel } => {
                        let vals = &cache.vals[i];
                        for j in 0..=n {
                            let da: f64 = dh.iter().zip(&vals[j * dk..(j + 1) * dk]).map(|(p, q)| p * q).sum();
                            g.heads[i].0[n - j] += da;
                            for (d, h) in dx[j][i * dk..(i + 1) * dk].iter_mut().zip(dh) {
                                *d += kernel[n - j] * h;
                            }
                        }
                    }
                }
            }
        }
        // Keys and values feed back into the rows that produced them.
        for (i, head) in self.heads.iter().enumerate() {
            if let Head::Softmax { wk, wv, .. } = head {
                for j in 0..l {
                    let dkj = &dkeys[i][j * dk..(j + 1) * dk];
                    let dvj = &dvals[i][j * dk..(j + 1) * dk];
                    outer_acc(&mut g.heads[i].1, &traces[j].x, dkj);
                    outer_acc(&mut g.heads[i].2, &traces[j].x, dvj);
                    let mut tmp = vec![0.0; de];
                    matvec(wk, de, dk, dkj, &mut tmp);
                    matvec_acc(wv, de, dk, dvj, &mut tmp);
                    for (a, b) in dx[j].iter_mut().zip(&tmp) {
                        *a += b;
                    }
                }
            }
        }
        for j in 1..l {
            let s = config[j - 1] as usize;
            for (a, b) in g.embed[s * de..(s + 1) * de].iter_mut().zip(&dx[j]) {
                *a += b;
            }
        }
    }
}

/// `y += W x` for a row-major `rows x cols` matrix.
fn matvec_acc(w: &[f64], rows: usize, cols: usize, x: &[f64], y: &mut [f64]) {
    for (r, out) in y.iter_mut().enumerate().take(rows) {
        *out += w[r * cols..(r + 1) * cols].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

struct Grads {
    embed: Vec<f64>,
    /// (query or kernel, key, value) per head.
    heads: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    ln1_g: Vec<f64>,
    ln1_b: Vec<f64>,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
    ln2_g: Vec<f64>,
    ln2_b: Vec<f64>,
    w3: Vec<f64>,
    c3: [f64; 2],
    w4: Vec<f64>,
    d4: [f64; 2],
}

impl Grads {
    fn new(net: &AtfNet) -> Self {
        let (de, dk, dfl) = (net.de, net.dk, net.dfl);
        let heads = net
            .heads
            .iter()
            .map(|h| match h {
                Head::Softmax { .. } => (vec![0.0; de * dk], vec![0.0; de * dk], vec![0.0; de * dk]),
                Head::Circulant { kernel } => (vec![0.0; kernel.len()], Vec::new(), Vec::new()),
            })
            .collect();
        Self {
            embed: vec![0.0; 2 * de],
            heads,
            ln1_g: vec![0.0; de],
            ln1_b: vec![0.0; de],
            w1: vec![0.0; de * dfl],
            b1: vec![0.0; dfl],
            w2: vec![0.0; dfl * de],
            b2: vec![0.0; de],
            ln2_g: vec![0.0; de],
            ln2_b: vec![0.0; de],
            w3: vec![0.0; de * 2],
            c3: [0.0; 2],
            w4: vec![0.0; de * 2],
            d4: [0.0; 2],
        }
    }

    fn store(&self, net: &AtfNet, out: &mut ParameterSet) {
        let mut put = |name: &str, v: &[f64]| out.get_mut(name).expect("layout tensor").copy_from_slice(v);
        put("embed", &self.embed);
        for (i, (a, b, c)) in self.heads.iter().enumerate() {
            match net.spec.attention {
                AttentionKind::Softmax => {
                    put(&format!("wq_{i}"), a);
                    put(&format!("wk_{i}"), b);
                    put(&format!("wv_{i}"), c);
                }
                AttentionKind::Circulant => put(&format!("kernel_{i}"), a),
            }
        }
        put("ln1_gain", &self.ln1_g);
        put("ln1_bias", &self.ln1_b);
        put("w1", &self.w1);
        put("b1", &self.b1);
        put("w2", &self.w2);
        put("b2", &self.b2);
        put("ln2_gain", &self.ln2_g);
        put("ln2_bias", &self.ln2_b);
        put("w3", &self.w3);
        put("c3", &self.c3);
        if net.w4.is_some() {
            put("w4", &self.w4);
            put("d4", &self.d4);
        }
    }
}

/// Raw outputs of every row for one configuration: the conditional vectors
/// `g(W_3 x'' + c')` and phase components `W_4 x'' + d'` (zeros in positive mode).
pub fn atf_forward(spec: &AtfSpec, params: &ParameterSet, spins: &[u8]) -> Result<(Vec<[f64; 2]>, Vec<[f64; 2]>)> {
    if spins.len() != spec.l {
        return Err(Error::Dimension(format!("{} spins for L = {}", spins.len(), spec.l)));
    }
    let net = AtfNet::new(spec, params)?;
    let rows = net.head_outputs(spins);
    let cond = rows
        .iter()
        .map(|(z, _)| {
            let p = super::activation::activation_apply(spec.g, z);
            [p[0], p[1]]
        })
        .collect();
    let phase = rows.iter().map(|(_, y)| *y).collect();
    Ok((cond, phase))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{init_gaussian, ActivationKind};

    fn spec(attention: AttentionKind, g: ActivationKind, mode: PhaseMode) -> AtfSpec {
        AtfSpec {
            l: 6,
            d_emb: 4,
            heads: 2,
            attention,
            f_fl: ActivationKind::Tanh,
            g,
            d_fl: Some(5),
            n_ffl: 1,
            phase_mode: mode,
        }
    }

    fn draw(s: &AtfSpec, sigma: f64, seed: u64) -> ParameterSet {
        init_gaussian(&ModelSpec::Atf(s.clone()), sigma, &mut RngStream::new(seed))
    }

    #[test]
    fn positional_code_values() {
        let pe = positional_encoding(3, 4);
        assert_eq!(&pe[..4], &[0.0, 1.0, 0.0, 1.0]);
        assert!((pe[4] - 1f64.sin()).abs() < 1e-15);
        assert!((pe[6] - (1.0f64 / 100.0).sin()).abs() < 1e-15);
    }

    #[test]
    fn zero_params_give_uniform_rows() {
        for a in [AttentionKind::Softmax, AttentionKind::Circulant] {
            let s = spec(a, ActivationKind::Softmax, PhaseMode::Complex);
            let p = ParameterSet::zeros_for(&ModelSpec::Atf(s.clone()));
            let (cond, phase) = atf_forward(&s, &p, &[1, 0, 1, 1, 0, 0]).unwrap();
            assert!(cond.iter().all(|c| *c == [0.5, 0.5]));
            assert!(phase.iter().all(|c| *c == [0.0, 0.0]));
        }
    }

    #[test]
    fn rows_ignore_later_spins() {
        for a in [AttentionKind::Softmax, AttentionKind::Circulant] {
            let s = spec(a, ActivationKind::Softmax, PhaseMode::Complex);
            let p = draw(&s, 1.0, 2);
            let base_spins = [1u8, 0, 1, 1, 0, 1];
            let (c0, p0) = atf_forward(&s, &p, &base_spins).unwrap();
            for k in 0..6 {
                let mut spins = base_spins;
                spins[k] ^= 1;
                let (c1, p1) = atf_forward(&s, &p, &spins).unwrap();
                for n in 0..=k {
                    assert_eq!(c0[n], c1[n]);
                    assert_eq!(p0[n], p1[n]);
                }
            }
        }
    }

    #[test]
    fn enumeration_matches_direct_and_normalizes() {
        for a in [AttentionKind::Softmax, AttentionKind::Circulant] {
            for g in [ActivationKind::Softmax, ActivationKind::SquareModulus] {
                let s = spec(a, g, PhaseMode::Complex);
                let net = AtfNet::new(&s, &draw(&s, 0.9, 7)).unwrap();
                let (lp, ph) = net.enumerate();
                let all: Vec<u8> = (0..64usize).flat_map(|i| (0..6).map(move |b| ((i >> (5 - b)) & 1) as u8)).collect();
                let (lp2, ph2) = net.log_amplitudes(&all);
                assert_eq!(lp, lp2);
                assert_eq!(ph, ph2);
                let norm: f64 = lp.iter().map(|x| x.exp()).sum();
                assert!((norm - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for a in [AttentionKind::Softmax, AttentionKind::Circulant] {
            for mode in [PhaseMode::Complex, PhaseMode::Positive] {
                let s = spec(a, ActivationKind::Softmax, mode);
                let p = draw(&s, 0.6, 13);
                let net = AtfNet::new(&s, &p).unwrap();
                let mut rng = RngStream::new(21);
                let n = 3;
                let configs: Vec<u8> = (0..n * 6).map(|_| u8::from(rng.uniform() < 0.5)).collect();
                let wl: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
                let wp: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
                let grad = net.backward(&configs, &wl, &wp);
                let objective = |q: &ParameterSet| {
                    let (lp, ph) = AtfNet::new(&s, q).unwrap().log_amplitudes(&configs);
                    (0..n).map(|i| wl[i] * lp[i] + wp[i] * ph[i]).sum::<f64>()
                };
                for i in 0..grad.len() {
                    let h = 1e-6;
                    let mut plus = p.clone();
                    plus.as_mut_slice()[i] += h;
                    let mut minus = p.clone();
                    minus.as_mut_slice()[i] -= h;
                    let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
                    assert!((fd - grad[i]).abs() < 1e-6 * (1.0 + fd.abs()), "{a:?} {mode:?} coord {i}: {fd} vs {}", grad[i]);
                }
            }
        }
    }

    #[test]
    fn sampling_reproduces_enumeration() {
        let mut s = spec(AttentionKind::Circulant, ActivationKind::Softmax, PhaseMode::Complex);
        s.l = 4;
        let net = AtfNet::new(&s, &draw(&s, 1.0, 5)).unwrap();
        let (lp, _) = net.enumerate();
        let n = 100_000;
        let (configs, _, _) = net.sample(n, &mut RngStream::new(1));
        let mut counts = [0usize; 16];
        for row in configs.chunks(4) {
            counts[row.iter().fold(0usize, |a, &b| 2 * a + b as usize)] += 1;
        }
        let tv: f64 = (0..16).map(|i| (counts[i] as f64 / n as f64 - lp[i].exp()).abs()).sum::<f64>() / 2.0;
        assert!(tv < 0.02, "tv {tv}");
    }
}
