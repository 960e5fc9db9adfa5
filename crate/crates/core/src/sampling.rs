//! Spin-configuration samplers and the configuration census.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Network;
use crate::numerics::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleOrigin {
    Ancestral,
    Mcmc,
}

/// Sampled configurations (row-major `n x L`) with their amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub l: usize,
    pub configs: Vec<u8>,
    pub log_modulus_sq: Vec<f64>,
    pub phases: Vec<f64>,
    pub origin: SampleOrigin,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.log_modulus_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.configs[i * self.l..(i + 1) * self.l]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.configs.chunks(self.l)
    }

    /// Fraction of samples with spin 1 at each site.
    pub fn site_frequencies(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.l];
        for row in self.rows() {
            for (a, &s) in f.iter_mut().zip(row) {
                *a += s as f64;
            }
        }
        let n = self.len() as f64;
        f.iter_mut().for_each(|a| *a /= n);
        f
    }

    /// One row per sample: `config,log_modulus_sq,phase` with the configuration as a 0/1 string.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "config,log_modulus_sq,phase")?;
        for i in 0..self.len() {
            let s: String = self.row(i).iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
            writeln!(w, "{s},{},{}", self.log_modulus_sq[i], self.phases[i])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draw `n` independent configurations site by site from the exact conditionals.
pub fn ancestral_sample(net: &Network, n: usize, rng: &mut RngStream) -> Result<SampleBatch> {
    let (configs, lp, ph) = net.sample(n, rng)?;
    Ok(SampleBatch {
        l: net.n_sites(),
        configs,
        log_modulus_sq: lp,
        phases: ph,
        origin: SampleOrigin::Ancestral,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proposal {
    SingleFlip,
}

/// Metropolis chain settings. Burn-in and thinning count single-flip proposals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcConfig {
    pub n_burn: usize,
    pub thinning: usize,
    #[serde(default = "default_chains")]
    pub n_chains: usize,
    #[serde(default = "default_proposal")]
    pub proposal: Proposal,
    pub seed: u64,
}

fn default_chains() -> usize {
    1
}

fn default_proposal() -> Proposal {
    Proposal::SingleFlip
}

impl McmcConfig {
    /// Defaults for an `L`-site chain: burn-in of `10 L` sweeps (`L` proposals each),
    /// one recorded sample every `L` proposals.
    pub fn for_sites(l: usize, seed: u64) -> Self {
        Self {
            n_burn: 10 * l * l,
            thinning: l,
            n_chains: 1,
            proposal: Proposal::SingleFlip,
            seed,
        }
    }
}

/// Metropolis acceptance probability for a move between weights `exp(lp_cur)` and `exp(lp_new)`.
#[inline]
pub fn metropolis_acceptance(lp_cur: f64, lp_new: f64) -> f64 {
    if lp_new >= lp_cur {
        1.0
    } else if lp_cur == f64::NEG_INFINITY {
        1.0
    } else {
        (lp_new - lp_cur).exp()
    }
}

/// Single-flip Metropolis sampling of `|Psi|^2`, which need not be normalized.
///
/// `n_chains` chains advance in lockstep so their proposals are evaluated as one
/// batch. Samples are ordered by recording round, then chain index.
pub fn mcmc_sample(net: &Network, n: usize, cfg: &McmcConfig) -> Result<SampleBatch> {
    if cfg.thinning == 0 || cfg.n_chains == 0 {
        return Err(Error::InvalidArgument("thinning and n_chains must be at least 1".into()));
    }
    let l = net.n_sites();
    let c = cfg.n_chains;
    let mut rng = RngStream::new(cfg.seed);
    let mut state: Vec<u8> = (0..c * l).map(|_| u8::from(rng.uniform() < 0.5)).collect();
    let (mut lp, mut ph) = net.log_amplitudes(&state);

    let mut out = SampleBatch {
        l,
        configs: Vec::with_capacity(n * l),
        log_modulus_sq: Vec::with_capacity(n),
        phases: Vec::with_capacity(n),
        origin: SampleOrigin::Mcmc,
    };
    let mut proposal = state.clone();
    let mut step = |state: &mut Vec<u8>, lp: &mut Vec<f64>, ph: &mut Vec<f64>, rng: &mut RngStream| {
        proposal.copy_from_slice(state);
        let sites: Vec<usize> = (0..c).map(|_| rng.below(l)).collect();
        for (k, &site) in sites.iter().enumerate() {
            proposal[k * l + site] ^= 1;
        }
        let (lp_new, ph_new) = net.log_amplitudes(&proposal);
        for k in 0..c {
            let a = metropolis_acceptance(lp[k], lp_new[k]);
            if a >= 1.0 || rng.uniform() < a {
                state[k * l + sites[k]] ^= 1;
                lp[k] = lp_new[k];
                ph[k] = ph_new[k];
            }
        }
    };
    for _ in 0..cfg.n_burn {
        step(&mut state, &mut lp, &mut ph, &mut rng);
    }
    while out.len() < n {
        for _ in 0..cfg.thinning {
            step(&mut state, &mut lp, &mut ph, &mut rng);
        }
        for k in 0..c.min(n - out.len()) {
            out.configs.extend_from_slice(&state[k * l..(k + 1) * l]);
            out.log_modulus_sq.push(lp[k]);
            out.phases.push(ph[k]);
        }
    }
    Ok(out)
}

/// Ancestral samples when the output normalizes the conditionals, Metropolis otherwise.
pub fn sample_any(net: &Network, n: usize, rng: &mut RngStream) -> Result<SampleBatch> {
    if net.is_normalized() {
        ancestral_sample(net, n, rng)
    } else {
        let cfg = McmcConfig::for_sites(net.n_sites(), rng.fork().seed());
        mcmc_sample(net, n, &cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Census {
    pub distinct: usize,
    pub top_frequency: f64,
    /// Most frequent configuration (ties broken by first occurrence).
    pub top_config: Vec<u8>,
}

/// Exact count of distinct configurations in a batch.
pub fn distinct_config_census(batch: &SampleBatch) -> Result<Census> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("census of an empty batch".into()));
    }
    let mut counts: HashMap<&[u8], (usize, usize)> = HashMap::new();
    for (i, row) in batch.rows().enumerate() {
        counts.entry(row).or_insert((0, i)).0 += 1;
    }
    let (top, &(count, _)) = counts
        .iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .expect("nonempty");
    Ok(Census {
        distinct: counts.len(),
        top_frequency: count as f64 / batch.len() as f64,
        top_config: top.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{init_gaussian, ActivationKind, CellKind, ModelSpec, ParameterSet, PhaseMode, RnnSpec};

    fn rnn(l: usize, d_h: usize, g: ActivationKind) -> ModelSpec {
        ModelSpec::Rnn(RnnSpec {
            l,
            d_h,
            cell: CellKind::Vanilla,
            f: ActivationKind::Tanh,
            g,
            phase_mode: PhaseMode::Complex,
        })
    }

    fn index(row: &[u8]) -> usize {
        row.iter().fold(0, |a, &b| 2 * a + b as usize)
    }

    #[test]
    fn uniform_state_site_frequencies() {
        let spec = rnn(8, 4, ActivationKind::Softmax);
        let net = Network::new(&spec, &ParameterSet::zeros_for(&spec)).unwrap();
        let n = 100_000;
        let batch = ancestral_sample(&net, n, &mut RngStream::new(1)).unwrap();
        let tol = 4.0 * (0.25 / n as f64).sqrt();
        for f in batch.site_frequencies() {
            assert!((f - 0.5).abs() < tol, "{f}");
        }
    }

    #[test]
    fn identical_rows_census() {
        let batch = SampleBatch {
            l: 3,
            configs: vec![1, 0, 1, 1, 0, 1, 1, 0, 1],
            log_modulus_sq: vec![0.0; 3],
            phases: vec![0.0; 3],
            origin: SampleOrigin::Ancestral,
        };
        let c = distinct_config_census(&batch).unwrap();
        assert_eq!((c.distinct, c.top_frequency), (1, 1.0));
        assert_eq!(c.top_config, vec![1, 0, 1]);
    }

    #[test]
    fn uniform_state_has_many_distinct_configs() {
        let spec = rnn(20, 4, ActivationKind::Softmax);
        let net = Network::new(&spec, &ParameterSet::zeros_for(&spec)).unwrap();
        let batch = ancestral_sample(&net, 1000, &mut RngStream::new(2)).unwrap();
        // Expected collisions among 1000 uniform draws from 2^20 outcomes is ~0.48.
        assert!(distinct_config_census(&batch).unwrap().distinct >= 990);
    }

    #[test]
    fn equal_proposal_is_always_accepted() {
        assert_eq!(metropolis_acceptance(-3.2, -3.2), 1.0);
        assert_eq!(metropolis_acceptance(f64::NEG_INFINITY, -1.0), 1.0);
        assert!((metropolis_acceptance(0.0, -1.0) - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn mcmc_matches_enumeration_for_identity_output() {
        let spec = rnn(2, 3, ActivationKind::Identity);
        let p = init_gaussian(&spec, 1.0, &mut RngStream::new(4));
        let net = Network::new(&spec, &p).unwrap();
        let (lp, _) = net.enumerate();
        let z: f64 = lp.iter().map(|x| x.exp()).sum();
        let n = 100_000;
        let batch = mcmc_sample(&net, n, &McmcConfig::for_sites(2, 9)).unwrap();
        let mut counts = [0usize; 4];
        for row in batch.rows() {
            counts[index(row)] += 1;
        }
        let tv: f64 = (0..4).map(|i| (counts[i] as f64 / n as f64 - lp[i].exp() / z).abs()).sum::<f64>() / 2.0;
        assert!(tv < 0.02, "tv {tv}");
    }

    #[test]
    fn single_flip_chain_is_stationary_on_target() {
        // Exact transition matrix of the L = 2 chain, iterated to stationarity.
        let spec = rnn(2, 3, ActivationKind::Identity);
        let p = init_gaussian(&spec, 1.0, &mut RngStream::new(6));
        let (lp, _) = Network::new(&spec, &p).unwrap().enumerate();
        let z: f64 = lp.iter().map(|x| x.exp()).sum();
        let target: Vec<f64> = lp.iter().map(|x| x.exp() / z).collect();
        let mut t = [[0.0; 4]; 4];
        for (s, row) in t.iter_mut().enumerate() {
            for site in 0..2 {
                let s2 = s ^ (1 << (1 - site));
                let a = metropolis_acceptance(lp[s], lp[s2]);
                row[s2] += 0.5 * a;
                row[s] += 0.5 * (1.0 - a);
            }
        }
        let mut v = vec![0.25; 4];
        for _ in 0..10_000 {
            let mut next = vec![0.0; 4];
            for s in 0..4 {
                for s2 in 0..4 {
                    next[s2] += v[s] * t[s][s2];
                }
            }
            v = next;
        }
        for i in 0..4 {
            assert!((v[i] - target[i]).abs() < 1e-3);
        }
    }

    #[test]
    fn mcmc_and_ancestral_magnetizations_agree() {
        let spec = rnn(6, 5, ActivationKind::Softmax);
        let p = init_gaussian(&spec, 0.8, &mut RngStream::new(12));
        let net = Network::new(&spec, &p).unwrap();
        let n = 20_000;
        let a = ancestral_sample(&net, n, &mut RngStream::new(3)).unwrap();
        let mut cfg = McmcConfig::for_sites(6, 5);
        cfg.n_chains = 8;
        cfg.thinning = 12;
        let m = mcmc_sample(&net, n, &cfg).unwrap();
        let fa = a.site_frequencies();
        let fm = m.site_frequencies();
        for s in 0..6 {
            // Thinned chains are close to independent; allow for residual autocorrelation.
            let se = (fa[s] * (1.0 - fa[s]) / n as f64).sqrt() * 2f64.sqrt() * 1.5;
            assert!((fa[s] - fm[s]).abs() < 4.0 * se, "site {s}: {} vs {}", fa[s], fm[s]);
        }
    }

    #[test]
    fn softmax_collapses_at_large_width() {
        let spec = rnn(20, 20, ActivationKind::Softmax);
        let p = init_gaussian(&spec, 50.0, &mut RngStream::new(31));
        let net = Network::new(&spec, &p).unwrap();
        let b = ancestral_sample(&net, 1000, &mut RngStream::new(1)).unwrap();
        let c = distinct_config_census(&b).unwrap();
        assert!(c.distinct <= 2, "{}", c.distinct);
        let spec = rnn(20, 20, ActivationKind::SquareModulus);
        let p = init_gaussian(&spec, 50.0, &mut RngStream::new(31));
        let net = Network::new(&spec, &p).unwrap();
        let b = ancestral_sample(&net, 1000, &mut RngStream::new(1)).unwrap();
        assert!(distinct_config_census(&b).unwrap().distinct > 100);
    }

    #[test]
    fn csv_dump() {
        let dir = tempfile::tempdir().unwrap();
        let spec = rnn(3, 2, ActivationKind::Softmax);
        let net = Network::new(&spec, &ParameterSet::zeros_for(&spec)).unwrap();
        let b = ancestral_sample(&net, 4, &mut RngStream::new(0)).unwrap();
        let path = dir.path().join("s.csv");
        b.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().nth(1).unwrap().len() > 4);
    }

    #[test]
    fn shuffled_rows_keep_statistics() {
        let spec = rnn(5, 4, ActivationKind::Softmax);
        let p = init_gaussian(&spec, 1.0, &mut RngStream::new(8));
        let net = Network::new(&spec, &p).unwrap();
        let b = ancestral_sample(&net, 2000, &mut RngStream::new(8)).unwrap();
        let mut rows: Vec<Vec<u8>> = b.rows().map(<[u8]>::to_vec).collect();
        rows.reverse();
        let shuffled = SampleBatch {
            configs: rows.concat(),
            ..b.clone()
        };
        // Counts of 0/1 values are exact in floating point, so order cannot matter.
        assert_eq!(b.site_frequencies(), shuffled.site_frequencies());
    }
}
