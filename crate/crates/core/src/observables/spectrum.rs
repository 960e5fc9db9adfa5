//! Entanglement spectra, adjacent-gap ratios and random-matrix reference curves.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{hermitian_eigvals, integrate_1d};

pub const DEFAULT_CUTOFF: f64 = 1e-10;
/// Gaps narrower than this are treated as exact degeneracies and skipped.
pub const GAP_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementSpectrum {
    /// `E_n = -ln lambda_n` for retained eigenvalues, ascending.
    pub energies: Vec<f64>,
    /// Sum of the eigenvalues below the cutoff.
    pub discarded_mass: f64,
    /// All eigenvalues of `rho_A`, descending.
    pub eigenvalues: Vec<f64>,
}

/// Spectrum of `H_ent = -ln rho_A`, keeping eigenvalues `>= cutoff`.
///
/// Any number of retained levels is returned; `gap_ratios` rejects fewer than three.
pub fn entanglement_spectrum(rho: &DMatrix<Complex64>, cutoff: f64) -> Result<EntanglementSpectrum> {
    let mut ev = hermitian_eigvals(rho)?;
    ev.reverse();
    let mut energies = Vec::new();
    let mut discarded = 0.0;
    for &l in &ev {
        if l >= cutoff {
            energies.push(-l.ln());
        } else {
            discarded += l;
        }
    }
    Ok(EntanglementSpectrum {
        energies,
        discarded_mass: discarded,
        eigenvalues: ev,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GapRatios {
    /// `Delta_{n+1} / Delta_n`.
    pub r: Vec<f64>,
    /// `min(r, 1/r)`.
    pub r_min: Vec<f64>,
    pub skipped_gaps: usize,
}

/// Ratios of consecutive gaps of an ascending spectrum.
pub fn gap_ratios(spectrum: &[f64]) -> Result<GapRatios> {
    if spectrum.len() < 3 {
        return Err(Error::SpectrumTooSmall(spectrum.len()));
    }
    let mut skipped = 0;
    let gaps: Vec<f64> = spectrum
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&g| {
            let keep = g >= GAP_TOL;
            skipped += usize::from(!keep);
            keep
        })
        .collect();
    if gaps.is_empty() {
        return Err(Error::DegenerateGaps);
    }
    let r: Vec<f64> = gaps.windows(2).map(|w| w[1] / w[0]).collect();
    let r_min = r.iter().map(|&x| x.min(1.0 / x)).collect();
    Ok(GapRatios {
        r,
        r_min,
        skipped_gaps: skipped,
    })
}

/// Fixed-bin histogram normalized as a density over the values that fall inside the range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
    /// Values outside `[lo, hi]`.
    pub outside: u64,
}

impl Histogram {
    pub fn new(values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        assert!(hi > lo && bins > 0);
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0u64; bins];
        let mut outside = 0;
        for &v in values {
            if !(lo..=hi).contains(&v) {
                outside += 1;
                continue;
            }
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        let inside: u64 = counts.iter().sum();
        let density = counts
            .iter()
            .map(|&c| if inside == 0 { 0.0 } else { c as f64 / (inside as f64 * width) })
            .collect();
        Self {
            lo,
            hi,
            counts,
            density,
            outside,
        }
    }

    /// Default for `r`: 60 bins on `[0, 6]`.
    pub fn ratios(values: &[f64]) -> Self {
        Self::new(values, 0.0, 6.0, 60)
    }

    /// Default for `r_min`: 40 bins on `[0, 1]`.
    pub fn ratio_minima(values: &[f64]) -> Self {
        Self::new(values, 0.0, 1.0, 40)
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.width();
        (0..self.counts.len()).map(|k| self.lo + (k as f64 + 0.5) * w).collect()
    }

    /// Total variation distance to a density, comparing bin masses.
    pub fn total_variation(&self, density: impl Fn(f64) -> f64) -> Result<f64> {
        let w = self.width();
        let mut tv = 0.0;
        for (k, &d) in self.density.iter().enumerate() {
            let a = self.lo + k as f64 * w;
            let mass = integrate_1d(&density, a, a + w, 1e-10)?;
            tv += (d * w - mass).abs();
        }
        Ok(0.5 * tv)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReferenceKind {
    #[serde(rename = "GOE")]
    Goe,
    #[serde(rename = "GUE")]
    Gue,
    #[serde(rename = "GSE")]
    Gse,
    Poisson,
    SemiPoisson,
    MarchenkoPastur,
}

impl ReferenceKind {
    pub const GAP_RATIO_KINDS: [ReferenceKind; 5] = [
        ReferenceKind::Goe,
        ReferenceKind::Gue,
        ReferenceKind::Gse,
        ReferenceKind::Poisson,
        ReferenceKind::SemiPoisson,
    ];

    fn beta(self) -> Option<(i32, f64)> {
        use std::f64::consts::PI;
        let s3 = 3f64.sqrt();
        match self {
            ReferenceKind::Goe => Some((1, 8.0 / 27.0)),
            ReferenceKind::Gue => Some((2, 4.0 * PI / (81.0 * s3))),
            ReferenceKind::Gse => Some((4, 4.0 * PI / (729.0 * s3))),
            _ => None,
        }
    }
}

/// Gap-ratio density `P(r)`.
///
/// * Poisson: `1 / (1 + r)^2`
/// * GOE/GUE/GSE surmise: `(r + r^2)^b / (1 + r + r^2)^(1 + 3b/2) / Z_b`
/// * semi-Poisson: `6 r / (1 + r)^4`
///
/// `MarchenkoPastur` is not a gap-ratio law; see `marchenko_pastur_density`.
pub fn reference_density(kind: ReferenceKind, r: f64) -> f64 {
    if r < 0.0 {
        return 0.0;
    }
    match kind {
        ReferenceKind::Poisson => 1.0 / (1.0 + r).powi(2),
        ReferenceKind::SemiPoisson => 6.0 * r / (1.0 + r).powi(4),
        ReferenceKind::MarchenkoPastur => marchenko_pastur_density(r, 1.0),
        k => {
            let (b, z) = k.beta().expect("surmise kind");
            (r + r * r).powi(b) / (1.0 + r + r * r).powf(1.0 + 1.5 * b as f64) / z
        }
    }
}

/// `<r_min> = 2 int_0^1 r P(r) dr`, valid for densities with `P(r) = P(1/r) / r^2`.
pub fn mean_r_min(kind: ReferenceKind) -> Result<f64> {
    if kind == ReferenceKind::MarchenkoPastur {
        return Err(Error::InvalidArgument("Marchenko-Pastur has no gap-ratio mean".into()));
    }
    Ok(2.0 * integrate_1d(|r| r * reference_density(kind, r), 0.0, 1.0, 1e-12)?)
}

/// Marchenko-Pastur density of `X X^H / n` for a `p x n` matrix of unit-variance entries,
/// `aspect = p / n` in `(0, 1]`.
pub fn marchenko_pastur_density(x: f64, aspect: f64) -> f64 {
    let (lo, hi) = marchenko_pastur_support(aspect);
    if x <= lo || x >= hi || x <= 0.0 {
        return 0.0;
    }
    ((hi - x) * (x - lo)).sqrt() / (2.0 * std::f64::consts::PI * aspect * x)
}

pub fn marchenko_pastur_support(aspect: f64) -> (f64, f64) {
    let s = aspect.sqrt();
    ((1.0 - s).powi(2), (1.0 + s).powi(2))
}

/// Aspect `min(d_A, d_B) / max(d_A, d_B)` for a bipartition with `|A|` of `L` sites.
pub fn marchenko_pastur_aspect(size_a: usize, l: usize) -> f64 {
    let na = size_a.min(l - size_a) as i32;
    let nb = size_a.max(l - size_a) as i32;
    2f64.powi(na - nb)
}

/// A reference law with its parameters (`[aspect]` for Marchenko-Pastur, empty otherwise).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDistribution {
    pub kind: ReferenceKind,
    pub parameters: Vec<f64>,
}

impl ReferenceDistribution {
    pub fn new(kind: ReferenceKind) -> Self {
        Self { kind, parameters: Vec::new() }
    }

    pub fn marchenko_pastur(aspect: f64) -> Self {
        Self {
            kind: ReferenceKind::MarchenkoPastur,
            parameters: vec![aspect],
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match self.kind {
            ReferenceKind::MarchenkoPastur => marchenko_pastur_density(x, self.parameters.first().copied().unwrap_or(1.0)),
            k => reference_density(k, x),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            ReferenceKind::MarchenkoPastur => marchenko_pastur_support(self.parameters.first().copied().unwrap_or(1.0)),
            _ => (0.0, f64::INFINITY),
        }
    }

    /// Numerical integral of the density over its support.
    pub fn total_mass(&self) -> Result<f64> {
        let (lo, hi) = self.support();
        if self.kind == ReferenceKind::MarchenkoPastur {
            // x = mid + half sin(t) removes the square-root edges.
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            let f = |t: f64| self.density(mid + half * t.sin()) * half * t.cos();
            return integrate_1d(f, -std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2, 1e-12);
        }
        integrate_1d(|x| self.density(x), lo, hi, 1e-12)
    }
}

/// One energy per row under an `energy` header.
pub fn write_spectrum_csv(path: &Path, energies: &[f64]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "energy")?;
    for e in energies {
        writeln!(w, "{e}")?;
    }
    w.flush()?;
    Ok(())
}
