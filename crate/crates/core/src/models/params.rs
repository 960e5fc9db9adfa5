//! Flat named-tensor parameter store and its binary container.
//!
//! Container layout (all integers and floats little-endian):
//!
//! ```text
//! magic    8 bytes   b"NQSPARM1"
//! count    u32       number of tensors
//! repeated count times:
//!   name_len u32, name [u8; name_len] (UTF-8)
//!   rank     u32, dims [u64; rank]
//!   data     [f64; prod(dims)] row-major
//! ```
//!
//! A JSON sidecar (`<stem>.json`) stores the `ModelSpec` the tensors belong to.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::spec::{ModelSpec, TensorLayout, TensorRole};
use crate::error::{Error, Result};
use crate::numerics::RngStream;

pub const CONTAINER_MAGIC: &[u8; 8] = b"NQSPARM1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// All trainable tensors of one network, stored contiguously in layout order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSet {
    entries: Vec<TensorEntry>,
    data: Vec<f64>,
}

impl ParameterSet {
    pub fn zeros(layout: &[TensorLayout]) -> Self {
        let mut offset = 0;
        let entries = layout
            .iter()
            .map(|t| {
                let e = TensorEntry {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    offset,
                };
                offset += t.len();
                e
            })
            .collect();
        Self {
            entries,
            data: vec![0.0; offset],
        }
    }

    pub fn zeros_for(spec: &ModelSpec) -> Self {
        Self::zeros(&spec.layout())
    }

    /// Build from explicit tensors, e.g. after reading a container.
    pub fn from_tensors(tensors: Vec<(String, Vec<usize>, Vec<f64>)>) -> Result<Self> {
        let mut entries = Vec::with_capacity(tensors.len());
        let mut data = Vec::new();
        for (name, shape, values) in tensors {
            let len: usize = shape.iter().product();
            if values.len() != len {
                return Err(Error::Format(format!("tensor {name}: {} values for shape {shape:?}", values.len())));
            }
            entries.push(TensorEntry {
                name,
                shape,
                offset: data.len(),
            });
            data.extend(values);
        }
        Ok(Self { entries, data })
    }

    pub fn entries(&self) -> &[TensorEntry] {
        &self.entries
    }

    pub fn total_count(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn entry(&self, name: &str) -> Option<&TensorEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.entry(name).map(|e| &self.data[e.offset..e.offset + e.len()])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let e = self.entry(name)?.clone();
        Some(&mut self.data[e.offset..e.offset + e.len()])
    }

    /// Tensor by name, failing with a layout error when absent.
    pub fn tensor(&self, name: &str) -> Result<&[f64]> {
        self.get(name)
            .ok_or_else(|| Error::ParamLayout(format!("missing tensor {name}")))
    }

    /// Check names and shapes against the layout a spec requires.
    pub fn check_layout(&self, spec: &ModelSpec) -> Result<()> {
        let layout = spec.layout();
        if layout.len() != self.entries.len() {
            return Err(Error::ParamLayout(format!(
                "expected {} tensors, found {}",
                layout.len(),
                self.entries.len()
            )));
        }
        for (t, e) in layout.iter().zip(&self.entries) {
            if t.name != e.name || t.shape != e.shape {
                return Err(Error::ParamLayout(format!(
                    "expected {}{:?}, found {}{:?}",
                    t.name, t.shape, e.name, e.shape
                )));
            }
        }
        Ok(())
    }

    pub fn write_container<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CONTAINER_MAGIC)?;
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for e in &self.entries {
            let name = e.name.as_bytes();
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name)?;
            w.write_all(&(e.shape.len() as u32).to_le_bytes())?;
            for &d in &e.shape {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in &self.data[e.offset..e.offset + e.len()] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_container<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CONTAINER_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let count = read_u32(&mut r)? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let n = read_u32(&mut r)? as usize;
            let mut name = vec![0u8; n];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
            let rank = read_u32(&mut r)? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                shape.push(u64::from_le_bytes(b) as usize);
            }
            let len: usize = shape.iter().product();
            let mut values = Vec::with_capacity(len);
            for _ in 0..len {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                values.push(f64::from_le_bytes(b));
            }
            tensors.push((name, shape, values));
        }
        Self::from_tensors(tensors)
    }

    /// Write `<stem>.bin` (tensor container) and `<stem>.json` (spec sidecar).
    pub fn save(&self, spec: &ModelSpec, stem: &Path) -> Result<()> {
        let bin = std::fs::File::create(stem.with_extension("bin"))?;
        self.write_container(std::io::BufWriter::new(bin))?;
        std::fs::write(stem.with_extension("json"), serde_json::to_string_pretty(spec)?)?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<(ModelSpec, Self)> {
        let spec: ModelSpec = serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
        let bin = std::fs::File::open(stem.with_extension("bin"))?;
        let params = Self::read_container(std::io::BufReader::new(bin))?;
        params.check_layout(&spec)?;
        Ok((spec, params))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Draw every trainable tensor i.i.d. from `N(0, sigma^2)`.
///
/// Layer-norm gains and biases are drawn like every other tensor. Values are filled
/// in layout order from a single stream, so the draw for a given seed is fixed.
pub fn init_gaussian(spec: &ModelSpec, sigma: f64, rng: &mut RngStream) -> ParameterSet {
    assert!(sigma >= 0.0, "gaussian width must be nonnegative");
    let mut p = ParameterSet::zeros_for(spec);
    for v in p.as_mut_slice() {
        *v = sigma * rng.normal() + 0.0;
    }
    p
}

/// Uniform `[-1/sqrt(n), 1/sqrt(n)]` weights with `n` the fan-in of each linear map;
/// biases zero, layer-norm gains one.
pub fn init_xavier_glorot(spec: &ModelSpec, rng: &mut RngStream) -> ParameterSet {
    let layout = spec.layout();
    let mut p = ParameterSet::zeros(&layout);
    let data = p.as_mut_slice();
    let mut offset = 0;
    for t in &layout {
        let block = &mut data[offset..offset + t.len()];
        match t.role {
            TensorRole::Weight { fan_in } => {
                let bound = 1.0 / (fan_in as f64).sqrt();
                for v in block.iter_mut() {
                    *v = rng.uniform_range(-bound, bound);
                }
            }
            TensorRole::Bias | TensorRole::NormBias => block.fill(0.0),
            TensorRole::NormGain => block.fill(1.0),
        }
        offset += t.len();
    }
    p
}
