//! Trainable parameter storage, initialization, the Adam optimizer, a
//! central-difference gradient checker and the binary checkpoint format.
//!
//! Every tensor is held as a dense 64-bit matrix. Bias vectors are stored as
//! `1 × n` rows and serialized with rank 1.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const CHECKPOINT_MAGIC: &[u8; 4] = b"FVSP";
const CHECKPOINT_VERSION: u32 = 1;

/// Whether a tensor counts as a weight matrix (subject to the l2 penalty) or a bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
}

/// A named tensor with a same-shaped gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub kind: ParamKind,
    pub values: Array2<f64>,
    pub grad: Array2<f64>,
}

impl ParamTensor {
    pub fn zeros(name: impl Into<String>, kind: ParamKind, rows: usize, cols: usize) -> Self {
        ParamTensor {
            name: name.into(),
            kind,
            values: Array2::zeros((rows, cols)),
            grad: Array2::zeros((rows, cols)),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// An ordered collection of parameter tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    pub tensors: Vec<ParamTensor>,
}

impl ParamSet {
    pub fn new(tensors: Vec<ParamTensor>) -> Self {
        ParamSet { tensors }
    }

    pub fn get(&self, name: &str) -> Option<&ParamTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn zero_grad(&mut self) {
        self.tensors.iter_mut().for_each(ParamTensor::zero_grad);
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(ParamTensor::len).sum()
    }

    /// Flattened copy of all gradients in tensor order.
    pub fn flat_grad(&self) -> Vec<f64> {
        self.tensors
            .iter()
            .flat_map(|t| t.grad.iter().copied())
            .collect()
    }

    pub fn flat_values(&self) -> Vec<f64> {
        self.tensors
            .iter()
            .flat_map(|t| t.values.iter().copied())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors
            .iter()
            .all(|t| t.values.iter().all(|v| v.is_finite()))
    }
}

/// How a tensor is filled by [`init_params`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform on `[-bound, bound]`.
    Uniform(f64),
    Zeros,
    /// Four-gate LSTM bias laid out as `[input, forget, cell, output]`, each of
    /// length `hidden`; the forget slice is set to `1.0`, the rest to zero.
    LstmBias {
        hidden: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub rows: usize,
    pub cols: usize,
    pub init: Init,
}

impl ParamSpec {
    pub fn new(
        name: impl Into<String>,
        kind: ParamKind,
        rows: usize,
        cols: usize,
        init: Init,
    ) -> Self {
        ParamSpec {
            name: name.into(),
            kind,
            rows,
            cols,
            init,
        }
    }
}

/// Allocates and initializes tensors deterministically from `seed`.
///
/// Tensors are filled in the order given from a single ChaCha8 stream, so adding a
/// tensor at the end never perturbs the earlier ones.
pub fn init_params(specs: &[ParamSpec], seed: u64) -> ParamSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensors = specs
        .iter()
        .map(|spec| {
            let mut t = ParamTensor::zeros(spec.name.clone(), spec.kind, spec.rows, spec.cols);
            match spec.init {
                Init::Uniform(bound) => {
                    t.values.mapv_inplace(|_| rng.random_range(-bound..=bound));
                }
                Init::Zeros => {}
                Init::LstmBias { hidden } => {
                    for (i, v) in t.values.iter_mut().enumerate() {
                        if (hidden..2 * hidden).contains(&i) {
                            *v = 1.0;
                        }
                    }
                }
            }
            t
        })
        .collect();
    ParamSet::new(tensors)
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators for every tensor of one [`ParamSet`].
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Array2<f64>>,
    second: Vec<Array2<f64>>,
}

impl AdamState {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Self {
        let zeros = || {
            params
                .tensors
                .iter()
                .map(|t| Array2::zeros(t.values.raw_dim()))
                .collect()
        };
        AdamState {
            config,
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }
}

/// One bias-corrected Adam update; gradients are zeroed afterwards.
///
/// A non-finite gradient anywhere aborts the whole update before any tensor
/// is touched.
pub fn adam_step(params: &mut ParamSet, state: &mut AdamState) -> Result<()> {
    if let Some(bad) = params
        .tensors
        .iter()
        .find(|t| t.grad.iter().any(|g| !g.is_finite()))
    {
        return Err(Error::NonFinite {
            name: format!("gradient of {}", bad.name),
        });
    }
    if state.first.len() != params.tensors.len() {
        return Err(Error::invariant(
            "adam state",
            "tensor count does not match parameter set",
        ));
    }
    state.step += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for ((tensor, m), v) in params
        .tensors
        .iter_mut()
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        ndarray::Zip::from(&mut tensor.values)
            .and(&tensor.grad)
            .and(m)
            .and(v)
            .for_each(|theta, &g, m, v| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *theta -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            });
        tensor.zero_grad();
    }
    Ok(())
}

/// Compares the gradients stored in `params` against central differences of `f`.
///
/// Returns `max_i |analytic_i - numeric_i| / max(1, |analytic_i|)`. Values are
/// perturbed in place and restored before returning.
pub fn grad_check<F>(mut f: F, params: &mut ParamSet, h: f64) -> Result<f64>
where
    F: FnMut(&ParamSet) -> f64,
{
    let mut worst = 0.0_f64;
    for ti in 0..params.tensors.len() {
        for idx in 0..params.tensors[ti].len() {
            let original = flat_get(&params.tensors[ti].values, idx);
            flat_set(&mut params.tensors[ti].values, idx, original + h);
            let plus = f(params);
            flat_set(&mut params.tensors[ti].values, idx, original - h);
            let minus = f(params);
            flat_set(&mut params.tensors[ti].values, idx, original);
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite {
                    name: format!("objective near {}[{idx}]", params.tensors[ti].name),
                });
            }
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = flat_get(&params.tensors[ti].grad, idx);
            let err = (analytic - numeric).abs() / analytic.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

fn flat_get(a: &Array2<f64>, idx: usize) -> f64 {
    let cols = a.ncols();
    a[[idx / cols, idx % cols]]
}

fn flat_set(a: &mut Array2<f64>, idx: usize, v: f64) {
    let cols = a.ncols();
    a[[idx / cols, idx % cols]] = v;
}

/// Serializes a parameter set in the `FVSP` checkpoint layout.
///
/// Layout (all integers u32 little-endian): magic `FVSP`, version, tensor
/// count, then per tensor: name length, UTF-8 name, rank, dims, and the values
/// as f64 little-endian in row-major order. Biases are written with rank 1.
pub fn write_checkpoint<W: Write>(params: &ParamSet, mut w: W) -> std::io::Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(params.tensors.len() as u32).to_le_bytes())?;
    for t in &params.tensors {
        w.write_all(&(t.name.len() as u32).to_le_bytes())?;
        w.write_all(t.name.as_bytes())?;
        let dims: Vec<u32> = match t.kind {
            ParamKind::Bias => vec![t.len() as u32],
            ParamKind::Weight => vec![t.values.nrows() as u32, t.values.ncols() as u32],
        };
        w.write_all(&(dims.len() as u32).to_le_bytes())?;
        for d in dims {
            w.write_all(&d.to_le_bytes())?;
        }
        for v in t.values.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ParamSet> {
    let bad = |msg: &str| Error::format("checkpoint", msg);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| bad("truncated header"))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r)?;
    let mut tensors = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)
            .map_err(|_| bad("truncated tensor name"))?;
        let name = String::from_utf8(name).map_err(|_| bad("tensor name is not utf-8"))?;
        let rank = read_u32(&mut r)?;
        let (kind, rows, cols) = match rank {
            1 => (ParamKind::Bias, 1, read_u32(&mut r)? as usize),
            2 => {
                let rows = read_u32(&mut r)? as usize;
                (ParamKind::Weight, rows, read_u32(&mut r)? as usize)
            }
            other => return Err(bad(&format!("tensor {name} has unsupported rank {other}"))),
        };
        let mut t = ParamTensor::zeros(name, kind, rows, cols);
        let mut buf = [0u8; 8];
        for v in t.values.iter_mut() {
            r.read_exact(&mut buf)
                .map_err(|_| bad("truncated tensor payload"))?;
            *v = f64::from_le_bytes(buf);
        }
        tensors.push(t);
    }
    Ok(ParamSet::new(tensors))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::format("checkpoint", "truncated integer field"))?;
    Ok(u32::from_le_bytes(buf))
}

pub fn save_checkpoint(params: &ParamSet, path: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    write_checkpoint(params, &mut bytes).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ParamSet> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(bytes.as_slice())
}
