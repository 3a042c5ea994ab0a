//! 400-64-32-4 ReLU classifier with softmax output, cross-entropy loss and
//! exact backpropagation, in double precision.
//!
//! Parameters live in [`ModelParams`]; gradients use the same type so the
//! federated code can treat both as vectors (`axpy`, averaging, norms).

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::labeling::{Dataset, FEATURE_DIM, NUM_CLASSES};

pub const INPUT: usize = FEATURE_DIM;
pub const HIDDEN1: usize = 64;
pub const HIDDEN2: usize = 32;
pub const OUTPUT: usize = NUM_CLASSES;

/// Total number of scalars in a model: 27,876.
pub const PARAM_COUNT: usize =
    INPUT * HIDDEN1 + HIDDEN1 + HIDDEN1 * HIDDEN2 + HIDDEN2 + HIDDEN2 * OUTPUT + OUTPUT;

/// Probabilities are clamped here before taking the log.
pub const LOG_CLAMP: f64 = 1e-15;

const CHECKPOINT_MAGIC: &[u8; 8] = b"FGDRAMLP";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
}

/// `B x 400` inputs and their class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniBatch {
    pub inputs: Array2<f64>,
    pub labels: Vec<usize>,
}

impl MiniBatch {
    pub fn new(inputs: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        if inputs.nrows() == 0 || inputs.nrows() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "batch needs matching nonzero rows and labels, got {} and {}",
                inputs.nrows(),
                labels.len()
            )));
        }
        if inputs.ncols() != INPUT {
            return Err(Error::DimensionMismatch {
                expected: INPUT,
                actual: inputs.ncols(),
            });
        }
        if labels.iter().any(|&l| l >= OUTPUT) {
            return Err(Error::InvalidArgument("label out of range".into()));
        }
        Ok(MiniBatch { inputs, labels })
    }

    /// Gathers the given sample indices of `ds` into a batch.
    pub fn from_indices(ds: &Dataset, idx: &[usize]) -> Result<Self> {
        let mut inputs = Array2::zeros((idx.len(), INPUT));
        let mut labels = Vec::with_capacity(idx.len());
        for (mut row, &i) in inputs.outer_iter_mut().zip(idx) {
            let s = &ds.samples[i];
            if s.features.len() != INPUT {
                return Err(Error::DimensionMismatch {
                    expected: INPUT,
                    actual: s.features.len(),
                });
            }
            row.assign(&ndarray::ArrayView1::from(&s.features[..]));
            labels.push(s.label);
        }
        MiniBatch::new(inputs, labels)
    }

    pub fn full(ds: &Dataset) -> Result<Self> {
        let idx: Vec<usize> = (0..ds.len()).collect();
        Self::from_indices(ds, &idx)
    }

    /// `size` indices drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(ds: &Dataset, size: usize, rng: &mut R) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::InvalidArgument("cannot sample from empty dataset".into()));
        }
        let idx: Vec<usize> = (0..size).map(|_| rng.random_range(0..ds.len())).collect();
        Self::from_indices(ds, &idx)
    }

    /// A stochastic batch of `size`, or the whole of `ds` in order when
    /// `size` covers it.
    pub fn draw<R: Rng + ?Sized>(ds: &Dataset, size: usize, rng: &mut R) -> Result<Self> {
        if size >= ds.len() {
            Self::full(ds)
        } else {
            Self::sample(ds, size, rng)
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

struct Activations {
    z1: Array2<f64>,
    a1: Array2<f64>,
    z2: Array2<f64>,
    a2: Array2<f64>,
    probs: Array2<f64>,
}

fn relu(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|v| v.max(0.0))
}

fn softmax_rows(mut logits: Array2<f64>) -> Array2<f64> {
    for mut row in logits.outer_iter_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    logits
}

impl ModelParams {
    pub fn zeros() -> Self {
        ModelParams {
            w1: Array2::zeros((HIDDEN1, INPUT)),
            b1: Array1::zeros(HIDDEN1),
            w2: Array2::zeros((HIDDEN2, HIDDEN1)),
            b2: Array1::zeros(HIDDEN2),
            w3: Array2::zeros((OUTPUT, HIDDEN2)),
            b3: Array1::zeros(OUTPUT),
        }
    }

    /// He-normal weights (`sd = sqrt(2 / fan_in)`), zero biases.
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut p = Self::zeros();
        for w in [&mut p.w1, &mut p.w2, &mut p.w3] {
            let fan_in = w.ncols() as f64;
            let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive sd");
            w.mapv_inplace(|_| normal.sample(rng));
        }
        p
    }

    fn activations(&self, x: &Array2<f64>) -> Activations {
        let z1 = x.dot(&self.w1.t()) + &self.b1;
        let a1 = relu(&z1);
        let z2 = a1.dot(&self.w2.t()) + &self.b2;
        let a2 = relu(&z2);
        let logits = a2.dot(&self.w3.t()) + &self.b3;
        Activations {
            z1,
            a1,
            z2,
            a2,
            probs: softmax_rows(logits),
        }
    }

    /// Class probabilities for one input.
    pub fn forward(&self, x: &[f64]) -> Result<[f64; OUTPUT]> {
        if x.len() != INPUT {
            return Err(Error::DimensionMismatch {
                expected: INPUT,
                actual: x.len(),
            });
        }
        let x = ndarray::ArrayView2::from_shape((1, INPUT), x).expect("shape checked");
        let p = self.predict_proba(&x.to_owned());
        Ok([p[[0, 0]], p[[0, 1]], p[[0, 2]], p[[0, 3]]])
    }

    /// Row-wise class probabilities.
    pub fn predict_proba(&self, x: &Array2<f64>) -> Array2<f64> {
        self.activations(x).probs
    }

    /// Predicted class (argmax, lowest index on ties) for each row.
    pub fn predict(&self, x: &Array2<f64>) -> Vec<usize> {
        self.predict_proba(x)
            .outer_iter()
            .map(|row| {
                let mut best = 0;
                for c in 1..OUTPUT {
                    if row[c] > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }

    /// Mean cross-entropy (natural log) over the batch.
    pub fn loss(&self, batch: &MiniBatch) -> f64 {
        let probs = self.predict_proba(&batch.inputs);
        let total: f64 = batch
            .labels
            .iter()
            .enumerate()
            .map(|(i, &c)| -probs[[i, c]].max(LOG_CLAMP).ln())
            .sum();
        total / batch.len() as f64
    }

    /// Exact gradient of [`ModelParams::loss`]. ReLU'(0) is taken as 0 and
    /// samples in the log clamp contribute nothing.
    pub fn grad(&self, batch: &MiniBatch) -> ModelParams {
        let x = &batch.inputs;
        let act = self.activations(x);
        let inv_b = 1.0 / batch.len() as f64;

        let mut dz3 = act.probs;
        for (i, mut row) in dz3.outer_iter_mut().enumerate() {
            let c = batch.labels[i];
            if row[c] < LOG_CLAMP {
                row.fill(0.0);
                continue;
            }
            row[c] -= 1.0;
            row.mapv_inplace(|v| v * inv_b);
        }

        let w3 = dz3.t().dot(&act.a2);
        let b3 = dz3.sum_axis(Axis(0));
        let mut dz2 = dz3.dot(&self.w3);
        Zip::from(&mut dz2).and(&act.z2).for_each(|d, &z| {
            if z <= 0.0 {
                *d = 0.0
            }
        });

        let w2 = dz2.t().dot(&act.a1);
        let b2 = dz2.sum_axis(Axis(0));
        let mut dz1 = dz2.dot(&self.w2);
        Zip::from(&mut dz1).and(&act.z1).for_each(|d, &z| {
            if z <= 0.0 {
                *d = 0.0
            }
        });

        let w1 = dz1.t().dot(x);
        let b1 = dz1.sum_axis(Axis(0));
        ModelParams {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
        }
    }

    fn parts(&self) -> [&[f64]; 6] {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
            self.w3.as_slice().expect("standard layout"),
            self.b3.as_slice().expect("standard layout"),
        ]
    }

    fn parts_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            self.b2.as_slice_mut().expect("standard layout"),
            self.w3.as_slice_mut().expect("standard layout"),
            self.b3.as_slice_mut().expect("standard layout"),
        ]
    }

    /// Iterates all parameters in checkpoint order.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.parts().into_iter().flatten()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.iter().copied().collect()
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() != PARAM_COUNT {
            return Err(Error::DimensionMismatch {
                expected: PARAM_COUNT,
                actual: flat.len(),
            });
        }
        let mut p = Self::zeros();
        let mut offset = 0;
        for part in p.parts_mut() {
            part.copy_from_slice(&flat[offset..offset + part.len()]);
            offset += part.len();
        }
        Ok(p)
    }

    pub fn get(&self, index: usize) -> f64 {
        let mut i = index;
        for part in self.parts() {
            if i < part.len() {
                return part[i];
            }
            i -= part.len();
        }
        panic!("parameter index {index} out of range")
    }

    pub fn set(&mut self, index: usize, value: f64) {
        let mut i = index;
        for part in self.parts_mut() {
            if i < part.len() {
                part[i] = value;
                return;
            }
            i -= part.len();
        }
        panic!("parameter index {index} out of range")
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &ModelParams) {
        for (dst, src) in self.parts_mut().into_iter().zip(other.parts()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += a * s;
            }
        }
    }

    /// `self -= step * grad`
    pub fn descend(&mut self, step: f64, grad: &ModelParams) {
        for (dst, src) in self.parts_mut().into_iter().zip(grad.parts()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d -= step * s;
            }
        }
    }

    pub fn scale(&mut self, a: f64) {
        for part in self.parts_mut() {
            part.iter_mut().for_each(|v| *v *= a);
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Squared L2 distance.
    pub fn dist_sqr(&self, other: &ModelParams) -> f64 {
        self.iter().zip(other.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    /// Writes the little-endian checkpoint format (see README).
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        out.write_all(&3u32.to_le_bytes())?;
        for (rows, cols) in [(HIDDEN1, INPUT), (HIDDEN2, HIDDEN1), (OUTPUT, HIDDEN2)] {
            out.write_all(&(rows as u32).to_le_bytes())?;
            out.write_all(&(cols as u32).to_le_bytes())?;
        }
        out.write_all(&(PARAM_COUNT as u64).to_le_bytes())?;
        for v in self.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut input: R) -> std::result::Result<Self, String> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(|e| e.to_string())?;
        if &magic != CHECKPOINT_MAGIC {
            return Err("bad magic".into());
        }
        let mut u32buf = [0u8; 4];
        let mut read_u32 = |input: &mut R| -> std::result::Result<u32, String> {
            input.read_exact(&mut u32buf).map_err(|e| e.to_string())?;
            Ok(u32::from_le_bytes(u32buf))
        };
        let version = read_u32(&mut input)?;
        if version != CHECKPOINT_VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let layers = read_u32(&mut input)?;
        if layers != 3 {
            return Err(format!("expected 3 layers, found {layers}"));
        }
        for (rows, cols) in [(HIDDEN1, INPUT), (HIDDEN2, HIDDEN1), (OUTPUT, HIDDEN2)] {
            let r = read_u32(&mut input)? as usize;
            let c = read_u32(&mut input)? as usize;
            if (r, c) != (rows, cols) {
                return Err(format!("layer shape {r}x{c}, expected {rows}x{cols}"));
            }
        }
        let mut u64buf = [0u8; 8];
        input.read_exact(&mut u64buf).map_err(|e| e.to_string())?;
        let count = u64::from_le_bytes(u64buf) as usize;
        if count != PARAM_COUNT {
            return Err(format!("parameter count {count}, expected {PARAM_COUNT}"));
        }
        let mut flat = Vec::with_capacity(count);
        for _ in 0..count {
            input.read_exact(&mut u64buf).map_err(|e| e.to_string())?;
            flat.push(f64::from_le_bytes(u64buf));
        }
        ModelParams::from_flat(&flat).map_err(|e| e.to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_checkpoint(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_checkpoint(std::io::BufReader::new(file)).map_err(|message| Error::Format {
            what: "checkpoint",
            path: path.to_path_buf(),
            message,
        })
    }
}
