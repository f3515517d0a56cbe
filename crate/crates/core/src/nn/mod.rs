//! From-scratch neural network engine for block genomes.
//!
//! The engine is generic over the scalar type: training runs in `f32`
//! (matching the 4-byte cost model), while gradient checking instantiates
//! the whole engine in `f64` to keep finite-difference comparisons sharp.
//!
//! Backward passes consume the forward cache by value, so a cache can never
//! be reused against updated weights — the stale-cache failure mode is
//! unrepresentable rather than checked.

mod adam;
mod layers;
mod train;

use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::space::{shape_trace, Genome, HeadPool, SpaceError};

pub use adam::Adam;
pub use layers::{BatchNorm, Conv1d, Dense, Layer, LayerCache};
pub use train::{
    evaluate, loss_softmax_xent, multi_start_train, train, EarlyStopConfig, EpochRecord,
    PlateauConfig, TrainConfig, TrainOutcome,
};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("malformed model file: {0}")]
    MalformedModel(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Scalar the engine computes in: `f32` for training, `f64` for gradient
/// checks.
pub trait Scalar: num_traits::Float + Send + Sync + fmt::Debug + 'static {
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn of(x: f64) -> f32 {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn of(x: f64) -> f64 {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Channel-last batched tensor: element `(b, pos, c)` lives at
/// `b·len·ch + pos·ch + c`. Feature vectors use `len == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    pub data: Vec<S>,
    pub batch: usize,
    pub len: usize,
    pub ch: usize,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(batch: usize, len: usize, ch: usize) -> Self {
        Tensor { data: vec![S::zero(); batch * len * ch], batch, len, ch }
    }

    /// Builds a (batch, 784, 1) input tensor from dataset rows.
    pub fn from_samples(samples: &[&[f32]]) -> Self {
        let len = samples.first().map_or(0, |s| s.len());
        let mut data = Vec::with_capacity(samples.len() * len);
        for s in samples {
            debug_assert_eq!(s.len(), len);
            data.extend(s.iter().map(|&v| S::of(v as f64)));
        }
        Tensor { data, batch: samples.len(), len, ch: 1 }
    }

    /// Per-sample element count — the activation size the RAM model tracks.
    pub fn sample_elems(&self) -> usize {
        self.len * self.ch
    }

    pub fn row(&self, b: usize) -> &[S] {
        let n = self.len * self.ch;
        &self.data[b * n..(b + 1) * n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// A genome instantiated with weights.
#[derive(Debug, Clone)]
pub struct Network<S: Scalar> {
    pub genome: Genome,
    pub input_len: usize,
    pub layers: Vec<Layer<S>>,
}

/// Gradients for the trainable arrays, in [`Network::trainable`] order.
pub type Grads<S> = Vec<Vec<S>>;

impl<S: Scalar> Network<S> {
    /// Instantiates the genome: per block conv → batch norm → ReLU →
    /// optional pool → optional dropout; head collapse → optional
    /// dense+ReLU → classifier. Weights use uniform init with limit
    /// `sqrt(6/(fan_in+fan_out))`, biases zero, BN scale 1 / shift 0;
    /// draws are seeded and happen in storage order.
    pub fn new(genome: &Genome, input_len: usize, seed: u64) -> Result<Self, NnError> {
        let trace = shape_trace(genome, input_len)?;
        let mut rng = crate::search::derive_rng(seed, 0x6e65_7477); // "netw"
        let mut layers = Vec::new();
        let mut in_ch = 1usize;
        for b in &genome.blocks {
            layers.push(Layer::Conv(Conv1d::init(
                in_ch, b.filters, b.kernel, b.stride, b.padding, &mut rng,
            )));
            layers.push(Layer::BatchNorm(BatchNorm::init(b.filters)));
            layers.push(Layer::Relu);
            match b.pool {
                crate::space::Pool::None => {}
                crate::space::Pool::Max(n) => layers.push(Layer::MaxPool { size: n }),
                crate::space::Pool::Avg(n) => layers.push(Layer::AvgPool { size: n }),
            }
            if b.dropout > 0.0 {
                layers.push(Layer::Dropout { rate: b.dropout });
            }
            in_ch = b.filters;
        }
        let final_len = trace.last().expect("genomes have ≥ 1 block").l_out;
        let mut feat = match genome.head.pool {
            HeadPool::GlobalAvg => {
                layers.push(Layer::GlobalAvg);
                in_ch
            }
            HeadPool::Flatten => {
                layers.push(Layer::Flatten);
                in_ch * final_len
            }
        };
        if genome.head.dense_units > 0 {
            layers.push(Layer::Dense(Dense::init(feat, genome.head.dense_units, &mut rng)));
            layers.push(Layer::Relu);
            feat = genome.head.dense_units;
        }
        layers.push(Layer::Dense(Dense::init(feat, genome.head.num_classes, &mut rng)));
        Ok(Network { genome: genome.clone(), input_len, layers })
    }

    fn check_input(&self, x: &Tensor<S>) -> Result<(), NnError> {
        if x.len != self.input_len || x.ch != 1 || x.batch == 0 {
            return Err(NnError::ShapeMismatch(format!(
                "input is (batch {}, len {}, ch {}), expected (≥1, {}, 1)",
                x.batch, x.len, x.ch, self.input_len
            )));
        }
        Ok(())
    }

    /// Train-mode forward: batch statistics in BN (running stats updated),
    /// dropout active. Returns the logits and the cache backward consumes.
    pub fn forward_train(
        &mut self,
        x: Tensor<S>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Tensor<S>, Vec<LayerCache<S>>), NnError> {
        self.check_input(&x)?;
        let mut cur = x;
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &mut self.layers {
            let (out, cache) = layer.forward(cur, Mode::Train, rng);
            caches.push(cache);
            cur = out;
        }
        Ok((cur, caches))
    }

    /// Infer-mode forward: running BN statistics, dropout off, no state
    /// mutation and no cache.
    pub fn forward_infer(&self, x: Tensor<S>) -> Result<Tensor<S>, NnError> {
        self.check_input(&x)?;
        let mut cur = x;
        for layer in &self.layers {
            cur = layer.forward_infer(cur);
        }
        Ok(cur)
    }

    /// Reverse pass. Consumes the cache (so it cannot be replayed) and
    /// returns gradients aligned with [`Self::trainable`].
    pub fn backward(
        &self,
        caches: Vec<LayerCache<S>>,
        dlogits: Tensor<S>,
    ) -> Grads<S> {
        debug_assert_eq!(caches.len(), self.layers.len());
        let mut per_layer: Vec<Vec<Vec<S>>> = Vec::with_capacity(self.layers.len());
        let mut grad = dlogits;
        for (layer, cache) in self.layers.iter().zip(caches).rev() {
            let (dx, param_grads) = layer.backward(cache, grad);
            per_layer.push(param_grads);
            grad = dx;
        }
        per_layer.reverse();
        per_layer.into_iter().flatten().collect()
    }

    /// Class predictions: argmax of the logits, ties toward the lowest
    /// class index.
    pub fn predict(&self, x: Tensor<S>) -> Result<Vec<u32>, NnError> {
        let logits = self.forward_infer(x)?;
        let classes = logits.sample_elems();
        let mut out = Vec::with_capacity(logits.batch);
        for b in 0..logits.batch {
            let row = logits.row(b);
            let mut best = 0usize;
            for (i, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = i;
                }
            }
            debug_assert!(best < classes);
            out.push(best as u32);
        }
        Ok(out)
    }

    /// Trainable arrays in storage order (running BN stats excluded).
    pub fn trainable(&self) -> Vec<&[S]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(c.w.as_slice());
                    out.push(c.b.as_slice());
                }
                Layer::BatchNorm(bn) => {
                    out.push(bn.gamma.as_slice());
                    out.push(bn.beta.as_slice());
                }
                Layer::Dense(d) => {
                    out.push(d.w.as_slice());
                    out.push(d.b.as_slice());
                }
                _ => {}
            }
        }
        out
    }

    /// Mutable view of the trainable arrays, same order as
    /// [`Self::trainable`].
    pub fn trainable_mut(&mut self) -> Vec<&mut [S]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(c.w.as_mut_slice());
                    out.push(c.b.as_mut_slice());
                }
                Layer::BatchNorm(bn) => {
                    out.push(bn.gamma.as_mut_slice());
                    out.push(bn.beta.as_mut_slice());
                }
                Layer::Dense(d) => {
                    out.push(d.w.as_mut_slice());
                    out.push(d.b.as_mut_slice());
                }
                _ => {}
            }
        }
        out
    }

    /// Every stored array in the parameter-count decomposition order:
    /// per block conv weights, conv bias, BN scale, BN shift, BN running
    /// mean, BN running variance; then each dense layer's weights and bias.
    pub fn stored_arrays(&self) -> Vec<&[S]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(c.w.as_slice());
                    out.push(c.b.as_slice());
                }
                Layer::BatchNorm(bn) => {
                    out.push(bn.gamma.as_slice());
                    out.push(bn.beta.as_slice());
                    out.push(bn.running_mean.as_slice());
                    out.push(bn.running_var.as_slice());
                }
                Layer::Dense(d) => {
                    out.push(d.w.as_slice());
                    out.push(d.b.as_slice());
                }
                _ => {}
            }
        }
        out
    }

    fn stored_arrays_mut(&mut self) -> Vec<&mut [S]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(c.w.as_mut_slice());
                    out.push(c.b.as_mut_slice());
                }
                Layer::BatchNorm(bn) => {
                    out.push(bn.gamma.as_mut_slice());
                    out.push(bn.beta.as_mut_slice());
                    out.push(bn.running_mean.as_mut_slice());
                    out.push(bn.running_var.as_mut_slice());
                }
                Layer::Dense(d) => {
                    out.push(d.w.as_mut_slice());
                    out.push(d.b.as_mut_slice());
                }
                _ => {}
            }
        }
        out
    }

    /// Total stored value count; equals the cost model's parameter count.
    pub fn param_count(&self) -> usize {
        self.stored_arrays().iter().map(|a| a.len()).sum()
    }

    /// Snapshot of every stored array (used to save the best epoch).
    pub fn snapshot(&self) -> Vec<Vec<S>> {
        self.stored_arrays().iter().map(|a| a.to_vec()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Vec<S>]) {
        let mut arrays = self.stored_arrays_mut();
        debug_assert_eq!(arrays.len(), snapshot.len());
        for (dst, src) in arrays.iter_mut().zip(snapshot) {
            dst.copy_from_slice(src);
        }
    }
}

/// Model file magic, opening the binary weights section.
pub const MODEL_MAGIC: &[u8; 4] = b"TSW1";

/// Writes a model file: the genome text encoding followed by a binary
/// section — magic `TSW1`, little-endian u32 array count, then per array a
/// u32 length and the little-endian 32-bit values in storage order.
pub fn write_model(path: &Path, net: &Network<f32>) -> Result<(), NnError> {
    let mut out = net.genome.to_string().into_bytes();
    let arrays = net.stored_arrays();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
    for a in arrays {
        out.extend_from_slice(&(a.len() as u32).to_le_bytes());
        for &v in a {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a model file back into a network on the given input length.
pub fn read_model(path: &Path, input_len: usize) -> Result<Network<f32>, NnError> {
    let raw = fs::read(path)?;
    let magic_at = raw
        .windows(MODEL_MAGIC.len())
        .position(|w| w == MODEL_MAGIC)
        .ok_or_else(|| NnError::MalformedModel("no weights section".into()))?;
    let text = std::str::from_utf8(&raw[..magic_at])
        .map_err(|_| NnError::MalformedModel("genome text is not UTF-8".into()))?;
    let genome: Genome = text.parse().map_err(NnError::Space)?;
    let mut net = Network::<f32>::new(&genome, input_len, 0)?;

    fn take_u32(raw: &[u8], off: &mut usize) -> Result<u32, NnError> {
        if *off + 4 > raw.len() {
            return Err(NnError::MalformedModel("truncated weights section".into()));
        }
        let v = u32::from_le_bytes([raw[*off], raw[*off + 1], raw[*off + 2], raw[*off + 3]]);
        *off += 4;
        Ok(v)
    }
    let mut off = magic_at + MODEL_MAGIC.len();
    let count = take_u32(&raw, &mut off)? as usize;
    let mut arrays = net.stored_arrays_mut();
    if count != arrays.len() {
        return Err(NnError::MalformedModel(format!(
            "{count} arrays in file, genome defines {}",
            arrays.len()
        )));
    }
    for dst in arrays.iter_mut() {
        let len = take_u32(&raw, &mut off)? as usize;
        if len != dst.len() {
            return Err(NnError::MalformedModel(format!(
                "array of {len} values where the genome defines {}",
                dst.len()
            )));
        }
        if off + 4 * len > raw.len() {
            return Err(NnError::MalformedModel("truncated weights section".into()));
        }
        for v in dst.iter_mut() {
            *v = f32::from_le_bytes([raw[off], raw[off + 1], raw[off + 2], raw[off + 3]]);
            off += 4;
        }
    }
    if off != raw.len() {
        return Err(NnError::MalformedModel(format!(
            "{} trailing bytes after the weights section",
            raw.len() - off
        )));
    }
    Ok(net)
}

/// Glorot-style uniform draw used by conv and dense init.
pub(crate) fn glorot<S: Scalar>(
    fan_in: usize,
    fan_out: usize,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<S> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| S::of(rng.gen_range(-limit..limit))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost;
    use crate::space::{Block, Genome, Head, Padding, Pool};
    use crate::SAMPLE_LEN;
    use rand::SeedableRng;

    fn tiny_genome() -> Genome {
        Genome {
            blocks: vec![
                Block {
                    filters: 4,
                    kernel: 3,
                    stride: 1,
                    padding: Padding::Same,
                    pool: Pool::Max(2),
                    dropout: 0.25,
                },
                Block {
                    filters: 6,
                    kernel: 5,
                    stride: 2,
                    padding: Padding::Valid,
                    pool: Pool::None,
                    dropout: 0.0,
                },
            ],
            head: Head { pool: HeadPool::GlobalAvg, dense_units: 8, num_classes: 3 },
        }
    }

    #[test]
    fn network_parameter_count_matches_cost_model() {
        let g = tiny_genome();
        let net = Network::<f32>::new(&g, SAMPLE_LEN, 7).unwrap();
        assert_eq!(
            net.param_count() as u64,
            cost::count_params(&g, SAMPLE_LEN).unwrap()
        );
        // trainable excludes exactly the two running-stat arrays per block
        let trainable: usize = net.trainable().iter().map(|a| a.len()).sum();
        assert_eq!(net.param_count() - trainable, 2 * (4 + 6));
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let g = tiny_genome();
        let a = Network::<f32>::new(&g, SAMPLE_LEN, 7).unwrap();
        let b = Network::<f32>::new(&g, SAMPLE_LEN, 7).unwrap();
        assert_eq!(a.snapshot(), b.snapshot());
        let c = Network::<f32>::new(&g, SAMPLE_LEN, 8).unwrap();
        assert_ne!(a.snapshot(), c.snapshot());
    }

    #[test]
    fn inference_is_pure_and_deterministic() {
        let g = tiny_genome();
        let net = Network::<f32>::new(&g, SAMPLE_LEN, 7).unwrap();
        let data = crate::synth::motif_dataset(3, 2, 1);
        let rows: Vec<&[f32]> = data.samples.iter().map(|s| s.as_slice()).collect();
        let x1 = Tensor::<f32>::from_samples(&rows);
        let x2 = x1.clone();
        let l1 = net.forward_infer(x1).unwrap();
        let l2 = net.forward_infer(x2).unwrap();
        assert_eq!(l1.data, l2.data);
        assert!(l1.data.iter().all(|v| v.is_finite()));
        assert_eq!(l1.batch, 6);
        assert_eq!(l1.sample_elems(), 3);
    }

    #[test]
    fn largest_observed_activation_matches_the_cost_model() {
        for seed in 0..10u64 {
            let bounds = crate::space::SpaceBounds::default();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = crate::space::random_genome(&bounds, SAMPLE_LEN, 5, &mut rng).unwrap();
            let mut net = Network::<f32>::new(&g, SAMPLE_LEN, seed).unwrap();
            let x = Tensor::<f32>::zeros(1, SAMPLE_LEN, 1);
            let mut largest = x.sample_elems();
            let mut cur = x;
            let mut drng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
            for layer in &mut net.layers {
                let (out, _) = layer.forward(cur, Mode::Train, &mut drng);
                largest = largest.max(out.sample_elems());
                cur = out;
            }
            assert_eq!(largest as u64, cost::max_tensor(&g, SAMPLE_LEN).unwrap());
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        // covers conv same/valid with stride, batch norm, ReLU, max and avg
        // pooling, global average, and both dense layers; dropout 0 keeps
        // the loss deterministic
        let g = Genome {
            blocks: vec![
                Block {
                    filters: 3,
                    kernel: 3,
                    stride: 1,
                    padding: Padding::Same,
                    pool: Pool::Max(2),
                    dropout: 0.0,
                },
                Block {
                    filters: 4,
                    kernel: 5,
                    stride: 2,
                    padding: Padding::Valid,
                    pool: Pool::Avg(2),
                    dropout: 0.0,
                },
            ],
            head: Head { pool: HeadPool::GlobalAvg, dense_units: 5, num_classes: 3 },
        };
        let input_len = 20;
        let mut net = Network::<f64>::new(&g, input_len, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut x = Tensor::<f64>::zeros(2, input_len, 1);
        for v in x.data.iter_mut() {
            *v = rand::Rng::gen_range(&mut rng, -1.0..1.0);
        }
        let labels = [0u32, 2];

        let (logits, caches) = net.forward_train(x.clone(), &mut rng).unwrap();
        let (_, dlogits) = loss_softmax_xent(&logits, &labels);
        let analytic = net.backward(caches, dlogits);

        let h = 1e-5;
        let n_arrays = net.trainable().len();
        assert_eq!(analytic.len(), n_arrays);
        let mut checked = 0usize;
        for ai in 0..n_arrays {
            for j in 0..net.trainable()[ai].len() {
                let orig = net.trainable()[ai][j];
                net.trainable_mut()[ai][j] = orig + h;
                let (lp, _) = net.forward_train(x.clone(), &mut rng).unwrap();
                let (loss_p, _) = loss_softmax_xent(&lp, &labels);
                net.trainable_mut()[ai][j] = orig - h;
                let (lm, _) = net.forward_train(x.clone(), &mut rng).unwrap();
                let (loss_m, _) = loss_softmax_xent(&lm, &labels);
                net.trainable_mut()[ai][j] = orig;
                let fd = (loss_p - loss_m) / (2.0 * h);
                let a = analytic[ai][j];
                let denom = a.abs().max(fd.abs()).max(1e-3);
                assert!(
                    (a - fd).abs() / denom < 1e-5,
                    "array {ai} index {j}: analytic {a} vs fd {fd}"
                );
                checked += 1;
            }
        }
        assert!(checked > 100, "gradient check covered only {checked} values");
    }

    #[test]
    fn predict_breaks_ties_toward_the_lowest_class() {
        let g = Genome {
            blocks: vec![Block {
                filters: 2,
                kernel: 3,
                stride: 1,
                padding: Padding::Same,
                pool: Pool::None,
                dropout: 0.0,
            }],
            head: Head { pool: HeadPool::GlobalAvg, dense_units: 0, num_classes: 3 },
        };
        let mut net = Network::<f32>::new(&g, 8, 0).unwrap();
        // zero classifier weights and bias -> all logits equal -> class 0
        for arr in net.trainable_mut() {
            arr.fill(0.0);
        }
        let x = Tensor::<f32>::zeros(4, 8, 1);
        assert_eq!(net.predict(x).unwrap(), vec![0, 0, 0, 0]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let g = tiny_genome();
        let net = Network::<f32>::new(&g, SAMPLE_LEN, 7).unwrap();
        let bad = Tensor::<f32>::zeros(2, 100, 1);
        assert!(matches!(
            net.forward_infer(bad),
            Err(NnError::ShapeMismatch(_))
        ));
        let empty = Tensor::<f32>::zeros(0, SAMPLE_LEN, 1);
        assert!(matches!(
            net.forward_infer(empty),
            Err(NnError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn model_file_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.tsw");
        let g = tiny_genome();
        let mut net = Network::<f32>::new(&g, SAMPLE_LEN, 7).unwrap();
        // make running stats non-trivial so their persistence is visible
        let data = crate::synth::motif_dataset(3, 4, 2);
        let rows: Vec<&[f32]> = data.samples.iter().map(|s| s.as_slice()).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let _ = net.forward_train(Tensor::from_samples(&rows), &mut rng).unwrap();

        write_model(&path, &net).unwrap();
        let raw = fs::read(&path).unwrap();
        assert!(raw.starts_with(b"conv "));
        let back = read_model(&path, SAMPLE_LEN).unwrap();
        assert_eq!(back.genome, net.genome);
        assert_eq!(back.snapshot(), net.snapshot());

        // identical inference behavior after the round trip
        let x: Vec<&[f32]> = data.samples.iter().map(|s| s.as_slice()).collect();
        let a = net.forward_infer(Tensor::from_samples(&x)).unwrap();
        let b = back.forward_infer(Tensor::from_samples(&x)).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn model_reader_rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tsw");
        fs::write(&path, b"conv f=8 k=3 s=1 p=same pool=none drop=0\nhead pool=gap dense=0 classes=2\n").unwrap();
        assert!(matches!(
            read_model(&path, SAMPLE_LEN),
            Err(NnError::MalformedModel(_))
        ));

        let g = tiny_genome();
        let net = Network::<f32>::new(&g, SAMPLE_LEN, 7).unwrap();
        write_model(&path, &net).unwrap();
        let mut raw = fs::read(&path).unwrap();
        raw.truncate(raw.len() - 3);
        fs::write(&path, raw).unwrap();
        assert!(matches!(
            read_model(&path, SAMPLE_LEN),
            Err(NnError::MalformedModel(_))
        ));
    }
}
