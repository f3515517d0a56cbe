//! Layer implementations: 1D convolution, batch normalization, ReLU,
//! pooling, dropout, spatial collapse, and dense.
//!
//! Forward passes consume their input tensor and hand ownership of whatever
//! backward needs to the returned cache; backward consumes that cache in
//! turn. Weight layouts are chosen so the hot inner loops run over
//! contiguous output-channel slices.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{glorot, Mode, Scalar, Tensor};
use crate::cost::out_len;
use crate::space::Padding;

/// Batch-norm epsilon inside the variance square root.
pub const BN_EPS: f64 = 1e-5;
/// Running-statistics momentum: `running = 0.9·running + 0.1·batch`.
pub const BN_MOMENTUM: f64 = 0.9;

/// 1D cross-correlation. Weights are laid out `[kernel][in_ch][out_ch]` so
/// the innermost accumulation is an axpy over a contiguous output-channel
/// slice.
#[derive(Debug, Clone)]
pub struct Conv1d<S> {
    pub w: Vec<S>,
    pub b: Vec<S>,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: Padding,
}

impl<S: Scalar> Conv1d<S> {
    pub fn init(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        Conv1d {
            w: glorot(in_ch * kernel, out_ch * kernel, kernel * in_ch * out_ch, rng),
            b: vec![S::zero(); out_ch],
            in_ch,
            out_ch,
            kernel,
            stride,
            padding,
        }
    }

    fn l_out(&self, l_in: usize) -> usize {
        out_len(l_in, self.kernel, self.stride, self.padding)
            .expect("shapes were validated when the network was built")
    }

    /// Left padding; same-padding puts the odd leftover on the right.
    fn pad_left(&self, l_in: usize, l_out: usize) -> usize {
        match self.padding {
            Padding::Valid => 0,
            Padding::Same => {
                let needed = (l_out - 1) * self.stride + self.kernel;
                needed.saturating_sub(l_in) / 2
            }
        }
    }

    fn run(&self, x: &Tensor<S>) -> Tensor<S> {
        debug_assert_eq!(x.ch, self.in_ch);
        let l_in = x.len;
        let l_out = self.l_out(l_in);
        let pad_left = self.pad_left(l_in, l_out) as isize;
        let mut y = Tensor::zeros(x.batch, l_out, self.out_ch);
        let out_row = l_out * self.out_ch;
        for bi in 0..x.batch {
            let xrow = x.row(bi);
            let yrow = &mut y.data[bi * out_row..(bi + 1) * out_row];
            for j in 0..l_out {
                let yoff = j * self.out_ch;
                yrow[yoff..yoff + self.out_ch].copy_from_slice(&self.b);
                let base = (j * self.stride) as isize - pad_left;
                for t in 0..self.kernel {
                    let p = base + t as isize;
                    if p < 0 || p >= l_in as isize {
                        continue;
                    }
                    let xoff = p as usize * self.in_ch;
                    let woff = t * self.in_ch * self.out_ch;
                    for c in 0..self.in_ch {
                        let xv = xrow[xoff + c];
                        let ws = &self.w[woff + c * self.out_ch..woff + (c + 1) * self.out_ch];
                        for (yv, &wv) in yrow[yoff..yoff + self.out_ch].iter_mut().zip(ws) {
                            *yv = *yv + xv * wv;
                        }
                    }
                }
            }
        }
        y
    }

    /// Returns `(dx, dw, db)`.
    fn grads(&self, x: &Tensor<S>, dy: &Tensor<S>) -> (Tensor<S>, Vec<S>, Vec<S>) {
        let l_in = x.len;
        let l_out = dy.len;
        let pad_left = self.pad_left(l_in, l_out) as isize;
        let mut dx = Tensor::zeros(x.batch, l_in, self.in_ch);
        let mut dw = vec![S::zero(); self.w.len()];
        let mut db = vec![S::zero(); self.out_ch];
        let out_row = l_out * self.out_ch;
        for bi in 0..x.batch {
            let xrow = x.row(bi);
            let dyrow = &dy.data[bi * out_row..(bi + 1) * out_row];
            let dxrow = &mut dx.data[bi * l_in * self.in_ch..(bi + 1) * l_in * self.in_ch];
            for j in 0..l_out {
                let dys = &dyrow[j * self.out_ch..(j + 1) * self.out_ch];
                for (dbv, &dyv) in db.iter_mut().zip(dys) {
                    *dbv = *dbv + dyv;
                }
                let base = (j * self.stride) as isize - pad_left;
                for t in 0..self.kernel {
                    let p = base + t as isize;
                    if p < 0 || p >= l_in as isize {
                        continue;
                    }
                    let xoff = p as usize * self.in_ch;
                    let woff = t * self.in_ch * self.out_ch;
                    for c in 0..self.in_ch {
                        let xv = xrow[xoff + c];
                        let ws = &self.w[woff + c * self.out_ch..woff + (c + 1) * self.out_ch];
                        let dws =
                            &mut dw[woff + c * self.out_ch..woff + (c + 1) * self.out_ch];
                        let mut acc = S::zero();
                        for ((dwv, &wv), &dyv) in dws.iter_mut().zip(ws).zip(dys) {
                            *dwv = *dwv + xv * dyv;
                            acc = acc + wv * dyv;
                        }
                        dxrow[xoff + c] = dxrow[xoff + c] + acc;
                    }
                }
            }
        }
        (dx, dw, db)
    }
}

/// Per-channel batch normalization over the (batch × length) axis.
#[derive(Debug, Clone)]
pub struct BatchNorm<S> {
    pub gamma: Vec<S>,
    pub beta: Vec<S>,
    pub running_mean: Vec<S>,
    pub running_var: Vec<S>,
    pub ch: usize,
}

impl<S: Scalar> BatchNorm<S> {
    pub fn init(ch: usize) -> Self {
        BatchNorm {
            gamma: vec![S::one(); ch],
            beta: vec![S::zero(); ch],
            running_mean: vec![S::zero(); ch],
            running_var: vec![S::one(); ch],
            ch,
        }
    }

    /// Train-mode forward: normalizes with biased batch statistics, updates
    /// running statistics, and leaves `x̂` in the (consumed) input tensor.
    fn run_train(&mut self, mut x: Tensor<S>) -> (Tensor<S>, Tensor<S>, Vec<S>) {
        debug_assert_eq!(x.ch, self.ch);
        let n = x.batch * x.len;
        let inv_n = S::of(1.0 / n as f64);
        let mut mean = vec![S::zero(); self.ch];
        for row in x.data.chunks_exact(self.ch) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m = *m + v;
            }
        }
        for m in mean.iter_mut() {
            *m = *m * inv_n;
        }
        let mut var = vec![S::zero(); self.ch];
        for row in x.data.chunks_exact(self.ch) {
            for ((vv, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                let d = v - m;
                *vv = *vv + d * d;
            }
        }
        for v in var.iter_mut() {
            *v = *v * inv_n;
        }
        let inv_std: Vec<S> =
            var.iter().map(|&v| S::one() / (v + S::of(BN_EPS)).sqrt()).collect();
        let momentum = S::of(BN_MOMENTUM);
        let rest = S::one() - momentum;
        for c in 0..self.ch {
            self.running_mean[c] = momentum * self.running_mean[c] + rest * mean[c];
            self.running_var[c] = momentum * self.running_var[c] + rest * var[c];
        }
        // x becomes x̂; y is scaled and shifted
        let mut y = Tensor::zeros(x.batch, x.len, x.ch);
        for (xrow, yrow) in
            x.data.chunks_exact_mut(self.ch).zip(y.data.chunks_exact_mut(self.ch))
        {
            for c in 0..self.ch {
                let xh = (xrow[c] - mean[c]) * inv_std[c];
                xrow[c] = xh;
                yrow[c] = self.gamma[c] * xh + self.beta[c];
            }
        }
        (y, x, inv_std)
    }

    /// Infer-mode forward using the running statistics; rewrites in place.
    fn run_infer(&self, mut x: Tensor<S>) -> Tensor<S> {
        debug_assert_eq!(x.ch, self.ch);
        let scale: Vec<S> = (0..self.ch)
            .map(|c| self.gamma[c] / (self.running_var[c] + S::of(BN_EPS)).sqrt())
            .collect();
        let shift: Vec<S> =
            (0..self.ch).map(|c| self.beta[c] - scale[c] * self.running_mean[c]).collect();
        for row in x.data.chunks_exact_mut(self.ch) {
            for c in 0..self.ch {
                row[c] = scale[c] * row[c] + shift[c];
            }
        }
        x
    }

    /// Returns `(dx, dgamma, dbeta)` from `x̂` and the saved `1/σ`.
    fn grads(&self, x_hat: &Tensor<S>, inv_std: &[S], dy: &Tensor<S>) -> (Tensor<S>, Vec<S>, Vec<S>) {
        let n = x_hat.batch * x_hat.len;
        let mut dgamma = vec![S::zero(); self.ch];
        let mut dbeta = vec![S::zero(); self.ch];
        for (xrow, dyrow) in
            x_hat.data.chunks_exact(self.ch).zip(dy.data.chunks_exact(self.ch))
        {
            for c in 0..self.ch {
                dgamma[c] = dgamma[c] + dyrow[c] * xrow[c];
                dbeta[c] = dbeta[c] + dyrow[c];
            }
        }
        let n_s = S::of(n as f64);
        let inv_n = S::one() / n_s;
        // dx = γ/(Nσ) · (N·dy − Σdy − x̂·Σ(dy·x̂))
        let coef: Vec<S> =
            (0..self.ch).map(|c| self.gamma[c] * inv_std[c] * inv_n).collect();
        let mut dx = Tensor::zeros(x_hat.batch, x_hat.len, x_hat.ch);
        for ((xrow, dyrow), dxrow) in x_hat
            .data
            .chunks_exact(self.ch)
            .zip(dy.data.chunks_exact(self.ch))
            .zip(dx.data.chunks_exact_mut(self.ch))
        {
            for c in 0..self.ch {
                dxrow[c] = coef[c] * (n_s * dyrow[c] - dbeta[c] - xrow[c] * dgamma[c]);
            }
        }
        (dx, dgamma, dbeta)
    }
}

/// Fully connected layer over flattened features; weights `[in][out]`.
#[derive(Debug, Clone)]
pub struct Dense<S> {
    pub w: Vec<S>,
    pub b: Vec<S>,
    pub in_f: usize,
    pub out_f: usize,
}

impl<S: Scalar> Dense<S> {
    pub fn init(in_f: usize, out_f: usize, rng: &mut ChaCha8Rng) -> Self {
        Dense { w: glorot(in_f, out_f, in_f * out_f, rng), b: vec![S::zero(); out_f], in_f, out_f }
    }

    fn run(&self, x: &Tensor<S>) -> Tensor<S> {
        debug_assert_eq!(x.sample_elems(), self.in_f);
        let mut y = Tensor::zeros(x.batch, 1, self.out_f);
        for bi in 0..x.batch {
            let xrow = x.row(bi);
            let yrow = &mut y.data[bi * self.out_f..(bi + 1) * self.out_f];
            yrow.copy_from_slice(&self.b);
            for (i, &xv) in xrow.iter().enumerate() {
                let ws = &self.w[i * self.out_f..(i + 1) * self.out_f];
                for (yv, &wv) in yrow.iter_mut().zip(ws) {
                    *yv = *yv + xv * wv;
                }
            }
        }
        y
    }

    fn grads(&self, x: &Tensor<S>, dy: &Tensor<S>) -> (Tensor<S>, Vec<S>, Vec<S>) {
        let mut dx = Tensor::zeros(x.batch, x.len, x.ch);
        let mut dw = vec![S::zero(); self.w.len()];
        let mut db = vec![S::zero(); self.out_f];
        for bi in 0..x.batch {
            let xrow = x.row(bi);
            let dyrow = &dy.data[bi * self.out_f..(bi + 1) * self.out_f];
            let dxrow = &mut dx.data[bi * self.in_f..(bi + 1) * self.in_f];
            for (dbv, &dyv) in db.iter_mut().zip(dyrow) {
                *dbv = *dbv + dyv;
            }
            for (i, &xv) in xrow.iter().enumerate() {
                let ws = &self.w[i * self.out_f..(i + 1) * self.out_f];
                let dws = &mut dw[i * self.out_f..(i + 1) * self.out_f];
                let mut acc = S::zero();
                for ((dwv, &wv), &dyv) in dws.iter_mut().zip(ws).zip(dyrow) {
                    *dwv = *dwv + xv * dyv;
                    acc = acc + wv * dyv;
                }
                dxrow[i] = acc;
            }
        }
        (dx, dw, db)
    }
}

/// One stage of the network.
#[derive(Debug, Clone)]
pub enum Layer<S: Scalar> {
    Conv(Conv1d<S>),
    BatchNorm(BatchNorm<S>),
    Relu,
    MaxPool { size: usize },
    AvgPool { size: usize },
    Dropout { rate: f64 },
    GlobalAvg,
    Flatten,
    Dense(Dense<S>),
}

/// What backward needs, owned by value: consuming it makes replaying a
/// backward pass against changed weights impossible.
#[derive(Debug)]
pub enum LayerCache<S: Scalar> {
    Conv { x: Tensor<S> },
    BatchNorm { x_hat: Tensor<S>, inv_std: Vec<S> },
    Relu { y: Tensor<S> },
    MaxPool { argmax: Vec<usize>, in_len: usize },
    AvgPool { in_len: usize },
    Dropout { mask: Vec<S> },
    GlobalAvg { in_len: usize },
    Flatten { len: usize, ch: usize },
    Dense { x: Tensor<S> },
    Stateless,
}

fn relu_forward<S: Scalar>(mut x: Tensor<S>) -> Tensor<S> {
    for v in x.data.iter_mut() {
        if *v < S::zero() {
            *v = S::zero();
        }
    }
    x
}

fn max_pool_forward<S: Scalar>(x: &Tensor<S>, size: usize) -> (Tensor<S>, Vec<usize>) {
    let l_out = x.len / size;
    let mut y = Tensor::zeros(x.batch, l_out, x.ch);
    let mut argmax = vec![0usize; y.data.len()];
    for bi in 0..x.batch {
        let in_base = bi * x.len * x.ch;
        let out_base = bi * l_out * x.ch;
        for j in 0..l_out {
            for c in 0..x.ch {
                let mut best_idx = in_base + (j * size) * x.ch + c;
                let mut best = x.data[best_idx];
                for u in 1..size {
                    let idx = in_base + (j * size + u) * x.ch + c;
                    // strict comparison: ties keep the earliest position
                    if x.data[idx] > best {
                        best = x.data[idx];
                        best_idx = idx;
                    }
                }
                let o = out_base + j * x.ch + c;
                y.data[o] = best;
                argmax[o] = best_idx;
            }
        }
    }
    (y, argmax)
}

fn avg_pool_forward<S: Scalar>(x: &Tensor<S>, size: usize) -> Tensor<S> {
    let l_out = x.len / size;
    let inv = S::of(1.0 / size as f64);
    let mut y = Tensor::zeros(x.batch, l_out, x.ch);
    for bi in 0..x.batch {
        let in_base = bi * x.len * x.ch;
        let out_base = bi * l_out * x.ch;
        for j in 0..l_out {
            for c in 0..x.ch {
                let mut acc = S::zero();
                for u in 0..size {
                    acc = acc + x.data[in_base + (j * size + u) * x.ch + c];
                }
                y.data[out_base + j * x.ch + c] = acc * inv;
            }
        }
    }
    y
}

fn global_avg_forward<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let inv = S::of(1.0 / x.len as f64);
    let mut y = Tensor::zeros(x.batch, 1, x.ch);
    for bi in 0..x.batch {
        let yrow = &mut y.data[bi * x.ch..(bi + 1) * x.ch];
        for row in x.row(bi).chunks_exact(x.ch) {
            for (yv, &v) in yrow.iter_mut().zip(row) {
                *yv = *yv + v;
            }
        }
        for yv in yrow.iter_mut() {
            *yv = *yv * inv;
        }
    }
    y
}

impl<S: Scalar> Layer<S> {
    /// Forward with cache. In train mode BN uses batch statistics (and
    /// updates its running state) and dropout draws a fresh mask from `rng`.
    pub fn forward(
        &mut self,
        x: Tensor<S>,
        mode: Mode,
        rng: &mut ChaCha8Rng,
    ) -> (Tensor<S>, LayerCache<S>) {
        match self {
            Layer::Conv(c) => {
                let y = c.run(&x);
                (y, LayerCache::Conv { x })
            }
            Layer::BatchNorm(bn) => match mode {
                Mode::Train => {
                    let (y, x_hat, inv_std) = bn.run_train(x);
                    (y, LayerCache::BatchNorm { x_hat, inv_std })
                }
                Mode::Infer => (bn.run_infer(x), LayerCache::Stateless),
            },
            Layer::Relu => {
                let y = relu_forward(x);
                (y.clone(), LayerCache::Relu { y })
            }
            Layer::MaxPool { size } => {
                let in_len = x.len;
                let (y, argmax) = max_pool_forward(&x, *size);
                (y, LayerCache::MaxPool { argmax, in_len })
            }
            Layer::AvgPool { size } => {
                let in_len = x.len;
                let y = avg_pool_forward(&x, *size);
                (y, LayerCache::AvgPool { in_len })
            }
            Layer::Dropout { rate } => match mode {
                Mode::Train => {
                    let keep = 1.0 - *rate;
                    let scale = S::of(1.0 / keep);
                    let mut y = x;
                    let mask: Vec<S> = y
                        .data
                        .iter_mut()
                        .map(|v| {
                            let m = if rng.gen::<f64>() < keep { scale } else { S::zero() };
                            *v = *v * m;
                            m
                        })
                        .collect();
                    (y, LayerCache::Dropout { mask })
                }
                Mode::Infer => (x, LayerCache::Stateless),
            },
            Layer::GlobalAvg => {
                let in_len = x.len;
                let y = global_avg_forward(&x);
                (y, LayerCache::GlobalAvg { in_len })
            }
            Layer::Flatten => {
                let (len, ch) = (x.len, x.ch);
                let y = Tensor { data: x.data, batch: x.batch, len: 1, ch: len * ch };
                (y, LayerCache::Flatten { len, ch })
            }
            Layer::Dense(d) => {
                let y = d.run(&x);
                (y, LayerCache::Dense { x })
            }
        }
    }

    /// Pure inference forward: running BN statistics, dropout off, no cache.
    pub fn forward_infer(&self, x: Tensor<S>) -> Tensor<S> {
        match self {
            Layer::Conv(c) => c.run(&x),
            Layer::BatchNorm(bn) => bn.run_infer(x),
            Layer::Relu => relu_forward(x),
            Layer::MaxPool { size } => max_pool_forward(&x, *size).0,
            Layer::AvgPool { size } => avg_pool_forward(&x, *size),
            Layer::Dropout { .. } => x,
            Layer::GlobalAvg => global_avg_forward(&x),
            Layer::Flatten => {
                let features = x.len * x.ch;
                Tensor { data: x.data, batch: x.batch, len: 1, ch: features }
            }
            Layer::Dense(d) => d.run(&x),
        }
    }

    /// Consumes the cache; returns the input gradient and this layer's
    /// parameter gradients (weights-then-bias / scale-then-shift order).
    pub fn backward(&self, cache: LayerCache<S>, dy: Tensor<S>) -> (Tensor<S>, Vec<Vec<S>>) {
        match (self, cache) {
            (Layer::Conv(c), LayerCache::Conv { x }) => {
                let (dx, dw, db) = c.grads(&x, &dy);
                (dx, vec![dw, db])
            }
            (Layer::BatchNorm(bn), LayerCache::BatchNorm { x_hat, inv_std }) => {
                let (dx, dgamma, dbeta) = bn.grads(&x_hat, &inv_std, &dy);
                (dx, vec![dgamma, dbeta])
            }
            (Layer::Relu, LayerCache::Relu { y }) => {
                let mut dx = dy;
                for (g, &v) in dx.data.iter_mut().zip(&y.data) {
                    if v <= S::zero() {
                        *g = S::zero();
                    }
                }
                (dx, vec![])
            }
            (Layer::MaxPool { size }, LayerCache::MaxPool { argmax, in_len }) => {
                let l_out = in_len / *size;
                debug_assert_eq!(dy.len, l_out);
                let mut dx = Tensor::zeros(dy.batch, in_len, dy.ch);
                for (o, &src) in argmax.iter().enumerate() {
                    dx.data[src] = dx.data[src] + dy.data[o];
                }
                (dx, vec![])
            }
            (Layer::AvgPool { size }, LayerCache::AvgPool { in_len }) => {
                let inv = S::of(1.0 / *size as f64);
                let mut dx = Tensor::zeros(dy.batch, in_len, dy.ch);
                for bi in 0..dy.batch {
                    let out_base = bi * dy.len * dy.ch;
                    let in_base = bi * in_len * dy.ch;
                    for j in 0..dy.len {
                        for c in 0..dy.ch {
                            let g = dy.data[out_base + j * dy.ch + c] * inv;
                            for u in 0..*size {
                                let idx = in_base + (j * *size + u) * dy.ch + c;
                                dx.data[idx] = dx.data[idx] + g;
                            }
                        }
                    }
                }
                (dx, vec![])
            }
            (Layer::Dropout { .. }, LayerCache::Dropout { mask }) => {
                let mut dx = dy;
                for (g, &m) in dx.data.iter_mut().zip(&mask) {
                    *g = *g * m;
                }
                (dx, vec![])
            }
            (Layer::GlobalAvg, LayerCache::GlobalAvg { in_len }) => {
                let inv = S::of(1.0 / in_len as f64);
                let mut dx = Tensor::zeros(dy.batch, in_len, dy.ch);
                for bi in 0..dy.batch {
                    let dyrow = &dy.data[bi * dy.ch..(bi + 1) * dy.ch];
                    let base = bi * in_len * dy.ch;
                    for p in 0..in_len {
                        for (c, &g) in dyrow.iter().enumerate() {
                            dx.data[base + p * dy.ch + c] = g * inv;
                        }
                    }
                }
                (dx, vec![])
            }
            (Layer::Flatten, LayerCache::Flatten { len, ch }) => {
                let dx = Tensor { data: dy.data, batch: dy.batch, len, ch };
                (dx, vec![])
            }
            (Layer::Dense(d), LayerCache::Dense { x }) => {
                let (dx, dw, db) = d.grads(&x, &dy);
                (dx, vec![dw, db])
            }
            (layer, cache) => unreachable!(
                "cache {cache:?} does not belong to layer {:?}",
                std::mem::discriminant(layer)
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(1)
    }

    fn tensor<S: Scalar>(data: Vec<f64>, batch: usize, len: usize, ch: usize) -> Tensor<S> {
        assert_eq!(data.len(), batch * len * ch);
        Tensor { data: data.into_iter().map(S::of).collect(), batch, len, ch }
    }

    #[test]
    fn zero_weight_conv_outputs_zero() {
        let mut c = Conv1d::<f64>::init(2, 3, 3, 1, Padding::Same, &mut rng());
        c.w.fill(0.0);
        c.b.fill(0.0);
        let x = tensor((0..16).map(|i| i as f64).collect(), 1, 8, 2);
        let y = c.run(&x);
        assert_eq!(y.len, 8);
        assert_eq!(y.ch, 3);
        assert!(y.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn centered_identity_kernel_reproduces_the_input() {
        let mut c = Conv1d::<f64>::init(1, 1, 3, 1, Padding::Same, &mut rng());
        c.w = vec![0.0, 1.0, 0.0]; // [k=0][k=1][k=2] over 1×1 channels
        c.b = vec![0.0];
        let x = tensor(vec![1.0, -2.0, 3.0, 0.5], 1, 4, 1);
        let y = c.run(&x);
        assert_eq!(y.data, x.data);
    }

    #[test]
    fn same_padding_puts_the_extra_column_on_the_right() {
        // kernel 4 would be even; use stride to force asymmetric padding:
        // l=5, k=3, s=2 -> out 3, needed 7, pad 2 -> 1 left, 1 right (symmetric);
        // l=4, k=3, s=2 -> out 2, needed 5, pad 1 -> 0 left, 1 right.
        let mut c = Conv1d::<f64>::init(1, 1, 3, 2, Padding::Same, &mut rng());
        c.w = vec![1.0, 1.0, 1.0];
        c.b = vec![0.0];
        let x = tensor(vec![1.0, 1.0, 1.0, 1.0], 1, 4, 1);
        let y = c.run(&x);
        // window 0 covers x[0..3] fully (no left pad); window 1 covers x[2..4] + right pad
        assert_eq!(y.data, vec![3.0, 2.0]);
    }

    #[test]
    fn valid_strided_conv_matches_hand_computation() {
        let mut c = Conv1d::<f64>::init(1, 1, 3, 2, Padding::Valid, &mut rng());
        c.w = vec![1.0, 2.0, 3.0];
        c.b = vec![0.5];
        let x = tensor(vec![1.0, 0.0, -1.0, 2.0, 1.0], 1, 5, 1);
        let y = c.run(&x);
        // windows [1,0,-1] and [-1,2,1]: 1−3+0.5 = −1.5; −1+4+3+0.5 = 6.5
        assert_eq!(y.data, vec![-1.5, 6.5]);
    }

    #[test]
    fn batchnorm_normalizes_batch_statistics() {
        let mut bn = BatchNorm::<f64>::init(2);
        let x = tensor(vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0], 2, 2, 2);
        let (y, x_hat, _) = bn.run_train(x);
        // per channel: mean 0, variance ~1 (up to eps)
        for c in 0..2 {
            let vals: Vec<f64> = y.data.iter().skip(c).step_by(2).copied().collect();
            let mean: f64 = vals.iter().sum::<f64>() / 4.0;
            let var: f64 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-4);
        }
        // gamma 1, beta 0 -> y == x̂
        assert_eq!(y.data, x_hat.data);
        // running stats moved toward the batch stats
        assert!((bn.running_mean[0] - 0.1 * 2.5).abs() < 1e-12);
        assert!((bn.running_var[1] - (0.9 * 1.0 + 0.1 * 125.0)).abs() < 1e-12);
    }

    #[test]
    fn batchnorm_running_stats_converge_to_a_repeated_batch() {
        let mut bn = BatchNorm::<f64>::init(1);
        let data = vec![1.0, 2.0, 3.0, 6.0];
        for _ in 0..200 {
            let x = tensor(data.clone(), 4, 1, 1);
            let _ = bn.run_train(x);
        }
        let mean = 3.0;
        let var = (4.0 + 1.0 + 0.0 + 9.0) / 4.0;
        assert!((bn.running_mean[0] - mean).abs() < 1e-3);
        assert!((bn.running_var[0] - var).abs() < 1e-3);
    }

    #[test]
    fn batchnorm_infer_uses_running_stats() {
        let mut bn = BatchNorm::<f64>::init(1);
        bn.running_mean[0] = 2.0;
        bn.running_var[0] = 4.0;
        bn.gamma[0] = 3.0;
        bn.beta[0] = 1.0;
        let x = tensor(vec![4.0], 1, 1, 1);
        let y = bn.run_infer(x);
        // 3·(4−2)/sqrt(4+eps) + 1 ≈ 4
        assert!((y.data[0] - 4.0).abs() < 1e-4);
    }

    #[test]
    fn max_pool_truncates_and_routes_gradient_to_argmax() {
        let x = tensor::<f64>(vec![1.0, 5.0, 2.0, 2.0, 9.0, 0.0, 7.0], 1, 7, 1);
        let (y, argmax) = max_pool_forward(&x, 3);
        assert_eq!(y.len, 2); // the 7th element is truncated
        assert_eq!(y.data, vec![5.0, 9.0]);
        assert_eq!(argmax, vec![1, 4]);

        let layer = Layer::<f64>::MaxPool { size: 3 };
        let dy = tensor(vec![10.0, 20.0], 1, 2, 1);
        let (dx, grads) = layer.backward(LayerCache::MaxPool { argmax, in_len: 7 }, dy);
        assert!(grads.is_empty());
        assert_eq!(dx.data, vec![0.0, 10.0, 0.0, 0.0, 20.0, 0.0, 0.0]);
        // conservation: routed gradient sums to the incoming gradient
        assert_eq!(dx.data.iter().sum::<f64>(), 30.0);
    }

    #[test]
    fn max_pool_ties_keep_the_earliest_position() {
        let x = tensor::<f64>(vec![3.0, 3.0], 1, 2, 1);
        let (_, argmax) = max_pool_forward(&x, 2);
        assert_eq!(argmax, vec![0]);
    }

    #[test]
    fn avg_pool_forward_and_backward_spread_uniformly() {
        let x = tensor::<f64>(vec![1.0, 3.0, 5.0, 7.0, 100.0], 1, 5, 1);
        let y = avg_pool_forward(&x, 2);
        assert_eq!(y.data, vec![2.0, 6.0]);
        let layer = Layer::<f64>::AvgPool { size: 2 };
        let dy = tensor(vec![4.0, 8.0], 1, 2, 1);
        let (dx, _) = layer.backward(LayerCache::AvgPool { in_len: 5 }, dy);
        assert_eq!(dx.data, vec![2.0, 2.0, 4.0, 4.0, 0.0]);
    }

    #[test]
    fn dropout_is_identity_in_expectation() {
        let mut layer = Layer::<f64>::Dropout { rate: 0.25 };
        let n = 100_000;
        let x_val = 2.0;
        let mut rng = rng();
        let mut acc = 0.0;
        for _ in 0..n {
            let x = tensor(vec![x_val], 1, 1, 1);
            let (y, _) = layer.forward(x, Mode::Train, &mut rng);
            acc += y.data[0];
        }
        let mean = acc / n as f64;
        assert!((mean - x_val).abs() / x_val < 0.01);
        // inference leaves values untouched
        let (y, _) = layer.forward(tensor(vec![x_val], 1, 1, 1), Mode::Infer, &mut rng);
        assert_eq!(y.data[0], x_val);
    }

    #[test]
    fn global_avg_and_flatten_collapse_shapes() {
        let x = tensor::<f64>(vec![1.0, 10.0, 3.0, 20.0], 1, 2, 2);
        let y = global_avg_forward(&x);
        assert_eq!((y.len, y.ch), (1, 2));
        assert_eq!(y.data, vec![2.0, 15.0]);

        let mut flat = Layer::<f64>::Flatten;
        let (y, cache) = flat.forward(tensor(vec![1.0, 10.0, 3.0, 20.0], 1, 2, 2), Mode::Infer, &mut rng());
        assert_eq!((y.len, y.ch), (1, 4));
        assert_eq!(y.data, vec![1.0, 10.0, 3.0, 20.0]); // memory order preserved
        let (dx, _) = flat.backward(cache, y);
        assert_eq!((dx.len, dx.ch), (2, 2));
    }

    #[test]
    fn dense_matches_hand_matrix_product() {
        let mut d = Dense::<f64>::init(2, 3, &mut rng());
        d.w = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // rows = inputs
        d.b = vec![0.1, 0.2, 0.3];
        let x = tensor(vec![2.0, -1.0], 1, 1, 2);
        let y = d.run(&x);
        // y = x·W + b = [2−4, 4−5, 6−6] + b
        for (got, want) in y.data.iter().zip([-1.9, -0.8, 0.3]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }

        let dy = tensor(vec![1.0, 0.0, -1.0], 1, 1, 3);
        let (dx, dw, db) = d.grads(&x, &dy);
        assert_eq!(db, vec![1.0, 0.0, -1.0]);
        assert_eq!(dw, vec![2.0, 0.0, -2.0, -1.0, 0.0, 1.0]);
        // dx = W·dy per input: [1−3, 4−6]
        assert_eq!(dx.data, vec![-2.0, -2.0]);
    }

    #[test]
    fn relu_masks_forward_and_backward() {
        let mut layer = Layer::<f64>::Relu;
        let (y, cache) =
            layer.forward(tensor(vec![-1.0, 0.0, 2.0], 1, 3, 1), Mode::Train, &mut rng());
        assert_eq!(y.data, vec![0.0, 0.0, 2.0]);
        let (dx, _) = layer.backward(cache, tensor(vec![5.0, 5.0, 5.0], 1, 3, 1));
        assert_eq!(dx.data, vec![0.0, 0.0, 5.0]);
    }
}
