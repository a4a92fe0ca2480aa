//! The residual 1D convolutional network, written out by hand.
//!
//! Architecture: per-hour z-score normalization → `n_blocks` residual blocks
//! (each `layers_per_block` × [same-padding conv, ReLU]; the block input is
//! added back at the block end, through a 1×1 convolution when channel
//! counts differ) → global average pooling over time → zero-initialized
//! affine head → 2-class softmax. Loss is mean cross-entropy plus
//! `l2_rate · Σ w²` over all convolution weights (biases and the affine head
//! excluded). Optimized with Adam (β₁ 0.9, β₂ 0.999, ε 1e-8).
//!
//! Convolutions run as im2col + matrix multiply so the inner loops are plain
//! GEMMs; everything else is straightforward index arithmetic. Forward,
//! backward and the update are all deterministic given the seeded
//! initialization, and the analytic gradients are validated against central
//! finite differences in the test suite.

use ndarray::{Array1, Array2, Array3, Axis};

use super::DiscriminatorConfig;
use crate::matrix::HOURS;
use crate::rng::Stream;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// A parameter tensor with its Adam moment estimates.
#[derive(Debug, Clone)]
struct Param2 {
    val: Array2<f64>,
    m1: Array2<f64>,
    m2: Array2<f64>,
}

#[derive(Debug, Clone)]
struct Param1 {
    val: Array1<f64>,
    m1: Array1<f64>,
    m2: Array1<f64>,
}

impl Param2 {
    fn new(val: Array2<f64>) -> Self {
        let m1 = Array2::zeros(val.dim());
        let m2 = Array2::zeros(val.dim());
        Param2 { val, m1, m2 }
    }

    fn adam_step(&mut self, grad: &Array2<f64>, lr: f64, t: u64) {
        adam_update(
            self.val.as_slice_mut().unwrap(),
            self.m1.as_slice_mut().unwrap(),
            self.m2.as_slice_mut().unwrap(),
            grad.as_slice().unwrap(),
            lr,
            t,
        );
    }
}

impl Param1 {
    fn new(val: Array1<f64>) -> Self {
        let m1 = Array1::zeros(val.dim());
        let m2 = Array1::zeros(val.dim());
        Param1 { val, m1, m2 }
    }

    fn adam_step(&mut self, grad: &Array1<f64>, lr: f64, t: u64) {
        adam_update(
            self.val.as_slice_mut().unwrap(),
            self.m1.as_slice_mut().unwrap(),
            self.m2.as_slice_mut().unwrap(),
            grad.as_slice().unwrap(),
            lr,
            t,
        );
    }
}

fn adam_update(val: &mut [f64], m1: &mut [f64], m2: &mut [f64], grad: &[f64], lr: f64, t: u64) {
    let c1 = 1.0 - ADAM_BETA1.powi(t as i32);
    let c2 = 1.0 - ADAM_BETA2.powi(t as i32);
    for i in 0..val.len() {
        let g = grad[i];
        m1[i] = ADAM_BETA1 * m1[i] + (1.0 - ADAM_BETA1) * g;
        m2[i] = ADAM_BETA2 * m2[i] + (1.0 - ADAM_BETA2) * g * g;
        let mh = m1[i] / c1;
        let vh = m2[i] / c2;
        val[i] -= lr * mh / (vh.sqrt() + ADAM_EPS);
    }
}

/// One convolution layer. Weights are stored as a (c_in·k) × c_out matrix;
/// row index c·k + dk holds input channel c, kernel tap dk. This layout is
/// also the serialization layout.
#[derive(Debug, Clone)]
struct ConvLayer {
    c_in: usize,
    c_out: usize,
    k: usize,
    w: Param2,
    b: Param1,
}

impl ConvLayer {
    fn init(c_in: usize, c_out: usize, k: usize, rng: &mut Stream) -> Self {
        // He initialization: std = sqrt(2 / fan_in), zero biases
        let std = (2.0 / (c_in * k) as f64).sqrt();
        let mut w = Array2::zeros((c_in * k, c_out));
        for v in w.iter_mut() {
            *v = rng.normal_scaled(0.0, std);
        }
        ConvLayer {
            c_in,
            c_out,
            k,
            w: Param2::new(w),
            b: Param1::new(Array1::zeros(c_out)),
        }
    }

    /// Forward pass; also returns the im2col matrix for the backward pass.
    fn forward(&self, x: &Array3<f64>) -> (Array2<f64>, Array3<f64>) {
        let (n, t_len, c_in) = x.dim();
        debug_assert_eq!(c_in, self.c_in);
        let m = im2col(x, self.k);
        let mut y_flat = m.dot(&self.w.val);
        for mut row in y_flat.rows_mut() {
            row += &self.b.val;
        }
        let y = y_flat
            .into_shape_with_order((n, t_len, self.c_out))
            .expect("conv output reshape");
        (m, y)
    }

    /// Backward pass: given dL/dY, returns (dW, dB, dL/dX).
    fn backward(
        &self,
        m: &Array2<f64>,
        dy: &Array3<f64>,
    ) -> (Array2<f64>, Array1<f64>, Array3<f64>) {
        let (n, t_len, _) = dy.dim();
        let dy_flat = dy
            .view()
            .into_shape_with_order((n * t_len, self.c_out))
            .expect("conv grad reshape");
        let dw = m.t().dot(&dy_flat);
        let db = dy_flat.sum_axis(Axis(0));
        let dm = dy_flat.dot(&self.w.val.t());
        let dx = col2im(&dm, n, t_len, self.c_in, self.k);
        (dw, db, dx)
    }
}

/// im2col for same-padding 1D convolution over (batch, time, channels).
fn im2col(x: &Array3<f64>, k: usize) -> Array2<f64> {
    let (n, t_len, c_in) = x.dim();
    let pad = k / 2;
    let mut m = Array2::<f64>::zeros((n * t_len, c_in * k));
    let xs = x.as_slice().expect("standard layout input");
    let ms = m.as_slice_mut().unwrap();
    let row_w = c_in * k;
    for s in 0..n {
        for t in 0..t_len {
            let row = (s * t_len + t) * row_w;
            for dk in 0..k {
                let ti = t as isize + dk as isize - pad as isize;
                if ti < 0 || ti >= t_len as isize {
                    continue;
                }
                let xoff = (s * t_len + ti as usize) * c_in;
                for c in 0..c_in {
                    ms[row + c * k + dk] = xs[xoff + c];
                }
            }
        }
    }
    m
}

/// Transpose of im2col: scatter-adds column gradients back onto the input.
fn col2im(dm: &Array2<f64>, n: usize, t_len: usize, c_in: usize, k: usize) -> Array3<f64> {
    let pad = k / 2;
    let mut dx = Array3::<f64>::zeros((n, t_len, c_in));
    let ds = dm.as_slice().expect("standard layout gradient");
    let out = dx.as_slice_mut().unwrap();
    let row_w = c_in * k;
    for s in 0..n {
        for t in 0..t_len {
            let row = (s * t_len + t) * row_w;
            for dk in 0..k {
                let ti = t as isize + dk as isize - pad as isize;
                if ti < 0 || ti >= t_len as isize {
                    continue;
                }
                let xoff = (s * t_len + ti as usize) * c_in;
                for c in 0..c_in {
                    out[xoff + c] += ds[row + c * k + dk];
                }
            }
        }
    }
    dx
}

#[derive(Debug, Clone)]
struct Block {
    convs: Vec<ConvLayer>,
    /// 1×1 projection applied to the block input when channel counts differ.
    shortcut: Option<ConvLayer>,
}

/// Per-block forward cache: each conv's im2col matrix and post-ReLU output
/// (the ReLU mask), and the shortcut's im2col matrix.
struct BlockCache {
    conv_cols: Vec<Array2<f64>>,
    conv_outs: Vec<Array3<f64>>,
    shortcut_col: Option<Array2<f64>>,
}

pub(crate) struct Net {
    pub(crate) cfg: DiscriminatorConfig,
    pub(crate) norm_mean: Vec<f64>,
    pub(crate) norm_std: Vec<f64>,
    blocks: Vec<Block>,
    head_w: Param2,
    head_b: Param1,
    step: u64,
}

impl Net {
    /// Builds a freshly initialized network. Initialization order (one
    /// seeded stream): for each block, each conv layer's weights in storage
    /// order, then its shortcut if present; the affine head starts at zero
    /// so an untrained network outputs probability 0.5 exactly.
    pub(crate) fn init(
        cfg: &DiscriminatorConfig,
        norm_mean: Vec<f64>,
        norm_std: Vec<f64>,
    ) -> Net {
        let mut rng = Stream::derived(cfg.rng_seed, &[0]);
        let f = cfg.filters;
        let mut blocks = Vec::with_capacity(cfg.n_blocks);
        let mut c_in = 1;
        for _ in 0..cfg.n_blocks {
            let mut convs = Vec::with_capacity(cfg.layers_per_block);
            let mut c = c_in;
            for _ in 0..cfg.layers_per_block {
                convs.push(ConvLayer::init(c, f, cfg.kernel_size, &mut rng));
                c = f;
            }
            let shortcut =
                (c_in != f).then(|| ConvLayer::init(c_in, f, 1, &mut rng));
            blocks.push(Block { convs, shortcut });
            c_in = f;
        }
        Net {
            cfg: cfg.clone(),
            norm_mean,
            norm_std,
            blocks,
            head_w: Param2::new(Array2::zeros((f, 2))),
            head_b: Param1::new(Array1::zeros(2)),
            step: 0,
        }
    }

    /// Applies the stored per-hour normalization and shapes the batch as
    /// (batch, time, 1 channel).
    fn normalize(&self, x: &Array2<f64>) -> Array3<f64> {
        let (n, t_len) = x.dim();
        debug_assert_eq!(t_len, HOURS);
        let mut out = Array3::<f64>::zeros((n, t_len, 1));
        for s in 0..n {
            for t in 0..t_len {
                out[[s, t, 0]] = (x[[s, t]] - self.norm_mean[t]) / self.norm_std[t];
            }
        }
        out
    }

    fn forward(
        &self,
        x0: Array3<f64>,
        keep_caches: bool,
    ) -> (Vec<BlockCache>, Array2<f64>, Array2<f64>) {
        let mut caches = Vec::with_capacity(self.blocks.len());
        let mut cur = x0;
        for block in &self.blocks {
            let input = cur;
            let mut conv_cols = Vec::with_capacity(block.convs.len());
            let mut conv_outs = Vec::with_capacity(block.convs.len());
            let mut stack = input.clone();
            for conv in &block.convs {
                let (m, mut y) = conv.forward(&stack);
                y.mapv_inplace(|v| v.max(0.0)); // ReLU
                if keep_caches {
                    conv_cols.push(m);
                    conv_outs.push(y.clone());
                }
                stack = y;
            }
            let mut shortcut_col = None;
            let residual = match &block.shortcut {
                Some(sc) => {
                    let (m, y) = sc.forward(&input);
                    if keep_caches {
                        shortcut_col = Some(m);
                    }
                    y
                }
                None => input.clone(),
            };
            cur = stack + &residual;
            if keep_caches {
                caches.push(BlockCache { conv_cols, conv_outs, shortcut_col });
            }
        }
        // global average pooling over time, then the affine head
        let pooled = cur.mean_axis(Axis(1)).expect("non-empty time axis");
        let mut logits = pooled.dot(&self.head_w.val);
        for mut row in logits.rows_mut() {
            row += &self.head_b.val;
        }
        (caches, pooled, logits)
    }

    /// Probabilities of class 1 ("real") for each row.
    pub(crate) fn predict_real(&self, x: &Array2<f64>) -> Vec<f64> {
        let (_, _, logits) = self.forward(self.normalize(x), false);
        softmax_rows(&logits)
            .rows()
            .into_iter()
            .map(|r| r[1])
            .collect()
    }

    /// One optimization step over a mini-batch. Returns the batch loss.
    pub(crate) fn train_batch(&mut self, x: &Array2<f64>, labels: &[bool]) -> f64 {
        let n = x.nrows();
        debug_assert_eq!(n, labels.len());
        let (loss, grads) = self.grads(x, labels);
        self.step += 1;
        let t = self.step;
        let lr = self.cfg.learning_rate;
        let mut gi = 0;
        for b in 0..self.blocks.len() {
            for l in 0..self.blocks[b].convs.len() {
                let (dw, db) = &grads.convs[gi];
                self.blocks[b].convs[l].w.adam_step(dw, lr, t);
                self.blocks[b].convs[l].b.adam_step(db, lr, t);
                gi += 1;
            }
            if self.blocks[b].shortcut.is_some() {
                let (dw, db) = &grads.convs[gi];
                let sc = self.blocks[b].shortcut.as_mut().unwrap();
                sc.w.adam_step(dw, lr, t);
                sc.b.adam_step(db, lr, t);
                gi += 1;
            }
        }
        self.head_w.adam_step(&grads.head_w, lr, t);
        self.head_b.adam_step(&grads.head_b, lr, t);
        loss
    }

    /// Loss without touching any state (used by the finite-difference
    /// gradient check).
    pub(crate) fn loss_on(&self, x: &Array2<f64>, labels: &[bool]) -> f64 {
        let (_, _, logits) = self.forward(self.normalize(x), false);
        self.loss_from_logits(&logits, labels)
    }

    /// Smallest |pre-activation| over every rectifier in the network for
    /// this batch — the distance from the nearest point where the loss stops
    /// being differentiable in the weights. Only the in-block conv layers
    /// pass through a rectifier; the shortcut, pooling and head are linear.
    pub(crate) fn min_abs_preactivation(&self, x: &Array2<f64>) -> f64 {
        let mut min_abs = f64::INFINITY;
        let mut cur = self.normalize(x);
        for block in &self.blocks {
            let input = cur;
            let mut stack = input.clone();
            for conv in &block.convs {
                let (_, mut y) = conv.forward(&stack);
                for &z in y.iter() {
                    min_abs = min_abs.min(z.abs());
                }
                y.mapv_inplace(|v| v.max(0.0));
                stack = y;
            }
            let residual = match &block.shortcut {
                Some(sc) => sc.forward(&input).1,
                None => input,
            };
            cur = stack + &residual;
        }
        min_abs
    }

    fn loss_from_logits(&self, logits: &Array2<f64>, labels: &[bool]) -> f64 {
        let probs = softmax_rows(logits);
        let n = labels.len();
        let mut ce = 0.0;
        for (i, &is_real) in labels.iter().enumerate() {
            let p = probs[[i, usize::from(is_real)]].max(1e-300);
            ce -= p.ln();
        }
        ce / n as f64 + self.cfg.l2_rate * self.conv_weight_sq_sum()
    }

    fn conv_weight_sq_sum(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.convs.iter().chain(b.shortcut.iter()))
            .map(|c| c.w.val.iter().map(|w| w * w).sum::<f64>())
            .sum()
    }

    /// Full backward pass. Gradients for convs are listed in the same order
    /// as initialization (per block: convs, then shortcut).
    pub(crate) fn grads(&self, x: &Array2<f64>, labels: &[bool]) -> (f64, Grads) {
        let n = x.nrows();
        let x0 = self.normalize(x);
        let (caches, pooled, logits) = self.forward(x0, true);
        let loss = self.loss_from_logits(&logits, labels);

        // dL/dlogits for softmax + cross-entropy, averaged over the batch
        let probs = softmax_rows(&logits);
        let mut dlogits = probs;
        for (i, &is_real) in labels.iter().enumerate() {
            dlogits[[i, usize::from(is_real)]] -= 1.0;
        }
        dlogits /= n as f64;

        let head_dw = pooled.t().dot(&dlogits);
        let head_db = dlogits.sum_axis(Axis(0));
        let dpooled = dlogits.dot(&self.head_w.val.t());

        // un-pool: every time step shares the averaged gradient
        let (bn, bc) = dpooled.dim();
        let bt = HOURS;
        let mut dcur = Array3::<f64>::zeros((bn, bt, bc));
        for s in 0..bn {
            for t in 0..bt {
                for c in 0..bc {
                    dcur[[s, t, c]] = dpooled[[s, c]] / bt as f64;
                }
            }
        }

        // walk the blocks backwards; collect (dW, dB) per conv in forward
        // order at the end
        let mut conv_grads_rev: Vec<(Array2<f64>, Array1<f64>)> = Vec::new();
        for (block, cache) in self.blocks.iter().zip(&caches).rev() {
            // shortcut path
            let mut dinput = match (&block.shortcut, &cache.shortcut_col) {
                (Some(sc), Some(m)) => {
                    let (dw, db, dx) = sc.backward(m, &dcur);
                    conv_grads_rev.push((dw, db));
                    dx
                }
                _ => dcur.clone(),
            };
            // stacked path, last conv first
            let mut d = dcur;
            for (li, conv) in block.convs.iter().enumerate().rev() {
                // ReLU mask from the cached post-activation output
                let mut dpre = d;
                dpre.zip_mut_with(&cache.conv_outs[li], |g, &o| {
                    if o <= 0.0 {
                        *g = 0.0;
                    }
                });
                let (dw, db, dx) = conv.backward(&cache.conv_cols[li], &dpre);
                conv_grads_rev.push((dw, db));
                d = dx;
            }
            dinput += &d;
            dcur = dinput;
        }
        conv_grads_rev.reverse();

        // now conv_grads_rev is ordered: per block from the FIRST block —
        // but within each block the push order above was shortcut first,
        // then convs from last to first; reversing the whole list yields
        // (conv_0 … conv_{L−1}, shortcut) per block, matching init order.

        // add the L2 term: d(l2·Σw²)/dw = 2·l2·w for every conv weight
        if self.cfg.l2_rate != 0.0 {
            let mut gi = 0;
            for block in &self.blocks {
                for conv in &block.convs {
                    conv_grads_rev[gi].0.scaled_add(2.0 * self.cfg.l2_rate, &conv.w.val);
                    gi += 1;
                }
                if let Some(sc) = &block.shortcut {
                    conv_grads_rev[gi].0.scaled_add(2.0 * self.cfg.l2_rate, &sc.w.val);
                    gi += 1;
                }
            }
        }

        (loss, Grads { convs: conv_grads_rev, head_w: head_dw, head_b: head_db })
    }

    /// All weights (no optimizer state) in the documented serialization
    /// order: per block, each conv's weight matrix row-major then its bias,
    /// then the shortcut's; finally the head weights row-major and bias.
    pub(crate) fn weights_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for block in &self.blocks {
            for conv in block.convs.iter().chain(block.shortcut.iter()) {
                out.extend(conv.w.val.iter());
                out.extend(conv.b.val.iter());
            }
        }
        out.extend(self.head_w.val.iter());
        out.extend(self.head_b.val.iter());
        out
    }

    pub(crate) fn set_weights_flat(&mut self, flat: &[f64]) -> bool {
        let mut it = flat.iter();
        for block in &mut self.blocks {
            for conv in block.convs.iter_mut().chain(block.shortcut.iter_mut()) {
                for w in conv.w.val.iter_mut() {
                    match it.next() {
                        Some(v) => *w = *v,
                        None => return false,
                    }
                }
                for b in conv.b.val.iter_mut() {
                    match it.next() {
                        Some(v) => *b = *v,
                        None => return false,
                    }
                }
            }
        }
        for w in self.head_w.val.iter_mut() {
            match it.next() {
                Some(v) => *w = *v,
                None => return false,
            }
        }
        for b in self.head_b.val.iter_mut() {
            match it.next() {
                Some(v) => *b = *v,
                None => return false,
            }
        }
        it.next().is_none()
    }

    /// Gradients in the same flat order as [`Net::weights_flat`].
    pub(crate) fn grads_flat(&self, x: &Array2<f64>, labels: &[bool]) -> (f64, Vec<f64>) {
        let (loss, grads) = self.grads(x, labels);
        let mut out = Vec::new();
        for (dw, db) in &grads.convs {
            out.extend(dw.iter());
            out.extend(db.iter());
        }
        out.extend(grads.head_w.iter());
        out.extend(grads.head_b.iter());
        (loss, out)
    }
}

pub(crate) struct Grads {
    /// (dW, dB) per conv layer, in initialization order.
    convs: Vec<(Array2<f64>, Array1<f64>)>,
    head_w: Array2<f64>,
    head_b: Array1<f64>,
}

fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn tiny_cfg() -> DiscriminatorConfig {
        DiscriminatorConfig {
            n_blocks: 2,
            layers_per_block: 3,
            filters: 3,
            kernel_size: 3,
            epochs: 1,
            learning_rate: 1e-3,
            l2_rate: 1e-3,
            batch_size: 4,
            rng_seed: 12,
        }
    }

    fn unit_norm() -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; HOURS], vec![1.0; HOURS])
    }

    #[test]
    fn im2col_matches_direct_convolution() {
        // random-ish input, compare GEMM conv against a naive loop
        let mut rng = Stream::new(5);
        let mut x = Array3::<f64>::zeros((2, 7, 3));
        for v in x.iter_mut() {
            *v = rng.normal();
        }
        let conv = ConvLayer::init(3, 4, 5, &mut rng);
        let (_, y) = conv.forward(&x);

        let pad = 2isize;
        for s in 0..2 {
            for t in 0..7isize {
                for o in 0..4 {
                    let mut want = conv.b.val[o];
                    for dk in 0..5isize {
                        let ti = t + dk - pad;
                        if ti < 0 || ti >= 7 {
                            continue;
                        }
                        for c in 0..3 {
                            want += x[[s, ti as usize, c]] * conv.w.val[[c * 5 + dk as usize, o]];
                        }
                    }
                    assert_abs_diff_eq!(y[[s, t as usize, o]], want, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn col2im_is_the_adjoint_of_im2col() {
        // <im2col(x), m> == <x, col2im(m)> for random x, m
        let mut rng = Stream::new(6);
        let mut x = Array3::<f64>::zeros((2, 6, 2));
        for v in x.iter_mut() {
            *v = rng.normal();
        }
        let cols = im2col(&x, 3);
        let mut m = Array2::<f64>::zeros(cols.dim());
        for v in m.iter_mut() {
            *v = rng.normal();
        }
        let lhs: f64 = (&cols * &m).sum();
        let back = col2im(&m, 2, 6, 2, 3);
        let rhs: f64 = (&x * &back).sum();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
    }

    #[test]
    fn untrained_network_outputs_exactly_one_half() {
        let (mean, std) = unit_norm();
        let net = Net::init(&tiny_cfg(), mean, std);
        let x = Array2::from_shape_fn((3, HOURS), |(i, j)| (i * j) as f64 * 0.1 - 1.0);
        for p in net.predict_real(&x) {
            assert_eq!(p, 0.5);
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let logits = array![[2.0, -1.0], [0.0, 0.0], [500.0, 400.0]];
        let p = softmax_rows(&logits);
        for row in p.rows() {
            assert_abs_diff_eq!(row[0] + row[1], 1.0, epsilon = 1e-12);
            assert!(row[0] >= 0.0 && row[1] >= 0.0);
        }
    }

    #[test]
    fn analytic_gradients_match_central_differences() {
        // every single weight, two-sample batch, step 1e-4, rel err < 1e-3
        let cfg = tiny_cfg();
        let (mean, std) = unit_norm();
        let mut net = Net::init(&cfg, mean, std);
        // nudge the head off zero so its gradients are generic
        let mut w = net.weights_flat();
        let mut rng = Stream::new(77);
        let nw = w.len();
        for v in w[nw - 8..].iter_mut() {
            *v = rng.normal_scaled(0.0, 0.3);
        }
        assert!(net.set_weights_flat(&w));

        let mut x = Array2::<f64>::zeros((2, HOURS));
        for v in x.iter_mut() {
            *v = rng.normal();
        }
        let labels = [true, false];

        let (_, analytic) = net.grads_flat(&x, &labels);
        assert_eq!(analytic.len(), w.len());

        let h = 1e-4;
        let mut worst: f64 = 0.0;
        for i in 0..w.len() {
            let orig = w[i];
            w[i] = orig + h;
            net.set_weights_flat(&w);
            let up = net.loss_on(&x, &labels);
            w[i] = orig - h;
            net.set_weights_flat(&w);
            let down = net.loss_on(&x, &labels);
            w[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
            let rel = (analytic[i] - numeric).abs() / denom;
            worst = worst.max(rel);
            assert!(
                rel < 1e-3,
                "weight {i}: analytic {} vs numeric {} (rel {rel:.2e})",
                analytic[i],
                numeric
            );
        }
        net.set_weights_flat(&w);
        assert!(worst < 1e-3, "worst relative error {worst:.2e}");
    }

    #[test]
    fn adam_trace_matches_reference() {
        // frozen from an independent implementation of the update rule
        let mut p = Param1::new(Array1::from(vec![1.0]));
        let grads = [0.5, -0.25, 0.1];
        let want = [0.900000002, 0.8733662987078463, 0.8418419430257161];
        for (t, (&g, &w)) in grads.iter().zip(&want).enumerate() {
            p.adam_step(&Array1::from(vec![g]), 0.1, (t + 1) as u64);
            assert_abs_diff_eq!(p.val[0], w, epsilon = 1e-12);
        }
    }

    #[test]
    fn weights_flat_round_trips() {
        let (mean, std) = unit_norm();
        let mut net = Net::init(&tiny_cfg(), mean, std);
        let w = net.weights_flat();
        assert!(net.set_weights_flat(&w));
        assert_eq!(net.weights_flat(), w);
        // wrong length is rejected
        assert!(!net.set_weights_flat(&w[..w.len() - 1]));
        assert!(!net.set_weights_flat(&[w.clone(), vec![0.0]].concat()));
    }

    #[test]
    fn training_reduces_loss_on_separable_data() {
        let cfg = DiscriminatorConfig { l2_rate: 0.0, ..tiny_cfg() };
        let (mean, std) = unit_norm();
        let mut net = Net::init(&cfg, mean, std);
        let mut x = Array2::<f64>::zeros((8, HOURS));
        let mut labels = [false; 8];
        for i in 0..8 {
            let real = i % 2 == 0;
            labels[i] = real;
            for t in 0..HOURS {
                x[[i, t]] = if real { 1.0 } else { -1.0 };
            }
        }
        let first = net.loss_on(&x, &labels);
        for _ in 0..300 {
            net.train_batch(&x, &labels);
        }
        let last = net.loss_on(&x, &labels);
        assert!(last < first * 0.1, "loss {first} → {last}");
    }
}
