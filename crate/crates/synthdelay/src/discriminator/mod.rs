//! Binary classifier that tells real delay vectors from synthetic ones.
//!
//! The classifier is a small residual convolutional network over the 24
//! hourly values (see [`net`] for the architecture). It serves two roles:
//! inside the refinement loop as the critic that flags unconvincing
//! synthetic days, and as the measuring instrument behind
//! [`discriminative_score`] — where an accuracy near 0.5 on held-out data
//! means the synthetic sample is statistically indistinguishable from the
//! real one.
//!
//! Everything here is deterministic for a fixed `(data, config)` pair:
//! weight initialization, epoch shuffles and train/test splits all come from
//! streams derived from the config seed.

mod net;

use std::fs;
use std::io::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::HOURS;
use crate::rng::{derive_seed, Stream};
use crate::stats;

use net::Net;

/// Training hyperparameters. The defaults are the evaluation settings;
/// [`DiscriminatorConfig::refinement`] gives the cheaper profile used inside
/// the refinement loop.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DiscriminatorConfig {
    /// Residual blocks in the network.
    #[serde(default = "default_n_blocks")]
    pub n_blocks: usize,
    /// Convolution layers per block.
    #[serde(default = "default_layers_per_block")]
    pub layers_per_block: usize,
    /// Channels per convolution.
    #[serde(default = "default_filters")]
    pub filters: usize,
    /// Convolution kernel width; must be odd so same-padding is symmetric.
    #[serde(default = "default_kernel_size")]
    pub kernel_size: usize,
    /// Passes over the training set.
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// Coefficient of the squared-weight penalty on convolution weights.
    #[serde(default)]
    pub l2_rate: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_n_blocks() -> usize {
    2
}
fn default_layers_per_block() -> usize {
    3
}
fn default_filters() -> usize {
    32
}
fn default_kernel_size() -> usize {
    5
}
fn default_epochs() -> usize {
    50
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_batch_size() -> usize {
    32
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            n_blocks: default_n_blocks(),
            layers_per_block: default_layers_per_block(),
            filters: default_filters(),
            kernel_size: default_kernel_size(),
            epochs: default_epochs(),
            learning_rate: default_learning_rate(),
            l2_rate: 0.0,
            batch_size: default_batch_size(),
            rng_seed: 0,
        }
    }
}

impl DiscriminatorConfig {
    /// Settings for fidelity scoring: 50 training epochs.
    pub fn evaluation(rng_seed: u64) -> Self {
        DiscriminatorConfig { rng_seed, ..Default::default() }
    }

    /// Settings for the refinement critic: 20 training epochs.
    pub fn refinement(rng_seed: u64) -> Self {
        DiscriminatorConfig { epochs: 20, rng_seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_blocks == 0 {
            return Err(Error::Config("n_blocks must be at least 1".into()));
        }
        if self.layers_per_block == 0 {
            return Err(Error::Config("layers_per_block must be at least 1".into()));
        }
        if self.filters == 0 {
            return Err(Error::Config("filters must be at least 1".into()));
        }
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return Err(Error::Config(format!(
                "kernel_size must be odd (got {})",
                self.kernel_size
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive (got {})",
                self.learning_rate
            )));
        }
        if !(self.l2_rate.is_finite() && self.l2_rate >= 0.0) {
            return Err(Error::Config(format!(
                "l2_rate must be non-negative (got {})",
                self.l2_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// A training or test set: one row per day, 24 columns, plus a label per row
/// (`true` = real, `false` = synthetic).
#[derive(Debug, Clone)]
pub struct LabeledSet {
    pub vectors: Array2<f64>,
    pub labels: Vec<bool>,
}

impl LabeledSet {
    pub fn new(vectors: Array2<f64>, labels: Vec<bool>) -> Result<Self> {
        if vectors.nrows() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} vectors but {} labels",
                vectors.nrows(),
                labels.len()
            )));
        }
        if vectors.ncols() != HOURS {
            return Err(Error::InvalidArgument(format!(
                "vectors must have {HOURS} columns (got {})",
                vectors.ncols()
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "vectors contain non-finite values".into(),
            ));
        }
        Ok(LabeledSet { vectors, labels })
    }

    /// Stacks a synthetic block (labeled `false`) on top of a real block
    /// (labeled `true`).
    pub fn from_classes(synthetic: ArrayView2<f64>, real: ArrayView2<f64>) -> Result<Self> {
        if synthetic.ncols() != HOURS || real.ncols() != HOURS {
            return Err(Error::InvalidArgument(format!(
                "vectors must have {HOURS} columns"
            )));
        }
        let n = synthetic.nrows() + real.nrows();
        let mut vectors = Array2::zeros((n, HOURS));
        let mut labels = Vec::with_capacity(n);
        for (i, row) in synthetic.rows().into_iter().enumerate() {
            vectors.row_mut(i).assign(&row);
            labels.push(false);
        }
        for (i, row) in real.rows().into_iter().enumerate() {
            vectors.row_mut(synthetic.nrows() + i).assign(&row);
            labels.push(true);
        }
        LabeledSet::new(vectors, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// A trained classifier, ready to score new vectors or be serialized.
pub struct DiscriminatorModel {
    net: Net,
}

impl DiscriminatorModel {
    pub fn config(&self) -> &DiscriminatorConfig {
        &self.net.cfg
    }

    /// Probability that each row is real. Rows are scored independently, so
    /// shape is the only requirement on the input.
    pub fn predict(&self, vectors: ArrayView2<f64>) -> Result<Vec<f64>> {
        if vectors.ncols() != HOURS {
            return Err(Error::InvalidArgument(format!(
                "vectors must have {HOURS} columns (got {})",
                vectors.ncols()
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "vectors contain non-finite values".into(),
            ));
        }
        Ok(self.net.predict_real(&vectors.to_owned()))
    }

    /// Fraction of rows whose predicted class matches the label. A predicted
    /// probability of exactly 0.5 commits to neither class and counts as a
    /// misclassification.
    pub fn accuracy(&self, data: &LabeledSet) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("empty evaluation set".into()));
        }
        let probs = self.predict(data.vectors.view())?;
        let correct = probs
            .iter()
            .zip(&data.labels)
            .filter(|(&p, &real)| if real { p > 0.5 } else { p < 0.5 })
            .count();
        Ok(correct as f64 / data.len() as f64)
    }

    /// Writes the model as a one-line JSON header (config, normalization,
    /// weight count) followed by the raw little-endian weight array.
    pub fn save(&self, path: &Path) -> Result<()> {
        let weights = self.net.weights_flat();
        let header = ModelHeader {
            config: self.net.cfg.clone(),
            norm_mean: self.net.norm_mean.clone(),
            norm_std: self.net.norm_std.clone(),
            weight_count: weights.len(),
        };
        let mut buf = serde_json::to_vec(&header)
            .map_err(|e| Error::format(path, format!("encoding model header: {e}")))?;
        buf.push(b'\n');
        for w in &weights {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        let tmp = path.with_extension("model.tmp");
        fs::File::create(&tmp)
            .and_then(|mut f| f.write_all(&buf).and_then(|_| f.sync_all()))
            .map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format(path, "missing header line"))?;
        let header: ModelHeader = serde_json::from_slice(&bytes[..nl])
            .map_err(|e| Error::format(path, format!("bad model header: {e}")))?;
        header.config.validate()?;
        if header.norm_mean.len() != HOURS || header.norm_std.len() != HOURS {
            return Err(Error::format(path, "normalization stats must cover 24 hours"));
        }
        let body = &bytes[nl + 1..];
        if body.len() != header.weight_count * 8 {
            return Err(Error::format(
                path,
                format!(
                    "expected {} weight bytes, found {}",
                    header.weight_count * 8,
                    body.len()
                ),
            ));
        }
        let weights: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut net = Net::init(&header.config, header.norm_mean, header.norm_std);
        if !net.set_weights_flat(&weights) {
            return Err(Error::format(
                path,
                "weight count does not match the configured architecture",
            ));
        }
        Ok(DiscriminatorModel { net })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    config: DiscriminatorConfig,
    norm_mean: Vec<f64>,
    norm_std: Vec<f64>,
    weight_count: usize,
}

/// Trains a fresh classifier on the labeled set.
///
/// Per-hour normalization statistics (mean and population standard
/// deviation) are computed from this training set and stored in the model;
/// hours with a standard deviation below 1e-12 fall back to 1.0 so constant
/// columns pass through unscaled. Each epoch visits the data once in a
/// seeded shuffled order, stepping Adam after every mini-batch.
pub fn train(data: &LabeledSet, cfg: &DiscriminatorConfig) -> Result<DiscriminatorModel> {
    cfg.validate()?;
    if data.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "training needs at least 2 vectors (got {})",
            data.len()
        )));
    }
    let n_real = data.labels.iter().filter(|&&l| l).count();
    if n_real == 0 || n_real == data.len() {
        return Err(Error::InvalidArgument(
            "training set must contain both real and synthetic vectors".into(),
        ));
    }

    let n = data.len();
    let mut norm_mean = Vec::with_capacity(HOURS);
    let mut norm_std = Vec::with_capacity(HOURS);
    for col in data.vectors.axis_iter(Axis(1)) {
        let v: Vec<f64> = col.iter().copied().collect();
        norm_mean.push(stats::mean(&v));
        let sd = stats::std_dev(&v);
        norm_std.push(if sd < 1e-12 { 1.0 } else { sd });
    }

    let mut net = Net::init(cfg, norm_mean, norm_std);
    let mut shuffle_rng = Stream::derived(cfg.rng_seed, &[1]);
    let mut order: Vec<usize> = (0..n).collect();
    let mut batch = Array2::<f64>::zeros((cfg.batch_size, HOURS));
    let mut batch_labels = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch_size) {
            batch_labels.clear();
            for (bi, &idx) in chunk.iter().enumerate() {
                batch.row_mut(bi).assign(&data.vectors.row(idx));
                batch_labels.push(data.labels[idx]);
            }
            if chunk.len() == cfg.batch_size {
                net.train_batch(&batch, &batch_labels);
            } else {
                let partial = batch.slice(ndarray::s![..chunk.len(), ..]).to_owned();
                net.train_batch(&partial, &batch_labels);
            }
        }
    }
    Ok(DiscriminatorModel { net })
}

/// Outcome of [`gradient_check`]: the worst relative error over the weights
/// the central-difference reference could certify, plus how many it could
/// not.
#[derive(Debug, Clone, Copy)]
pub struct GradientCheck {
    /// Worst |analytic − numeric| / max(|analytic|, |numeric|, 1e-8) over
    /// checked weights.
    pub worst_rel_err: f64,
    /// Weights where central differences were a valid reference.
    pub checked: usize,
    /// Weights skipped because the loss is not locally smooth there.
    pub skipped: usize,
}

/// Compare analytic gradients against central differences of the training
/// loss, returning the worst relative error over every checkable weight.
///
/// Central differences are only a valid reference where the loss is locally
/// smooth, and with rectifiers in the network that's a real constraint, not
/// a formality: wherever a pre-activation sits within probing distance of
/// zero, the difference quotient straddles the kink and measures a two-sided
/// slope mixture that no subgradient convention claims to match. The freshly
/// initialized point is the worst case — the zero head makes every
/// convolution gradient vanish identically, and zero biases pin each dead
/// receptive window's pre-activation exactly onto its kink.
///
/// The comparison therefore runs at a vetted generic point: a fresh network
/// is initialized from `cfg` (normalization statistics taken from `data`, as
/// in training), every parameter is nudged by seeded Gaussian noise, and the
/// draw is rejected until no rectifier pre-activation lies within 50×`step`
/// of zero — far beyond the reach of any ±`step` probe. Each weight is then
/// probed at `step` and `step/2`; the residual two-scale filter skips a
/// weight if the two estimates disagree (they agree to O(step²) on a smooth
/// loss), which keeps the check honest even if a kink slips inside the
/// margin. The relative error per weight is |analytic − numeric| over the
/// larger magnitude, floored at 1e-8. A genuinely wrong analytic gradient
/// stays caught — it disagrees with a self-consistent numeric estimate. For
/// z-scored inputs a `step` of 1e-5 works well: f64 still resolves the
/// quotient to ~1e-9, and the kink margin stays small enough to find a clear
/// evaluation point quickly.
///
/// Cost grows with the weight count times the data size — use a small
/// configuration, not the production one.
pub fn gradient_check(
    data: &LabeledSet,
    cfg: &DiscriminatorConfig,
    step: f64,
) -> Result<GradientCheck> {
    cfg.validate()?;
    if !step.is_finite() || step <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "gradient_check: step must be positive and finite (got {step})"
        )));
    }
    if data.is_empty() {
        return Err(Error::InvalidArgument("gradient_check: empty data".into()));
    }

    let mut norm_mean = Vec::with_capacity(HOURS);
    let mut norm_std = Vec::with_capacity(HOURS);
    for col in data.vectors.axis_iter(Axis(1)) {
        let v: Vec<f64> = col.iter().copied().collect();
        norm_mean.push(stats::mean(&v));
        let sd = stats::std_dev(&v);
        norm_std.push(if sd < 1e-12 { 1.0 } else { sd });
    }
    let mut net = Net::init(cfg, norm_mean, norm_std);
    let base = net.weights_flat();
    let margin = 50.0 * step;
    let mut w = base.clone();
    let mut found = false;
    for attempt in 0..1024u64 {
        let mut noise = Stream::derived(cfg.rng_seed, &[9, attempt]);
        for (v, &b) in w.iter_mut().zip(&base) {
            *v = b + 0.3 * noise.normal();
        }
        net.set_weights_flat(&w);
        if net.min_abs_preactivation(&data.vectors) > margin {
            found = true;
            break;
        }
    }
    if !found {
        return Err(Error::InvalidArgument(
            "gradient_check: no evaluation point clear of rectifier kinks; \
             reduce `step` or use a smaller configuration"
                .into(),
        ));
    }

    let (_, analytic) = net.grads_flat(&data.vectors, &data.labels);
    let mut worst = 0.0_f64;
    let mut checked = 0usize;
    let mut skipped = 0usize;
    for i in 0..w.len() {
        let orig = w[i];
        let mut central = |h: f64| {
            w[i] = orig + h;
            net.set_weights_flat(&w);
            let up = net.loss_on(&data.vectors, &data.labels);
            w[i] = orig - h;
            net.set_weights_flat(&w);
            let down = net.loss_on(&data.vectors, &data.labels);
            (up - down) / (2.0 * h)
        };
        let coarse = central(step);
        let fine = central(step / 2.0);
        w[i] = orig;
        if (coarse - fine).abs() / coarse.abs().max(fine.abs()).max(1e-8) > 0.25 {
            skipped += 1;
            continue;
        }
        checked += 1;
        let denom = analytic[i].abs().max(fine.abs()).max(1e-8);
        worst = worst.max((analytic[i] - fine).abs() / denom);
    }
    net.set_weights_flat(&w);
    Ok(GradientCheck { worst_rel_err: worst, checked, skipped })
}

/// The held-out accuracy distribution over repeated train/test splits.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreDistribution {
    /// One pooled held-out accuracy per repeat, in repeat order.
    pub scores: Vec<f64>,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl ScoreDistribution {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        assert!(!scores.is_empty(), "at least one repeat required");
        let median = stats::median(&scores);
        let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        ScoreDistribution { scores, median, min, max }
    }
}

/// Measures how distinguishable `synthetic` is from `real`.
///
/// Each repeat shuffles both classes, trains a fresh classifier on half of
/// each (⌊n/2⌋ rows per class) and reports pooled accuracy on the held-out
/// rest. Scores near 0.5 mean the classifier cannot tell the classes apart.
/// Repeats use seeds derived from `cfg.rng_seed` and run in parallel; the
/// result does not depend on thread scheduling.
pub fn discriminative_score(
    real: ArrayView2<f64>,
    synthetic: ArrayView2<f64>,
    cfg: &DiscriminatorConfig,
    n_repeats: usize,
) -> Result<ScoreDistribution> {
    cfg.validate()?;
    if n_repeats == 0 {
        return Err(Error::InvalidArgument("n_repeats must be at least 1".into()));
    }
    for (name, m) in [("real", &real), ("synthetic", &synthetic)] {
        if m.ncols() != HOURS {
            return Err(Error::InvalidArgument(format!(
                "{name} vectors must have {HOURS} columns (got {})",
                m.ncols()
            )));
        }
        if m.nrows() < 2 {
            return Err(Error::InvalidArgument(format!(
                "{name} set needs at least 2 rows to split (got {})",
                m.nrows()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "{name} vectors contain non-finite values"
            )));
        }
    }

    let scores: Result<Vec<f64>> = (0..n_repeats)
        .into_par_iter()
        .map(|r| {
            let mut split_rng = Stream::derived(cfg.rng_seed, &[10, r as u64]);
            let (real_train, real_test, syn_train, syn_test) =
                split_classes(&real, &synthetic, &mut split_rng);
            let train_set = LabeledSet::from_classes(syn_train.view(), real_train.view())?;
            let test_set = LabeledSet::from_classes(syn_test.view(), real_test.view())?;
            let repeat_cfg = DiscriminatorConfig {
                rng_seed: derive_seed(cfg.rng_seed, &[11, r as u64]),
                ..cfg.clone()
            };
            let model = train(&train_set, &repeat_cfg)?;
            model.accuracy(&test_set)
        })
        .collect();
    Ok(ScoreDistribution::from_scores(scores?))
}

/// Shuffles row indices and splits them ⌊n/2⌋ train / rest test.
fn split_rows(m: &ArrayView2<f64>, rng: &mut Stream) -> (Array2<f64>, Array2<f64>) {
    let n = m.nrows();
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    let n_train = n / 2;
    let take = |ids: &[usize]| {
        let mut out = Array2::zeros((ids.len(), m.ncols()));
        for (i, &src) in ids.iter().enumerate() {
            out.row_mut(i).assign(&m.row(src));
        }
        out
    };
    (take(&idx[..n_train]), take(&idx[n_train..]))
}
