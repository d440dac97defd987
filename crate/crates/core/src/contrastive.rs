//! Desk-scale contrastive pretraining, fine-tuning and augmentation
//! benchmarking.
//!
//! The encoder is a small MLP with hand-written backpropagation trained by
//! plain SGD on the NT-Xent loss. Evaluation fine-tunes a linear softmax
//! head on a labelled subset and reports macro metrics on a held-out test
//! split.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{make_pair_with_neighbor, AugmentationKind, Method, ViewMode};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::rankings::RankedAugmentations;
use crate::synthgen::sample_seed;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
        }
    }

    /// Derivative given the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub hidden_sizes: Vec<usize>,
    /// At least 2.
    pub embedding_dim: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![64, 64],
            embedding_dim: 32,
            activation: Activation::Relu,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub temperature: f64,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub learning_rate: f64,
    /// Learning rate of the classification head.
    pub head_learning_rate: f64,
    /// Fraction of the training split whose labels are used, in `(0, 1]`.
    pub label_ratio: f64,
    pub repeats: usize,
    /// Also update the encoder while fitting the head.
    pub finetune_encoder: bool,
    pub view_mode: ViewMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            temperature: 0.5,
            batch_size: 64,
            pretrain_epochs: 20,
            finetune_epochs: 20,
            learning_rate: 1e-3,
            head_learning_rate: 1e-2,
            label_ratio: 0.3,
            repeats: 5,
            finetune_encoder: false,
            view_mode: ViewMode::SingleView,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Settings for the A1-small benchmark: a faster pretraining rate and a
    /// linear probe trained to convergence, so probe noise does not swamp
    /// the pretraining effect.
    pub fn desk_scale(seed: u64) -> Self {
        Self {
            learning_rate: 1e-2,
            head_learning_rate: 0.1,
            finetune_epochs: 100,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::Config(format!("temperature must be positive, got {}", self.temperature)));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch size must be at least 2".into()));
        }
        if !(self.label_ratio > 0.0 && self.label_ratio <= 1.0) {
            return Err(Error::Config(format!("label ratio {} not in (0, 1]", self.label_ratio)));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.head_learning_rate > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        Ok(())
    }
}

/// Fully connected layer; `w` is `out x in`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    fn new<R: Rng>(in_dim: usize, out_dim: usize, bound: f64, rng: &mut R) -> Self {
        let u = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        Self {
            in_dim,
            out_dim,
            w: (0..in_dim * out_dim).map(|_| u.sample(rng)).collect(),
            b: vec![0.0; out_dim],
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            w: vec![0.0; self.w.len()],
            b: vec![0.0; self.b.len()],
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.out_dim)
            .map(|o| {
                let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
                self.b[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    fn backward(&self, x: &[f64], dout: &[f64], grad: &mut Dense) -> Vec<f64> {
        let mut dx = vec![0.0; self.in_dim];
        for o in 0..self.out_dim {
            let d = dout[o];
            if d == 0.0 {
                continue;
            }
            grad.b[o] += d;
            let row = o * self.in_dim;
            for i in 0..self.in_dim {
                grad.w[row + i] += d * x[i];
                dx[i] += d * self.w[row + i];
            }
        }
        dx
    }

    fn sgd(&mut self, grad: &Dense, lr: f64) {
        self.w.iter_mut().zip(&grad.w).for_each(|(p, g)| *p -= lr * g);
        self.b.iter_mut().zip(&grad.b).for_each(|(p, g)| *p -= lr * g);
    }
}

/// Multilayer perceptron: hidden layers with `activation`, linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub activation: Activation,
}

/// Inputs and post-activation outputs of every layer from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn new(input_dim: usize, cfg: &EncoderConfig) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Config("encoder input dimension must be positive".into()));
        }
        if cfg.embedding_dim < 2 {
            return Err(Error::Config(format!("embedding_dim {} must be at least 2", cfg.embedding_dim)));
        }
        if cfg.hidden_sizes.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut dims = vec![input_dim];
        dims.extend(&cfg.hidden_sizes);
        dims.push(cfg.embedding_dim);
        let layers = dims
            .windows(2)
            .map(|d| {
                let bound = match cfg.activation {
                    Activation::Relu => (6.0 / d[0] as f64).sqrt(),
                    Activation::Tanh => (6.0 / (d[0] + d[1]) as f64).sqrt(),
                };
                Dense::new(d[0], d[1], bound, &mut rng)
            })
            .collect();
        Ok(Self {
            layers,
            activation: cfg.activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").out_dim
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).0
    }

    pub fn forward_cached(&self, x: &[f64]) -> (Vec<f64>, ForwardCache) {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&h);
            inputs.push(std::mem::take(&mut h));
            h = if i < last {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            } else {
                z.clone()
            };
            pre.push(z);
        }
        (h, ForwardCache { inputs, pre })
    }

    pub fn zero_grad(&self) -> Vec<Dense> {
        self.layers.iter().map(Dense::zeros_like).collect()
    }

    /// Backpropagates `dout` (gradient w.r.t. the output of the pass in
    /// `cache`), accumulating into `grads`. Returns the input gradient.
    pub fn backward(&self, cache: &ForwardCache, dout: &[f64], grads: &mut [Dense]) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut d = dout.to_vec();
        for i in (0..self.layers.len()).rev() {
            if i < last {
                let z = &cache.pre[i];
                for (k, dk) in d.iter_mut().enumerate() {
                    let a = self.activation.apply(z[k]);
                    *dk *= self.activation.derivative(z[k], a);
                }
            }
            d = self.layers[i].backward(&cache.inputs[i], &d, &mut grads[i]);
        }
        d
    }

    pub fn sgd(&mut self, grads: &[Dense], lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(grads) {
            l.sgd(g, lr);
        }
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(&l.b).copied())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NtXent {
    pub loss: f64,
    pub grad_a: Vec<Vec<f64>>,
    pub grad_b: Vec<Vec<f64>>,
}

/// NT-Xent over the `2B` views `a_1..a_B, b_1..b_B` with positives
/// `(a_i, b_i)`. The loss is the mean over all anchors of
/// `-log softmax(sim(anchor, positive) / tau)` against the `2B - 1` other
/// views; `sim` is cosine similarity.
pub fn nt_xent_loss(a: &[Vec<f64>], b: &[Vec<f64>], temperature: f64) -> Result<NtXent> {
    let batch = a.len();
    if batch < 2 {
        return Err(Error::Config(format!("NT-Xent needs at least 2 pairs, got {batch}")));
    }
    if b.len() != batch {
        return Err(Error::Shape(format!("batches of {} and {} pairs", batch, b.len())));
    }
    if !(temperature > 0.0) {
        return Err(Error::Config(format!("temperature must be positive, got {temperature}")));
    }
    let dim = a[0].len();
    if a.iter().chain(b).any(|v| v.len() != dim) {
        return Err(Error::Shape("embeddings differ in dimension".into()));
    }
    let m = 2 * batch;
    let z: Vec<&Vec<f64>> = a.iter().chain(b).collect();
    let norms: Vec<f64> = z
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12))
        .collect();
    let u: Vec<Vec<f64>> = z
        .iter()
        .zip(&norms)
        .map(|(v, n)| v.iter().map(|x| x / n).collect())
        .collect();
    let mut s = vec![0.0; m * m];
    for i in 0..m {
        for j in i + 1..m {
            let v = u[i].iter().zip(&u[j]).map(|(p, q)| p * q).sum::<f64>() / temperature;
            s[i * m + j] = v;
            s[j * m + i] = v;
        }
    }
    let pos = |i: usize| if i < batch { i + batch } else { i - batch };

    // g[i][j] = dL/ds_ij from anchor i's term.
    let mut g = vec![0.0; m * m];
    let mut loss = 0.0;
    for i in 0..m {
        let row = &s[i * m..(i + 1) * m];
        let mx = (0..m).filter(|&j| j != i).map(|j| row[j]).fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = (0..m).filter(|&j| j != i).map(|j| (row[j] - mx).exp()).sum();
        let lse = mx + denom.ln();
        loss += lse - row[pos(i)];
        for j in (0..m).filter(|&j| j != i) {
            let p = (row[j] - lse).exp();
            g[i * m + j] = (p - if j == pos(i) { 1.0 } else { 0.0 }) / m as f64;
        }
    }
    loss /= m as f64;

    let mut grads = Vec::with_capacity(m);
    for i in 0..m {
        // dL/du_i = sum_j (g_ij + g_ji) u_j / tau
        let mut du = vec![0.0; dim];
        for j in (0..m).filter(|&j| j != i) {
            let c = (g[i * m + j] + g[j * m + i]) / temperature;
            du.iter_mut().zip(&u[j]).for_each(|(d, uj)| *d += c * uj);
        }
        // Through the normalisation: dz = (du - u (u . du)) / |z|
        let proj: f64 = du.iter().zip(&u[i]).map(|(d, ui)| d * ui).sum();
        grads.push(
            du.iter()
                .zip(&u[i])
                .map(|(d, ui)| (d - ui * proj) / norms[i])
                .collect::<Vec<f64>>(),
        );
    }
    let grad_b = grads.split_off(batch);
    Ok(NtXent {
        loss,
        grad_a: grads,
        grad_b,
    })
}

/// Which augmentation(s) build the positive pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub mode: ViewMode,
    pub aug1: AugmentationKind,
    pub aug2: Option<AugmentationKind>,
}

impl PairSpec {
    pub fn single(aug: AugmentationKind) -> Self {
        Self {
            mode: ViewMode::SingleView,
            aug1: aug,
            aug2: None,
        }
    }

    pub fn double(aug1: AugmentationKind, aug2: AugmentationKind) -> Self {
        Self {
            mode: ViewMode::DoubleView,
            aug1,
            aug2: Some(aug2),
        }
    }
}

/// Affine map applied to every value before it reaches the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Standardizer {
    pub fn fit(ds: &LabeledDataset, idx: &[usize]) -> Self {
        let vals = || idx.iter().flat_map(|&i| ds.samples[i].values.iter().copied());
        let n = idx.len() * ds.sample_len();
        if n == 0 {
            return Self { mean: 0.0, std: 1.0 };
        }
        let mean = vals().sum::<f64>() / n as f64;
        let var = vals().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| (v - self.mean) / self.std).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    /// Loss on the held-out pairs before the first update.
    pub initial_heldout_loss: f64,
    pub final_heldout_loss: f64,
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// One view per sample of a batch.
type Views = Vec<Vec<f64>>;

fn build_pairs(
    ds: &LabeledDataset,
    idx: &[usize],
    spec: &PairSpec,
    std: &Standardizer,
    rng: &mut ChaCha8Rng,
) -> Result<(Views, Views)> {
    let mut va = Vec::with_capacity(idx.len());
    let mut vb = Vec::with_capacity(idx.len());
    for &i in idx {
        let s = &ds.samples[i];
        let p = make_pair_with_neighbor(
            &s.values,
            s.neighbor.as_deref(),
            spec.mode,
            &spec.aug1,
            spec.aug2.as_ref(),
            rng,
        )?;
        va.push(std.apply(&p.view_a));
        vb.push(std.apply(&p.view_b));
    }
    Ok((va, vb))
}

/// NT-Xent of `enc` on the given views, in batches of `batch_size`.
fn heldout_loss(enc: &Mlp, va: &[Vec<f64>], vb: &[Vec<f64>], cfg: &TrainConfig) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (ca, cb) in va.chunks(cfg.batch_size).zip(vb.chunks(cfg.batch_size)) {
        if ca.len() < 2 {
            continue;
        }
        let za: Vec<Vec<f64>> = ca.iter().map(|x| enc.forward(x)).collect();
        let zb: Vec<Vec<f64>> = cb.iter().map(|x| enc.forward(x)).collect();
        total += nt_xent_loss(&za, &zb, cfg.temperature)?.loss * ca.len() as f64;
        count += ca.len();
    }
    Ok(if count == 0 { f64::NAN } else { total / count as f64 })
}

/// Trains `enc` in place on pairs built from the samples `train_idx`;
/// `heldout_idx` is only used to report the loss before and after.
pub fn pretrain(
    enc: &mut Mlp,
    ds: &LabeledDataset,
    train_idx: &[usize],
    heldout_idx: &[usize],
    spec: &PairSpec,
    std: &Standardizer,
    cfg: &TrainConfig,
) -> Result<PretrainReport> {
    cfg.validate()?;
    if train_idx.is_empty() {
        return Err(Error::Shape("pretraining needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut held_rng = ChaCha8Rng::seed_from_u64(sample_seed(cfg.seed, 0xFEED, 0));
    let (ha, hb) = build_pairs(ds, heldout_idx, spec, std, &mut held_rng)?;
    let initial = heldout_loss(enc, &ha, &hb, cfg)?;

    let mut order = train_idx.to_vec();
    let mut epoch_losses = Vec::with_capacity(cfg.pretrain_epochs);
    for _ in 0..cfg.pretrain_epochs {
        order.shuffle(&mut rng);
        let (mut sum, mut seen) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let (va, vb) = build_pairs(ds, chunk, spec, std, &mut rng)?;
            let fa: Vec<_> = va.iter().map(|x| enc.forward_cached(x)).collect();
            let fb: Vec<_> = vb.iter().map(|x| enc.forward_cached(x)).collect();
            let za: Vec<Vec<f64>> = fa.iter().map(|f| f.0.clone()).collect();
            let zb: Vec<Vec<f64>> = fb.iter().map(|f| f.0.clone()).collect();
            let nt = nt_xent_loss(&za, &zb, cfg.temperature)?;
            let mut grads = enc.zero_grad();
            for (f, g) in fa.iter().zip(&nt.grad_a).chain(fb.iter().zip(&nt.grad_b)) {
                enc.backward(&f.1, g, &mut grads);
            }
            enc.sgd(&grads, cfg.learning_rate);
            sum += nt.loss * chunk.len() as f64;
            seen += chunk.len();
        }
        epoch_losses.push(if seen == 0 { f64::NAN } else { sum / seen as f64 });
    }
    let final_loss = heldout_loss(enc, &ha, &hb, cfg)?;
    Ok(PretrainReport {
        initial_heldout_loss: initial,
        final_heldout_loss: final_loss,
        epoch_losses,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl ClassificationMetrics {
    /// Macro averages over all `num_classes` classes. A class with no
    /// predictions has precision 0, one with no support recall 0.
    pub fn from_predictions(truth: &[usize], pred: &[usize], num_classes: usize) -> Result<Self> {
        if truth.len() != pred.len() || truth.is_empty() {
            return Err(Error::Shape(format!(
                "{} labels against {} predictions",
                truth.len(),
                pred.len()
            )));
        }
        let mut confusion = vec![vec![0usize; num_classes]; num_classes];
        for (&t, &p) in truth.iter().zip(pred) {
            if t >= num_classes || p >= num_classes {
                return Err(Error::Shape(format!("label outside 0..{num_classes}")));
            }
            confusion[t][p] += 1;
        }
        Ok(Self::from_confusion(confusion))
    }

    pub fn from_confusion(confusion: Vec<Vec<usize>>) -> Self {
        let c = confusion.len();
        let total: usize = confusion.iter().flatten().sum();
        let correct: usize = (0..c).map(|k| confusion[k][k]).sum();
        let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
        for k in 0..c {
            let tp = confusion[k][k] as f64;
            let predicted: usize = (0..c).map(|t| confusion[t][k]).sum();
            let actual: usize = confusion[k].iter().sum();
            let p = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
            let r = if actual > 0 { tp / actual as f64 } else { 0.0 };
            let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            p_sum += p;
            r_sum += r;
            f_sum += f;
        }
        let c = c.max(1) as f64;
        Self {
            accuracy: if total > 0 { correct as f64 / total as f64 } else { 0.0 },
            macro_precision: p_sum / c,
            macro_recall: r_sum / c,
            macro_f1: f_sum / c,
            confusion,
        }
    }
}

/// Stratified train/validation/test indices plus the labelled subset of
/// the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub labeled: Vec<usize>,
}

/// Per class: `round(0.7 n)` train, `round(0.1 n)` validation, the rest
/// test; then `round(label_ratio * train_c)` labelled per class.
pub fn stratified_splits(ds: &LabeledDataset, label_ratio: f64, seed: u64) -> Result<Splits> {
    if !(label_ratio > 0.0 && label_ratio <= 1.0) {
        return Err(Error::Config(format!("label ratio {label_ratio} not in (0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Splits {
        train: vec![],
        val: vec![],
        test: vec![],
        labeled: vec![],
    };
    for c in 0..ds.num_classes() {
        let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == c).collect();
        if idx.is_empty() {
            return Err(Error::Stratification(format!("class {c} has no samples")));
        }
        idx.shuffle(&mut rng);
        let n = idx.len() as f64;
        let n_train = (0.7 * n).round() as usize;
        let n_val = ((0.1 * n).round() as usize).min(idx.len() - n_train);
        let n_lab = (label_ratio * n_train as f64).round() as usize;
        if n_lab == 0 {
            return Err(Error::Stratification(format!(
                "class {c} has no labelled training sample at label ratio {label_ratio} ({} samples)",
                idx.len()
            )));
        }
        let remaining = idx.len() - n_train - n_val;
        if remaining == 0 {
            return Err(Error::Stratification(format!("class {c} has no test sample")));
        }
        out.labeled.extend(&idx[..n_lab]);
        out.train.extend(&idx[..n_train]);
        out.val.extend(&idx[n_train..n_train + n_val]);
        out.test.extend(&idx[n_train + n_val..]);
    }
    Ok(out)
}

/// Softmax regression head on top of the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    pub layer: Dense,
}

impl LinearHead {
    pub fn new(in_dim: usize, num_classes: usize) -> Self {
        Self {
            layer: Dense {
                in_dim,
                out_dim: num_classes,
                w: vec![0.0; in_dim * num_classes],
                b: vec![0.0; num_classes],
            },
        }
    }

    pub fn predict(&self, emb: &[f64]) -> usize {
        let logits = self.layer.forward(emb);
        (0..logits.len())
            .max_by(|&i, &j| logits[i].total_cmp(&logits[j]).then(j.cmp(&i)))
            .unwrap_or(0)
    }
}

fn softmax_xent_grad(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let mx = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = -(exps[label] / z).ln();
    let grad = exps
        .iter()
        .enumerate()
        .map(|(k, e)| e / z - if k == label { 1.0 } else { 0.0 })
        .collect();
    (loss, grad)
}

fn evaluate(enc: &Mlp, head: &LinearHead, xs: &[Vec<f64>], ys: &[usize], num_classes: usize) -> Result<ClassificationMetrics> {
    let pred: Vec<usize> = xs.iter().map(|x| head.predict(&enc.forward(x))).collect();
    ClassificationMetrics::from_predictions(ys, &pred, num_classes)
}

/// Fits a linear head (and the encoder when `cfg.finetune_encoder`) on the
/// labelled subset with cross-entropy, keeps the epoch with the best
/// validation macro-F1 and scores it on the test split.
pub fn finetune_and_test(
    encoder: &Mlp,
    ds: &LabeledDataset,
    splits: &Splits,
    std: &Standardizer,
    cfg: &TrainConfig,
) -> Result<ClassificationMetrics> {
    cfg.validate()?;
    let c = ds.num_classes();
    for class in 0..c {
        if !splits.labeled.iter().any(|&i| ds.labels[i] == class) {
            return Err(Error::Stratification(format!("class {class} is absent from the labelled subset")));
        }
    }
    let prep = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
        (
            idx.iter().map(|&i| std.apply(&ds.samples[i].values)).collect(),
            idx.iter().map(|&i| ds.labels[i]).collect(),
        )
    };
    let (xl, yl) = prep(&splits.labeled);
    let (xv, yv) = prep(&splits.val);
    let (xt, yt) = prep(&splits.test);

    let mut enc = encoder.clone();
    let mut head = LinearHead::new(enc.output_dim(), c);
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(cfg.seed, 0xF17E, 0));
    let mut order: Vec<usize> = (0..xl.len()).collect();
    let mut best: Option<(f64, Mlp, LinearHead)> = None;
    let val_f1 = |enc: &Mlp, head: &LinearHead| -> Result<f64> {
        if xv.is_empty() {
            return Ok(0.0);
        }
        Ok(evaluate(enc, head, &xv, &yv, c)?.macro_f1)
    };

    for _ in 0..cfg.finetune_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let mut hg = head.layer.zeros_like();
            let mut eg = enc.zero_grad();
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let (emb, cache) = enc.forward_cached(&xl[i]);
                let (_, dlogits) = softmax_xent_grad(&head.layer.forward(&emb), yl[i]);
                let dlogits: Vec<f64> = dlogits.iter().map(|d| d * scale).collect();
                let demb = head.layer.backward(&emb, &dlogits, &mut hg);
                if cfg.finetune_encoder {
                    enc.backward(&cache, &demb, &mut eg);
                }
            }
            head.layer.sgd(&hg, cfg.head_learning_rate);
            if cfg.finetune_encoder {
                enc.sgd(&eg, cfg.learning_rate);
            }
        }
        let f1 = val_f1(&enc, &head)?;
        if best.as_ref().is_none_or(|b| f1 > b.0) {
            best = Some((f1, enc.clone(), head.clone()));
        }
    }
    let (enc, head) = match best {
        Some((_, e, h)) => (e, h),
        None => (enc, head),
    };
    evaluate(&enc, &head, &xt, &yt, c)
}

/// Methods sorted by descending F1 (ties by name), with consecutive
/// methods closer than `0.01 * no_pretrain_f1` chained into one tie group.
pub fn rank_augmentations(results: &BTreeMap<Method, f64>, no_pretrain_f1: f64) -> Result<RankedAugmentations> {
    let margin = 0.01 * no_pretrain_f1;
    let mut items: Vec<(Method, f64)> = results.iter().map(|(&m, &f)| (m, f)).collect();
    if items.iter().any(|(_, f)| !f.is_finite()) {
        return Err(Error::Config("F1 scores must be finite".into()));
    }
    items.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.name().cmp(b.0.name())));
    let mut groups: Vec<Vec<Method>> = Vec::new();
    let mut prev: Option<f64> = None;
    for (m, f) in items {
        match prev {
            Some(p) if p - f <= margin + 1e-12 => groups.last_mut().expect("group open").push(m),
            _ => groups.push(vec![m]),
        }
        prev = Some(f);
    }
    RankedAugmentations::from_groups("query", &groups)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub repeat: usize,
    pub seed: u64,
    pub metrics: ClassificationMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pretrain: Option<PretrainReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    /// Pair construction per method; methods without an entry use their
    /// default single-view augmentation.
    #[serde(default)]
    pub pair_overrides: BTreeMap<Method, PairSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema_version: u32,
    pub dataset: String,
    pub config: BenchmarkConfig,
    pub runs: Vec<RunRecord>,
    pub mean: BTreeMap<Method, MeanMetrics>,
    pub ranking: RankedAugmentations,
    pub tie_groups: Vec<Vec<Method>>,
}

impl BenchmarkReport {
    pub fn runs_for(&self, m: Method) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(move |r| r.method == m)
    }
}

/// Seed of repeat `r`; shared by all methods so that every method starts
/// from the same encoder initialisation within a repeat.
pub fn repeat_seed(base: u64, repeat: usize) -> u64 {
    sample_seed(base, 0x5EED, repeat)
}

/// One pretrain (unless `method` is the baseline) plus fine-tune/test.
pub fn single_run(
    ds: &LabeledDataset,
    splits: &Splits,
    std: &Standardizer,
    method: Method,
    pair: Option<&PairSpec>,
    bench: &BenchmarkConfig,
    repeat: usize,
) -> Result<RunRecord> {
    let seed = repeat_seed(bench.train.seed, repeat);
    let enc_cfg = EncoderConfig {
        seed: sample_seed(seed, 0xE1C0, 0),
        ..bench.encoder.clone()
    };
    let mut enc = Mlp::new(ds.sample_len(), &enc_cfg)?;
    let train = TrainConfig {
        seed: sample_seed(seed, 0xA06, method as usize),
        ..bench.train.clone()
    };
    let spec = match (pair, method.default_kind()) {
        (Some(p), _) => Some(*p),
        (None, Some(k)) => Some(PairSpec::single(k)),
        (None, None) => None,
    };
    let pretrain_report = match spec {
        Some(spec) if method != Method::NoPretrain => {
            Some(pretrain(&mut enc, ds, &splits.train, &splits.val, &spec, std, &train)?)
        }
        _ => None,
    };
    let metrics = finetune_and_test(&enc, ds, splits, std, &train)?;
    Ok(RunRecord {
        method,
        repeat,
        seed,
        metrics,
        pretrain: pretrain_report,
    })
}

/// Runs every method in `methods` (the baseline is always added)
/// `repeats` times, averages the metrics and ranks the methods by mean
/// macro-F1.
pub fn benchmark_run(ds: &LabeledDataset, methods: &[Method], bench: &BenchmarkConfig) -> Result<BenchmarkReport> {
    bench.train.validate()?;
    let splits = stratified_splits(ds, bench.train.label_ratio, bench.train.seed)?;
    let std = Standardizer::fit(ds, &splits.train);
    let mut all: Vec<Method> = methods.to_vec();
    if !all.contains(&Method::NoPretrain) {
        all.push(Method::NoPretrain);
    }
    all.sort();
    all.dedup();
    let jobs: Vec<(Method, usize)> = all
        .iter()
        .flat_map(|&m| (0..bench.train.repeats).map(move |r| (m, r)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(m, r)| single_run(ds, &splits, &std, m, bench.pair_overrides.get(&m), bench, r))
        .collect::<Result<Vec<_>>>()?;

    let mut mean = BTreeMap::new();
    for &m in &all {
        let rs: Vec<&ClassificationMetrics> = runs.iter().filter(|r| r.method == m).map(|r| &r.metrics).collect();
        let k = rs.len() as f64;
        mean.insert(
            m,
            MeanMetrics {
                accuracy: rs.iter().map(|x| x.accuracy).sum::<f64>() / k,
                macro_precision: rs.iter().map(|x| x.macro_precision).sum::<f64>() / k,
                macro_recall: rs.iter().map(|x| x.macro_recall).sum::<f64>() / k,
                macro_f1: rs.iter().map(|x| x.macro_f1).sum::<f64>() / k,
            },
        );
    }
    let f1: BTreeMap<Method, f64> = mean.iter().map(|(&m, v)| (m, v.macro_f1)).collect();
    let ranking = rank_augmentations(&f1, f1[&Method::NoPretrain])?;
    let tie_groups = ranking.tie_groups();
    Ok(BenchmarkReport {
        schema_version: REPORT_SCHEMA_VERSION,
        dataset: ds.metadata.name.clone(),
        config: bench.clone(),
        runs,
        mean,
        ranking,
        tie_groups,
    })
}
