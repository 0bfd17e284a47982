//! Distilled student network.
//!
//! A small dense network with per-layer batch normalization, ReLU, and
//! inverted dropout, a residual connection across the equal-width middle
//! pair, and two heads: a softmax ratio head and a sigmoid presence head.
//! The backward pass is written out by hand and checked against central
//! differences by [`gradient_check`].

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use super::{LearnError, TrainConfig};
use crate::la::Mat;
use crate::rng::{derive_seed, SeededRng};

/// Batch-norm variance floor.
const BN_EPS: f64 = 1e-5;
/// Weight of the current batch statistics in the running-statistics update.
const BN_MOMENTUM: f64 = 0.1;
/// Floor applied to soft targets inside the distillation divergence.
const TEACHER_FLOOR: f64 = 1e-6;
/// Probability clip for the presence cross-entropy.
const BCE_CLIP: f64 = 1e-7;

/// Network shape.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentArch {
    /// Input feature length.
    pub input_len: usize,
    /// Hidden layer widths in order.
    pub hidden: Vec<usize>,
    /// Output count shared by both heads.
    pub outputs: usize,
    /// Add a skip connection across the first adjacent equal-width pair.
    pub residual: bool,
}

impl Default for StudentArch {
    fn default() -> Self {
        StudentArch {
            input_len: 405,
            hidden: vec![256, 128, 128, 64],
            outputs: 5,
            residual: true,
        }
    }
}

impl StudentArch {
    /// Checks the shape is usable.
    pub fn validate(&self) -> Result<(), LearnError> {
        if self.input_len == 0 || self.outputs < 2 || self.hidden.is_empty() {
            return Err(LearnError::BadConfig(
                "network needs inputs, at least one hidden layer, and >= 2 outputs",
            ));
        }
        if self.hidden.iter().any(|&w| w == 0) {
            return Err(LearnError::BadConfig("hidden widths must be >= 1"));
        }
        if self.residual && self.residual_layer().is_none() {
            return Err(LearnError::BadConfig(
                "residual skip needs an adjacent equal-width layer pair",
            ));
        }
        Ok(())
    }

    /// Index of the layer whose output receives the skip connection, if any.
    pub fn residual_layer(&self) -> Option<usize> {
        if !self.residual {
            return None;
        }
        (1..self.hidden.len()).find(|&i| self.hidden[i] == self.hidden[i - 1])
    }
}

/// Fully-connected layer, weights stored row-major as out x in.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// Weight matrix, one row per output unit.
    pub w: Mat,
    /// Per-unit bias.
    pub b: Vec<f64>,
}

/// Per-feature batch normalization state.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    /// Learned scale.
    pub gamma: Vec<f64>,
    /// Learned shift.
    pub beta: Vec<f64>,
    /// Running mean used outside training.
    pub running_mean: Vec<f64>,
    /// Running variance used outside training.
    pub running_var: Vec<f64>,
}

/// All learnable state of the student.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentParams {
    /// Shape the parameters were built for.
    pub arch: StudentArch,
    /// Hidden dense layers.
    pub layers: Vec<DenseLayer>,
    /// Batch norms, one per hidden layer.
    pub norms: Vec<BatchNorm>,
    /// Softmax ratio head.
    pub ratio_head: DenseLayer,
    /// Sigmoid presence head.
    pub presence_head: DenseLayer,
}

/// Role of a parameter coordinate, used to route optimizer updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamClass {
    /// Dense weight matrix entry; the only class that gets weight decay.
    Weight,
    /// Dense bias entry.
    Bias,
    /// Batch-norm scale.
    NormScale,
    /// Batch-norm shift.
    NormShift,
    /// Batch-norm running statistic; not touched by the optimizer.
    RunningStat,
}

impl StudentParams {
    /// All-zero parameters for the given shape (running variances included).
    pub fn zeroed(arch: &StudentArch) -> Result<StudentParams, LearnError> {
        arch.validate()?;
        let mut layers = Vec::new();
        let mut norms = Vec::new();
        let mut fan_in = arch.input_len;
        for &width in &arch.hidden {
            layers.push(DenseLayer { w: Mat::zeros(width, fan_in), b: vec![0.0; width] });
            norms.push(BatchNorm {
                gamma: vec![0.0; width],
                beta: vec![0.0; width],
                running_mean: vec![0.0; width],
                running_var: vec![0.0; width],
            });
            fan_in = width;
        }
        let head = |outs: usize, ins: usize| DenseLayer { w: Mat::zeros(outs, ins), b: vec![0.0; outs] };
        Ok(StudentParams {
            arch: arch.clone(),
            layers,
            norms,
            ratio_head: head(arch.outputs, fan_in),
            presence_head: head(arch.outputs, fan_in),
        })
    }

    /// Same shape as `self`, every coordinate zero. Used as a gradient buffer.
    pub fn zeroed_like(&self) -> StudentParams {
        StudentParams::zeroed(&self.arch).expect("existing params imply a valid arch")
    }

    /// Visits every coordinate in the canonical flattening order: per hidden
    /// layer the dense weights (row-major), bias, norm scale, shift, running
    /// mean, running variance; then the ratio head and the presence head.
    pub fn visit_params(&self, mut f: impl FnMut(ParamClass, f64)) {
        for (layer, norm) in self.layers.iter().zip(&self.norms) {
            for &w in &layer.w.data {
                f(ParamClass::Weight, w);
            }
            for &b in &layer.b {
                f(ParamClass::Bias, b);
            }
            for &g in &norm.gamma {
                f(ParamClass::NormScale, g);
            }
            for &b in &norm.beta {
                f(ParamClass::NormShift, b);
            }
            for &m in &norm.running_mean {
                f(ParamClass::RunningStat, m);
            }
            for &v in &norm.running_var {
                f(ParamClass::RunningStat, v);
            }
        }
        for head in [&self.ratio_head, &self.presence_head] {
            for &w in &head.w.data {
                f(ParamClass::Weight, w);
            }
            for &b in &head.b {
                f(ParamClass::Bias, b);
            }
        }
    }

    /// Mutable twin of [`visit_params`](Self::visit_params), same order.
    pub fn visit_params_mut(&mut self, mut f: impl FnMut(ParamClass, &mut f64)) {
        for (layer, norm) in self.layers.iter_mut().zip(self.norms.iter_mut()) {
            for w in &mut layer.w.data {
                f(ParamClass::Weight, w);
            }
            for b in &mut layer.b {
                f(ParamClass::Bias, b);
            }
            for g in &mut norm.gamma {
                f(ParamClass::NormScale, g);
            }
            for b in &mut norm.beta {
                f(ParamClass::NormShift, b);
            }
            for m in &mut norm.running_mean {
                f(ParamClass::RunningStat, m);
            }
            for v in &mut norm.running_var {
                f(ParamClass::RunningStat, v);
            }
        }
        for head in [&mut self.ratio_head, &mut self.presence_head] {
            for w in &mut head.w.data {
                f(ParamClass::Weight, w);
            }
            for b in &mut head.b {
                f(ParamClass::Bias, b);
            }
        }
    }

    /// Total coordinate count of the canonical flattening.
    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(|_, _| n += 1);
        n
    }
}

/// Serializes parameters in the canonical flattening order.
pub fn flatten_params(params: &StudentParams) -> Vec<f64> {
    let mut flat = Vec::with_capacity(params.param_count());
    params.visit_params(|_, v| flat.push(v));
    flat
}

/// Parameter classes in the canonical flattening order.
pub fn param_classes(params: &StudentParams) -> Vec<ParamClass> {
    let mut classes = Vec::with_capacity(params.param_count());
    params.visit_params(|c, _| classes.push(c));
    classes
}

/// Rebuilds parameters from a canonical flat vector.
pub fn unflatten_params(arch: &StudentArch, flat: &[f64]) -> Result<StudentParams, LearnError> {
    let mut params = StudentParams::zeroed(arch)?;
    if flat.len() != params.param_count() {
        return Err(LearnError::ShapeMismatch("flat parameter vector length"));
    }
    let mut it = flat.iter();
    params.visit_params_mut(|_, v| *v = *it.next().expect("length checked above"));
    Ok(params)
}

/// Fresh parameters with scaled-normal dense weights, zero biases, identity
/// batch norms, and unit running variances.
pub fn init_student(arch: &StudentArch, seed: u64) -> Result<StudentParams, LearnError> {
    let mut params = StudentParams::zeroed(arch)?;
    let mut rng = SeededRng::new(seed);
    let heads = [&mut params.ratio_head, &mut params.presence_head];
    for layer in params.layers.iter_mut().chain(heads) {
        let scale = (2.0 / layer.w.cols as f64).sqrt();
        for w in &mut layer.w.data {
            *w = scale * rng.normal();
        }
    }
    for norm in &mut params.norms {
        for g in &mut norm.gamma {
            *g = 1.0;
        }
        for v in &mut norm.running_var {
            *v = 1.0;
        }
    }
    Ok(params)
}

/// Loss variant for the ratio error term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioLoss {
    /// Quadratic near zero, linear past the delta.
    Huber,
    /// Plain squared error.
    Mse,
}

/// Per-term loss values; `total` is their configured weighted sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    /// Distillation divergence against the soft targets.
    pub kl: f64,
    /// Ratio error term (Huber by default, squared under the variant).
    pub huber: f64,
    /// Presence cross-entropy.
    pub bce: f64,
    /// alpha * kl + (1 - alpha) * huber + beta * bce.
    pub total: f64,
}

impl LossBreakdown {
    fn zero() -> Self {
        LossBreakdown { kl: 0.0, huber: 0.0, bce: 0.0, total: 0.0 }
    }

    fn add_scaled(&mut self, other: &LossBreakdown, w: f64) {
        self.kl += w * other.kl;
        self.huber += w * other.huber;
        self.bce += w * other.bce;
        self.total += w * other.total;
    }
}

/// Huber penalty of a scalar error: e^2/2 inside the delta, linear outside.
pub fn huber(e: f64, delta: f64) -> f64 {
    let a = e.abs();
    if a <= delta {
        0.5 * e * e
    } else {
        delta * (a - 0.5 * delta)
    }
}

/// Loss terms for one sample given head probabilities and targets. The soft
/// targets are floored at 1e-6 inside the log and the presence probabilities
/// clipped to [1e-7, 1 - 1e-7], so saturated heads stay finite.
pub fn loss_terms(
    ratios: &[f64],
    presence: &[f64],
    teacher: &[f64],
    truth_ratios: &[f64],
    truth_presence: &[f64],
    cfg: &TrainConfig,
) -> LossBreakdown {
    debug_assert_eq!(ratios.len(), teacher.len());
    debug_assert_eq!(ratios.len(), truth_ratios.len());
    debug_assert_eq!(presence.len(), truth_presence.len());
    let mut kl = 0.0;
    let mut ratio_err = 0.0;
    let mut bce = 0.0;
    for j in 0..ratios.len() {
        let s = ratios[j];
        if s > 0.0 {
            kl += s * (s.ln() - teacher[j].max(TEACHER_FLOOR).ln());
        }
        let e = s - truth_ratios[j];
        ratio_err += match cfg.ratio_loss {
            RatioLoss::Huber => huber(e, cfg.huber_delta),
            RatioLoss::Mse => e * e,
        };
        let p = presence[j].clamp(BCE_CLIP, 1.0 - BCE_CLIP);
        bce -= truth_presence[j] * p.ln() + (1.0 - truth_presence[j]) * (1.0 - p).ln();
    }
    let total = cfg.alpha * kl + (1.0 - cfg.alpha) * ratio_err + cfg.beta * bce;
    LossBreakdown { kl, huber: ratio_err, bce, total }
}

/// Per-layer forward state kept for the backward pass.
struct LayerCache {
    /// Activations entering the dense op.
    input: Mat,
    /// Normalized pre-activations.
    xhat: Mat,
    /// Mean used for normalization (batch or running).
    mean: Vec<f64>,
    /// Variance used for normalization (batch or running).
    var: Vec<f64>,
    /// Combined ReLU and dropout gate; backward multiplies by this.
    gate: Mat,
}

/// Full forward state of one batch.
pub(crate) struct ForwardPass {
    caches: Vec<LayerCache>,
    /// Final hidden activations feeding both heads.
    features: Mat,
    /// Softmax output of the ratio head, one row per sample.
    pub ratios: Mat,
    /// Sigmoid output of the presence head, one row per sample.
    pub presence: Mat,
    ratio_logits: Mat,
    train_stats: bool,
}

/// Whether a forward pass uses batch statistics and dropout.
pub(crate) enum ForwardMode<'a> {
    /// Batch statistics, dropout masks drawn from the rng.
    Train(&'a mut SeededRng),
    /// Running statistics, no dropout.
    Eval,
}

fn dense_forward(a: &Mat, layer: &DenseLayer) -> Mat {
    let (batch, inn) = (a.rows, a.cols);
    let out = layer.w.rows;
    debug_assert_eq!(inn, layer.w.cols);
    let mut z = Mat::zeros(batch, out);
    for b in 0..batch {
        let row = &a.data[b * inn..(b + 1) * inn];
        for o in 0..out {
            let wrow = &layer.w.data[o * inn..(o + 1) * inn];
            let mut acc = layer.b[o];
            for i in 0..inn {
                acc += row[i] * wrow[i];
            }
            z.data[b * out + o] = acc;
        }
    }
    z
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Runs the network on a batch, one sample per row.
pub(crate) fn forward_batch(
    params: &StudentParams,
    x: &Mat,
    mode: ForwardMode<'_>,
    dropout: f64,
) -> ForwardPass {
    debug_assert_eq!(x.cols, params.arch.input_len);
    let batch = x.rows;
    let residual_at = params.arch.residual_layer();
    let (train_stats, mut rng) = match mode {
        ForwardMode::Train(rng) => (true, Some(rng)),
        ForwardMode::Eval => (false, None),
    };
    let keep = 1.0 - dropout;

    let mut act = x.clone();
    let mut caches = Vec::with_capacity(params.layers.len());
    for (i, (layer, norm)) in params.layers.iter().zip(&params.norms).enumerate() {
        let z = dense_forward(&act, layer);
        let width = z.cols;

        let (mean, var) = if train_stats {
            let mut mean = vec![0.0; width];
            let mut var = vec![0.0; width];
            for b in 0..batch {
                for o in 0..width {
                    mean[o] += z.data[b * width + o] / batch as f64;
                }
            }
            for b in 0..batch {
                for o in 0..width {
                    let d = z.data[b * width + o] - mean[o];
                    var[o] += d * d / batch as f64;
                }
            }
            (mean, var)
        } else {
            (norm.running_mean.clone(), norm.running_var.clone())
        };

        let mut xhat = Mat::zeros(batch, width);
        let mut gate = Mat::zeros(batch, width);
        let mut out = Mat::zeros(batch, width);
        for b in 0..batch {
            for o in 0..width {
                let istd = 1.0 / (var[o] + BN_EPS).sqrt();
                let h = (z.data[b * width + o] - mean[o]) * istd;
                xhat.data[b * width + o] = h;
                let y = norm.gamma[o] * h + norm.beta[o];
                let drop = match &mut rng {
                    Some(rng) => {
                        if rng.uniform() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    }
                    None => 1.0,
                };
                let g = if y > 0.0 { drop } else { 0.0 };
                gate.data[b * width + o] = g;
                out.data[b * width + o] = y * g;
            }
        }
        if residual_at == Some(i) {
            for (o, a) in out.data.iter_mut().zip(&act.data) {
                *o += a;
            }
        }
        caches.push(LayerCache { input: act, xhat, mean, var, gate });
        act = out;
    }

    let ratio_logits = dense_forward(&act, &params.ratio_head);
    let presence_logits = dense_forward(&act, &params.presence_head);
    let c = params.arch.outputs;
    let mut ratios = Mat::zeros(batch, c);
    let mut presence = Mat::zeros(batch, c);
    for b in 0..batch {
        let row = &ratio_logits.data[b * c..(b + 1) * c];
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|z| (z - mx).exp()).sum();
        for o in 0..c {
            ratios.data[b * c + o] = (row[o] - mx).exp() / sum;
            presence.data[b * c + o] = sigmoid(presence_logits.data[b * c + o]);
        }
    }

    ForwardPass { caches, features: act, ratios, presence, ratio_logits, train_stats }
}

/// Folds the batch statistics of a training pass into the running estimates.
pub(crate) fn update_running_stats(params: &mut StudentParams, pass: &ForwardPass) {
    debug_assert!(pass.train_stats);
    for (norm, cache) in params.norms.iter_mut().zip(&pass.caches) {
        for o in 0..norm.running_mean.len() {
            norm.running_mean[o] =
                (1.0 - BN_MOMENTUM) * norm.running_mean[o] + BN_MOMENTUM * cache.mean[o];
            norm.running_var[o] =
                (1.0 - BN_MOMENTUM) * norm.running_var[o] + BN_MOMENTUM * cache.var[o];
        }
    }
}

/// Batch-mean loss plus the gradients with respect to both head logits.
fn loss_and_head_grads(
    pass: &ForwardPass,
    teacher: &Mat,
    truth_ratios: &Mat,
    truth_presence: &Mat,
    cfg: &TrainConfig,
) -> (LossBreakdown, Mat, Mat) {
    let batch = pass.ratios.rows;
    let c = pass.ratios.cols;
    let inv = 1.0 / batch as f64;
    let mut breakdown = LossBreakdown::zero();
    let mut dzr = Mat::zeros(batch, c);
    let mut dzp = Mat::zeros(batch, c);
    for b in 0..batch {
        let s = &pass.ratios.data[b * c..(b + 1) * c];
        let z = &pass.ratio_logits.data[b * c..(b + 1) * c];
        let p = &pass.presence.data[b * c..(b + 1) * c];
        let t = &teacher.data[b * c..(b + 1) * c];
        let cr = &truth_ratios.data[b * c..(b + 1) * c];
        let cp = &truth_presence.data[b * c..(b + 1) * c];

        let sample = loss_terms(s, p, t, cr, cp, cfg);
        breakdown.add_scaled(&sample, inv);

        // Stable log-softmax for the divergence gradient: ln s_k comes from
        // the logits, so saturated components stay finite.
        let mx = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = z.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
        let mut dot_a = 0.0;
        let mut dot_g = 0.0;
        let mut a = vec![0.0; c];
        let mut g = vec![0.0; c];
        for j in 0..c {
            a[j] = (z[j] - mx - lse) - t[j].max(TEACHER_FLOOR).ln();
            dot_a += s[j] * a[j];
            let e = s[j] - cr[j];
            g[j] = match cfg.ratio_loss {
                RatioLoss::Huber => e.clamp(-cfg.huber_delta, cfg.huber_delta),
                RatioLoss::Mse => 2.0 * e,
            };
            dot_g += s[j] * g[j];
        }
        for j in 0..c {
            let kl_grad = s[j] * (a[j] - dot_a);
            let ratio_grad = s[j] * (g[j] - dot_g);
            dzr.data[b * c + j] =
                inv * (cfg.alpha * kl_grad + (1.0 - cfg.alpha) * ratio_grad);
            dzp.data[b * c + j] = inv * cfg.beta * (p[j] - cp[j]);
        }
    }
    (breakdown, dzr, dzp)
}

fn dense_backward(
    input: &Mat,
    dz: &Mat,
    layer: &DenseLayer,
    grad: &mut DenseLayer,
    d_input: &mut Mat,
) {
    let (batch, inn) = (input.rows, input.cols);
    let out = dz.cols;
    for b in 0..batch {
        let arow = &input.data[b * inn..(b + 1) * inn];
        let drow = &dz.data[b * out..(b + 1) * out];
        for o in 0..out {
            let d = drow[o];
            grad.b[o] += d;
            let wg = &mut grad.w.data[o * inn..(o + 1) * inn];
            for i in 0..inn {
                wg[i] += d * arow[i];
            }
            let w = &layer.w.data[o * inn..(o + 1) * inn];
            let di = &mut d_input.data[b * inn..(b + 1) * inn];
            for i in 0..inn {
                di[i] += d * w[i];
            }
        }
    }
}

/// Backpropagates head-logit gradients through the whole network, returning
/// a parameter-shaped gradient (running statistics stay zero).
pub(crate) fn backward_batch(
    params: &StudentParams,
    pass: &ForwardPass,
    dzr: &Mat,
    dzp: &Mat,
) -> StudentParams {
    let batch = pass.features.rows;
    let residual_at = params.arch.residual_layer();
    let mut grads = params.zeroed_like();

    let mut d_feat = Mat::zeros(batch, pass.features.cols);
    dense_backward(&pass.features, dzr, &params.ratio_head, &mut grads.ratio_head, &mut d_feat);
    dense_backward(&pass.features, dzp, &params.presence_head, &mut grads.presence_head, &mut d_feat);

    let mut d = d_feat;
    for i in (0..params.layers.len()).rev() {
        let cache = &pass.caches[i];
        let norm = &params.norms[i];
        let width = cache.gate.cols;

        // Through dropout and ReLU.
        let mut dy = Mat::zeros(batch, width);
        for n in 0..batch * width {
            dy.data[n] = d.data[n] * cache.gate.data[n];
        }

        // Through batch normalization.
        let mut dz = Mat::zeros(batch, width);
        for o in 0..width {
            let istd = 1.0 / (cache.var[o] + BN_EPS).sqrt();
            let mut dg = 0.0;
            let mut db = 0.0;
            for b in 0..batch {
                let idx = b * width + o;
                dg += dy.data[idx] * cache.xhat.data[idx];
                db += dy.data[idx];
            }
            grads.norms[i].gamma[o] = dg;
            grads.norms[i].beta[o] = db;
            if pass.train_stats {
                let m = batch as f64;
                // The sums over dxhat and dxhat * xhat are dg and db scaled
                // by gamma.
                let sum1 = db * norm.gamma[o];
                let sum2 = dg * norm.gamma[o];
                for b in 0..batch {
                    let idx = b * width + o;
                    let dxhat = dy.data[idx] * norm.gamma[o];
                    dz.data[idx] =
                        istd * (dxhat - sum1 / m - cache.xhat.data[idx] * sum2 / m);
                }
            } else {
                for b in 0..batch {
                    let idx = b * width + o;
                    dz.data[idx] = dy.data[idx] * norm.gamma[o] * istd;
                }
            }
        }

        // Through the dense layer, plus the identity branch of the skip.
        let mut d_input = Mat::zeros(batch, cache.input.cols);
        dense_backward(&cache.input, &dz, &params.layers[i], &mut grads.layers[i], &mut d_input);
        if residual_at == Some(i) {
            for (di, up) in d_input.data.iter_mut().zip(&d.data) {
                *di += up;
            }
        }
        d = d_input;
    }
    grads
}

/// Batch-mean loss of an evaluation-mode forward pass.
pub(crate) fn batch_loss(
    params: &StudentParams,
    x: &Mat,
    teacher: &Mat,
    truth_ratios: &Mat,
    truth_presence: &Mat,
    cfg: &TrainConfig,
) -> LossBreakdown {
    let pass = forward_batch(params, x, ForwardMode::Eval, 0.0);
    let (breakdown, _, _) = loss_and_head_grads(&pass, teacher, truth_ratios, truth_presence, cfg);
    breakdown
}

/// One training step's forward, loss, and backward on a batch. In training
/// mode the running statistics are folded in as a side effect.
pub(crate) fn batch_step(
    params: &mut StudentParams,
    x: &Mat,
    teacher: &Mat,
    truth_ratios: &Mat,
    truth_presence: &Mat,
    cfg: &TrainConfig,
    dropout_rng: Option<&mut SeededRng>,
) -> (LossBreakdown, StudentParams) {
    let pass = match dropout_rng {
        Some(rng) => forward_batch(params, x, ForwardMode::Train(rng), cfg.dropout),
        None => forward_batch(params, x, ForwardMode::Eval, 0.0),
    };
    let (breakdown, dzr, dzp) = loss_and_head_grads(&pass, teacher, truth_ratios, truth_presence, cfg);
    let grads = backward_batch(params, &pass, &dzr, &dzp);
    if pass.train_stats {
        update_running_stats(params, &pass);
    }
    (breakdown, grads)
}

/// Prediction from the two heads.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentPredict {
    /// Ratios renormalized over the detected components; zeros elsewhere.
    pub ratios: Vec<f64>,
    /// Per-component detection flags from the presence head.
    pub presence: Vec<bool>,
}

/// Runs the student on one fingerprint. Components whose presence
/// probability reaches 0.5 form the detected set and the ratio mass is
/// renormalized over it; an empty set falls back to the largest ratio.
pub fn predict(params: &StudentParams, fingerprint: &[f64]) -> Result<StudentPredict, LearnError> {
    if fingerprint.len() != params.arch.input_len {
        return Err(LearnError::ShapeMismatch("fingerprint length vs network input"));
    }
    if fingerprint.iter().any(|v| !v.is_finite()) {
        return Err(LearnError::NonFinite("fingerprint"));
    }
    let x = Mat::from_vec(1, fingerprint.len(), fingerprint.to_vec());
    let pass = forward_batch(params, &x, ForwardMode::Eval, 0.0);
    let c = params.arch.outputs;
    let mut presence: Vec<bool> = (0..c).map(|j| pass.presence.data[j] >= 0.5).collect();
    if presence.iter().all(|&p| !p) {
        let argmax = (0..c)
            .max_by(|&a, &b| pass.ratios.data[a].total_cmp(&pass.ratios.data[b]))
            .expect("outputs >= 2");
        presence[argmax] = true;
    }
    let mut ratios = vec![0.0; c];
    let mut mass = 0.0;
    for j in 0..c {
        if presence[j] {
            ratios[j] = pass.ratios.data[j];
            mass += ratios[j];
        }
    }
    for r in &mut ratios {
        *r /= mass;
    }
    Ok(StudentPredict { ratios, presence })
}

fn gradcheck_config(ratio_loss: RatioLoss, residual: bool) -> TrainConfig {
    TrainConfig {
        arch: StudentArch { input_len: 8, hidden: vec![4, 4], outputs: 4, residual },
        ratio_loss,
        ..TrainConfig::default()
    }
}

fn random_simplex(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.uniform_in(0.05, 1.0)).collect();
    let sum: f64 = v.iter().sum();
    for x in &mut v {
        *x /= sum;
    }
    v
}

fn gradcheck_impl(coords: usize, seed: u64, ratio_loss: RatioLoss, residual: bool) -> f64 {
    let cfg = gradcheck_config(ratio_loss, residual);
    let mut rng = SeededRng::new(seed);
    let mut params = init_student(&cfg.arch, derive_seed(seed, 0)).expect("tiny arch is valid");

    // Roughen every parameter group so no gradient path is trivially flat.
    for layer in params.layers.iter_mut().chain([&mut params.ratio_head, &mut params.presence_head]) {
        for b in &mut layer.b {
            *b = 0.2 * rng.normal();
        }
    }
    for norm in &mut params.norms {
        for g in &mut norm.gamma {
            *g = rng.uniform_in(0.6, 1.4);
        }
        for b in &mut norm.beta {
            *b = 0.2 * rng.normal();
        }
        for m in &mut norm.running_mean {
            *m = 0.3 * rng.normal();
        }
        for v in &mut norm.running_var {
            *v = rng.uniform_in(0.5, 1.5);
        }
    }

    let batch = 4;
    let c = cfg.arch.outputs;
    let x = Mat::from_vec(
        batch,
        cfg.arch.input_len,
        (0..batch * cfg.arch.input_len).map(|_| rng.normal()).collect(),
    );
    let mut teacher = Mat::zeros(batch, c);
    let mut truth_r = Mat::zeros(batch, c);
    let mut truth_p = Mat::zeros(batch, c);
    for b in 0..batch {
        let t = random_simplex(&mut rng, c);
        let r = random_simplex(&mut rng, c);
        for j in 0..c {
            teacher.data[b * c + j] = t[j];
            truth_r.data[b * c + j] = r[j];
            truth_p.data[b * c + j] = if rng.uniform() < 0.5 { 0.0 } else { 1.0 };
        }
    }

    // Analytic gradient in evaluation mode matches the loss the numeric
    // probe evaluates (no dropout, running statistics).
    let pass = forward_batch(&params, &x, ForwardMode::Eval, 0.0);
    let (_, dzr, dzp) = loss_and_head_grads(&pass, &teacher, &truth_r, &truth_p, &cfg);
    let grads = backward_batch(&params, &pass, &dzr, &dzp);
    let gflat = flatten_params(&grads);
    let classes = param_classes(&params);
    let trained: Vec<usize> = (0..classes.len())
        .filter(|&i| classes[i] != ParamClass::RunningStat)
        .collect();

    let flat = flatten_params(&params);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..coords {
        let idx = trained[rng.index(trained.len())];
        let mut probe = flat.clone();
        probe[idx] = flat[idx] + h;
        let up = unflatten_params(&cfg.arch, &probe).expect("same shape");
        probe[idx] = flat[idx] - h;
        let down = unflatten_params(&cfg.arch, &probe).expect("same shape");
        let lu = batch_loss(&up, &x, &teacher, &truth_r, &truth_p, &cfg).total;
        let ld = batch_loss(&down, &x, &teacher, &truth_r, &truth_p, &cfg).total;
        let numeric = (lu - ld) / (2.0 * h);
        let analytic = gflat[idx];
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    worst
}

/// Compares analytic gradients against central differences on a fixed tiny
/// network (8 inputs, 4-4 hidden with a skip, 4 outputs, batch of 4,
/// evaluation-mode normalization) and returns the worst relative error over
/// the sampled coordinates.
pub fn gradient_check(coords: usize, seed: u64) -> f64 {
    gradcheck_impl(coords, seed, RatioLoss::Huber, true)
}
