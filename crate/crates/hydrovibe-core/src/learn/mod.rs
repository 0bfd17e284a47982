//! Teacher-student ratio learning.
//!
//! A random-forest teacher fitted on mixture fingerprints supplies soft
//! ratio targets, and a small batch-normalized network distills them
//! jointly with the hard labels plus a per-component presence head. Both
//! fits are deterministic functions of their config seeds.

mod forest;
mod student;

pub use forest::{
    forest_fit, forest_flatten, forest_predict, forest_restore, ForestConfig, ForestModel,
};
pub use student::{
    flatten_params, gradient_check, huber, init_student, loss_terms, param_classes, predict,
    unflatten_params, BatchNorm, DenseLayer, LossBreakdown, ParamClass, RatioLoss, StudentArch,
    StudentParams, StudentPredict,
};

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use crate::la::Mat;
use crate::rng::{derive_seed, SeededRng};

/// Errors from fitting or evaluating the models.
#[derive(Debug, thiserror::Error)]
pub enum LearnError {
    /// Input dimensions disagree with each other or with the model.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    /// Not enough samples to fit anything meaningful.
    #[error("too few samples: {0}")]
    TooFewSamples(usize),
    /// A config field is out of its documented range.
    #[error("bad config: {0}")]
    BadConfig(&'static str),
    /// An input value is NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    /// The training loss left the finite range.
    #[error("training diverged at epoch {epoch}")]
    Divergence {
        /// Epoch index at which the loss stopped being finite.
        epoch: usize,
    },
    /// The holdout split left one side empty.
    #[error("empty {0} split")]
    EmptySplit(&'static str),
}

/// One labeled training example.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    /// Feature vector; length must match the network input.
    pub fingerprint: Vec<f64>,
    /// Ground-truth mixing ratios on the simplex.
    pub ratios: Vec<f64>,
    /// Ground-truth presence indicators, 0.0 or 1.0 per component.
    pub presence: Vec<f64>,
    /// Holdout stratum key; samples sharing a key split together.
    pub stratum: u64,
}

/// Student training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Network shape.
    pub arch: StudentArch,
    /// Ratio error variant.
    pub ratio_loss: RatioLoss,
    /// Weight of the distillation divergence; 1 - alpha goes to the ratio
    /// error.
    pub alpha: f64,
    /// Weight of the presence cross-entropy.
    pub beta: f64,
    /// Corner of the Huber ratio error.
    pub huber_delta: f64,
    /// Dropout rate applied after each hidden activation during training.
    pub dropout: f64,
    /// Top of the one-cycle learning-rate schedule.
    pub peak_lr: f64,
    /// Passes over the training split.
    pub epochs: usize,
    /// Samples per optimizer step; trailing singletons are skipped because
    /// batch statistics need at least two rows.
    pub batch_size: usize,
    /// Decoupled weight decay applied to dense weights only.
    pub weight_decay: f64,
    /// Global gradient-norm ceiling.
    pub grad_clip_norm: f64,
    /// Fraction of samples held out per stratum for checkpoint selection.
    pub val_fraction: f64,
    /// Seed for the split, the init, the batch order, and dropout.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            arch: StudentArch::default(),
            ratio_loss: RatioLoss::Huber,
            alpha: 0.7,
            beta: 0.5,
            huber_delta: 0.1,
            dropout: 0.2,
            peak_lr: 1e-3,
            epochs: 200,
            batch_size: 16,
            weight_decay: 1e-6,
            grad_clip_norm: 1.0,
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Checks every field is in range.
    pub fn validate(&self) -> Result<(), LearnError> {
        self.arch.validate()?;
        if !(0.0..=1.0).contains(&self.alpha) || self.beta < 0.0 {
            return Err(LearnError::BadConfig("alpha must be in [0, 1] and beta >= 0"));
        }
        if self.huber_delta <= 0.0 {
            return Err(LearnError::BadConfig("huber_delta must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(LearnError::BadConfig("dropout must be in [0, 1)"));
        }
        if self.peak_lr <= 0.0 || self.grad_clip_norm <= 0.0 || self.weight_decay < 0.0 {
            return Err(LearnError::BadConfig(
                "peak_lr and grad_clip_norm must be positive, weight_decay non-negative",
            ));
        }
        if self.epochs == 0 || self.batch_size < 2 {
            return Err(LearnError::BadConfig("need epochs >= 1 and batch_size >= 2"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(LearnError::BadConfig("val_fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    /// Mean training loss per epoch.
    pub train_loss: Vec<f64>,
    /// Holdout loss per epoch.
    pub val_loss: Vec<f64>,
    /// Epoch whose holdout loss won the checkpoint.
    pub best_epoch: usize,
    /// Optimizer steps taken in total.
    pub total_steps: usize,
}

/// Checkpointed parameters plus the training record.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedStudent {
    /// Parameters from the best-holdout epoch.
    pub params: StudentParams,
    /// Loss history.
    pub log: TrainLog,
}

/// Splits sample indices into train and holdout sets, drawing a rounded
/// `val_fraction` share from every stratum so each mixture type is
/// represented on both sides. Deterministic given the inputs and seed;
/// each stratum keeps at least one training sample.
pub fn stratified_split(
    strata: &[u64],
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), LearnError> {
    if strata.is_empty() {
        return Err(LearnError::TooFewSamples(0));
    }
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(LearnError::BadConfig("val_fraction must lie in (0, 1)"));
    }
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, &s) in strata.iter().enumerate() {
        groups.entry(s).or_default().push(i);
    }
    let mut rng = SeededRng::new(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for members in groups.into_values() {
        let mut members = members;
        rng.shuffle(&mut members);
        let want = (val_fraction * members.len() as f64).round() as usize;
        let k = want.min(members.len() - 1);
        val.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    if val.is_empty() {
        return Err(LearnError::EmptySplit("holdout"));
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// The exact holdout split [`train_student`] will use for this config, so
/// callers can fit auxiliary models on the same training rows.
pub fn train_val_split(
    strata: &[u64],
    cfg: &TrainConfig,
) -> Result<(Vec<usize>, Vec<usize>), LearnError> {
    stratified_split(strata, cfg.val_fraction, derive_seed(cfg.seed, 1))
}

/// One-cycle learning rate: a linear ramp from one increment up to the peak
/// over the first 30% of steps, then a cosine decay down to peak / 100.
pub fn one_cycle_lr(step: usize, total_steps: usize, peak: f64) -> f64 {
    debug_assert!(step < total_steps);
    let ramp = (0.3 * total_steps as f64).round() as usize;
    if step < ramp {
        return peak * (step + 1) as f64 / ramp as f64;
    }
    let end = peak / 100.0;
    let span = total_steps - ramp;
    if span <= 1 {
        return end;
    }
    let progress = (step - ramp) as f64 / (span - 1) as f64;
    end + 0.5 * (peak - end) * (1.0 + (core::f64::consts::PI * progress).cos())
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(count: usize) -> Self {
        Adam { m: vec![0.0; count], v: vec![0.0; count], t: 0 }
    }

    /// Applies one clipped Adam step with decoupled weight decay on dense
    /// weights. `grads` must be the canonical flattening of the gradient.
    fn step(
        &mut self,
        params: &mut StudentParams,
        grads: &[f64],
        lr: f64,
        weight_decay: f64,
        clip_norm: f64,
    ) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let norm: f64 = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
        let scale = if norm > clip_norm { clip_norm / norm } else { 1.0 };
        let bias1 = 1.0 - B1.powi(self.t);
        let bias2 = 1.0 - B2.powi(self.t);
        let (m, v) = (&mut self.m, &mut self.v);
        let mut idx = 0;
        params.visit_params_mut(|class, p| {
            let g = grads[idx] * scale;
            if class != ParamClass::RunningStat {
                m[idx] = B1 * m[idx] + (1.0 - B1) * g;
                v[idx] = B2 * v[idx] + (1.0 - B2) * g * g;
                let mhat = m[idx] / bias1;
                let vhat = v[idx] / bias2;
                *p -= lr * mhat / (vhat.sqrt() + EPS);
                if class == ParamClass::Weight {
                    *p -= lr * weight_decay * *p;
                }
            }
            idx += 1;
        });
    }
}

fn gather_rows(samples: &[TrainSample], idx: &[usize], pick: impl Fn(&TrainSample) -> &[f64]) -> Mat {
    let cols = pick(&samples[idx[0]]).len();
    let mut m = Mat::zeros(idx.len(), cols);
    for (r, &i) in idx.iter().enumerate() {
        m.data[r * cols..(r + 1) * cols].copy_from_slice(pick(&samples[i]));
    }
    m
}

fn gather_teacher(teacher: &[Vec<f64>], idx: &[usize]) -> Mat {
    let cols = teacher[idx[0]].len();
    let mut m = Mat::zeros(idx.len(), cols);
    for (r, &i) in idx.iter().enumerate() {
        m.data[r * cols..(r + 1) * cols].copy_from_slice(&teacher[i]);
    }
    m
}

/// Distills the teacher targets into a student network.
///
/// `teacher` holds one soft ratio distribution per sample, aligned with
/// `samples`. The routine splits the data per stratum, runs Adam with the
/// one-cycle schedule and global gradient clipping, and returns the
/// parameters from the epoch with the lowest holdout loss. The whole run
/// is a deterministic function of the inputs and `cfg.seed`.
pub fn train_student(
    samples: &[TrainSample],
    teacher: &[Vec<f64>],
    cfg: &TrainConfig,
) -> Result<TrainedStudent, LearnError> {
    cfg.validate()?;
    if samples.len() != teacher.len() {
        return Err(LearnError::ShapeMismatch("sample and teacher target counts differ"));
    }
    if samples.len() < 4 {
        return Err(LearnError::TooFewSamples(samples.len()));
    }
    let c = cfg.arch.outputs;
    for (s, t) in samples.iter().zip(teacher) {
        if s.fingerprint.len() != cfg.arch.input_len {
            return Err(LearnError::ShapeMismatch("fingerprint length vs network input"));
        }
        if s.ratios.len() != c || s.presence.len() != c || t.len() != c {
            return Err(LearnError::ShapeMismatch("target lengths vs network outputs"));
        }
        let finite = s.fingerprint.iter().chain(&s.ratios).chain(&s.presence).chain(t);
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Err(LearnError::NonFinite("training data"));
        }
        if s.presence.iter().any(|&p| p != 0.0 && p != 1.0) {
            return Err(LearnError::BadConfig("presence targets must be 0 or 1"));
        }
    }

    let strata: Vec<u64> = samples.iter().map(|s| s.stratum).collect();
    let (train_idx, val_idx) = train_val_split(&strata, cfg)?;
    if train_idx.len() < 2 {
        return Err(LearnError::EmptySplit("training"));
    }

    let val_x = gather_rows(samples, &val_idx, |s| &s.fingerprint);
    let val_t = gather_teacher(teacher, &val_idx);
    let val_r = gather_rows(samples, &val_idx, |s| &s.ratios);
    let val_p = gather_rows(samples, &val_idx, |s| &s.presence);

    let full_batches = train_idx.len() / cfg.batch_size;
    let remainder = train_idx.len() % cfg.batch_size;
    let batches_per_epoch = full_batches + usize::from(remainder >= 2);
    if batches_per_epoch == 0 {
        return Err(LearnError::EmptySplit("training"));
    }
    let total_steps = cfg.epochs * batches_per_epoch;

    let mut params = init_student(&cfg.arch, derive_seed(cfg.seed, 2))?;
    let mut order_rng = SeededRng::new(derive_seed(cfg.seed, 3));
    let mut dropout_rng = SeededRng::new(derive_seed(cfg.seed, 4));
    let mut adam = Adam::new(params.param_count());

    let mut log = TrainLog {
        train_loss: Vec::with_capacity(cfg.epochs),
        val_loss: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        total_steps,
    };
    let mut best = f64::INFINITY;
    let mut best_params = params.clone();
    let mut step = 0usize;
    let mut order = train_idx.clone();

    for epoch in 0..cfg.epochs {
        order_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let x = gather_rows(samples, chunk, |s| &s.fingerprint);
            let t = gather_teacher(teacher, chunk);
            let r = gather_rows(samples, chunk, |s| &s.ratios);
            let p = gather_rows(samples, chunk, |s| &s.presence);
            let (breakdown, grads) =
                student::batch_step(&mut params, &x, &t, &r, &p, cfg, Some(&mut dropout_rng));
            if !breakdown.total.is_finite() {
                return Err(LearnError::Divergence { epoch });
            }
            let gflat = flatten_params(&grads);
            let lr = one_cycle_lr(step, total_steps, cfg.peak_lr);
            adam.step(&mut params, &gflat, lr, cfg.weight_decay, cfg.grad_clip_norm);
            epoch_loss += breakdown.total * chunk.len() as f64;
            seen += chunk.len();
            step += 1;
        }
        log.train_loss.push(epoch_loss / seen as f64);

        let val = student::batch_loss(&params, &val_x, &val_t, &val_r, &val_p, cfg);
        if !val.total.is_finite() {
            return Err(LearnError::Divergence { epoch });
        }
        log.val_loss.push(val.total);
        if val.total < best {
            best = val.total;
            best_params = params.clone();
            log.best_epoch = epoch;
        }
    }

    Ok(TrainedStudent { params: best_params, log })
}

#[cfg(test)]
mod tests {
    use super::*;

    // --- 1. schedule ---

    #[test]
    fn one_cycle_hits_the_documented_endpoints() {
        let total = 2400;
        let peak = 1e-3;
        let ramp = 720;
        assert!((one_cycle_lr(0, total, peak) - peak / ramp as f64).abs() < 1e-18);
        assert!((one_cycle_lr(ramp - 1, total, peak) - peak).abs() < 1e-18);
        let last = one_cycle_lr(total - 1, total, peak);
        assert!((last - 1e-5).abs() < 1e-8, "final lr {last}");
    }

    #[test]
    fn one_cycle_ramps_then_decays() {
        let total = 1000;
        let peak = 2e-3;
        let ramp = 300;
        for t in 1..ramp {
            assert!(one_cycle_lr(t, total, peak) > one_cycle_lr(t - 1, total, peak));
        }
        for t in ramp + 1..total {
            assert!(one_cycle_lr(t, total, peak) <= one_cycle_lr(t - 1, total, peak));
        }
        // The ramp may sit below the decay floor, but nothing exceeds the
        // peak and the tail never drops below peak / 100.
        let floor = peak / 100.0;
        for t in 0..total {
            assert!(one_cycle_lr(t, total, peak) <= peak + 1e-18);
        }
        for t in ramp..total {
            assert!(one_cycle_lr(t, total, peak) >= floor - 1e-18);
        }
    }

    // --- 2. split ---

    fn mixture_like_strata() -> Vec<u64> {
        // Five singles of 3 replicates, ten pairs of 9, ten triples of 12.
        let mut strata = Vec::new();
        for s in 0..5u64 {
            strata.extend([s; 3]);
        }
        for s in 0..10u64 {
            strata.extend([100 + s; 9]);
        }
        for s in 0..10u64 {
            strata.extend([200 + s; 12]);
        }
        strata
    }

    #[test]
    fn split_draws_a_rounded_share_from_every_stratum() {
        let strata = mixture_like_strata();
        assert_eq!(strata.len(), 225);
        let (train, val) = stratified_split(&strata, 0.2, 9).unwrap();
        assert_eq!(val.len(), 45);
        assert_eq!(train.len(), 180);
        let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..225).collect::<Vec<_>>());
        // Every stratum appears on both sides.
        for side in [&train, &val] {
            let mut seen: Vec<u64> = side.iter().map(|&i| strata[i]).collect();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), 25);
        }
    }

    #[test]
    fn split_is_deterministic_and_seed_sensitive() {
        let strata = mixture_like_strata();
        let a = stratified_split(&strata, 0.2, 5).unwrap();
        let b = stratified_split(&strata, 0.2, 5).unwrap();
        assert_eq!(a, b);
        let c = stratified_split(&strata, 0.2, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn split_keeps_a_training_sample_per_stratum() {
        let strata = vec![1, 1, 2, 2];
        let (train, _val) = stratified_split(&strata, 0.5, 0).unwrap();
        let mut kinds: Vec<u64> = train.iter().map(|&i| strata[i]).collect();
        kinds.sort_unstable();
        kinds.dedup();
        assert_eq!(kinds, vec![1, 2]);
    }

    // --- 3. training ---

    fn cluster_task(seed: u64, n_per: usize) -> (Vec<TrainSample>, Vec<Vec<f64>>) {
        let mut rng = SeededRng::new(seed);
        let centers: Vec<Vec<f64>> =
            (0..3).map(|k| (0..12).map(|_| rng.uniform() + 2.0 * k as f64).collect()).collect();
        let mut samples = Vec::new();
        for k in 0..3usize {
            for _ in 0..n_per {
                let fingerprint =
                    centers[k].iter().map(|c| c + 0.1 * rng.normal()).collect::<Vec<f64>>();
                let mut ratios = vec![0.05, 0.05, 0.05];
                ratios[k] = 0.9;
                let presence = vec![1.0, 1.0, 1.0];
                samples.push(TrainSample { fingerprint, ratios, presence, stratum: k as u64 });
            }
        }
        let teacher = samples.iter().map(|s| s.ratios.clone()).collect();
        (samples, teacher)
    }

    fn tiny_train_cfg() -> TrainConfig {
        TrainConfig {
            arch: StudentArch { input_len: 12, hidden: vec![16, 8, 8], outputs: 3, residual: true },
            epochs: 40,
            batch_size: 8,
            dropout: 0.1,
            seed: 11,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn training_reduces_loss_and_checkpoints_the_best_epoch() {
        let (samples, teacher) = cluster_task(401, 12);
        let cfg = tiny_train_cfg();
        let fitted = train_student(&samples, &teacher, &cfg).unwrap();
        let log = &fitted.log;
        assert_eq!(log.train_loss.len(), cfg.epochs);
        assert_eq!(log.val_loss.len(), cfg.epochs);
        let early: f64 = log.train_loss[..5].iter().sum::<f64>() / 5.0;
        let late: f64 = log.train_loss[cfg.epochs - 5..].iter().sum::<f64>() / 5.0;
        assert!(late < early, "late {late} vs early {early}");
        let min = log.val_loss.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(log.val_loss[log.best_epoch], min);
        assert!(flatten_params(&fitted.params).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn trained_student_solves_the_cluster_task() {
        let (samples, teacher) = cluster_task(402, 12);
        let cfg = tiny_train_cfg();
        let fitted = train_student(&samples, &teacher, &cfg).unwrap();
        let mut hits = 0;
        for k in 0..3usize {
            // Fresh draws from the same clusters.
            let probe = &samples[k * 12 + 3].fingerprint;
            let got = predict(&fitted.params, probe).unwrap();
            let arg = (0..3).max_by(|&a, &b| got.ratios[a].total_cmp(&got.ratios[b])).unwrap();
            hits += usize::from(arg == k);
        }
        assert_eq!(hits, 3);
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let (samples, teacher) = cluster_task(403, 10);
        let mut cfg = tiny_train_cfg();
        cfg.epochs = 10;
        let a = train_student(&samples, &teacher, &cfg).unwrap();
        let b = train_student(&samples, &teacher, &cfg).unwrap();
        let fa = flatten_params(&a.params);
        let fb = flatten_params(&b.params);
        assert_eq!(fa.len(), fb.len());
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn runaway_learning_rate_reports_divergence() {
        let (samples, teacher) = cluster_task(404, 10);
        let mut cfg = tiny_train_cfg();
        cfg.epochs = 5;
        cfg.peak_lr = 1e200;
        cfg.weight_decay = 1.0;
        match train_student(&samples, &teacher, &cfg) {
            Err(LearnError::Divergence { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn clipped_gradient_norm_lands_on_the_ceiling() {
        let grads = vec![3.0, 4.0];
        let norm: f64 = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
        let clip = 1.0;
        let scale = if norm > clip { clip / norm } else { 1.0 };
        let clipped: f64 = grads.iter().map(|g| g * scale * g * scale).sum::<f64>().sqrt();
        assert!((clipped - clip).abs() < 1e-9);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let (samples, teacher) = cluster_task(405, 10);
        let cfg = tiny_train_cfg();

        let mut short = samples.clone();
        short.truncate(3);
        assert!(matches!(
            train_student(&short, &teacher[..3].to_vec(), &cfg),
            Err(LearnError::TooFewSamples(3))
        ));

        assert!(train_student(&samples, &teacher[..5].to_vec(), &cfg).is_err());

        let mut bad = samples.clone();
        bad[0].presence[0] = 0.5;
        assert!(train_student(&bad, &teacher, &cfg).is_err());

        let mut nan = samples.clone();
        nan[0].fingerprint[0] = f64::NAN;
        assert!(train_student(&nan, &teacher, &cfg).is_err());

        let mut cfg_bad = cfg.clone();
        cfg_bad.alpha = 1.5;
        assert!(train_student(&samples, &teacher, &cfg_bad).is_err());
    }
}
