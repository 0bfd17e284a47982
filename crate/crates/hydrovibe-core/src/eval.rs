//! Metrics, baselines, and the comparison harness over the full pipeline.
//!
//! Everything here is pure computation on in-memory records so callers can
//! schedule the heavy per-sample work however they like: this module owns
//! the score definitions, the principal-component baseline, the unmixing
//! method comparison, the feature and architecture ablation configs, and a
//! single-call pipeline driver. File formats and parallelism live in the
//! companion crate.
//!
//! Ratio errors are pooled: squared errors of all present components of all
//! samples of one type go into a single mean before the square root. Reports
//! carry that convention to their consumers.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use crate::dsp::{build_tensor, DspError, TensorOptions};
use crate::la::{dot, norm, sym_eigen, Mat};
use crate::learn::{
    forest_fit, forest_predict, train_student, train_val_split, ForestConfig, ForestModel,
    LearnError, StudentArch, StudentParams, TrainConfig, TrainLog, TrainSample,
};
use crate::rng::{derive_seed, name_seed};
use crate::synth::{
    dataset_specs, generate_capture, DatasetManifest, PollutantModel, SampleKind, SampleSpec,
    SynthError,
};
use crate::tensor::{parafac, Fingerprint, ParafacOptions, Tensor3, TensorError};
use crate::unmix::{build_dictionary, mixture_ratios, simplex_solve, Dictionary, UnmixError};

/// Components a mixture fingerprint is padded to before it becomes a
/// feature vector.
pub const FEATURE_RANK: usize = 3;

/// Seed substream of a sample reserved for its decomposition restarts.
const STREAM_PARAFAC: u64 = 3;

/// Errors from the evaluation harness.
#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    /// Input collections disagree in length or width.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    /// Nothing to evaluate.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    /// Requested projection rank cannot be supported by the data.
    #[error("bad projection: {0}")]
    BadProjection(&'static str),
    /// A material has no pure replicates to calibrate from.
    #[error("no pure samples for material {0}")]
    MissingPure(String),
    /// Synthesis failure.
    #[error(transparent)]
    Synth(#[from] SynthError),
    /// Signal-processing failure.
    #[error(transparent)]
    Dsp(#[from] DspError),
    /// Decomposition failure.
    #[error(transparent)]
    Tensor(#[from] TensorError),
    /// Unmixing failure.
    #[error(transparent)]
    Unmix(#[from] UnmixError),
    /// Model fitting failure.
    #[error(transparent)]
    Learn(#[from] LearnError),
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

/// Detection scores of one component class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScores {
    /// Share of samples where the predicted flag matches the true flag.
    pub accuracy: f64,
    /// TP / (TP + FP), 0 when nothing was predicted positive.
    pub precision: f64,
    /// TP / (TP + FN), 0 when nothing is truly positive.
    pub recall: f64,
    /// 2PR / (P + R), 0 when P + R = 0.
    pub f1: f64,
}

/// Multi-label detection scores over all classes.
#[derive(Debug, Clone, PartialEq)]
pub struct PresenceScores {
    /// Per-class tallies.
    pub per_class: Vec<ClassScores>,
    /// Mean per-class accuracy.
    pub macro_accuracy: f64,
    /// Mean per-class precision.
    pub macro_precision: f64,
    /// Mean per-class recall.
    pub macro_recall: f64,
    /// Mean per-class F1.
    pub macro_f1: f64,
    /// Share of samples whose full label set matches exactly.
    pub subset_accuracy: f64,
}

/// Ratio RMSE pooled over present components, split by sample type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmseByType {
    /// Single-component samples.
    pub pure: Option<f64>,
    /// Two-component samples.
    pub binary: Option<f64>,
    /// Three-component samples.
    pub ternary: Option<f64>,
    /// All samples pooled.
    pub overall: Option<f64>,
}

/// Run identity attached to every report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunMeta {
    /// Root seed of the evaluated run.
    pub seed: u64,
    /// Hash of the full configuration, for pairing reports with their setup.
    pub config_hash: u64,
}

/// Detection scores plus ratio errors plus run identity.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Multi-label detection scores.
    pub presence: PresenceScores,
    /// Ratio RMSE by sample type.
    pub rmse: RmseByType,
    /// Root seed of the run.
    pub seed: u64,
    /// Configuration hash of the run.
    pub config_hash: u64,
}

/// Per-class and subset detection scores over aligned prediction and truth
/// flag vectors.
pub fn multilabel_metrics(
    predicted: &[Vec<bool>],
    truth: &[Vec<bool>],
) -> Result<PresenceScores, EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::ShapeMismatch("prediction and truth counts differ"));
    }
    if predicted.is_empty() {
        return Err(EvalError::EmptyInput("no samples to score"));
    }
    let classes = truth[0].len();
    if classes == 0 {
        return Err(EvalError::EmptyInput("no classes to score"));
    }
    for (p, t) in predicted.iter().zip(truth) {
        if p.len() != classes || t.len() != classes {
            return Err(EvalError::ShapeMismatch("ragged class vectors"));
        }
    }

    let n = predicted.len() as f64;
    let mut per_class = Vec::with_capacity(classes);
    for j in 0..classes {
        let mut tp = 0.0;
        let mut fp = 0.0;
        let mut fn_ = 0.0;
        let mut tn = 0.0;
        for (p, t) in predicted.iter().zip(truth) {
            match (p[j], t[j]) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fn_ += 1.0,
                (false, false) => tn += 1.0,
            }
        }
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.push(ClassScores { accuracy: (tp + tn) / n, precision, recall, f1 });
    }

    let subset = predicted.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / n;
    let mean = |f: fn(&ClassScores) -> f64| -> f64 {
        per_class.iter().map(f).sum::<f64>() / classes as f64
    };
    Ok(PresenceScores {
        macro_accuracy: mean(|c| c.accuracy),
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        subset_accuracy: subset,
        per_class,
    })
}

/// Ratio RMSE over components with true ratio > 0, pooled within each
/// sample type and overall.
pub fn rmse_present(
    predicted: &[Vec<f64>],
    truth: &[Vec<f64>],
    kinds: &[SampleKind],
) -> Result<RmseByType, EvalError> {
    if predicted.len() != truth.len() || predicted.len() != kinds.len() {
        return Err(EvalError::ShapeMismatch("prediction, truth, and kind counts differ"));
    }
    if predicted.is_empty() {
        return Err(EvalError::EmptyInput("no samples to score"));
    }
    let mut sums = [0.0f64; 3];
    let mut counts = [0usize; 3];
    for ((p, t), &kind) in predicted.iter().zip(truth).zip(kinds) {
        if p.len() != t.len() {
            return Err(EvalError::ShapeMismatch("ragged ratio vectors"));
        }
        let slot = match kind {
            SampleKind::Pure => 0,
            SampleKind::Binary => 1,
            SampleKind::Ternary => 2,
        };
        for (pi, ti) in p.iter().zip(t) {
            if *ti > 0.0 {
                sums[slot] += (pi - ti) * (pi - ti);
                counts[slot] += 1;
            }
        }
    }
    let finish = |sum: f64, count: usize| -> Option<f64> {
        (count > 0).then(|| (sum / count as f64).sqrt())
    };
    Ok(RmseByType {
        pure: finish(sums[0], counts[0]),
        binary: finish(sums[1], counts[1]),
        ternary: finish(sums[2], counts[2]),
        overall: finish(sums.iter().sum(), counts.iter().sum()),
    })
}

/// Presence flags from a ratio vector: detected when the share reaches the
/// threshold.
pub fn presence_from_ratios(ratios: &[f64], threshold: f64) -> Vec<bool> {
    ratios.iter().map(|&r| r >= threshold).collect()
}

// ---------------------------------------------------------------------------
// principal components
// ---------------------------------------------------------------------------

/// Centered principal-component projection fitted by the Gram-matrix trick,
/// so the cost scales with the sample count rather than the feature length.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    /// Training mean, subtracted before projection.
    pub mean: Vec<f64>,
    /// Orthonormal component directions, one per row.
    pub components: Mat,
    /// Data variance captured by each component.
    pub variances: Vec<f64>,
}

/// Fits `k` principal components to the rows.
pub fn pca_fit(rows: &[Vec<f64>], k: usize) -> Result<Pca, EvalError> {
    let n = rows.len();
    if n < 2 {
        return Err(EvalError::EmptyInput("principal components need >= 2 rows"));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(EvalError::ShapeMismatch("ragged feature rows"));
    }
    if k == 0 || k > d || k > n - 1 {
        return Err(EvalError::BadProjection("component count vs data size"));
    }

    let mut mean = vec![0.0; d];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n as f64;
        }
    }
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| row.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();

    // Gram matrix of the centered rows; its eigenvectors give the
    // principal directions after mapping back through the data.
    let mut gram = Mat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let g = dot(&centered[i], &centered[j]);
            gram.set(i, j, g);
            gram.set(j, i, g);
        }
    }
    let (values, vectors) = sym_eigen(&gram, 40);
    let floor = values[0].max(0.0) * 1e-12;
    if values.iter().take(k).any(|&v| v <= floor) {
        return Err(EvalError::BadProjection("not enough variance directions in the data"));
    }

    let mut components = Mat::zeros(k, d);
    for c in 0..k {
        let coeffs = vectors.col(c);
        let row = &mut components.data[c * d..(c + 1) * d];
        for (i, x) in centered.iter().enumerate() {
            let w = coeffs[i];
            for (r, v) in row.iter_mut().zip(x) {
                *r += w * v;
            }
        }
    }
    // Orthonormalize the mapped directions; they are orthogonal in exact
    // arithmetic, this pins them down numerically.
    for c in 0..k {
        for prev in 0..c {
            let proj = dot(
                &components.data[c * d..(c + 1) * d].to_vec(),
                components.row(prev),
            );
            for i in 0..d {
                components.data[c * d + i] -= proj * components.data[prev * d + i];
            }
        }
        let len = norm(components.row(c));
        if len <= 1e-300 {
            return Err(EvalError::BadProjection("degenerate component direction"));
        }
        for i in 0..d {
            components.data[c * d + i] /= len;
        }
        // Deterministic sign: the largest-magnitude coordinate is positive.
        let lead = (0..d)
            .max_by(|&a, &b| {
                components.data[c * d + a].abs().total_cmp(&components.data[c * d + b].abs())
            })
            .expect("d >= 1");
        if components.data[c * d + lead] < 0.0 {
            for i in 0..d {
                components.data[c * d + i] = -components.data[c * d + i];
            }
        }
    }
    let variances = values.iter().take(k).map(|&v| v / n as f64).collect();
    Ok(Pca { mean, components, variances })
}

impl Pca {
    /// Scores of one row in component space.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        if x.len() != self.mean.len() {
            return Err(EvalError::ShapeMismatch("row length vs fitted dimension"));
        }
        let k = self.components.rows;
        let mut out = vec![0.0; k];
        for c in 0..k {
            let row = self.components.row(c);
            let mut acc = 0.0;
            for i in 0..x.len() {
                acc += row[i] * (x[i] - self.mean[i]);
            }
            out[c] = acc;
        }
        Ok(out)
    }

    /// Back-projection of component scores into feature space.
    pub fn reconstruct(&self, scores: &[f64]) -> Result<Vec<f64>, EvalError> {
        if scores.len() != self.components.rows {
            return Err(EvalError::ShapeMismatch("score length vs component count"));
        }
        let mut out = self.mean.clone();
        for (c, &s) in scores.iter().enumerate() {
            let row = self.components.row(c);
            for (o, r) in out.iter_mut().zip(row) {
                *o += s * r;
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// sample records
// ---------------------------------------------------------------------------

/// Everything the evaluation stages need from one processed sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    /// The sample recipe.
    pub spec: SampleSpec,
    /// Pure / binary / ternary.
    pub kind: SampleKind,
    /// Feature tensor shape (tones, bins, angles).
    pub tensor_dims: (usize, usize, usize),
    /// Row-major flattened feature tensor, for the raw-space baselines.
    pub tensor_flat: Vec<f64>,
    /// Decomposition fingerprint at the sample's component count.
    pub fingerprint: Fingerprint,
    /// Decomposition component weights, descending.
    pub weights: Vec<f64>,
    /// True mixing ratios over the material catalog.
    pub truth_ratios: Vec<f64>,
    /// True presence indicators (0 or 1) over the material catalog.
    pub truth_presence: Vec<f64>,
}

/// Runs one sample through synthesis, tensor assembly, and decomposition.
///
/// The decomposition restarts are seeded from the sample's own seed
/// (substream 3), so records do not depend on processing order and
/// `opts.seed` is ignored here.
pub fn process_sample(
    spec: &SampleSpec,
    manifest: &DatasetManifest,
    tensor_opts: &TensorOptions,
    parafac_opts: &ParafacOptions,
) -> Result<SampleRecord, EvalError> {
    let capture = generate_capture(spec, &manifest.materials, &manifest.capture)?;
    let tensor = build_tensor(&capture, tensor_opts)?;
    record_from_tensor(spec, manifest.materials.len(), &tensor.values, parafac_opts)
}

/// Finishes a record from an already-built feature tensor, so callers that
/// persist tensors can resume the pipeline bit-identically. Decomposition
/// rank is the sample's component count; restarts are seeded from the
/// sample's own seed as in [`process_sample`].
pub fn record_from_tensor(
    spec: &SampleSpec,
    material_count: usize,
    tensor: &Tensor3,
    parafac_opts: &ParafacOptions,
) -> Result<SampleRecord, EvalError> {
    let rank = spec.components.len();
    let opts = ParafacOptions { seed: derive_seed(spec.seed, STREAM_PARAFAC), ..*parafac_opts };
    let factors = parafac(tensor, rank, &opts)?;
    let print = crate::tensor::fingerprint(&factors);
    let (truth_ratios, truth_presence) = truth_vectors(spec, material_count);

    Ok(SampleRecord {
        spec: spec.clone(),
        kind: spec.kind(),
        tensor_dims: tensor.dims(),
        tensor_flat: tensor.data().to_vec(),
        weights: factors.weights.clone(),
        fingerprint: print,
        truth_ratios,
        truth_presence,
    })
}

/// True ratio and presence vectors over the material catalog.
pub fn truth_vectors(spec: &SampleSpec, material_count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut truth_ratios = vec![0.0; material_count];
    for &(idx, ratio) in &spec.components {
        truth_ratios[idx] = ratio;
    }
    let truth_presence = truth_ratios.iter().map(|&r| f64::from(u8::from(r > 0.0))).collect();
    (truth_ratios, truth_presence)
}

/// Processes the whole manifest in canonical order.
pub fn dataset_records(
    manifest: &DatasetManifest,
    tensor_opts: &TensorOptions,
    parafac_opts: &ParafacOptions,
) -> Result<Vec<SampleRecord>, EvalError> {
    dataset_specs(manifest)?
        .iter()
        .map(|spec| process_sample(spec, manifest, tensor_opts, parafac_opts))
        .collect()
}

/// Fixed-length feature vector: the fingerprint padded with zero blocks up
/// to [`FEATURE_RANK`] components.
pub fn build_feature(print: &Fingerprint, block_len: usize) -> Vec<f64> {
    let mut out = vec![0.0; FEATURE_RANK * block_len];
    let take = print.vector.len().min(out.len());
    out[..take].copy_from_slice(&print.vector[..take]);
    out
}

/// Holdout stratum of a sample: its component-count class together with the
/// component set, so every composition splits proportionally. Replicates
/// and ratio variations of the same set share a stratum.
pub fn stratum_key(spec: &SampleSpec) -> u64 {
    let mut ids: Vec<usize> = spec.components.iter().map(|&(idx, _)| idx).collect();
    ids.sort_unstable();
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for id in ids {
        h ^= id as u64 + 1;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Pure-component dictionary from the rank-1 fingerprints of every
/// material's pure replicates.
pub fn pure_dictionary(
    records: &[SampleRecord],
    materials: &[PollutantModel],
) -> Result<Dictionary, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput("no records"));
    }
    let dims = records[0].tensor_dims;
    let mut groups: Vec<(String, Vec<Fingerprint>)> =
        materials.iter().map(|m| (m.name.clone(), Vec::new())).collect();
    for r in records {
        if r.kind == SampleKind::Pure {
            let idx = r.spec.components[0].0;
            groups[idx].1.push(r.fingerprint.clone());
        }
    }
    for (name, prints) in &groups {
        if prints.is_empty() {
            return Err(EvalError::MissingPure(name.clone()));
        }
    }
    Ok(build_dictionary(&groups, (dims.0, dims.1, dims.2))?)
}

// ---------------------------------------------------------------------------
// dictionary unmixing over a record set
// ---------------------------------------------------------------------------

/// Dictionary-unmixing estimates and scores over a record set.
#[derive(Debug, Clone, PartialEq)]
pub struct UnmixReport {
    /// Estimated ratios per record, aligned with the material catalog.
    pub ratios: Vec<Vec<f64>>,
    /// Reconstruction residual per record.
    pub residuals: Vec<f64>,
    /// Detection and ratio scores against the truth.
    pub metrics: MetricsReport,
}

/// Runs dictionary unmixing on every record and scores the estimates.
pub fn unmix_records(
    records: &[SampleRecord],
    materials: &[PollutantModel],
    threshold: f64,
    meta: RunMeta,
) -> Result<UnmixReport, EvalError> {
    let dict = pure_dictionary(records, materials)?;
    unmix_against(&dict, records, threshold, meta)
}

/// Unmixes every record against an already-built dictionary and scores the
/// estimates, so callers can restrict the dictionary to training pures.
pub fn unmix_against(
    dict: &Dictionary,
    records: &[SampleRecord],
    threshold: f64,
    meta: RunMeta,
) -> Result<UnmixReport, EvalError> {
    let mut ratios = Vec::with_capacity(records.len());
    let mut residuals = Vec::with_capacity(records.len());
    for r in records {
        let est = mixture_ratios(dict, &r.fingerprint, &r.weights)?;
        ratios.push(est.ratios);
        residuals.push(est.residual);
    }
    let metrics = score_ratio_predictions(&ratios, records, threshold, meta)?;
    Ok(UnmixReport { ratios, residuals, metrics })
}

fn score_ratio_predictions(
    ratios: &[Vec<f64>],
    records: &[SampleRecord],
    threshold: f64,
    meta: RunMeta,
) -> Result<MetricsReport, EvalError> {
    let predicted: Vec<Vec<bool>> =
        ratios.iter().map(|r| presence_from_ratios(r, threshold)).collect();
    let truth: Vec<Vec<bool>> =
        records.iter().map(|r| r.truth_presence.iter().map(|&p| p > 0.0).collect()).collect();
    let truth_ratios: Vec<Vec<f64>> = records.iter().map(|r| r.truth_ratios.clone()).collect();
    let kinds: Vec<SampleKind> = records.iter().map(|r| r.kind).collect();
    Ok(MetricsReport {
        presence: multilabel_metrics(&predicted, &truth)?,
        rmse: rmse_present(ratios, &truth_ratios, &kinds)?,
        seed: meta.seed,
        config_hash: meta.config_hash,
    })
}

// ---------------------------------------------------------------------------
// teacher and student over a record set
// ---------------------------------------------------------------------------

/// Teacher and student scores plus the training record.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnReport {
    /// Forest scores on the holdout rows.
    pub teacher: MetricsReport,
    /// Student scores on the holdout rows.
    pub student: MetricsReport,
    /// Student loss history.
    pub log: TrainLog,
    /// Learnable coordinate count of the student.
    pub param_count: usize,
}

/// A [`LearnReport`] together with the fitted models behind it, for
/// callers that persist checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnArtifacts {
    /// Scores and training record.
    pub report: LearnReport,
    /// The fitted teacher.
    pub forest: ForestModel,
    /// The checkpointed student parameters.
    pub student: StudentParams,
}

/// Fits the forest teacher and the distilled student on the records and
/// scores both on the shared holdout split.
///
/// With `use_truth_targets` the distillation targets are the ground-truth
/// ratios instead of the teacher's predictions; the teacher is still fitted
/// and scored for reference.
pub fn learn_records(
    records: &[SampleRecord],
    forest_cfg: &ForestConfig,
    train_cfg: &TrainConfig,
    use_truth_targets: bool,
    threshold: f64,
    meta: RunMeta,
) -> Result<LearnReport, EvalError> {
    learn_records_full(records, forest_cfg, train_cfg, use_truth_targets, threshold, meta)
        .map(|a| a.report)
}

/// [`learn_records`] variant that also hands back the fitted models.
pub fn learn_records_full(
    records: &[SampleRecord],
    forest_cfg: &ForestConfig,
    train_cfg: &TrainConfig,
    use_truth_targets: bool,
    threshold: f64,
    meta: RunMeta,
) -> Result<LearnArtifacts, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput("no records"));
    }
    let dims = records[0].tensor_dims;
    let block_len = dims.0 + dims.1 + dims.2;
    if train_cfg.arch.input_len != FEATURE_RANK * block_len {
        return Err(EvalError::ShapeMismatch("network input vs padded fingerprint length"));
    }

    let features: Vec<Vec<f64>> =
        records.iter().map(|r| build_feature(&r.fingerprint, block_len)).collect();
    let strata: Vec<u64> = records.iter().map(|r| stratum_key(&r.spec)).collect();
    let (train_idx, val_idx) = train_val_split(&strata, train_cfg)?;

    let train_x: Vec<Vec<f64>> = train_idx.iter().map(|&i| features[i].clone()).collect();
    let train_y: Vec<Vec<f64>> = train_idx.iter().map(|&i| records[i].truth_ratios.clone()).collect();
    let forest = forest_fit(&train_x, &train_y, forest_cfg)?;

    let teacher_targets: Vec<Vec<f64>> = if use_truth_targets {
        records.iter().map(|r| r.truth_ratios.clone()).collect()
    } else {
        features.iter().map(|f| forest_predict(&forest, f)).collect::<Result<_, _>>()?
    };

    let samples: Vec<TrainSample> = records
        .iter()
        .zip(&features)
        .map(|(r, f)| TrainSample {
            fingerprint: f.clone(),
            ratios: r.truth_ratios.clone(),
            presence: r.truth_presence.clone(),
            stratum: stratum_key(&r.spec),
        })
        .collect();
    let fitted = train_student(&samples, &teacher_targets, train_cfg)?;

    let val_records: Vec<&SampleRecord> = val_idx.iter().map(|&i| &records[i]).collect();
    let val_kinds: Vec<SampleKind> = val_records.iter().map(|r| r.kind).collect();
    let val_truth_flags: Vec<Vec<bool>> = val_records
        .iter()
        .map(|r| r.truth_presence.iter().map(|&p| p > 0.0).collect())
        .collect();
    let val_truth_ratios: Vec<Vec<f64>> =
        val_records.iter().map(|r| r.truth_ratios.clone()).collect();

    let mut student_flags = Vec::with_capacity(val_idx.len());
    let mut student_ratios = Vec::with_capacity(val_idx.len());
    for &i in &val_idx {
        let p = crate::learn::predict(&fitted.params, &features[i])?;
        student_flags.push(p.presence);
        student_ratios.push(p.ratios);
    }
    let mut teacher_flags = Vec::with_capacity(val_idx.len());
    let mut teacher_ratios = Vec::with_capacity(val_idx.len());
    for &i in &val_idx {
        let p = forest_predict(&forest, &features[i])?;
        teacher_flags.push(presence_from_ratios(&p, threshold));
        teacher_ratios.push(p);
    }

    let student = MetricsReport {
        presence: multilabel_metrics(&student_flags, &val_truth_flags)?,
        rmse: rmse_present(&student_ratios, &val_truth_ratios, &val_kinds)?,
        seed: meta.seed,
        config_hash: meta.config_hash,
    };
    let teacher = MetricsReport {
        presence: multilabel_metrics(&teacher_flags, &val_truth_flags)?,
        rmse: rmse_present(&teacher_ratios, &val_truth_ratios, &val_kinds)?,
        seed: meta.seed,
        config_hash: meta.config_hash,
    };
    let param_count = fitted.params.param_count();
    Ok(LearnArtifacts {
        report: LearnReport { teacher, student, log: fitted.log, param_count },
        forest,
        student: fitted.params,
    })
}

// ---------------------------------------------------------------------------
// ablation and variant configs
// ---------------------------------------------------------------------------

/// Tensor factor to neutralize when rerunning the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureAblation {
    /// Replace the phase factor by 1.
    DropPhase,
    /// Replace the power factor by 1.
    DropPower,
    /// Replace the angle spectrum by the uniform distribution.
    DropAoa,
}

impl FeatureAblation {
    /// All ablations in report order.
    pub const ALL: [FeatureAblation; 3] =
        [FeatureAblation::DropPhase, FeatureAblation::DropPower, FeatureAblation::DropAoa];

    /// Tensor options with the named factor neutralized.
    pub fn options(self) -> TensorOptions {
        let mut opts = TensorOptions::default();
        match self {
            FeatureAblation::DropPhase => opts.use_phase = false,
            FeatureAblation::DropPower => opts.use_power = false,
            FeatureAblation::DropAoa => opts.use_aoa = false,
        }
        opts
    }

    /// Stable report label.
    pub fn label(self) -> &'static str {
        match self {
            FeatureAblation::DropPhase => "drop-phase",
            FeatureAblation::DropPower => "drop-power",
            FeatureAblation::DropAoa => "drop-aoa",
        }
    }
}

/// Student training variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchVariant {
    /// The stock configuration.
    Full,
    /// Distillation divergence off (alpha = 0).
    NoKl,
    /// Squared ratio error instead of Huber.
    NoHuber,
    /// Ground-truth ratios as distillation targets.
    NoSoftLabels,
    /// Skip connection removed.
    NoResidual,
    /// Two hidden layers (128, 64) instead of four.
    Shallow,
}

impl ArchVariant {
    /// All variants in report order.
    pub const ALL: [ArchVariant; 6] = [
        ArchVariant::Full,
        ArchVariant::NoKl,
        ArchVariant::NoHuber,
        ArchVariant::NoSoftLabels,
        ArchVariant::NoResidual,
        ArchVariant::Shallow,
    ];

    /// Training config for this variant on top of the given base.
    pub fn configure(self, base: &TrainConfig) -> TrainConfig {
        let mut cfg = base.clone();
        match self {
            ArchVariant::Full | ArchVariant::NoSoftLabels => {}
            ArchVariant::NoKl => cfg.alpha = 0.0,
            ArchVariant::NoHuber => cfg.ratio_loss = crate::learn::RatioLoss::Mse,
            ArchVariant::NoResidual => cfg.arch.residual = false,
            ArchVariant::Shallow => {
                cfg.arch = StudentArch {
                    hidden: vec![128, 64],
                    residual: false,
                    ..cfg.arch.clone()
                };
            }
        }
        cfg
    }

    /// Whether training should distill the ground truth instead of the
    /// teacher.
    pub fn uses_truth_targets(self) -> bool {
        self == ArchVariant::NoSoftLabels
    }

    /// Stable report label.
    pub fn label(self) -> &'static str {
        match self {
            ArchVariant::Full => "full",
            ArchVariant::NoKl => "no-kl",
            ArchVariant::NoHuber => "no-huber",
            ArchVariant::NoSoftLabels => "no-soft-labels",
            ArchVariant::NoResidual => "no-residual",
            ArchVariant::Shallow => "shallow",
        }
    }
}

/// Trains and scores one architecture variant on existing records.
pub fn run_arch_variant(
    records: &[SampleRecord],
    forest_cfg: &ForestConfig,
    base_train: &TrainConfig,
    variant: ArchVariant,
    threshold: f64,
    meta: RunMeta,
) -> Result<LearnReport, EvalError> {
    let cfg = variant.configure(base_train);
    learn_records(records, forest_cfg, &cfg, variant.uses_truth_targets(), threshold, meta)
}

// ---------------------------------------------------------------------------
// unmixing method comparison
// ---------------------------------------------------------------------------

/// Unmixing method under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnmixMethod {
    /// Nearest pure centroid on flattened tensors.
    Raw,
    /// Simplex solve against flattened pure means.
    RawNnls,
    /// Simplex solve after principal-component projection.
    PcaNnls,
    /// Decomposition fingerprints against the pure dictionary.
    ParafacNnls,
}

impl UnmixMethod {
    /// Stable report label.
    pub fn label(self) -> &'static str {
        match self {
            UnmixMethod::Raw => "raw",
            UnmixMethod::RawNnls => "raw+nnls",
            UnmixMethod::PcaNnls => "pca+nnls",
            UnmixMethod::ParafacNnls => "parafac+nnls",
        }
    }
}

/// Scores of one unmixing method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodReport {
    /// Which method the scores belong to.
    pub method: UnmixMethod,
    /// Detection and ratio scores.
    pub metrics: MetricsReport,
}

/// Compares the four unmixing methods on one record set, worst to best
/// expected order: raw, raw+NNLS, PCA+NNLS, decomposition+NNLS.
///
/// Flattened tensors are unit-normalized so overall capture scale carries
/// no information. The principal components are fitted on `pca_train` rows
/// when given (all rows otherwise).
pub fn unmix_comparison(
    records: &[SampleRecord],
    materials: &[PollutantModel],
    pca_components: usize,
    pca_train: Option<&[usize]>,
    threshold: f64,
    meta: RunMeta,
) -> Result<Vec<MethodReport>, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput("no records"));
    }
    let c = materials.len();

    let mut unit_rows = Vec::with_capacity(records.len());
    for r in records {
        let len = norm(&r.tensor_flat);
        if !(len > 0.0) {
            return Err(EvalError::EmptyInput("zero feature tensor"));
        }
        unit_rows.push(r.tensor_flat.iter().map(|v| v / len).collect::<Vec<f64>>());
    }

    // Per-material mean of the pure rows.
    let mut centroids = vec![vec![0.0; unit_rows[0].len()]; c];
    let mut counts = vec![0usize; c];
    for (r, row) in records.iter().zip(&unit_rows) {
        if r.kind == SampleKind::Pure {
            let idx = r.spec.components[0].0;
            counts[idx] += 1;
            for (m, v) in centroids[idx].iter_mut().zip(row) {
                *m += v;
            }
        }
    }
    for (idx, count) in counts.iter().enumerate() {
        if *count == 0 {
            return Err(EvalError::MissingPure(materials[idx].name.clone()));
        }
        for m in &mut centroids[idx] {
            *m /= *count as f64;
        }
    }

    // Raw: nearest centroid claims the whole sample.
    let mut raw_ratios = Vec::with_capacity(records.len());
    for row in &unit_rows {
        let nearest = (0..c)
            .min_by(|&a, &b| {
                let da: f64 = row.iter().zip(&centroids[a]).map(|(x, m)| (x - m) * (x - m)).sum();
                let db: f64 = row.iter().zip(&centroids[b]).map(|(x, m)| (x - m) * (x - m)).sum();
                da.total_cmp(&db)
            })
            .expect("at least one material");
        let mut ratios = vec![0.0; c];
        ratios[nearest] = 1.0;
        raw_ratios.push(ratios);
    }

    // Raw + NNLS: simplex solve against the centroid columns.
    let d = unit_rows[0].len();
    let mut columns = Mat::zeros(d, c);
    for (j, centroid) in centroids.iter().enumerate() {
        let len = norm(centroid).max(1e-300);
        for (i, v) in centroid.iter().enumerate() {
            columns.set(i, j, v / len);
        }
    }
    let mut raw_nnls_ratios = Vec::with_capacity(records.len());
    for row in &unit_rows {
        raw_nnls_ratios.push(simplex_solve(&columns, row)?.ratios);
    }

    // PCA + NNLS: the same solve in component space.
    let fit_rows: Vec<Vec<f64>> = match pca_train {
        Some(idx) => idx.iter().map(|&i| unit_rows[i].clone()).collect(),
        None => unit_rows.clone(),
    };
    let pca = pca_fit(&fit_rows, pca_components)?;
    let mut projected_cols = Mat::zeros(pca_components, c);
    for j in 0..c {
        let scores = pca.project(&columns.col(j))?;
        for (i, s) in scores.iter().enumerate() {
            projected_cols.set(i, j, *s);
        }
    }
    let mut pca_ratios = Vec::with_capacity(records.len());
    for row in &unit_rows {
        let scores = pca.project(row)?;
        pca_ratios.push(simplex_solve(&projected_cols, &scores)?.ratios);
    }

    // Decomposition + NNLS: the main pipeline.
    let parafac_report = unmix_records(records, materials, threshold, meta)?;

    let reports = [
        (UnmixMethod::Raw, raw_ratios),
        (UnmixMethod::RawNnls, raw_nnls_ratios),
        (UnmixMethod::PcaNnls, pca_ratios),
    ];
    let mut out = Vec::with_capacity(4);
    for (method, ratios) in reports {
        out.push(MethodReport {
            method,
            metrics: score_ratio_predictions(&ratios, records, threshold, meta)?,
        });
    }
    out.push(MethodReport { method: UnmixMethod::ParafacNnls, metrics: parafac_report.metrics });
    Ok(out)
}

// ---------------------------------------------------------------------------
// pipeline driver
// ---------------------------------------------------------------------------

/// Full pipeline configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Dataset recipe.
    pub manifest: DatasetManifest,
    /// Tensor factor switches.
    pub tensor: TensorOptions,
    /// Decomposition controls; the seed field is superseded per sample.
    pub parafac: ParafacOptions,
    /// Teacher forest controls.
    pub forest: ForestConfig,
    /// Student training controls.
    pub train: TrainConfig,
    /// Ratio share at which a component counts as detected.
    pub presence_threshold: f64,
}

impl PipelineConfig {
    /// Stock configuration rooted at one seed: the 225-sample manifest and
    /// default processing, with the model seeds derived from the root.
    pub fn with_seed(seed: u64) -> Self {
        PipelineConfig {
            manifest: DatasetManifest::default_manifest(seed),
            tensor: TensorOptions::default(),
            parafac: ParafacOptions::default(),
            forest: ForestConfig { seed: derive_seed(seed, 11), ..ForestConfig::default() },
            train: TrainConfig { seed: derive_seed(seed, 12), ..TrainConfig::default() },
            presence_threshold: 0.1,
        }
    }
}

/// Advisory hash of a configuration's debug form, for report metadata.
pub fn config_fingerprint(cfg: &PipelineConfig) -> u64 {
    name_seed(&format!("{cfg:?}"))
}

/// Unmixing and learning reports of one full pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    /// Dictionary unmixing over all records.
    pub unmix: UnmixReport,
    /// Teacher and student over the holdout split.
    pub learn: LearnReport,
}

/// Generates the dataset, unmixes every sample, and fits the models, all
/// serially. Callers wanting parallel record processing can run
/// [`process_sample`] per spec themselves and feed the assembly functions.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport, EvalError> {
    let records = dataset_records(&cfg.manifest, &cfg.tensor, &cfg.parafac)?;
    let meta = RunMeta { seed: cfg.manifest.root_seed, config_hash: config_fingerprint(cfg) };
    let unmix = unmix_records(&records, &cfg.manifest.materials, cfg.presence_threshold, meta)?;
    let learn =
        learn_records(&records, &cfg.forest, &cfg.train, false, cfg.presence_threshold, meta)?;
    Ok(PipelineReport { unmix, learn })
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::init_student;
    use crate::rng::SeededRng;

    const TOL: f64 = 1e-12;

    // --- 1. detection metrics ---

    #[test]
    fn hand_tally_matches() {
        // One class over 4 samples: predicted in the first two, true in the
        // middle two. One TP, one FP, one FN, one TN.
        let predicted = vec![vec![true], vec![true], vec![false], vec![false]];
        let truth = vec![vec![false], vec![true], vec![true], vec![false]];
        let s = multilabel_metrics(&predicted, &truth).unwrap();
        assert!((s.per_class[0].precision - 0.5).abs() < TOL);
        assert!((s.per_class[0].recall - 0.5).abs() < TOL);
        assert!((s.per_class[0].f1 - 0.5).abs() < TOL);
        assert!((s.per_class[0].accuracy - 0.5).abs() < TOL);
        assert!((s.subset_accuracy - 0.5).abs() < TOL);
    }

    #[test]
    fn perfect_predictions_score_one() {
        let truth = vec![vec![true, false], vec![false, true], vec![true, true]];
        let s = multilabel_metrics(&truth, &truth).unwrap();
        assert!((s.macro_accuracy - 1.0).abs() < TOL);
        assert!((s.macro_precision - 1.0).abs() < TOL);
        assert!((s.macro_recall - 1.0).abs() < TOL);
        assert!((s.macro_f1 - 1.0).abs() < TOL);
        assert!((s.subset_accuracy - 1.0).abs() < TOL);
    }

    #[test]
    fn empty_predictions_use_the_zero_convention() {
        let predicted = vec![vec![false, false]; 3];
        let truth = vec![vec![true, false], vec![true, true], vec![true, false]];
        let s = multilabel_metrics(&predicted, &truth).unwrap();
        assert_eq!(s.per_class[0].precision, 0.0);
        assert_eq!(s.per_class[0].recall, 0.0);
        assert_eq!(s.per_class[0].f1, 0.0);
        // Class 1 is absent in two samples, so predicting nothing is often
        // right by accuracy while worthless by recall.
        assert!((s.per_class[1].accuracy - 2.0 / 3.0).abs() < TOL);
        assert_eq!(s.subset_accuracy, 0.0);
    }

    #[test]
    fn subset_accuracy_never_exceeds_class_accuracy() {
        let mut rng = SeededRng::new(601);
        for _ in 0..30 {
            let n = 20;
            let c = 4;
            let flip = |rng: &mut SeededRng| rng.uniform() < 0.5;
            let predicted: Vec<Vec<bool>> =
                (0..n).map(|_| (0..c).map(|_| flip(&mut rng)).collect()).collect();
            let truth: Vec<Vec<bool>> =
                (0..n).map(|_| (0..c).map(|_| flip(&mut rng)).collect()).collect();
            let s = multilabel_metrics(&predicted, &truth).unwrap();
            for class in &s.per_class {
                assert!(s.subset_accuracy <= class.accuracy + TOL);
                for v in [class.accuracy, class.precision, class.recall, class.f1] {
                    assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }

    #[test]
    fn metric_shape_errors() {
        assert!(multilabel_metrics(&[], &[]).is_err());
        let a = vec![vec![true]];
        let b = vec![vec![true, false]];
        assert!(multilabel_metrics(&a, &b).is_err());
    }

    // --- 2. ratio error ---

    #[test]
    fn rmse_hand_value() {
        let truth = vec![vec![0.5, 0.5, 0.0]];
        let predicted = vec![vec![0.4, 0.6, 0.0]];
        let kinds = vec![SampleKind::Binary];
        let r = rmse_present(&predicted, &truth, &kinds).unwrap();
        assert!((r.binary.unwrap() - 0.1).abs() < TOL);
        assert!(r.pure.is_none());
        assert!(r.ternary.is_none());
        assert!((r.overall.unwrap() - 0.1).abs() < TOL);
    }

    #[test]
    fn rmse_ignores_absent_components() {
        let truth = vec![vec![1.0, 0.0]];
        // Error mass on the absent class does not count.
        let predicted = vec![vec![1.0, 0.7]];
        let kinds = vec![SampleKind::Pure];
        let r = rmse_present(&predicted, &truth, &kinds).unwrap();
        assert_eq!(r.pure.unwrap(), 0.0);
    }

    #[test]
    fn rmse_zero_on_exact_match() {
        let truth = vec![vec![0.25, 0.35, 0.4]];
        let kinds = vec![SampleKind::Ternary];
        let r = rmse_present(&truth, &truth, &kinds).unwrap();
        assert_eq!(r.ternary.unwrap(), 0.0);
        assert_eq!(r.overall.unwrap(), 0.0);
    }

    // --- 3. principal components ---

    fn random_rows(rng: &mut SeededRng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..d).map(|_| rng.normal()).collect()).collect()
    }

    fn recon_error(pca: &Pca, rows: &[Vec<f64>]) -> f64 {
        rows.iter()
            .map(|row| {
                let rec = pca.reconstruct(&pca.project(row).unwrap()).unwrap();
                row.iter().zip(&rec).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn pca_components_are_orthonormal() {
        let mut rng = SeededRng::new(602);
        let rows = random_rows(&mut rng, 12, 8);
        let pca = pca_fit(&rows, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let d = dot(pca.components.row(i), pca.components.row(j));
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-10, "gram({i},{j}) = {d}");
            }
        }
        for w in pca.variances.windows(2) {
            assert!(w[0] >= w[1] - TOL);
        }
    }

    #[test]
    fn pca_beats_random_projections() {
        let mut rng = SeededRng::new(603);
        let rows = random_rows(&mut rng, 15, 10);
        let k = 3;
        let pca = pca_fit(&rows, k).unwrap();
        let base = recon_error(&pca, &rows);
        for _ in 0..10 {
            // Random orthonormal basis with the same mean.
            let mut basis: Vec<Vec<f64>> = Vec::new();
            while basis.len() < k {
                let mut v: Vec<f64> = (0..10).map(|_| rng.normal()).collect();
                for b in &basis {
                    let p = dot(b, &v);
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi -= p * bi;
                    }
                }
                let len = norm(&v);
                if len > 1e-6 {
                    for vi in &mut v {
                        *vi /= len;
                    }
                    basis.push(v);
                }
            }
            let mut flat = Vec::new();
            for b in &basis {
                flat.extend_from_slice(b);
            }
            let rival = Pca {
                mean: pca.mean.clone(),
                components: Mat::from_vec(k, 10, flat),
                variances: vec![0.0; k],
            };
            let err = recon_error(&rival, &rows);
            assert!(base <= err + 1e-9, "pca {base} vs random {err}");
        }
    }

    #[test]
    fn more_components_reduce_reconstruction_error() {
        let mut rng = SeededRng::new(604);
        let rows = random_rows(&mut rng, 14, 9);
        let mut prev = f64::INFINITY;
        for k in [1, 3, 5, 8] {
            let pca = pca_fit(&rows, k).unwrap();
            let err = recon_error(&pca, &rows);
            assert!(err <= prev + 1e-9, "error grew at k = {k}");
            prev = err;
        }
    }

    #[test]
    fn exact_low_rank_data_reconstructs_exactly() {
        let mut rng = SeededRng::new(605);
        // Rank-2 data plus a mean offset.
        let b1: Vec<f64> = (0..7).map(|_| rng.normal()).collect();
        let b2: Vec<f64> = (0..7).map(|_| rng.normal()).collect();
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|_| {
                let (a, b) = (rng.uniform_in(-2.0, 2.0), rng.uniform_in(-2.0, 2.0));
                (0..7).map(|i| 1.0 + a * b1[i] + b * b2[i]).collect()
            })
            .collect();
        let pca = pca_fit(&rows, 2).unwrap();
        assert!(recon_error(&pca, &rows) < 1e-18);
    }

    #[test]
    fn pca_rejects_impossible_ranks() {
        let mut rng = SeededRng::new(606);
        let rows = random_rows(&mut rng, 5, 8);
        assert!(pca_fit(&rows, 0).is_err());
        assert!(pca_fit(&rows, 5).is_err());
        assert!(pca_fit(&rows[..1], 1).is_err());
    }

    // --- 4. features and strata ---

    #[test]
    fn feature_padding_fills_with_zeros() {
        let print = Fingerprint { vector: vec![1.0; 10], rank: 1, source_sample: None };
        let f = build_feature(&print, 10);
        assert_eq!(f.len(), 30);
        assert_eq!(&f[..10], &[1.0; 10][..]);
        assert!(f[10..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stratum_keys_group_by_component_set() {
        let a = SampleSpec::new(vec![(0, 1.0)], 1.0, 0, 7).unwrap();
        let b = SampleSpec::new(vec![(0, 1.0)], 2.5, 1, 99).unwrap();
        assert_eq!(stratum_key(&a), stratum_key(&b));

        let c = SampleSpec::new(vec![(1, 1.0)], 1.0, 0, 7).unwrap();
        assert_ne!(stratum_key(&a), stratum_key(&c));

        // Ratio splits of the same pair share a stratum.
        let d = SampleSpec::new(vec![(0, 0.25), (1, 0.75)], 1.0, 0, 1).unwrap();
        let e = SampleSpec::new(vec![(0, 0.5), (1, 0.5)], 1.0, 0, 2).unwrap();
        assert_eq!(stratum_key(&d), stratum_key(&e));
        let f = SampleSpec::new(vec![(0, 0.5), (2, 0.5)], 1.0, 0, 2).unwrap();
        assert_ne!(stratum_key(&d), stratum_key(&f));
    }

    #[test]
    fn presence_threshold_is_inclusive() {
        let flags = presence_from_ratios(&[0.1, 0.09, 0.5], 0.1);
        assert_eq!(flags, vec![true, false, true]);
    }

    // --- 5. variant configs ---

    #[test]
    fn ablations_disable_exactly_one_factor() {
        for ab in FeatureAblation::ALL {
            let opts = ab.options();
            let on = [opts.use_phase, opts.use_power, opts.use_aoa];
            assert_eq!(on.iter().filter(|&&b| !b).count(), 1, "{}", ab.label());
        }
        assert_eq!(FeatureAblation::DropPhase.options().use_phase, false);
        assert_eq!(FeatureAblation::DropPower.options().use_power, false);
        assert_eq!(FeatureAblation::DropAoa.options().use_aoa, false);
    }

    #[test]
    fn arch_variants_adjust_the_right_knob() {
        let base = TrainConfig::default();
        assert_eq!(ArchVariant::NoKl.configure(&base).alpha, 0.0);
        assert_eq!(
            ArchVariant::NoHuber.configure(&base).ratio_loss,
            crate::learn::RatioLoss::Mse
        );
        assert!(!ArchVariant::NoResidual.configure(&base).arch.residual);
        let shallow = ArchVariant::Shallow.configure(&base);
        assert_eq!(shallow.arch.hidden, vec![128, 64]);
        assert!(ArchVariant::NoSoftLabels.uses_truth_targets());
        assert!(!ArchVariant::Full.uses_truth_targets());

        let full = init_student(&base.arch, 0).unwrap().param_count();
        let small = init_student(&shallow.arch, 0).unwrap().param_count();
        assert!(small < full, "shallow {small} vs full {full}");
    }

    #[test]
    fn labels_are_unique() {
        let mut labels: Vec<&str> = ArchVariant::ALL.iter().map(|v| v.label()).collect();
        labels.extend(FeatureAblation::ALL.iter().map(|a| a.label()));
        labels.extend(
            [UnmixMethod::Raw, UnmixMethod::RawNnls, UnmixMethod::PcaNnls, UnmixMethod::ParafacNnls]
                .iter()
                .map(|m| m.label()),
        );
        let count = labels.len();
        labels.sort_unstable();
        labels.dedup();
        assert_eq!(labels.len(), count);
    }

    #[test]
    fn config_fingerprint_tracks_content() {
        let a = PipelineConfig::with_seed(1);
        let b = PipelineConfig::with_seed(1);
        assert_eq!(config_fingerprint(&a), config_fingerprint(&b));
        let mut c = PipelineConfig::with_seed(1);
        c.presence_threshold = 0.2;
        assert_ne!(config_fingerprint(&a), config_fingerprint(&c));
    }
}
