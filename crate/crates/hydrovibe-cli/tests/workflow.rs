//! Artifact flow through the command layer on a small three-material run:
//! synthesis persists tensors and a manifest, the pipeline stage turns them
//! into fingerprints and unmixing reports, training leaves checkpoints and
//! logs, and evaluation scores everything back from disk.

use std::fs;
use std::path::{Path, PathBuf};

use hydrovibe_cli::commands::{
    cmd_ablate, cmd_eval, cmd_pipeline, cmd_synth, cmd_train, records_from_tensor_files,
    sample_file, AblateSuite, Ctx,
};
use hydrovibe_cli::config::RunConfig;
use hydrovibe_cli::vwt1::{Container, PayloadKind};
use hydrovibe_cli::CliError;
use hydrovibe_core::eval::{pure_dictionary, stratum_key};
use hydrovibe_core::learn::{one_cycle_lr, train_val_split};
use hydrovibe_core::synth::SampleKind;

const MATERIALS: &str = r#"
[[material]]
name = "resin"
permittivity_delta = -0.8
attenuation_coeff = 6.0
resonance_freq = 45.0
damping_ratio = 0.12
displacement_gain = 2.5e-6
angle_mean = -10.0
angle_spread = 4.0

[[material]]
name = "brine"
permittivity_delta = 1.2
attenuation_coeff = 3.0
resonance_freq = 75.0
damping_ratio = 0.25
displacement_gain = 1.5e-6
angle_mean = 2.0
angle_spread = 6.0

[[material]]
name = "silt"
permittivity_delta = -0.4
attenuation_coeff = 8.0
resonance_freq = 105.0
damping_ratio = 0.18
displacement_gain = 3.0e-6
angle_mean = 12.0
angle_spread = 5.0
"#;

const CONFIG: &str = r#"
seed = 2024
materials_path = "materials.toml"

[dataset]
replicates = 3
binary_ratios = [[0.5, 0.5]]
ternary_ratios = [[0.4, 0.3, 0.3]]

[sweep]
tone_step = 4.0

[parafac]
restarts = 2
max_iters = 200

[forest]
tree_count = 20
max_depth = 8

[train]
hidden = [24, 24]
epochs = 16
batch_size = 8
"#;

// 3 pures x 3 replicates, 3 pairs x 1 ratio x 3, 1 triple x 1 ratio x 3.
const SAMPLES: usize = 21;
const MIXTURES: usize = 12;
// 26 tones + 3 range bins + 31 angles.
const BLOCK_LEN: usize = 60;

/// Writes the run and materials files into `root` and builds a context
/// whose output lands in `root/out`.
fn small_ctx(root: &Path) -> Ctx {
    small_ctx_with(root, CONFIG, false)
}

fn small_ctx_with(root: &Path, config: &str, keep_raw: bool) -> Ctx {
    let path = root.join("run.toml");
    fs::write(&path, config).unwrap();
    fs::write(root.join("materials.toml"), MATERIALS).unwrap();
    let run = RunConfig::load(&path).unwrap();
    Ctx::new(run, None, Some(&root.join("out")), keep_raw).unwrap()
}

fn read_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

fn scope_column(path: &Path) -> Vec<String> {
    read_lines(path)
        .iter()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect()
}

#[test]
fn end_to_end_artifact_flow() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = small_ctx(dir.path());

    // Synthesis: one tensor per sample, manifest as the commit marker.
    let summary = cmd_synth(&ctx).unwrap();
    assert_eq!(summary.samples, SAMPLES);
    assert_eq!(summary.raw_cubes, 0);
    for i in 0..SAMPLES {
        assert!(ctx.tensors_dir().join(sample_file(i)).is_file());
    }
    let manifest = read_lines(&ctx.out.join("manifest.csv"));
    assert_eq!(manifest.len(), SAMPLES + 1);
    let header = &manifest[0];
    assert!(header.starts_with("sample,kind,seed,replicate,concentration_mg_l"));
    for name in ["resin", "brine", "silt"] {
        assert!(header.contains(&format!("ratio_{name}")));
        assert!(header.contains(&format!("present_{name}")));
    }
    let kind_of = |row: &String| row.split(',').nth(1).unwrap().to_string();
    assert_eq!(manifest[1..].iter().filter(|r| kind_of(r) == "pure").count(), 9);
    assert_eq!(manifest[1..].iter().filter(|r| kind_of(r) == "binary").count(), 9);
    assert_eq!(manifest[1..].iter().filter(|r| kind_of(r) == "ternary").count(), 3);

    // Pipeline: fingerprints sized rank x block, dictionary from training
    // pures only, one unmixing row per mixture.
    let pipe = cmd_pipeline(&ctx).unwrap();
    assert_eq!(pipe.samples, SAMPLES);
    assert_eq!(pipe.mixtures, MIXTURES);
    let records = records_from_tensor_files(&ctx).unwrap();
    for (i, record) in records.iter().enumerate() {
        let print = Container::read(&ctx.fingerprints_dir().join(sample_file(i))).unwrap();
        assert_eq!(print.kind, PayloadKind::Fingerprint);
        let rank = record.spec.components.len() as u64;
        assert_eq!(print.dims, vec![rank, BLOCK_LEN as u64]);
        assert_eq!(print.values, record.fingerprint.vector);
    }

    let strata: Vec<u64> = records.iter().map(|r| stratum_key(&r.spec)).collect();
    let (train_idx, _) = train_val_split(&strata, &ctx.cfg.train).unwrap();
    let train_pures: Vec<_> = train_idx
        .iter()
        .map(|&i| records[i].clone())
        .filter(|r| r.kind == SampleKind::Pure)
        .collect();
    assert!(train_pures.len() < 9, "the split must hold out at least one pure");
    let expect = pure_dictionary(&train_pures, &ctx.cfg.manifest.materials).unwrap();
    let dict = Container::read(&ctx.out.join("dictionary.vwt1")).unwrap();
    assert_eq!(dict.kind, PayloadKind::Dictionary);
    assert_eq!(dict.dims, vec![BLOCK_LEN as u64, 3]);
    assert_eq!(dict.values, expect.matrix.data);

    let unmix = read_lines(&ctx.out.join("unmix.csv"));
    assert_eq!(unmix.len(), MIXTURES + 1);
    assert!(unmix[0].starts_with("sample,kind,residual,est_resin"));
    assert_eq!(scope_column(&ctx.out.join("unmix_metrics.csv")), ["dictionary-unmix"]);

    // Training: checkpoints plus loss and learning-rate logs, with the
    // warm-up peak where the schedule puts it.
    let report = cmd_train(&ctx).unwrap();
    for name in ["teacher.vwt1", "student.vwt1"] {
        let model = Container::read(&ctx.models_dir().join(name)).unwrap();
        assert_eq!(model.kind, PayloadKind::Model);
    }
    let log = read_lines(&ctx.out.join("training_log.csv"));
    assert_eq!(log.len(), ctx.cfg.train.epochs + 1);
    let best: Vec<usize> = log[1..]
        .iter()
        .enumerate()
        .filter(|(_, row)| row.ends_with(",1"))
        .map(|(e, _)| e)
        .collect();
    assert_eq!(best, [report.log.best_epoch]);

    let schedule = read_lines(&ctx.out.join("lr_schedule.csv"));
    assert_eq!(schedule.len(), report.log.total_steps + 1);
    let lrs: Vec<f64> =
        schedule[1..].iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    let ramp = (0.3 * report.log.total_steps as f64).round() as usize;
    let peak = ctx.cfg.train.peak_lr;
    assert_eq!(lrs[ramp - 1], peak);
    assert!(lrs.iter().all(|&lr| lr <= peak));
    assert_eq!(*lrs.last().unwrap(), peak / 100.0);
    for (s, &lr) in lrs.iter().enumerate() {
        assert_eq!(lr, one_cycle_lr(s, report.log.total_steps, peak));
    }
    assert_eq!(scope_column(&ctx.out.join("train_metrics.csv")), ["teacher", "student"]);

    // Evaluation: stored checkpoints scored on the holdout split, and the
    // oracle self-test coming back perfect.
    let reports = cmd_eval(&ctx, false).unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(scope_column(&ctx.out.join("metrics.csv")), ["teacher", "student"]);
    for r in &reports {
        assert!(r.presence.subset_accuracy >= 0.0 && r.presence.subset_accuracy <= 1.0);
    }

    let oracle = &cmd_eval(&ctx, true).unwrap()[0];
    assert_eq!(oracle.presence.subset_accuracy, 1.0);
    assert_eq!(oracle.presence.macro_f1, 1.0);
    assert_eq!(oracle.rmse.overall, Some(0.0));
    assert_eq!(scope_column(&ctx.out.join("metrics.csv")), ["oracle"]);
}

#[test]
fn synthesis_reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cmd_synth(&small_ctx(a.path())).unwrap();
    cmd_synth(&small_ctx(b.path())).unwrap();

    let manifest_a = fs::read(a.path().join("out/manifest.csv")).unwrap();
    let manifest_b = fs::read(b.path().join("out/manifest.csv")).unwrap();
    assert_eq!(manifest_a, manifest_b);
    for i in 0..SAMPLES {
        let file = PathBuf::from("out/tensors").join(sample_file(i));
        let bytes_a = fs::read(a.path().join(&file)).unwrap();
        let bytes_b = fs::read(b.path().join(&file)).unwrap();
        assert_eq!(bytes_a, bytes_b, "{} differs between reruns", file.display());
    }
}

#[test]
fn keep_raw_persists_capture_cubes() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = small_ctx_with(dir.path(), CONFIG, true);
    let summary = cmd_synth(&ctx).unwrap();
    assert_eq!(summary.raw_cubes, SAMPLES);

    let cube = Container::read(&ctx.raw_dir().join(sample_file(0))).unwrap();
    assert_eq!(cube.kind, PayloadKind::RawCapture);
    let scene = &ctx.cfg.manifest.capture.scene;
    let frames = ctx.cfg.manifest.capture.sweep.total_frames();
    assert_eq!(
        cube.dims,
        vec![frames as u64, scene.antennas as u64, scene.fast_time_samples as u64]
    );
    // Complex payload: interleaved re/im pairs, two words per element.
    assert_eq!(cube.values.len(), 2 * frames * scene.antennas * scene.fast_time_samples);
    assert!(cube.values.iter().any(|&v| v != 0.0));
}

#[test]
fn foreign_and_corrupt_artifacts_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = small_ctx(dir.path());
    cmd_synth(&ctx).unwrap();

    let victim = ctx.tensors_dir().join(sample_file(2));
    let clean = fs::read(&victim).unwrap();
    let mut bytes = clean.clone();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x01;
    fs::write(&victim, &bytes).unwrap();
    let err = cmd_pipeline(&ctx).unwrap_err();
    assert_eq!(err.category(), "data", "corruption surfaced as: {err}");
    fs::write(&victim, &clean).unwrap();

    // A context expecting a finer sweep must reject the stored tensors
    // instead of silently decomposing the wrong shape.
    let finer = CONFIG.replace("tone_step = 4.0", "tone_step = 2.0");
    let other = small_ctx_with(dir.path(), &finer, false);
    let err = records_from_tensor_files(&other).unwrap_err();
    assert_eq!(err.category(), "data");
    assert!(matches!(err, CliError::ArtifactMismatch(_)), "got: {err}");
}

#[test]
fn ablation_suites_emit_the_documented_rows() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = small_ctx(dir.path());
    let written = cmd_ablate(&ctx, AblateSuite::All).unwrap();
    assert_eq!(
        written,
        ["ablation_features.csv", "ablation_methods.csv", "ablation_arch.csv"]
    );
    assert_eq!(
        scope_column(&ctx.out.join("ablation_features.csv")),
        ["full", "drop-phase", "drop-power", "drop-aoa"]
    );
    assert_eq!(
        scope_column(&ctx.out.join("ablation_methods.csv")),
        ["raw", "raw+nnls", "pca+nnls", "parafac+nnls"]
    );
    assert_eq!(
        scope_column(&ctx.out.join("ablation_arch.csv")),
        ["full", "no-kl", "no-huber", "no-soft-labels", "no-residual", "shallow"]
    );
}
