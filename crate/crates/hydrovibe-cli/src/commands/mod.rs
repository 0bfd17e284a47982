//! Command implementations and the plumbing they share: artifact paths,
//! CSV emission, and record reconstruction from files.

mod ablate;
mod pipeline;
mod synth;
mod train;

pub use ablate::{cmd_ablate, AblateSuite};
pub use pipeline::cmd_pipeline;
pub use synth::cmd_synth;
pub use train::{cmd_eval, cmd_train};

use std::path::{Path, PathBuf};

use hydrovibe_core::eval::{
    config_fingerprint, record_from_tensor, MetricsReport, PipelineConfig, RunMeta, SampleRecord,
};
use hydrovibe_core::synth::{dataset_specs, SampleKind, SampleSpec};
use hydrovibe_core::tensor::{Fingerprint, Tensor3};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::vwt1::{Container, PayloadKind};
use crate::{io_err, CliError};

/// Everything a command needs: the resolved core config, the raw run
/// config for CLI-only knobs, and the output root.
#[derive(Debug, Clone)]
pub struct Ctx {
    /// Resolved core pipeline configuration.
    pub cfg: PipelineConfig,
    /// The run config it came from.
    pub run: RunConfig,
    /// Output root; every artifact lands below it.
    pub out: PathBuf,
    /// Persist raw capture cubes during `synth`.
    pub keep_raw: bool,
}

impl Ctx {
    /// Builds the context from a loaded config and the global flags.
    pub fn new(
        run: RunConfig,
        seed: Option<u64>,
        out: Option<&Path>,
        keep_raw: bool,
    ) -> Result<Self, CliError> {
        let cfg = run.pipeline(seed)?;
        let out = run.out_dir(out);
        Ok(Ctx { cfg, run, out, keep_raw })
    }

    /// Seed and config hash stamped into every report.
    pub fn meta(&self) -> RunMeta {
        RunMeta {
            seed: self.cfg.manifest.root_seed,
            config_hash: config_fingerprint(&self.cfg),
        }
    }

    /// The sample plan for this config.
    pub fn specs(&self) -> Result<Vec<SampleSpec>, CliError> {
        Ok(dataset_specs(&self.cfg.manifest).map_err(hydrovibe_core::eval::EvalError::from)?)
    }

    /// Expected feature tensor shape per sample.
    pub fn tensor_dims(&self) -> (usize, usize, usize) {
        let tones = self.cfg.manifest.capture.sweep.tones();
        let angles = hydrovibe_core::dsp::default_angle_grid().len();
        (tones, 3, angles)
    }

    /// Directory of per-sample feature tensors.
    pub fn tensors_dir(&self) -> PathBuf {
        self.out.join("tensors")
    }

    /// Directory of per-sample raw capture cubes.
    pub fn raw_dir(&self) -> PathBuf {
        self.out.join("raw")
    }

    /// Directory of per-sample fingerprints.
    pub fn fingerprints_dir(&self) -> PathBuf {
        self.out.join("fingerprints")
    }

    /// Directory of model checkpoints.
    pub fn models_dir(&self) -> PathBuf {
        self.out.join("models")
    }
}

/// File name of sample `i` in any per-sample directory.
pub fn sample_file(i: usize) -> String {
    format!("sample_{i:04}.vwt1")
}

/// Short label for a sample kind.
pub fn kind_label(kind: SampleKind) -> &'static str {
    match kind {
        SampleKind::Pure => "pure",
        SampleKind::Binary => "binary",
        SampleKind::Ternary => "ternary",
    }
}

/// Creates a directory, surfacing the path on failure.
pub fn ensure_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

/// Writes a CSV file: header line, then one line per row, trailing newline.
/// Floats are formatted with Rust's shortest round-trip notation, so the
/// bytes are a deterministic function of the values.
pub fn write_csv(
    path: &Path,
    header: &str,
    rows: impl IntoIterator<Item = String>,
) -> Result<(), CliError> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(io_err(path))
}

/// Header shared by every metrics CSV; `scope` names what the row scores.
pub const METRICS_HEADER: &str = "scope,subset_accuracy,macro_accuracy,macro_precision,\
                                  macro_recall,macro_f1,rmse_pure,rmse_binary,rmse_ternary,\
                                  rmse_overall,seed,config_hash";

/// One metrics CSV row; absent RMSE entries become empty cells.
pub fn metrics_row(scope: &str, m: &MetricsReport) -> String {
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        scope,
        m.presence.subset_accuracy,
        m.presence.macro_accuracy,
        m.presence.macro_precision,
        m.presence.macro_recall,
        m.presence.macro_f1,
        cell(m.rmse.pure),
        cell(m.rmse.binary),
        cell(m.rmse.ternary),
        cell(m.rmse.overall),
        m.seed,
        m.config_hash
    )
}

/// Reads one sample's feature tensor back from `synth` output.
fn read_tensor(dir: &Path, i: usize, dims: (usize, usize, usize)) -> Result<Tensor3, CliError> {
    let path = dir.join(sample_file(i));
    let c = Container::read(&path)?;
    if c.kind != PayloadKind::Tensor {
        return Err(CliError::ArtifactMismatch(format!("{}: not a tensor container", path.display())));
    }
    let want = [dims.0 as u64, dims.1 as u64, dims.2 as u64];
    if c.dims != want {
        return Err(CliError::ArtifactMismatch(format!(
            "{}: dims {:?} but the config implies {:?}",
            path.display(),
            c.dims,
            want
        )));
    }
    Ok(Tensor3::from_data(dims.0, dims.1, dims.2, c.values)
        .map_err(hydrovibe_core::eval::EvalError::from)?)
}

/// Rebuilds the full record set from persisted tensors, rerunning the
/// decomposition per sample. Bit-identical to the in-memory pipeline
/// because the restarts are seeded from each sample's own seed.
pub fn records_from_tensor_files(ctx: &Ctx) -> Result<Vec<SampleRecord>, CliError> {
    let dir = ctx.tensors_dir();
    if !dir.is_dir() {
        return Err(CliError::MissingArtifacts {
            what: "tensors",
            dir: ctx.out.clone(),
            producer: "synth",
        });
    }
    let specs = ctx.specs()?;
    let dims = ctx.tensor_dims();
    let material_count = ctx.cfg.manifest.materials.len();
    specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let tensor = read_tensor(&dir, i, dims)?;
            Ok(record_from_tensor(spec, material_count, &tensor, &ctx.cfg.parafac)?)
        })
        .collect()
}

/// Rebuilds lightweight records (no tensor payload, no weights) from
/// persisted fingerprints, enough for training and evaluation.
pub fn records_from_fingerprint_files(ctx: &Ctx) -> Result<Vec<SampleRecord>, CliError> {
    let dir = ctx.fingerprints_dir();
    if !dir.is_dir() {
        return Err(CliError::MissingArtifacts {
            what: "fingerprints",
            dir: ctx.out.clone(),
            producer: "pipeline",
        });
    }
    let specs = ctx.specs()?;
    let dims = ctx.tensor_dims();
    let block_len = (dims.0 + dims.1 + dims.2) as u64;
    let material_count = ctx.cfg.manifest.materials.len();
    specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let path = dir.join(sample_file(i));
            let c = Container::read(&path)?;
            let rank = spec.components.len() as u64;
            if c.kind != PayloadKind::Fingerprint || c.dims != [rank, block_len] {
                return Err(CliError::ArtifactMismatch(format!(
                    "{}: expected a {rank} x {block_len} fingerprint",
                    path.display()
                )));
            }
            let (truth_ratios, truth_presence) =
                hydrovibe_core::eval::truth_vectors(spec, material_count);
            Ok(SampleRecord {
                spec: spec.clone(),
                kind: spec.kind(),
                tensor_dims: dims,
                tensor_flat: Vec::new(),
                fingerprint: Fingerprint {
                    vector: c.values,
                    rank: rank as usize,
                    source_sample: None,
                },
                weights: Vec::new(),
                truth_ratios,
                truth_presence,
            })
        })
        .collect()
}

/// Writes the excitation sweep WAV under the output root.
pub fn cmd_sweep_wav(ctx: &Ctx) -> Result<PathBuf, CliError> {
    ensure_dir(&ctx.out)?;
    let path = ctx.out.join("sweep.wav");
    crate::wav::write_sweep_wav(&path).map_err(io_err(&path))?;
    Ok(path)
}

/// Prints every report CSV found under the output root as an aligned table.
pub fn cmd_report(ctx: &Ctx, mut sink: impl std::io::Write) -> Result<(), CliError> {
    let files = [
        ("dictionary unmixing", "unmix_metrics.csv"),
        ("teacher and student (train split scores)", "train_metrics.csv"),
        ("evaluation", "metrics.csv"),
        ("feature ablation", "ablation_features.csv"),
        ("unmixing methods", "ablation_methods.csv"),
        ("architecture variants", "ablation_arch.csv"),
    ];
    let mut found = false;
    for (title, name) in files {
        let path = ctx.out.join(name);
        if !path.is_file() {
            continue;
        }
        found = true;
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        writeln!(sink, "# {title} ({name})").map_err(io_err(&path))?;
        for line in align_csv(&text) {
            writeln!(sink, "{line}").map_err(io_err(&path))?;
        }
        writeln!(sink).map_err(io_err(&path))?;
    }
    if !found {
        return Err(CliError::MissingArtifacts {
            what: "report CSVs",
            dir: ctx.out.clone(),
            producer: "pipeline",
        });
    }
    Ok(())
}

/// Pads CSV cells to column width for terminal display.
fn align_csv(text: &str) -> Vec<String> {
    let rows: Vec<Vec<&str>> =
        text.lines().map(|l| l.split(',').collect()).collect();
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut widths = vec![0usize; cols];
    for row in &rows {
        for (j, cell) in row.iter().enumerate() {
            widths[j] = widths[j].max(cell.len());
        }
    }
    rows.iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, cell)| format!("{:w$}", cell, w = widths[j]))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        })
        .collect()
}
