//! Ablation suites: feature streams, unmixing methods, and training
//! variants, each emitted as one labeled CSV row per variant.
//!
//! Unlike the other commands these run from the config alone, regenerating
//! captures in memory, because the feature suite needs tensors rebuilt
//! with individual streams neutralized and the persisted tensors have
//! already collapsed them.

use hydrovibe_core::eval::{
    process_sample, run_arch_variant, unmix_comparison, unmix_records, ArchVariant, EvalError,
    FeatureAblation, SampleRecord,
};
use hydrovibe_core::synth::{dataset_specs, DatasetManifest};
use rayon::prelude::*;

use super::{ensure_dir, metrics_row, write_csv, Ctx, METRICS_HEADER};
use crate::CliError;

/// Which ablation families to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblateSuite {
    /// Feature-stream knockouts.
    Features,
    /// Unmixing method comparison.
    Methods,
    /// Training and architecture variants.
    Arch,
    /// All three.
    All,
}

/// Runs the requested suites and reports the CSV files written.
pub fn cmd_ablate(ctx: &Ctx, suite: AblateSuite) -> Result<Vec<String>, CliError> {
    ensure_dir(&ctx.out)?;
    let mut written = Vec::new();
    let full = build_records(ctx, &ctx.cfg.manifest, &ctx.cfg.tensor)?;
    if matches!(suite, AblateSuite::Features | AblateSuite::All) {
        run_features(ctx, &full)?;
        written.push("ablation_features.csv".to_string());
    }
    if matches!(suite, AblateSuite::Methods | AblateSuite::All) {
        run_methods(ctx, &full)?;
        written.push("ablation_methods.csv".to_string());
    }
    if matches!(suite, AblateSuite::Arch | AblateSuite::All) {
        run_arch(ctx, &full)?;
        written.push("ablation_arch.csv".to_string());
    }
    Ok(written)
}

/// Builds a record set for the manifest, samples in parallel.
fn build_records(
    ctx: &Ctx,
    manifest: &DatasetManifest,
    opts: &hydrovibe_core::dsp::TensorOptions,
) -> Result<Vec<SampleRecord>, CliError> {
    let specs = dataset_specs(manifest).map_err(EvalError::from)?;
    specs
        .par_iter()
        .map(|spec| Ok(process_sample(spec, manifest, opts, &ctx.cfg.parafac)?))
        .collect()
}

/// Rebuilds the dataset once per neutralized stream and scores dictionary
/// unmixing on each.
fn run_features(ctx: &Ctx, full: &[SampleRecord]) -> Result<(), CliError> {
    let materials = &ctx.cfg.manifest.materials;
    let mut rows = vec![metrics_row(
        "full",
        &unmix_records(full, materials, ctx.cfg.presence_threshold, ctx.meta())?.metrics,
    )];
    for ablation in FeatureAblation::ALL {
        let records = build_records(ctx, &ctx.cfg.manifest, &ablation.options())?;
        let report =
            unmix_records(&records, materials, ctx.cfg.presence_threshold, ctx.meta())?;
        rows.push(metrics_row(ablation.label(), &report.metrics));
    }
    write_csv(&ctx.out.join("ablation_features.csv"), METRICS_HEADER, rows)
}

/// Scores the four unmixing methods on the shared record set.
fn run_methods(ctx: &Ctx, full: &[SampleRecord]) -> Result<(), CliError> {
    let reports = unmix_comparison(
        full,
        &ctx.cfg.manifest.materials,
        ctx.run.pca_components(),
        None,
        ctx.cfg.presence_threshold,
        ctx.meta(),
    )?;
    let rows = reports.iter().map(|r| metrics_row(r.method.label(), &r.metrics));
    write_csv(&ctx.out.join("ablation_methods.csv"), METRICS_HEADER, rows)
}

/// Trains every architecture and loss variant and scores the student on
/// the holdout split.
fn run_arch(ctx: &Ctx, full: &[SampleRecord]) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for variant in ArchVariant::ALL {
        let report = run_arch_variant(
            full,
            &ctx.cfg.forest,
            &ctx.cfg.train,
            variant,
            ctx.cfg.presence_threshold,
            ctx.meta(),
        )?;
        rows.push(metrics_row(variant.label(), &report.student));
    }
    write_csv(&ctx.out.join("ablation_arch.csv"), METRICS_HEADER, rows)
}
