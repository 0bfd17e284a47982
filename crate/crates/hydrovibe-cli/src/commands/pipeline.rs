//! The fingerprinting stage: decomposition over all samples, dictionary
//! from training pures, and unmixing of every mixture.

use hydrovibe_core::eval::{
    pure_dictionary, stratum_key, unmix_against, EvalError, MetricsReport, SampleRecord,
};
use hydrovibe_core::learn::train_val_split;
use hydrovibe_core::synth::SampleKind;

use super::{
    ensure_dir, kind_label, metrics_row, records_from_tensor_files, sample_file, write_csv,
    Ctx, METRICS_HEADER,
};
use crate::vwt1::{Container, PayloadKind};
use crate::CliError;

/// What `pipeline` produced.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSummary {
    /// Samples processed.
    pub samples: usize,
    /// Mixture rows in the unmixing CSV.
    pub mixtures: usize,
    /// Dictionary-unmixing scores over all samples.
    pub metrics: MetricsReport,
}

/// Decomposes every persisted tensor, writes fingerprints, builds the
/// dictionary from the training-split pures, and unmixes all samples.
/// The metrics CSV is written last as the commit marker.
pub fn cmd_pipeline(ctx: &Ctx) -> Result<PipelineSummary, CliError> {
    let records = records_from_tensor_files(ctx)?;

    let prints = ctx.fingerprints_dir();
    ensure_dir(&prints)?;
    for (i, r) in records.iter().enumerate() {
        let block_len = (r.tensor_dims.0 + r.tensor_dims.1 + r.tensor_dims.2) as u64;
        let file = Container::real(
            PayloadKind::Fingerprint,
            vec![r.fingerprint.rank as u64, block_len],
            r.fingerprint.vector.clone(),
        )?;
        file.write(&prints.join(sample_file(i)))?;
    }

    // The dictionary only sees pures from the training split, the same
    // split the models train on, so no holdout sample leaks into it.
    let strata: Vec<u64> = records.iter().map(|r| stratum_key(&r.spec)).collect();
    let (train_idx, _) = train_val_split(&strata, &ctx.cfg.train).map_err(EvalError::from)?;
    let train_pures: Vec<SampleRecord> = train_idx
        .iter()
        .map(|&i| records[i].clone())
        .filter(|r| r.kind == SampleKind::Pure)
        .collect();
    let dict = pure_dictionary(&train_pures, &ctx.cfg.manifest.materials)?;
    let dict_file = Container::real(
        PayloadKind::Dictionary,
        vec![dict.matrix.rows as u64, dict.matrix.cols as u64],
        dict.matrix.data.clone(),
    )?;
    dict_file.write(&ctx.out.join("dictionary.vwt1"))?;

    let report = unmix_against(&dict, &records, ctx.cfg.presence_threshold, ctx.meta())?;
    write_unmix_csv(ctx, &records, &report.ratios, &report.residuals)?;
    write_csv(
        &ctx.out.join("unmix_metrics.csv"),
        METRICS_HEADER,
        [metrics_row("dictionary-unmix", &report.metrics)],
    )?;

    let mixtures = records.iter().filter(|r| r.kind != SampleKind::Pure).count();
    Ok(PipelineSummary { samples: records.len(), mixtures, metrics: report.metrics })
}

/// Estimated vs true ratios, one row per mixture.
fn write_unmix_csv(
    ctx: &Ctx,
    records: &[SampleRecord],
    ratios: &[Vec<f64>],
    residuals: &[f64],
) -> Result<(), CliError> {
    let names: Vec<&str> =
        ctx.cfg.manifest.materials.iter().map(|m| m.name.as_str()).collect();
    let header = format!(
        "sample,kind,residual,{},{}",
        names.iter().map(|n| format!("est_{n}")).collect::<Vec<_>>().join(","),
        names.iter().map(|n| format!("true_{n}")).collect::<Vec<_>>().join(","),
    );
    let rows = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.kind != SampleKind::Pure)
        .map(|(i, r)| {
            format!(
                "{},{},{},{},{}",
                i,
                kind_label(r.kind),
                residuals[i],
                ratios[i].iter().map(f64::to_string).collect::<Vec<_>>().join(","),
                r.truth_ratios.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
            )
        });
    write_csv(&ctx.out.join("unmix.csv"), &header, rows)
}
