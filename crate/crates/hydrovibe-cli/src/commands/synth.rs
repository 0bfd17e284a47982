//! Dataset synthesis: one feature tensor file per sample plus the labels
//! manifest, written last as the commit marker.

use hydrovibe_core::dsp::build_tensor;
use hydrovibe_core::eval::EvalError;
use hydrovibe_core::synth::generate_capture;
use rayon::prelude::*;

use super::{ensure_dir, kind_label, sample_file, write_csv, Ctx};
use crate::vwt1::{Container, PayloadKind};
use crate::CliError;

/// What `synth` produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthSummary {
    /// Samples written.
    pub samples: usize,
    /// Raw capture cubes written (0 unless `--keep-raw`).
    pub raw_cubes: usize,
}

/// Generates every sample in the manifest and persists its feature tensor;
/// raw IF cubes are only kept on request since they dwarf the tensors.
pub fn cmd_synth(ctx: &Ctx) -> Result<SynthSummary, CliError> {
    let specs = ctx.specs()?;
    let tensors = ctx.tensors_dir();
    ensure_dir(&tensors)?;
    if ctx.keep_raw {
        ensure_dir(&ctx.raw_dir())?;
    }

    let materials = &ctx.cfg.manifest.materials;
    let capture_cfg = &ctx.cfg.manifest.capture;
    specs.par_iter().enumerate().try_for_each(|(i, spec)| {
        let capture = generate_capture(spec, materials, capture_cfg).map_err(EvalError::from)?;
        let tensor = build_tensor(&capture, &ctx.cfg.tensor).map_err(EvalError::from)?;
        let (d0, d1, d2) = tensor.values.dims();
        let file = Container::real(
            PayloadKind::Tensor,
            vec![d0 as u64, d1 as u64, d2 as u64],
            tensor.values.data().to_vec(),
        )?;
        file.write(&tensors.join(sample_file(i)))?;

        if ctx.keep_raw {
            let mut interleaved = Vec::with_capacity(capture.data.len() * 2);
            for z in &capture.data {
                interleaved.push(z.re);
                interleaved.push(z.im);
            }
            let cube = Container::complex(
                PayloadKind::RawCapture,
                vec![capture.frames as u64, capture.antennas as u64, capture.fast_time as u64],
                interleaved,
            )?;
            cube.write(&ctx.raw_dir().join(sample_file(i)))?;
        }
        Ok::<(), CliError>(())
    })?;

    write_manifest(ctx)?;
    Ok(SynthSummary {
        samples: specs.len(),
        raw_cubes: if ctx.keep_raw { specs.len() } else { 0 },
    })
}

/// The labels manifest: truth ratios, presence, sample type, and seeds.
fn write_manifest(ctx: &Ctx) -> Result<(), CliError> {
    let specs = ctx.specs()?;
    let materials = &ctx.cfg.manifest.materials;
    let names: Vec<&str> = materials.iter().map(|m| m.name.as_str()).collect();
    let header = format!(
        "sample,kind,seed,replicate,concentration_mg_l,{},{},tensor_file",
        names.iter().map(|n| format!("ratio_{n}")).collect::<Vec<_>>().join(","),
        names.iter().map(|n| format!("present_{n}")).collect::<Vec<_>>().join(","),
    );
    let rows = specs.iter().enumerate().map(|(i, spec)| {
        let (ratios, presence) = hydrovibe_core::eval::truth_vectors(spec, materials.len());
        format!(
            "{},{},{},{},{},{},{},tensors/{}",
            i,
            kind_label(spec.kind()),
            spec.seed,
            spec.replicate_id,
            spec.concentration_scale,
            ratios.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
            presence.iter().map(|&p| ((p > 0.0) as u8).to_string()).collect::<Vec<_>>().join(","),
            sample_file(i)
        )
    });
    write_csv(&ctx.out.join("manifest.csv"), &header, rows)
}
