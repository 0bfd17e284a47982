//! Model fitting and evaluation over persisted fingerprints: teacher and
//! student checkpoints, loss and learning-rate logs, and metric reports.

use hydrovibe_core::eval::{
    build_feature, learn_records_full, multilabel_metrics, presence_from_ratios, rmse_present,
    stratum_key, EvalError, LearnReport, MetricsReport, SampleRecord,
};
use hydrovibe_core::learn::{
    forest_flatten, forest_predict, forest_restore, one_cycle_lr, predict, train_val_split,
    unflatten_params, LearnError, StudentArch, StudentParams,
};
use hydrovibe_core::synth::SampleKind;

use super::{
    ensure_dir, metrics_row, records_from_fingerprint_files, write_csv, Ctx, METRICS_HEADER,
};
use crate::vwt1::{Container, PayloadKind};
use crate::CliError;

/// Fits the teacher forest and distills the student, then persists both
/// checkpoints, the loss history, and the learning-rate schedule. The
/// metrics CSV is written last as the commit marker.
pub fn cmd_train(ctx: &Ctx) -> Result<LearnReport, CliError> {
    let records = records_from_fingerprint_files(ctx)?;
    let arts = learn_records_full(
        &records,
        &ctx.cfg.forest,
        &ctx.cfg.train,
        false,
        ctx.cfg.presence_threshold,
        ctx.meta(),
    )?;

    let models = ctx.models_dir();
    ensure_dir(&models)?;
    let teacher = forest_flatten(&arts.forest);
    Container::real(PayloadKind::Model, vec![teacher.len() as u64], teacher)?
        .write(&models.join("teacher.vwt1"))?;
    let student = encode_student(&arts.student);
    Container::real(PayloadKind::Model, vec![student.len() as u64], student)?
        .write(&models.join("student.vwt1"))?;

    let log = &arts.report.log;
    write_csv(
        &ctx.out.join("training_log.csv"),
        "epoch,train_loss,val_loss,is_best",
        log.train_loss.iter().zip(&log.val_loss).enumerate().map(|(e, (t, v))| {
            format!("{e},{t},{v},{}", u8::from(e == log.best_epoch))
        }),
    )?;
    write_csv(
        &ctx.out.join("lr_schedule.csv"),
        "step,lr",
        (0..log.total_steps)
            .map(|s| format!("{s},{}", one_cycle_lr(s, log.total_steps, ctx.cfg.train.peak_lr))),
    )?;
    write_csv(
        &ctx.out.join("train_metrics.csv"),
        METRICS_HEADER,
        [
            metrics_row("teacher", &arts.report.teacher),
            metrics_row("student", &arts.report.student),
        ],
    )?;
    Ok(arts.report)
}

/// Scores the persisted checkpoints on the holdout split; with `self_test`
/// the predictions are replaced by the truth to exercise the scorer.
pub fn cmd_eval(ctx: &Ctx, self_test: bool) -> Result<Vec<MetricsReport>, CliError> {
    ensure_dir(&ctx.out)?;
    if self_test {
        let reports = vec![oracle_metrics(ctx)?];
        write_csv(
            &ctx.out.join("metrics.csv"),
            METRICS_HEADER,
            [metrics_row("oracle", &reports[0])],
        )?;
        return Ok(reports);
    }

    let records = records_from_fingerprint_files(ctx)?;
    let models = ctx.models_dir();
    if !models.is_dir() {
        return Err(CliError::MissingArtifacts {
            what: "model checkpoints",
            dir: ctx.out.clone(),
            producer: "train",
        });
    }
    let teacher_file = Container::read(&models.join("teacher.vwt1"))?;
    let student_file = Container::read(&models.join("student.vwt1"))?;
    let wrap = |e: LearnError| EvalError::from(e);
    let forest = forest_restore(&teacher_file.values, &ctx.cfg.forest).map_err(wrap)?;
    let student = decode_student(&student_file.values)?;

    let dims = ctx.tensor_dims();
    let block_len = dims.0 + dims.1 + dims.2;
    if forest.feature_len != ctx.cfg.train.arch.input_len
        || student.arch.input_len != ctx.cfg.train.arch.input_len
    {
        return Err(CliError::ArtifactMismatch(
            "checkpoint input length does not match the config".into(),
        ));
    }

    let strata: Vec<u64> = records.iter().map(|r| stratum_key(&r.spec)).collect();
    let (_, val_idx) = train_val_split(&strata, &ctx.cfg.train).map_err(wrap)?;

    let mut teacher_flags = Vec::with_capacity(val_idx.len());
    let mut teacher_ratios = Vec::with_capacity(val_idx.len());
    let mut student_flags = Vec::with_capacity(val_idx.len());
    let mut student_ratios = Vec::with_capacity(val_idx.len());
    for &i in &val_idx {
        let feature = build_feature(&records[i].fingerprint, block_len);
        let t = forest_predict(&forest, &feature).map_err(wrap)?;
        teacher_flags.push(presence_from_ratios(&t, ctx.cfg.presence_threshold));
        teacher_ratios.push(t);
        let s = predict(&student, &feature).map_err(wrap)?;
        student_flags.push(s.presence);
        student_ratios.push(s.ratios);
    }

    let val: Vec<&SampleRecord> = val_idx.iter().map(|&i| &records[i]).collect();
    let teacher_report = score(ctx, &val, &teacher_flags, &teacher_ratios)?;
    let student_report = score(ctx, &val, &student_flags, &student_ratios)?;
    write_csv(
        &ctx.out.join("metrics.csv"),
        METRICS_HEADER,
        [
            metrics_row("teacher", &teacher_report),
            metrics_row("student", &student_report),
        ],
    )?;
    Ok(vec![teacher_report, student_report])
}

/// Metrics of predictions against the truth on a record subset.
fn score(
    ctx: &Ctx,
    records: &[&SampleRecord],
    flags: &[Vec<bool>],
    ratios: &[Vec<f64>],
) -> Result<MetricsReport, CliError> {
    let truth_flags: Vec<Vec<bool>> = records
        .iter()
        .map(|r| r.truth_presence.iter().map(|&p| p > 0.0).collect())
        .collect();
    let truth_ratios: Vec<Vec<f64>> = records.iter().map(|r| r.truth_ratios.clone()).collect();
    let kinds: Vec<SampleKind> = records.iter().map(|r| r.kind).collect();
    let meta = ctx.meta();
    Ok(MetricsReport {
        presence: multilabel_metrics(flags, &truth_flags)?,
        rmse: rmse_present(ratios, &truth_ratios, &kinds)?,
        seed: meta.seed,
        config_hash: meta.config_hash,
    })
}

/// Scorer self-test: every prediction is the ground truth, so all scores
/// must come back perfect.
fn oracle_metrics(ctx: &Ctx) -> Result<MetricsReport, CliError> {
    let specs = ctx.specs()?;
    let c = ctx.cfg.manifest.materials.len();
    let mut flags = Vec::with_capacity(specs.len());
    let mut ratios = Vec::with_capacity(specs.len());
    let mut truth_flags = Vec::with_capacity(specs.len());
    let mut kinds = Vec::with_capacity(specs.len());
    for spec in &specs {
        let (r, p) = hydrovibe_core::eval::truth_vectors(spec, c);
        flags.push(p.iter().map(|&x| x > 0.0).collect::<Vec<bool>>());
        truth_flags.push(p.iter().map(|&x| x > 0.0).collect::<Vec<bool>>());
        ratios.push(r);
        kinds.push(spec.kind());
    }
    let meta = ctx.meta();
    Ok(MetricsReport {
        presence: multilabel_metrics(&flags, &truth_flags)?,
        rmse: rmse_present(&ratios, &ratios.clone(), &kinds)?,
        seed: meta.seed,
        config_hash: meta.config_hash,
    })
}

/// Student checkpoint payload: a shape prefix, then the canonical
/// flattening. The prefix makes the file self-describing.
fn encode_student(params: &StudentParams) -> Vec<f64> {
    let arch = &params.arch;
    let mut out = Vec::with_capacity(4 + arch.hidden.len() + params.param_count());
    out.push(arch.input_len as f64);
    out.push(arch.outputs as f64);
    out.push(f64::from(u8::from(arch.residual)));
    out.push(arch.hidden.len() as f64);
    out.extend(arch.hidden.iter().map(|&h| h as f64));
    out.extend(hydrovibe_core::learn::flatten_params(params));
    out
}

/// Inverse of [`encode_student`].
fn decode_student(values: &[f64]) -> Result<StudentParams, CliError> {
    let bad = |msg: &str| CliError::ArtifactMismatch(format!("student checkpoint: {msg}"));
    let index = |v: f64| -> Result<usize, CliError> {
        if v.fract() == 0.0 && (0.0..=2_f64.powi(53)).contains(&v) {
            Ok(v as usize)
        } else {
            Err(bad("malformed shape prefix"))
        }
    };
    if values.len() < 4 {
        return Err(bad("truncated shape prefix"));
    }
    let input_len = index(values[0])?;
    let outputs = index(values[1])?;
    let residual = match values[2] {
        v if v == 0.0 => false,
        v if v == 1.0 => true,
        _ => return Err(bad("residual flag must be 0 or 1")),
    };
    let depth = index(values[3])?;
    if values.len() < 4 + depth {
        return Err(bad("truncated hidden widths"));
    }
    let hidden = values[4..4 + depth].iter().map(|&h| index(h)).collect::<Result<_, _>>()?;
    let arch = StudentArch { input_len, hidden, outputs, residual };
    unflatten_params(&arch, &values[4 + depth..])
        .map_err(|e| bad(&format!("parameter block: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use hydrovibe_core::learn::init_student;

    #[test]
    fn student_checkpoint_round_trips() {
        let arch = StudentArch {
            input_len: 12,
            hidden: vec![8, 8],
            outputs: 3,
            residual: true,
        };
        let params = init_student(&arch, 5).unwrap();
        let encoded = encode_student(&params);
        let back = decode_student(&encoded).unwrap();
        assert_eq!(back, params);
    }

    #[test]
    fn mangled_student_checkpoints_are_rejected() {
        let arch = StudentArch { input_len: 4, hidden: vec![3], outputs: 2, residual: false };
        let params = init_student(&arch, 1).unwrap();
        let encoded = encode_student(&params);

        assert!(decode_student(&encoded[..3]).is_err());
        let mut bad_flag = encoded.clone();
        bad_flag[2] = 0.5;
        assert!(decode_student(&bad_flag).is_err());
        let mut truncated = encoded.clone();
        truncated.pop();
        assert!(decode_student(&truncated).is_err());
        let mut trailing = encoded;
        trailing.push(0.0);
        assert!(decode_student(&trailing).is_err());
    }
}
