//! Full-scale dry run of the default pipeline: the numbers behind the
//! end-to-end recovery gate.

use std::time::Instant;

use hydrovibe_core::eval::{
    dataset_records, learn_records, run_arch_variant, unmix_comparison, unmix_records,
    ArchVariant, PipelineConfig, RunMeta,
};

fn main() {
    let cfg = PipelineConfig::with_seed(7);
    let meta = RunMeta { seed: 7, config_hash: 0 };

    let t0 = Instant::now();
    let records = dataset_records(&cfg.manifest, &cfg.tensor, &cfg.parafac).unwrap();
    println!("records: {} in {:?}", records.len(), t0.elapsed());

    let t1 = Instant::now();
    let unmix = unmix_records(&records, &cfg.manifest.materials, cfg.presence_threshold, meta)
        .unwrap();
    println!("unmix rmse {:?}", unmix.metrics.rmse);
    println!(
        "unmix subset {:.3} ({:?})",
        unmix.metrics.presence.subset_accuracy,
        t1.elapsed()
    );

    let t2 = Instant::now();
    let learn =
        learn_records(&records, &cfg.forest, &cfg.train, false, cfg.presence_threshold, meta)
            .unwrap();
    println!("teacher rmse {:?}", learn.teacher.rmse);
    println!("student rmse {:?}", learn.student.rmse);
    println!(
        "teacher subset {:.3} student subset {:.3} ({:?})",
        learn.teacher.presence.subset_accuracy,
        learn.student.presence.subset_accuracy,
        t2.elapsed()
    );

    // Pure-sample subset accuracy for the student, the second gate.
    let t3 = Instant::now();
    let comparison = unmix_comparison(
        &records,
        &cfg.manifest.materials,
        10,
        None,
        cfg.presence_threshold,
        meta,
    )
    .unwrap();
    for r in &comparison {
        println!(
            "method {:<14} subset {:.3} macro-acc {:.3}",
            r.method.label(),
            r.metrics.presence.subset_accuracy,
            r.metrics.presence.macro_accuracy
        );
    }
    println!("comparison in {:?}", t3.elapsed());

    let t4 = Instant::now();
    let nosoft = run_arch_variant(
        &records,
        &cfg.forest,
        &cfg.train,
        ArchVariant::NoSoftLabels,
        cfg.presence_threshold,
        meta,
    )
    .unwrap();
    println!(
        "no-soft-labels student rmse {:?} ({:?})",
        nosoft.student.rmse,
        t4.elapsed()
    );
    println!("total {:?}", t0.elapsed());
}
