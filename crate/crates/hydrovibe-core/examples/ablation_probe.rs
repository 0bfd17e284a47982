//! Unmixing accuracy under each tensor-factor ablation.

use std::time::Instant;

use hydrovibe_core::eval::{
    dataset_records, unmix_records, FeatureAblation, PipelineConfig, RunMeta,
};

fn main() {
    let cfg = PipelineConfig::with_seed(7);
    let meta = RunMeta { seed: 7, config_hash: 0 };
    let score = |opts| {
        let t = Instant::now();
        let records = dataset_records(&cfg.manifest, &opts, &cfg.parafac).unwrap();
        let report =
            unmix_records(&records, &cfg.manifest.materials, cfg.presence_threshold, meta)
                .unwrap();
        (
            report.metrics.presence.subset_accuracy,
            report.metrics.presence.macro_accuracy,
            report.metrics.rmse.overall.unwrap(),
            t.elapsed(),
        )
    };
    let (s, m, r, dt) = score(cfg.tensor);
    println!("full       subset {s:.3} macro {m:.3} rmse {r:.3} ({dt:?})");
    for ab in FeatureAblation::ALL {
        let (s, m, r, dt) = score(ab.options());
        println!("{:<10} subset {s:.3} macro {m:.3} rmse {r:.3} ({dt:?})", ab.label());
    }
}
