//! Prints teacher/student scores on the reduced smoke dataset.

use hydrovibe_core::dsp::TensorOptions;
use hydrovibe_core::eval::{dataset_records, learn_records, RunMeta};
use hydrovibe_core::learn::{ForestConfig, StudentArch, TrainConfig};
use hydrovibe_core::synth::DatasetManifest;
use hydrovibe_core::tensor::ParafacOptions;

fn main() {
    let mut manifest = DatasetManifest::default_manifest(2024);
    manifest.replicates = 3;
    manifest.binary_ratios = vec![[0.5, 0.5]];
    manifest.ternary_ratios = vec![[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]];
    manifest.capture.sweep.tone_step = 4.0;
    let records =
        dataset_records(&manifest, &TensorOptions::default(), &ParafacOptions::default()).unwrap();

    let forest = ForestConfig { tree_count: 40, max_depth: 10, seed: 7, ..ForestConfig::default() };
    let block = 26 + 3 + 31;
    let train = TrainConfig {
        arch: StudentArch {
            input_len: 3 * block,
            hidden: vec![32, 32],
            residual: true,
            ..StudentArch::default()
        },
        epochs: 40,
        seed: 3,
        ..TrainConfig::default()
    };
    let meta = RunMeta { seed: 2024, config_hash: 0 };
    let report = learn_records(&records, &forest, &train, false, 0.1, meta).unwrap();
    println!("teacher rmse {:?}", report.teacher.rmse);
    println!("student rmse {:?}", report.student.rmse);
    println!(
        "teacher subset {:.3} student subset {:.3}",
        report.teacher.presence.subset_accuracy, report.student.presence.subset_accuracy
    );
    println!(
        "val losses best {} last {:?}",
        report.log.best_epoch,
        report.log.val_loss.last()
    );
}
