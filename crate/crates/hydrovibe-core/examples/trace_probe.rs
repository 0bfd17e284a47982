//! Iteration-count probe across sample kinds.

use std::time::Instant;

use hydrovibe_core::dsp::{build_tensor, TensorOptions};
use hydrovibe_core::synth::{default_materials, generate_capture, CaptureConfig, SampleSpec};
use hydrovibe_core::tensor::{parafac_trace, ParafacOptions};

fn main() {
    let materials = default_materials();
    let cfg = CaptureConfig::default_capture();
    for (label, comps) in [
        ("pure", vec![(0usize, 1.0f64)]),
        ("binary", vec![(0, 0.5), (3, 0.5)]),
        ("ternary", vec![(0, 0.4), (2, 0.4), (4, 0.2)]),
    ] {
        let spec = SampleSpec::new(comps.clone(), 1.0, 0, 1).unwrap();
        let capture = generate_capture(&spec, &materials, &cfg).unwrap();
        let tensor = build_tensor(&capture, &TensorOptions::default()).unwrap();
        let t0 = Instant::now();
        let (factors, trace) =
            parafac_trace(&tensor.values, comps.len(), &ParafacOptions::default()).unwrap();
        println!(
            "{label}: rank {} iters(best) {} fit {:.3e} elapsed {:?}",
            comps.len(),
            trace.len(),
            factors.fit,
            t0.elapsed()
        );
    }
}
