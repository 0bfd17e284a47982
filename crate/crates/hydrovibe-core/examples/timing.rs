//! Rough per-stage timing probe for one default-sweep sample.

use std::time::Instant;

use hydrovibe_core::dsp::{build_tensor, TensorOptions};
use hydrovibe_core::synth::{default_materials, generate_capture, CaptureConfig, SampleSpec};
use hydrovibe_core::tensor::{parafac, ParafacOptions};

fn main() {
    let materials = default_materials();
    let cfg = CaptureConfig::default_capture();
    let spec = SampleSpec::new(vec![(0, 0.5), (3, 0.5)], 1.0, 0, 1).unwrap();

    let t0 = Instant::now();
    let capture = generate_capture(&spec, &materials, &cfg).unwrap();
    let t1 = Instant::now();
    let tensor = build_tensor(&capture, &TensorOptions::default()).unwrap();
    let t2 = Instant::now();
    let factors = parafac(&tensor.values, 2, &ParafacOptions::default()).unwrap();
    let t3 = Instant::now();

    println!("frames: {}", capture.frames);
    println!("synth:   {:?}", t1 - t0);
    println!("tensor:  {:?}", t2 - t1);
    println!("parafac: {:?} (fit {:.3e})", t3 - t2, factors.fit);
}
