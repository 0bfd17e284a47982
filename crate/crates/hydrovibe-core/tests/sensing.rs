//! End-to-end checks from synthesized captures through the feature tensor.
//!
//! The expected numbers are computed here from the closed-form vibrometry
//! relation: a surface oscillating with amplitude `d` modulates the
//! reflected phase with amplitude `4 pi d / lambda`, and sampling an
//! integer tone at 10 frames/s leaves a discrete sinusoid whose population
//! deviation is `amplitude / sqrt(2)`, except at multiples of 5 Hz where
//! every sample lands on a zero crossing.

use hydrovibe_core::dsp::{build_tensor, PhaseTensor, TensorOptions};
use hydrovibe_core::synth::{
    default_materials, generate_capture, CaptureConfig, PollutantModel, SampleSpec,
};
use hydrovibe_core::tensor::{parafac, ParafacOptions};

const CARRIER_HZ: f64 = 7.7e10;
const LIGHT_SPEED: f64 = 2.99792458e8;

fn rad_per_meter() -> f64 {
    4.0 * core::f64::consts::PI * CARRIER_HZ / LIGHT_SPEED
}

/// Textbook second-order resonator magnitude, written out independently of
/// the library.
fn resonator(f: f64, f0: f64, zeta: f64) -> f64 {
    let r = f / f0;
    1.0 / ((1.0 - r * r).powi(2) + (2.0 * zeta * r).powi(2)).sqrt()
}

fn probe_material() -> PollutantModel {
    PollutantModel {
        name: "probe".into(),
        permittivity_delta: -0.5,
        attenuation_coeff: 5.0,
        resonance_freq: 75.0,
        damping_ratio: 0.2,
        displacement_gain: 1.0e-6,
        angle_mean: 0.0,
        angle_spread: 5.0,
    }
}

fn noiseless_capture() -> CaptureConfig {
    let mut cfg = CaptureConfig::default_capture();
    cfg.noise_snr_db = f64::INFINITY;
    cfg
}

fn phase_only() -> TensorOptions {
    TensorOptions { use_phase: true, use_power: false, use_aoa: false }
}

/// Phase deviation per tone: the angle factor is a uniform placeholder, so
/// summing it out returns the raw per-bin value.
fn phase_profile(tensor: &PhaseTensor, bin: usize) -> Vec<f64> {
    let (tones, _, angles) = tensor.values.dims();
    (0..tones)
        .map(|n| (0..angles).map(|a| tensor.values.get(n, bin, a)).sum())
        .collect()
}

fn pure_probe_tensor(opts: &TensorOptions) -> PhaseTensor {
    let materials = vec![probe_material()];
    let spec = SampleSpec::new(vec![(0, 1.0)], 1.0, 0, 4242).unwrap();
    let capture = generate_capture(&spec, &materials, &noiseless_capture()).unwrap();
    build_tensor(&capture, opts).unwrap()
}

// --- 1. the sampling comb ---

#[test]
fn tones_at_multiples_of_five_sample_to_silence() {
    let tensor = pure_probe_tensor(&phase_only());
    let profile = phase_profile(&tensor, 0);
    let mut checked = 0;
    for (n, &f) in tensor.tone_axis.iter().enumerate() {
        let tone = f.round() as i64;
        if tone % 5 == 0 {
            assert!(profile[n].abs() < 1e-9, "tone {tone} Hz leaked {:.3e}", profile[n]);
            checked += 1;
        } else {
            assert!(profile[n] > 1e-4, "tone {tone} Hz unexpectedly silent");
        }
    }
    assert_eq!(checked, 21);
}

// --- 2. the vibrometry formula ---

#[test]
fn phase_deviation_matches_the_closed_form() {
    let tensor = pure_probe_tensor(&phase_only());
    let mat = probe_material();
    for bin in 0..3 {
        let profile = phase_profile(&tensor, bin);
        for &f in &[52.0, 63.0, 87.0, 101.0] {
            let n = (f - tensor.tone_axis[0]).round() as usize;
            let amp = mat.displacement_gain * resonator(f, mat.resonance_freq, mat.damping_ratio);
            let expected = rad_per_meter() * amp / 2.0f64.sqrt();
            let rel = (profile[n] - expected).abs() / expected;
            assert!(rel < 1e-9, "tone {f} bin {bin}: got {} want {expected}", profile[n]);
        }
    }
}

#[test]
fn micron_scale_motion_reads_in_milliradians() {
    // 1 um of surface travel is about 3.23 mrad of two-way phase at the
    // stock carrier; the sqrt(2) undoes the sinusoidal averaging.
    let tensor = pure_probe_tensor(&phase_only());
    let mat = probe_material();
    let f = 52.0;
    let n = (f - tensor.tone_axis[0]).round() as usize;
    let amp = mat.displacement_gain * resonator(f, mat.resonance_freq, mat.damping_ratio);
    let per_micron = phase_profile(&tensor, 0)[n] * 2.0f64.sqrt() / (amp / 1.0e-6);
    assert!((per_micron - 3.2276e-3).abs() < 3.3e-5, "got {per_micron}");
}

// --- 3. covariances ---

#[test]
fn halving_the_excitation_halves_the_phase() {
    let materials = vec![probe_material()];
    let spec = SampleSpec::new(vec![(0, 1.0)], 1.0, 0, 4242).unwrap();
    let full = {
        let capture = generate_capture(&spec, &materials, &noiseless_capture()).unwrap();
        build_tensor(&capture, &phase_only()).unwrap()
    };
    let half = {
        let mut cfg = noiseless_capture();
        cfg.perturb.excitation_scale = 0.5;
        let capture = generate_capture(&spec, &materials, &cfg).unwrap();
        build_tensor(&capture, &phase_only()).unwrap()
    };
    let a = full.values.data();
    let b = half.values.data();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x * 0.5 - y).abs() <= 1e-12 * x.abs().max(1.0));
    }
}

#[test]
fn mixture_phase_is_ratio_linear_in_the_pure_profiles() {
    // Every scatterer rides the same surface, so displacement mixes
    // linearly and the phase deviation inherits it.
    let materials = default_materials();
    let cfg = noiseless_capture();
    let profile_of = |components: Vec<(usize, f64)>| {
        let spec = SampleSpec::new(components, 1.0, 0, 777).unwrap();
        let capture = generate_capture(&spec, &materials, &cfg).unwrap();
        phase_profile(&build_tensor(&capture, &phase_only()).unwrap(), 0)
    };
    let copper = profile_of(vec![(0, 1.0)]);
    let oil = profile_of(vec![(3, 1.0)]);
    let mix = profile_of(vec![(0, 0.3), (3, 0.7)]);
    for n in 0..mix.len() {
        // Comb tones are pure rounding noise, hence the absolute floor.
        let expected = 0.3 * copper[n] + 0.7 * oil[n];
        assert!(
            (mix[n] - expected).abs() <= 1e-9 * expected.abs() + 1e-12,
            "tone index {n}: {} vs {expected}",
            mix[n]
        );
    }
}

#[test]
fn tilting_the_rig_shifts_the_angle_spectrum() {
    let materials = default_materials();
    // Magnesium sits at broadside, so a 10 degree tilt stays on the grid.
    let spec = SampleSpec::new(vec![(2, 1.0)], 1.0, 0, 31).unwrap();
    let peak_under = |tilt: f64| {
        let mut cfg = noiseless_capture();
        cfg.perturb.tilt_deg = tilt;
        let capture = generate_capture(&spec, &materials, &cfg).unwrap();
        let tensor = build_tensor(&capture, &TensorOptions::default()).unwrap();
        let (tones, bins, angles) = tensor.values.dims();
        let marginal: Vec<f64> = (0..angles)
            .map(|a| {
                (0..tones).map(|n| (0..bins).map(|b| tensor.values.get(n, b, a)).sum::<f64>()).sum()
            })
            .collect();
        let peak = marginal
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(a, _)| tensor.angle_axis[a])
            .unwrap();
        peak
    };
    let shift = peak_under(10.0) - peak_under(0.0);
    // The steering grid is 2 degrees wide, so allow one step of slack on
    // each side.
    assert!((shift - 10.0).abs() <= 4.0, "spectrum peak moved {shift} degrees");
}

// --- 4. spectral shape ---

#[test]
fn phase_profile_peaks_near_the_damped_resonance() {
    let materials = default_materials();
    let spec = SampleSpec::new(vec![(0, 1.0)], 1.0, 0, 5).unwrap();
    let capture = generate_capture(&spec, &materials, &noiseless_capture()).unwrap();
    let tensor = build_tensor(&capture, &phase_only()).unwrap();
    let profile = phase_profile(&tensor, 0);
    let peak = profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(n, _)| tensor.tone_axis[n])
        .unwrap();
    // Copper resonates at 45 Hz; 45 itself lands on the sampling comb, so
    // the peak falls on a neighbor of the damped frequency.
    assert!((43.0..=47.0).contains(&peak), "peak at {peak} Hz");
}

#[test]
fn noise_distortion_grows_as_snr_drops() {
    let materials = default_materials();
    let spec = SampleSpec::new(vec![(0, 0.5), (4, 0.5)], 1.0, 0, 99).unwrap();
    let tensor_at = |snr: f64| {
        let mut cfg = CaptureConfig::default_capture();
        cfg.noise_snr_db = snr;
        let capture = generate_capture(&spec, &materials, &cfg).unwrap();
        build_tensor(&capture, &TensorOptions::default()).unwrap()
    };
    let clean = tensor_at(f64::INFINITY);
    let distance = |t: &PhaseTensor| {
        t.values
            .data()
            .iter()
            .zip(clean.values.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let d40 = distance(&tensor_at(40.0));
    let d20 = distance(&tensor_at(20.0));
    let d10 = distance(&tensor_at(10.0));
    assert!(d40 > 0.0);
    assert!(d40 < d20 && d20 < d10, "distances {d40} {d20} {d10}");
}

// --- 5. separability ---

#[test]
fn noiseless_pure_tensor_is_rank_one() {
    // With noise off, phase deviation is constant across the selected
    // bins, per-bin power is constant across tones, and the angle spectrum
    // is shared by all tones, so the tensor factorizes exactly.
    let spec = SampleSpec::new(vec![(1, 1.0)], 1.0, 0, 8).unwrap();
    let capture = generate_capture(&spec, &default_materials(), &noiseless_capture()).unwrap();
    let tensor = build_tensor(&capture, &TensorOptions::default()).unwrap();
    let factors = parafac(&tensor.values, 1, &ParafacOptions::default()).unwrap();
    assert!(factors.fit < 1e-8, "relative error {}", factors.fit);
}
