//! Deterministic synthesizer for acoustic-sweep radar captures.
//!
//! Stands in for the hardware rig: a speaker sweeps 101 one-second tones
//! (25..125 Hz) across a water sample while a 77 GHz radar watches the
//! surface at 10 frames/s through an 8-element virtual array. Each pollutant
//! is a [`PollutantModel`]: it shifts the liquid's permittivity and loss,
//! adds a mechanical resonance that modulates surface displacement, and owns
//! a small set of angular scatterers drawn once from a per-material seed.
//!
//! Sampling note: 10 frames/s cannot track a 25..125 Hz oscillation
//! directly, so tones alias. Frames are evaluated at exact timestamps, which
//! makes the aliasing deterministic, and downstream features use oscillation
//! amplitude (std-dev over a full tone window), which full-period sampling
//! preserves. Tones at multiples of 5 Hz land on the sampling comb's zeros
//! and contribute no oscillation; those nulls are common to every material.
//!
//! Everything is reproducible: material scatterers come from a name-hash
//! seed, per-sample streams from a root-seed counter scheme, so captures are
//! bit-identical across runs and across sample-generation orderings.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use num_traits::Float;

use crate::em::{self, EmError, MediumSpec, RadarParams};
use crate::rng::{derive_seed, name_seed, SeededRng};

const PI: f64 = core::f64::consts::PI;

/// Substream tag for the per-sample concentration draw.
const STREAM_CONCENTRATION: u64 = 1;
/// Substream tag for the per-sample noise stream.
const STREAM_NOISE: u64 = 2;

/// Errors from synthesis and dataset assembly.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    /// A component id does not resolve in the material table.
    #[error("unknown pollutant id {0}")]
    UnknownPollutant(usize),
    /// Component ratios are negative or do not sum to 1.
    #[error("component ratios must be non-negative and sum to 1")]
    NonSimplex,
    /// A sample must carry between 1 and 3 components.
    #[error("sample must have 1 to 3 components, got {0}")]
    BadComponentCount(usize),
    /// Concentration scale outside the supported [0.4, 5] mg/L window.
    #[error("concentration_scale {0} outside [0.4, 5] mg/L")]
    BadConcentration(f64),
    /// A material parameter violates its bounds.
    #[error("invalid material `{name}`: {reason}")]
    InvalidMaterial {
        /// Offending material name.
        name: String,
        /// Violated bound.
        reason: &'static str,
    },
    /// Sweep timing is inconsistent or non-positive.
    #[error("invalid sweep: {0}")]
    InvalidSweep(&'static str),
    /// Scene geometry is inconsistent or non-positive.
    #[error("invalid scene: {0}")]
    InvalidScene(&'static str),
    /// Perturbation knob outside its allowed range.
    #[error("perturbation out of range: {0}")]
    OutOfRangePerturbation(&'static str),
    /// Dataset manifest fails validation.
    #[error("invalid manifest: {0}")]
    InvalidManifest(&'static str),
    /// Underlying physics error.
    #[error("physics error: {0}")]
    Em(#[from] EmError),
}

// ---------------------------------------------------------------------------
// domain types
// ---------------------------------------------------------------------------

/// Synthetic pollutant parameterization. Values are design parameters, not
/// measured properties; the defaults are calibrated so the five materials are
/// separable but overlapping (see [`default_materials`]).
#[derive(Debug, Clone, PartialEq)]
pub struct PollutantModel {
    /// Identifier; also seeds the material's scatterer draw.
    pub name: String,
    /// Linear shift of the liquid's relative permittivity per mg/L.
    pub permittivity_delta: f64,
    /// Linear shift of the liquid's attenuation per mg/L, Np/m.
    pub attenuation_coeff: f64,
    /// Mechanical resonance frequency, Hz; must sit inside the sweep band.
    pub resonance_freq: f64,
    /// Damping ratio zeta of the second-order resonance, in (0, 1).
    pub damping_ratio: f64,
    /// Surface displacement scale in meters (sub-wavelength regime).
    pub displacement_gain: f64,
    /// Mean scatterer azimuth, degrees.
    pub angle_mean: f64,
    /// Scatterer azimuth standard deviation, degrees.
    pub angle_spread: f64,
}

impl PollutantModel {
    /// Checks every field against its physical bounds.
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |reason| {
            Err(SynthError::InvalidMaterial { name: self.name.clone(), reason })
        };
        if self.name.is_empty() {
            return fail("name must be non-empty");
        }
        if !(25.0..=125.0).contains(&self.resonance_freq) {
            return fail("resonance_freq must be within [25, 125] Hz");
        }
        if !(self.damping_ratio > 0.0 && self.damping_ratio < 1.0) {
            return fail("damping_ratio must be in (0, 1)");
        }
        if !(1e-7..=1e-4).contains(&self.displacement_gain) {
            return fail("displacement_gain must be in [1e-7, 1e-4] m");
        }
        if !(-30.0..=30.0).contains(&self.angle_mean) {
            return fail("angle_mean must be within [-30, 30] degrees");
        }
        if !(self.angle_spread > 0.0) {
            return fail("angle_spread must be positive");
        }
        if !self.permittivity_delta.is_finite() || !self.attenuation_coeff.is_finite() {
            return fail("permittivity/attenuation deltas must be finite");
        }
        if self.attenuation_coeff < 0.0 {
            return fail("attenuation_coeff must be non-negative");
        }
        Ok(())
    }
}

/// The five stock materials.
///
/// Damping ratios and displacement gains are co-tuned so every material's
/// sampled resonance profile carries the same l2 energy across the sweep;
/// unequal profile energy would bias dictionary unmixing toward the louder
/// material. Angle means are spread over [-20, +20] degrees with an 8 degree
/// spread so angular signatures overlap rather than trivially separate.
pub fn default_materials() -> Vec<PollutantModel> {
    let m = |name: &str, pd, ac, fr, z, g, am| PollutantModel {
        name: String::from(name),
        permittivity_delta: pd,
        attenuation_coeff: ac,
        resonance_freq: fr,
        damping_ratio: z,
        displacement_gain: g,
        angle_mean: am,
        angle_spread: 8.0,
    };
    vec![
        m("copper", -0.50, 6.0, 45.0, 0.10, 9.95e-6, -20.0),
        m("iron", -0.35, 5.0, 60.0, 0.09, 8.03e-6, -10.0),
        m("magnesium", -0.20, 4.0, 75.0, 0.11, 7.97e-6, 0.0),
        m("oil", -1.20, 10.0, 90.0, 0.12, 7.68e-6, 10.0),
        m("sediment", 0.80, 14.0, 110.0, 0.08, 5.83e-6, 20.0),
    ]
}

/// Mixture kind by component count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    /// One component.
    Pure,
    /// Two components.
    Binary,
    /// Three components.
    Ternary,
}

/// One labeled sample: which pollutants at which ratios, how concentrated,
/// which replicate, and the seed driving its stochastic draws.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec {
    /// (material index, ratio) pairs; ratios sum to 1.
    pub components: Vec<(usize, f64)>,
    /// Total pollutant concentration, mg/L.
    pub concentration_scale: f64,
    /// Replicate counter within the same composition.
    pub replicate_id: u32,
    /// Root of this sample's random substreams.
    pub seed: u64,
}

impl SampleSpec {
    /// Validated constructor.
    pub fn new(
        components: Vec<(usize, f64)>,
        concentration_scale: f64,
        replicate_id: u32,
        seed: u64,
    ) -> Result<Self, SynthError> {
        let spec = SampleSpec { components, concentration_scale, replicate_id, seed };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks component count, the ratio simplex, and concentration bounds.
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.components.is_empty() || self.components.len() > 3 {
            return Err(SynthError::BadComponentCount(self.components.len()));
        }
        check_simplex(&self.components)?;
        if !(0.4..=5.0).contains(&self.concentration_scale) {
            return Err(SynthError::BadConcentration(self.concentration_scale));
        }
        Ok(())
    }

    /// Pure / binary / ternary.
    pub fn kind(&self) -> SampleKind {
        match self.components.len() {
            1 => SampleKind::Pure,
            2 => SampleKind::Binary,
            _ => SampleKind::Ternary,
        }
    }
}

fn check_simplex(components: &[(usize, f64)]) -> Result<(), SynthError> {
    let mut sum = 0.0;
    for &(_, r) in components {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(SynthError::NonSimplex);
        }
        sum += r;
    }
    if components.is_empty() {
        return Ok(());
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(SynthError::NonSimplex);
    }
    Ok(())
}

/// Acoustic sweep timing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    /// First tone, Hz.
    pub tone_start: f64,
    /// Last tone, Hz (inclusive).
    pub tone_end: f64,
    /// Tone spacing, Hz.
    pub tone_step: f64,
    /// Seconds each tone plays.
    pub tone_duration: f64,
    /// Radar frame rate, frames/s.
    pub frame_rate: f64,
}

impl SweepConfig {
    /// The stock 25..125 Hz sweep: 101 tones, 1 s each, 10 frames/s.
    pub fn default_sweep() -> Self {
        SweepConfig {
            tone_start: 25.0,
            tone_end: 125.0,
            tone_step: 1.0,
            tone_duration: 1.0,
            frame_rate: 10.0,
        }
    }

    /// Consistency checks: positive timing, integral tone count and
    /// frames-per-tone, at least two frames per tone window.
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.tone_step > 0.0) || !(self.tone_duration > 0.0) || !(self.frame_rate > 0.0) {
            return Err(SynthError::InvalidSweep("timing values must be positive"));
        }
        if self.tone_end < self.tone_start || self.tone_start <= 0.0 {
            return Err(SynthError::InvalidSweep("tone band must be positive and ordered"));
        }
        let span = (self.tone_end - self.tone_start) / self.tone_step;
        if (span - span.round()).abs() > 1e-9 {
            return Err(SynthError::InvalidSweep("tone_step must tile the band exactly"));
        }
        let fpt = self.tone_duration * self.frame_rate;
        if (fpt - fpt.round()).abs() > 1e-9 || fpt.round() < 2.0 {
            return Err(SynthError::InvalidSweep(
                "frame_rate * tone_duration must be an integer >= 2",
            ));
        }
        Ok(())
    }

    /// Number of tones in the sweep.
    pub fn tones(&self) -> usize {
        ((self.tone_end - self.tone_start) / self.tone_step).round() as usize + 1
    }

    /// Frames recorded per tone.
    pub fn frames_per_tone(&self) -> usize {
        (self.tone_duration * self.frame_rate).round() as usize
    }

    /// Total frames in a capture.
    pub fn total_frames(&self) -> usize {
        self.tones() * self.frames_per_tone()
    }

    /// Frequency of tone `i`, Hz.
    pub fn tone_freq(&self, i: usize) -> f64 {
        self.tone_start + self.tone_step * i as f64
    }
}

/// Static scene geometry: where the surface sits, how deep the liquid is,
/// what backs it, and the capture dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    /// Radar-to-surface range, m.
    pub surface_range_m: f64,
    /// Liquid depth (slab thickness), m.
    pub liquid_depth_m: f64,
    /// Baseline relative permittivity of clean water.
    pub water_permittivity: f64,
    /// Medium behind the liquid (container base or reflector).
    pub backing: MediumSpec,
    /// Virtual array elements at half-wavelength spacing.
    pub antennas: usize,
    /// Fast-time samples per chirp (power of two).
    pub fast_time_samples: usize,
    /// Scatterers drawn per material.
    pub scatterers_per_material: usize,
}

impl SceneConfig {
    /// Desk-scale default: surface at 0.30 m, 3 cm of liquid over air,
    /// 8 antennas, 128 fast-time samples, 4 scatterers per material.
    pub fn default_scene() -> Self {
        SceneConfig {
            surface_range_m: 0.30,
            liquid_depth_m: 0.03,
            water_permittivity: 81.0,
            backing: MediumSpec::air(),
            antennas: 8,
            fast_time_samples: 128,
            scatterers_per_material: 4,
        }
    }

    /// Bounds checks.
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.surface_range_m > 0.0) || !(self.liquid_depth_m > 0.0) {
            return Err(SynthError::InvalidScene("ranges and depth must be positive"));
        }
        if self.water_permittivity < 1.0 {
            return Err(SynthError::InvalidScene("water permittivity must be >= 1"));
        }
        if self.antennas < 2 {
            return Err(SynthError::InvalidScene("need at least 2 antennas"));
        }
        if self.fast_time_samples < 8 || !self.fast_time_samples.is_power_of_two() {
            return Err(SynthError::InvalidScene("fast_time_samples must be a power of two >= 8"));
        }
        if self.scatterers_per_material == 0 {
            return Err(SynthError::InvalidScene("need at least one scatterer per material"));
        }
        Ok(())
    }
}

/// Simulated rig imperfections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbConfig {
    /// Constant azimuth offset added to every scatterer, degrees.
    pub tilt_deg: f64,
    /// Multiplier on displacement amplitude (speaker distance/power).
    pub excitation_scale: f64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig { tilt_deg: 0.0, excitation_scale: 1.0 }
    }
}

impl PerturbConfig {
    /// Range checks: tilt within +-30 degrees, scale in (0, 1].
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(-30.0..=30.0).contains(&self.tilt_deg) {
            return Err(SynthError::OutOfRangePerturbation("tilt must be within [-30, 30] deg"));
        }
        if !(self.excitation_scale > 0.0 && self.excitation_scale <= 1.0) {
            return Err(SynthError::OutOfRangePerturbation("excitation_scale must be in (0, 1]"));
        }
        Ok(())
    }
}

/// Everything needed to turn a [`SampleSpec`] into a capture.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureConfig {
    /// Acoustic sweep timing.
    pub sweep: SweepConfig,
    /// Radar waveform.
    pub radar: RadarParams,
    /// Scene geometry and capture dimensions.
    pub scene: SceneConfig,
    /// Noise level in dB relative to mean signal power; `f64::INFINITY`
    /// disables noise.
    pub noise_snr_db: f64,
    /// Rig perturbations applied to every sample.
    pub perturb: PerturbConfig,
}

impl CaptureConfig {
    /// Stock configuration at 20 dB SNR, no perturbation.
    pub fn default_capture() -> Self {
        CaptureConfig {
            sweep: SweepConfig::default_sweep(),
            radar: RadarParams::default_77ghz(),
            scene: SceneConfig::default_scene(),
            noise_snr_db: 20.0,
            perturb: PerturbConfig::default(),
        }
    }

    /// Validates each part.
    pub fn validate(&self) -> Result<(), SynthError> {
        self.sweep.validate()?;
        self.scene.validate()?;
        self.perturb.validate()?;
        if self.noise_snr_db.is_nan() {
            return Err(SynthError::InvalidScene("noise_snr_db must not be NaN"));
        }
        Ok(())
    }
}

/// One angular scatterer on the liquid surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    /// Azimuth, degrees.
    pub angle_deg: f64,
    /// Amplitude (reflection magnitude times mixture weight).
    pub amplitude: f64,
}

/// Realized scene for one sample: scatterer set plus excitation scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureGeometry {
    /// Scatterers across all components.
    pub scatterers: Vec<Scatterer>,
    /// Displacement amplitude multiplier.
    pub excitation_scale: f64,
}

/// A complete synthetic capture: frame-major complex IF data plus the
/// configuration and ground truth that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCapture {
    /// Frame count.
    pub frames: usize,
    /// Virtual antenna count.
    pub antennas: usize,
    /// Fast-time samples per chirp.
    pub fast_time: usize,
    /// Frames in each tone window.
    pub frames_per_tone: usize,
    /// Row-major [frame][antenna][fast-time] IF samples.
    pub data: Vec<Complex64>,
    /// Sweep that produced the capture.
    pub sweep: SweepConfig,
    /// Radar parameters in effect.
    pub radar: RadarParams,
    /// Ground-truth sample description.
    pub truth: SampleSpec,
}

impl RawCapture {
    /// IF sample at (frame, antenna, fast-time).
    #[inline]
    pub fn at(&self, frame: usize, antenna: usize, tau: usize) -> Complex64 {
        self.data[(frame * self.antennas + antenna) * self.fast_time + tau]
    }
}

// ---------------------------------------------------------------------------
// physics assembly
// ---------------------------------------------------------------------------

/// Magnitude of the second-order resonator response at frequency `f`:
/// 1 / sqrt((1 - (f/f_res)^2)^2 + (2 zeta f/f_res)^2), denominator floored
/// at 1e-12 against the undamped pole.
pub fn resonance_gain(f: f64, resonance_freq: f64, damping_ratio: f64) -> f64 {
    let ratio = f / resonance_freq;
    let a = 1.0 - ratio * ratio;
    let b = 2.0 * damping_ratio * ratio;
    1.0 / (a * a + b * b).sqrt().max(1e-12)
}

/// Effective liquid medium for a mixture: permittivity and attenuation shift
/// linearly with ratio-weighted concentration; thickness is the liquid depth.
/// An empty component list yields the clean-water baseline.
pub fn effective_medium(
    components: &[(usize, f64)],
    concentration_scale: f64,
    materials: &[PollutantModel],
    water_permittivity: f64,
    liquid_depth_m: f64,
) -> Result<MediumSpec, SynthError> {
    check_simplex(components)?;
    let mut eps = water_permittivity;
    let mut alpha = 0.0;
    for &(id, ratio) in components {
        let mat = materials.get(id).ok_or(SynthError::UnknownPollutant(id))?;
        eps += ratio * concentration_scale * mat.permittivity_delta;
        alpha += ratio * concentration_scale * mat.attenuation_coeff;
    }
    Ok(MediumSpec::slab(eps, alpha.max(0.0), liquid_depth_m)?)
}

/// Ratio-weighted oscillation amplitude at `tone_freq`:
/// sum_j ratio_j * gain_j * |H_j(f)|, meters.
pub fn displacement_amplitude(
    components: &[(usize, f64)],
    materials: &[PollutantModel],
    tone_freq: f64,
) -> Result<f64, SynthError> {
    let mut amp = 0.0;
    for &(id, ratio) in components {
        let mat = materials.get(id).ok_or(SynthError::UnknownPollutant(id))?;
        amp += ratio
            * mat.displacement_gain
            * resonance_gain(tone_freq, mat.resonance_freq, mat.damping_ratio);
    }
    Ok(amp)
}

/// Surface displacement at time `t` under a single tone:
/// d(t) = amplitude(f) * sin(2 pi f t), meters.
pub fn surface_displacement(
    spec: &SampleSpec,
    materials: &[PollutantModel],
    tone_freq: f64,
    t: f64,
) -> Result<f64, SynthError> {
    debug_assert!((25.0..=125.0).contains(&tone_freq), "tone outside sweep band");
    let amp = displacement_amplitude(&spec.components, materials, tone_freq)?;
    Ok(amp * (2.0 * PI * tone_freq * t).sin())
}

/// The material's fixed scatterer azimuths: `count` draws from
/// Normal(angle_mean, angle_spread), seeded by the material name so the set
/// is identical across samples, datasets, and runs.
pub fn material_scatterers(model: &PollutantModel, count: usize) -> Vec<f64> {
    let mut rng = SeededRng::new(name_seed(&model.name));
    (0..count)
        .map(|_| model.angle_mean + model.angle_spread * rng.normal())
        .collect()
}

/// Assembles the scatterer set for a sample and applies the configured
/// perturbation. Scatterer amplitude is the slab reflection magnitude times
/// the component ratio, split evenly across the component's scatterers; an
/// empty component list degenerates to one specular scatterer at 0 degrees.
pub fn build_geometry(
    spec: &SampleSpec,
    materials: &[PollutantModel],
    cfg: &CaptureConfig,
) -> Result<CaptureGeometry, SynthError> {
    let medium = effective_medium(
        &spec.components,
        spec.concentration_scale,
        materials,
        cfg.scene.water_permittivity,
        cfg.scene.liquid_depth_m,
    )?;
    let reflection = em::slab_reflection(
        &MediumSpec::air(),
        &medium,
        &cfg.scene.backing,
        cfg.radar.carrier_freq,
    )?
    .norm();

    let mut scatterers = Vec::new();
    if spec.components.is_empty() {
        scatterers.push(Scatterer { angle_deg: 0.0, amplitude: reflection });
    } else {
        let per = cfg.scene.scatterers_per_material;
        for &(id, ratio) in &spec.components {
            let mat = materials.get(id).ok_or(SynthError::UnknownPollutant(id))?;
            for angle in material_scatterers(mat, per) {
                scatterers.push(Scatterer {
                    angle_deg: angle,
                    amplitude: reflection * ratio / per as f64,
                });
            }
        }
    }
    apply_perturbation(
        CaptureGeometry { scatterers, excitation_scale: 1.0 },
        &cfg.perturb,
    )
}

/// Applies rig perturbations to a realized geometry: tilt offsets every
/// scatterer azimuth, excitation scale multiplies displacement amplitude.
pub fn apply_perturbation(
    mut geometry: CaptureGeometry,
    perturb: &PerturbConfig,
) -> Result<CaptureGeometry, SynthError> {
    perturb.validate()?;
    for s in &mut geometry.scatterers {
        s.angle_deg += perturb.tilt_deg;
    }
    geometry.excitation_scale *= perturb.excitation_scale;
    Ok(geometry)
}

/// Renders a capture from an explicit geometry.
///
/// The IF model per frame n, antenna m, fast-time sample tau is
/// `sum_j A_j exp(j(2 pi f_b tau dtau + (4 pi/lambda) d(t_n) + pi m sin(theta_j)))`
/// with a single surface beat frequency f_b, so the sum factors into
/// (displacement phasor) x (antenna vector) x (fast-time vector). Complex
/// white Gaussian noise is added at `noise_snr_db` relative to mean signal
/// power from the sample's noise substream, in frame-major element order.
pub fn synthesize(
    spec: &SampleSpec,
    materials: &[PollutantModel],
    geometry: &CaptureGeometry,
    cfg: &CaptureConfig,
) -> Result<RawCapture, SynthError> {
    cfg.validate()?;
    let sweep = cfg.sweep;
    let frames = sweep.total_frames();
    let frames_per_tone = sweep.frames_per_tone();
    let antennas = cfg.scene.antennas;
    let fast_time = cfg.scene.fast_time_samples;
    let lambda = cfg.radar.wavelength();

    // Fast-time phasor for the surface beat frequency.
    let beat = em::range_to_beat_freq(cfg.scene.surface_range_m, &cfg.radar);
    let dtau = cfg.radar.chirp_duration / fast_time as f64;
    let fast_vec: Vec<Complex64> = (0..fast_time)
        .map(|tau| Complex64::new(0.0, 2.0 * PI * beat * tau as f64 * dtau).exp())
        .collect();

    // Antenna vector: scatterer amplitudes steered by half-wavelength spacing.
    let ant_vec: Vec<Complex64> = (0..antennas)
        .map(|m| {
            geometry.scatterers.iter().fold(Complex64::new(0.0, 0.0), |acc, s| {
                let phase = PI * m as f64 * s.angle_deg.to_radians().sin();
                acc + s.amplitude * Complex64::new(0.0, phase).exp()
            })
        })
        .collect();

    let mut data = vec![Complex64::new(0.0, 0.0); frames * antennas * fast_time];
    for n in 0..frames {
        let tone = sweep.tone_freq(n / frames_per_tone);
        let t = n as f64 / sweep.frame_rate;
        let d = geometry.excitation_scale
            * surface_displacement(spec, materials, tone, t)?;
        let motion = Complex64::new(0.0, em::displacement_to_phase(d, lambda)).exp();
        for m in 0..antennas {
            let head = motion * ant_vec[m];
            let base = (n * antennas + m) * fast_time;
            for tau in 0..fast_time {
                data[base + tau] = head * fast_vec[tau];
            }
        }
    }

    if cfg.noise_snr_db.is_finite() {
        let mean_power =
            data.iter().map(|z| z.norm_sqr()).sum::<f64>() / data.len() as f64;
        let noise_power = mean_power / 10f64.powf(cfg.noise_snr_db / 10.0);
        let sigma_quadrature = (noise_power / 2.0).sqrt();
        let mut noise = SeededRng::new(derive_seed(spec.seed, STREAM_NOISE));
        for z in &mut data {
            let re = noise.normal();
            let im = noise.normal();
            *z += Complex64::new(sigma_quadrature * re, sigma_quadrature * im);
        }
    }

    Ok(RawCapture {
        frames,
        antennas,
        fast_time,
        frames_per_tone,
        data,
        sweep,
        radar: cfg.radar,
        truth: spec.clone(),
    })
}

/// Full synthesis path: validate the sample, realize its geometry, render.
pub fn generate_capture(
    spec: &SampleSpec,
    materials: &[PollutantModel],
    cfg: &CaptureConfig,
) -> Result<RawCapture, SynthError> {
    spec.validate()?;
    let geometry = build_geometry(spec, materials, cfg)?;
    synthesize(spec, materials, &geometry, cfg)
}

// ---------------------------------------------------------------------------
// dataset assembly
// ---------------------------------------------------------------------------

/// Dataset recipe: materials, replicate counts, ratio sets, and the capture
/// configuration shared by every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    /// Root seed; every per-sample stream derives from it.
    pub root_seed: u64,
    /// Replicates per composition.
    pub replicates: u32,
    /// Ratio splits for two-component samples.
    pub binary_ratios: Vec<[f64; 2]>,
    /// Ratio splits for three-component samples.
    pub ternary_ratios: Vec<[f64; 3]>,
    /// Concentration draw window, mg/L.
    pub concentration_range: (f64, f64),
    /// Material table.
    pub materials: Vec<PollutantModel>,
    /// Shared capture configuration.
    pub capture: CaptureConfig,
}

impl DatasetManifest {
    /// The stock 225-sample recipe over the five default materials.
    pub fn default_manifest(root_seed: u64) -> Self {
        DatasetManifest {
            root_seed,
            replicates: 3,
            binary_ratios: vec![[0.25, 0.75], [0.5, 0.5], [0.75, 0.25]],
            ternary_ratios: vec![
                [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
                [0.2, 0.4, 0.4],
                [0.4, 0.2, 0.4],
                [0.4, 0.4, 0.2],
            ],
            concentration_range: (0.4, 5.0),
            materials: default_materials(),
            capture: CaptureConfig::default_capture(),
        }
    }

    /// Validates materials, ratio sets, and ranges.
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.materials.len() < 3 {
            return Err(SynthError::InvalidManifest("need at least 3 materials"));
        }
        for m in &self.materials {
            m.validate()?;
        }
        for i in 0..self.materials.len() {
            for j in i + 1..self.materials.len() {
                if self.materials[i].name == self.materials[j].name {
                    return Err(SynthError::InvalidManifest("material names must be unique"));
                }
            }
        }
        if self.replicates == 0 {
            return Err(SynthError::InvalidManifest("replicates must be >= 1"));
        }
        if self.binary_ratios.is_empty() || self.ternary_ratios.is_empty() {
            return Err(SynthError::InvalidManifest("ratio sets must be non-empty"));
        }
        for r in &self.binary_ratios {
            check_ratio_set(r)?;
        }
        for r in &self.ternary_ratios {
            check_ratio_set(r)?;
        }
        let (lo, hi) = self.concentration_range;
        if !(0.4..=5.0).contains(&lo) || !(0.4..=5.0).contains(&hi) || lo > hi {
            return Err(SynthError::InvalidManifest(
                "concentration_range must sit inside [0.4, 5] mg/L",
            ));
        }
        self.capture.validate()
    }

    /// Sample count the manifest will emit.
    pub fn sample_count(&self) -> usize {
        let n = self.materials.len();
        let pairs = n * (n - 1) / 2;
        let triplets = n * (n - 1) * (n - 2) / 6;
        let reps = self.replicates as usize;
        n * reps + pairs * self.binary_ratios.len() * reps
            + triplets * self.ternary_ratios.len() * reps
    }
}

fn check_ratio_set(ratios: &[f64]) -> Result<(), SynthError> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| *r < 0.0 || !r.is_finite()) || (sum - 1.0).abs() > 1e-9 {
        return Err(SynthError::InvalidManifest("ratio set must lie on the simplex"));
    }
    Ok(())
}

/// Enumerates every sample in the manifest, in the canonical order: pures by
/// material index, then pairs (i < j) by ratio split, then triplets
/// (i < j < k), each with its replicates innermost. The n-th sample's seed is
/// `derive_seed(root_seed, n)`; its concentration comes from substream 1 of
/// that seed. The order is the identity the dataset's sample ids refer to.
pub fn dataset_specs(manifest: &DatasetManifest) -> Result<Vec<SampleSpec>, SynthError> {
    manifest.validate()?;
    let n = manifest.materials.len();
    let reps = manifest.replicates;
    let mut specs = Vec::with_capacity(manifest.sample_count());
    let mut counter: u64 = 0;

    let push = |components: Vec<(usize, f64)>, replicate: u32, counter: &mut u64| {
        let seed = derive_seed(manifest.root_seed, *counter);
        *counter += 1;
        let mut conc_rng = SeededRng::new(derive_seed(seed, STREAM_CONCENTRATION));
        let (lo, hi) = manifest.concentration_range;
        let concentration = conc_rng.uniform_in(lo, hi);
        SampleSpec::new(components, concentration, replicate, seed)
    };

    for i in 0..n {
        for rep in 0..reps {
            specs.push(push(vec![(i, 1.0)], rep, &mut counter)?);
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for ratio in &manifest.binary_ratios {
                for rep in 0..reps {
                    specs.push(push(
                        vec![(i, ratio[0]), (j, ratio[1])],
                        rep,
                        &mut counter,
                    )?);
                }
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                for ratio in &manifest.ternary_ratios {
                    for rep in 0..reps {
                        specs.push(push(
                            vec![(i, ratio[0]), (j, ratio[1]), (k, ratio[2])],
                            rep,
                            &mut counter,
                        )?);
                    }
                }
            }
        }
    }
    Ok(specs)
}

/// Streams the manifest's captures one at a time, in canonical order.
/// Each capture depends only on its own spec, so callers may instead take
/// [`dataset_specs`] and render in any order or in parallel.
pub fn generate_dataset(
    manifest: &DatasetManifest,
) -> Result<impl Iterator<Item = Result<RawCapture, SynthError>> + '_, SynthError> {
    let specs = dataset_specs(manifest)?;
    Ok(specs
        .into_iter()
        .map(move |spec| generate_capture(&spec, &manifest.materials, &manifest.capture)))
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    /// Small capture dimensions so unit tests stay fast.
    fn tiny_capture_cfg() -> CaptureConfig {
        let mut cfg = CaptureConfig::default_capture();
        cfg.sweep = SweepConfig {
            tone_start: 40.0,
            tone_end: 48.0,
            tone_step: 4.0,
            tone_duration: 1.0,
            frame_rate: 10.0,
        };
        cfg.scene.antennas = 4;
        cfg.scene.fast_time_samples = 16;
        cfg.noise_snr_db = f64::INFINITY;
        cfg
    }

    fn pure_spec(id: usize) -> SampleSpec {
        SampleSpec::new(vec![(id, 1.0)], 1.0, 0, 77).unwrap()
    }

    // --- 1. materials and sample validation ---

    #[test]
    fn default_materials_are_valid_and_distinct() {
        let mats = default_materials();
        assert_eq!(mats.len(), 5);
        for m in &mats {
            m.validate().unwrap();
        }
        for i in 0..mats.len() {
            for j in i + 1..mats.len() {
                assert_ne!(mats[i].name, mats[j].name);
            }
        }
    }

    #[test]
    fn sample_spec_validation() {
        assert!(SampleSpec::new(vec![], 1.0, 0, 0).is_err());
        assert!(SampleSpec::new(vec![(0, 1.0); 4], 1.0, 0, 0).is_err());
        assert!(SampleSpec::new(vec![(0, 0.6), (1, 0.6)], 1.0, 0, 0).is_err());
        assert!(SampleSpec::new(vec![(0, -0.2), (1, 1.2)], 1.0, 0, 0).is_err());
        assert!(SampleSpec::new(vec![(0, 1.0)], 0.1, 0, 0).is_err());
        assert!(SampleSpec::new(vec![(0, 0.5), (1, 0.5)], 2.0, 0, 0).is_ok());
    }

    // --- 2. effective medium ---

    #[test]
    fn effective_medium_baseline() {
        let m = effective_medium(&[], 1.0, &default_materials(), 81.0, 0.03).unwrap();
        assert_eq!(m.rel_permittivity_real(), 81.0);
        assert_eq!(m.attenuation(), 0.0);
        assert_eq!(m.thickness(), Some(0.03));
    }

    #[test]
    fn effective_medium_single_component() {
        let mats = default_materials();
        let scale = 2.5;
        let m = effective_medium(&[(0, 1.0)], scale, &mats, 81.0, 0.03).unwrap();
        assert!((m.rel_permittivity_real() - (81.0 + scale * mats[0].permittivity_delta)).abs() < TOL);
        assert!((m.attenuation() - scale * mats[0].attenuation_coeff).abs() < TOL);
    }

    #[test]
    fn effective_medium_mixture_is_linear() {
        let mats = default_materials();
        let scale = 3.0;
        let a = effective_medium(&[(0, 1.0)], scale, &mats, 81.0, 0.03).unwrap();
        let b = effective_medium(&[(1, 1.0)], scale, &mats, 81.0, 0.03).unwrap();
        let mix = effective_medium(&[(0, 0.5), (1, 0.5)], scale, &mats, 81.0, 0.03).unwrap();
        let want_eps =
            0.5 * (a.rel_permittivity_real() - 81.0) + 0.5 * (b.rel_permittivity_real() - 81.0);
        assert!((mix.rel_permittivity_real() - 81.0 - want_eps).abs() < TOL);
        let want_alpha = 0.5 * a.attenuation() + 0.5 * b.attenuation();
        assert!((mix.attenuation() - want_alpha).abs() < TOL);
    }

    #[test]
    fn effective_medium_rejects_unknown_id() {
        let err = effective_medium(&[(9, 1.0)], 1.0, &default_materials(), 81.0, 0.03);
        assert_eq!(err, Err(SynthError::UnknownPollutant(9)));
    }

    // --- 3. surface displacement ---

    #[test]
    fn displacement_zero_at_origin() {
        let d = surface_displacement(&pure_spec(0), &default_materials(), 45.0, 0.0).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn resonant_amplification_small_damping() {
        // At f = f_res the resonator magnitude is exactly 1/(2 zeta).
        let mut mats = default_materials();
        mats[0].damping_ratio = 0.01;
        let amp = displacement_amplitude(&[(0, 1.0)], &mats, mats[0].resonance_freq).unwrap();
        let want = mats[0].displacement_gain / (2.0 * 0.01);
        assert!((amp - want).abs() < 1e-12 * want);
    }

    #[test]
    fn displacement_mixture_is_ratio_weighted() {
        let mats = default_materials();
        let f = 63.0;
        let t = 0.013;
        let a = surface_displacement(&pure_spec(0), &mats, f, t).unwrap();
        let b = surface_displacement(&pure_spec(1), &mats, f, t).unwrap();
        let spec = SampleSpec::new(vec![(0, 0.25), (1, 0.75)], 1.0, 0, 1).unwrap();
        let mix = surface_displacement(&spec, &mats, f, t).unwrap();
        assert!((mix - (0.25 * a + 0.75 * b)).abs() < 1e-18);
    }

    #[test]
    fn resonance_profile_peaks_at_damped_frequency() {
        let mats = default_materials();
        for m in &mats {
            let mut best = (0.0, 0.0);
            let mut f = 25.0;
            while f <= 125.0 {
                let g = resonance_gain(f, m.resonance_freq, m.damping_ratio);
                if g > best.1 {
                    best = (f, g);
                }
                f += 0.01;
            }
            let damped = m.resonance_freq
                * (1.0 - 2.0 * m.damping_ratio * m.damping_ratio).sqrt();
            assert!(
                (best.0 - damped).abs() < 0.02,
                "{}: peak {} vs damped {}",
                m.name,
                best.0,
                damped
            );
        }
    }

    // --- 4. scatterers and perturbation ---

    #[test]
    fn material_scatterers_are_fixed_per_material() {
        let mats = default_materials();
        let a = material_scatterers(&mats[0], 4);
        let b = material_scatterers(&mats[0], 4);
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert!(a.iter().all(|x| x.is_finite()));
        let other = material_scatterers(&mats[1], 4);
        assert_ne!(a, other);
    }

    #[test]
    fn perturbation_identity_and_ranges() {
        let geom = CaptureGeometry {
            scatterers: vec![Scatterer { angle_deg: 5.0, amplitude: 0.5 }],
            excitation_scale: 1.0,
        };
        let same = apply_perturbation(geom.clone(), &PerturbConfig::default()).unwrap();
        assert_eq!(same, geom);

        let tilted = apply_perturbation(
            geom.clone(),
            &PerturbConfig { tilt_deg: 15.0, excitation_scale: 0.5 },
        )
        .unwrap();
        assert_eq!(tilted.scatterers[0].angle_deg, 20.0);
        assert_eq!(tilted.excitation_scale, 0.5);

        assert!(apply_perturbation(
            geom.clone(),
            &PerturbConfig { tilt_deg: 31.0, excitation_scale: 1.0 }
        )
        .is_err());
        assert!(apply_perturbation(
            geom,
            &PerturbConfig { tilt_deg: 0.0, excitation_scale: 0.0 }
        )
        .is_err());
    }

    // --- 5. capture synthesis ---

    #[test]
    fn capture_determinism_is_bitwise() {
        let cfg = {
            let mut c = tiny_capture_cfg();
            c.noise_snr_db = 10.0;
            c
        };
        let spec = pure_spec(0);
        let mats = default_materials();
        let a = generate_capture(&spec, &mats, &cfg).unwrap();
        let b = generate_capture(&spec, &mats, &cfg).unwrap();
        assert_eq!(a.data.len(), b.data.len());
        for (x, y) in a.data.iter().zip(&b.data) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
            assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
    }

    #[test]
    fn boresight_scatterer_makes_antennas_identical() {
        let cfg = tiny_capture_cfg();
        let spec = pure_spec(0);
        let geom = CaptureGeometry {
            scatterers: vec![Scatterer { angle_deg: 0.0, amplitude: 0.8 }],
            excitation_scale: 1.0,
        };
        let cap = synthesize(&spec, &default_materials(), &geom, &cfg).unwrap();
        for n in 0..cap.frames {
            for m in 1..cap.antennas {
                for tau in 0..cap.fast_time {
                    let a = cap.at(n, 0, tau);
                    let b = cap.at(n, m, tau);
                    assert_eq!(a, b, "frame {n} antenna {m} tau {tau}");
                }
            }
        }
    }

    #[test]
    fn capture_dimensions_follow_config() {
        let cfg = tiny_capture_cfg();
        let cap = generate_capture(&pure_spec(2), &default_materials(), &cfg).unwrap();
        assert_eq!(cap.frames, 30);
        assert_eq!(cap.frames_per_tone, 10);
        assert_eq!(cap.antennas, 4);
        assert_eq!(cap.fast_time, 16);
        assert_eq!(cap.data.len(), 30 * 4 * 16);
    }

    #[test]
    fn noise_mse_shrinks_as_snr_rises() {
        let mats = default_materials();
        let spec = pure_spec(1);
        let clean = generate_capture(&spec, &mats, &tiny_capture_cfg()).unwrap();
        let mut last = f64::INFINITY;
        for snr in [0.0, 10.0, 20.0, 30.0] {
            let mut cfg = tiny_capture_cfg();
            cfg.noise_snr_db = snr;
            let noisy = generate_capture(&spec, &mats, &cfg).unwrap();
            let mse = clean
                .data
                .iter()
                .zip(&noisy.data)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                / clean.data.len() as f64;
            assert!(mse < last, "snr {snr}: mse {mse} vs previous {last}");
            last = mse;
        }
    }

    // --- 6. dataset enumeration ---

    #[test]
    fn default_manifest_emits_225_samples() {
        let manifest = DatasetManifest::default_manifest(42);
        let specs = dataset_specs(&manifest).unwrap();
        assert_eq!(specs.len(), 225);
        assert_eq!(manifest.sample_count(), 225);
        let pures = specs.iter().filter(|s| s.kind() == SampleKind::Pure).count();
        let binaries = specs.iter().filter(|s| s.kind() == SampleKind::Binary).count();
        let ternaries = specs.iter().filter(|s| s.kind() == SampleKind::Ternary).count();
        assert_eq!((pures, binaries, ternaries), (15, 90, 120));
    }

    #[test]
    fn dataset_ratio_sets_match_protocol() {
        let manifest = DatasetManifest::default_manifest(0);
        assert_eq!(manifest.binary_ratios, vec![[0.25, 0.75], [0.5, 0.5], [0.75, 0.25]]);
        assert_eq!(manifest.ternary_ratios.len(), 4);
        let specs = dataset_specs(&manifest).unwrap();
        for s in &specs {
            let sum: f64 = s.components.iter().map(|&(_, r)| r).sum();
            assert!((sum - 1.0).abs() < TOL);
            assert!(s.components.iter().all(|&(_, r)| r >= 0.0));
            assert!((0.4..=5.0).contains(&s.concentration_scale));
        }
    }

    #[test]
    fn dataset_seeds_are_distinct_and_reproducible() {
        let manifest = DatasetManifest::default_manifest(42);
        let a = dataset_specs(&manifest).unwrap();
        let b = dataset_specs(&manifest).unwrap();
        assert_eq!(a, b);
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                assert_ne!(a[i].seed, a[j].seed, "samples {i} and {j} share a seed");
            }
        }
        let other = dataset_specs(&DatasetManifest::default_manifest(43)).unwrap();
        assert_ne!(a[0].seed, other[0].seed);
    }

    #[test]
    fn manifest_validation_catches_bad_recipes() {
        let mut m = DatasetManifest::default_manifest(1);
        m.materials.truncate(2);
        assert!(m.validate().is_err());

        let mut m = DatasetManifest::default_manifest(1);
        m.binary_ratios = vec![[0.6, 0.6]];
        assert!(m.validate().is_err());

        let mut m = DatasetManifest::default_manifest(1);
        m.replicates = 0;
        assert!(m.validate().is_err());

        let mut m = DatasetManifest::default_manifest(1);
        m.materials[1].name = m.materials[0].name.clone();
        assert!(m.validate().is_err());

        let mut m = DatasetManifest::default_manifest(1);
        m.concentration_range = (0.1, 5.0);
        assert!(m.validate().is_err());
    }

    #[test]
    fn sweep_validation_catches_bad_timing() {
        let mut s = SweepConfig::default_sweep();
        s.tone_step = 0.0;
        assert!(s.validate().is_err());
        let mut s = SweepConfig::default_sweep();
        s.tone_end = 125.5;
        assert!(s.validate().is_err());
        let mut s = SweepConfig::default_sweep();
        s.frame_rate = 0.1;
        assert!(s.validate().is_err());
        assert!(SweepConfig::default_sweep().validate().is_ok());
        assert_eq!(SweepConfig::default_sweep().tones(), 101);
        assert_eq!(SweepConfig::default_sweep().total_frames(), 1010);
    }
}
