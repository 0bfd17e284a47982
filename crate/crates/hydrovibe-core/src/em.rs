//! Chirp-radar physics: impedances, Fresnel coefficients, lossy multilayer
//! reflection, and the beat-frequency / phase kinematics of an FMCW link.
//!
//! The model is normal-incidence and non-magnetic throughout. Loss is carried
//! only in the wavenumber (the slab's internal round-trip factor); interface
//! impedances are built from the real permittivity, so Fresnel coefficients
//! stay real-valued for real media even when the slab attenuates.

use num_complex::Complex64;
use num_traits::Float;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.99792458e8;

/// Free-space wave impedance, ohms. Kept at full precision rather than the
/// usual 377 so that ratio-based checks are exact.
pub const FREE_SPACE_IMPEDANCE: f64 = 376.730313668;

const PI: f64 = core::f64::consts::PI;

/// Errors from the physics layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum EmError {
    /// Medium parameters violate the physical bounds.
    #[error("invalid medium: {0}")]
    InvalidMedium(&'static str),
    /// Interface impedances nearly cancel; Fresnel division is meaningless.
    #[error("degenerate interface: |Z_a + Z_b| below 1e-12 ohm")]
    DegenerateInterface,
    /// The slab's internal feedback term is at unit gain; the closed form
    /// would divide by ~zero.
    #[error("resonant slab denominator below 1e-12")]
    ResonantDenominator,
    /// A slab operation needs a thickness but the medium is semi-infinite.
    #[error("slab medium has no thickness")]
    MissingThickness,
}

// ---------------------------------------------------------------------------
// domain types
// ---------------------------------------------------------------------------

/// A homogeneous non-magnetic medium: real relative permittivity, field
/// attenuation, and an optional thickness (absent for semi-infinite media).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MediumSpec {
    rel_permittivity_real: f64,
    attenuation: f64,
    thickness: Option<f64>,
}

impl MediumSpec {
    /// Relative permeability; fixed at 1 for every medium this model covers.
    pub const REL_PERMEABILITY: f64 = 1.0;

    /// Semi-infinite medium. Requires `rel_permittivity_real >= 1` and
    /// `attenuation >= 0`.
    pub fn new(rel_permittivity_real: f64, attenuation: f64) -> Result<Self, EmError> {
        Self::build(rel_permittivity_real, attenuation, None)
    }

    /// Finite slab of the given thickness in meters (`> 0`).
    pub fn slab(
        rel_permittivity_real: f64,
        attenuation: f64,
        thickness: f64,
    ) -> Result<Self, EmError> {
        Self::build(rel_permittivity_real, attenuation, Some(thickness))
    }

    /// Free space / dry air.
    pub fn air() -> Self {
        MediumSpec { rel_permittivity_real: 1.0, attenuation: 0.0, thickness: None }
    }

    fn build(eps: f64, alpha: f64, thickness: Option<f64>) -> Result<Self, EmError> {
        if !eps.is_finite() || eps < 1.0 {
            return Err(EmError::InvalidMedium("rel_permittivity_real must be >= 1"));
        }
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(EmError::InvalidMedium("attenuation must be >= 0"));
        }
        if let Some(d) = thickness {
            if !d.is_finite() || d <= 0.0 {
                return Err(EmError::InvalidMedium("thickness must be > 0"));
            }
        }
        Ok(MediumSpec { rel_permittivity_real: eps, attenuation: alpha, thickness })
    }

    /// Real part of the relative permittivity.
    pub fn rel_permittivity_real(&self) -> f64 {
        self.rel_permittivity_real
    }

    /// Field attenuation, nepers per meter.
    pub fn attenuation(&self) -> f64 {
        self.attenuation
    }

    /// Thickness in meters, `None` for semi-infinite media.
    pub fn thickness(&self) -> Option<f64> {
        self.thickness
    }
}

/// Reflection and transmission coefficients at a planar interface.
///
/// For real impedances both values are real (carried here in complex form for
/// uniformity with the lossy slab math) and satisfy `1 + r = t` identically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceCoeffs {
    /// Amplitude reflection coefficient.
    pub r: Complex64,
    /// Amplitude transmission coefficient.
    pub t: Complex64,
}

/// FMCW radar waveform parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarParams {
    /// Carrier frequency f_c, Hz.
    pub carrier_freq: f64,
    /// Sweep bandwidth B, Hz.
    pub bandwidth: f64,
    /// Chirp duration T_c, seconds.
    pub chirp_duration: f64,
    /// Chirp repetition interval T_r, seconds.
    pub chirp_interval: f64,
}

impl RadarParams {
    /// 77 GHz profile used throughout: bandwidth chosen for 4.88 cm range
    /// resolution, 50 us chirps at a 100 us repetition interval.
    pub fn default_77ghz() -> Self {
        RadarParams {
            carrier_freq: 7.7e10,
            bandwidth: 3.0737e9,
            chirp_duration: 50e-6,
            chirp_interval: 100e-6,
        }
    }

    /// Carrier wavelength, m.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    /// Chirp slope S = B / T_c, Hz/s.
    pub fn slope(&self) -> f64 {
        self.bandwidth / self.chirp_duration
    }

    /// Range represented by one beat-frequency bin, c / 2B, m.
    pub fn range_bin_width(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth)
    }
}

// ---------------------------------------------------------------------------
// interface and slab reflection
// ---------------------------------------------------------------------------

/// Intrinsic impedance Z = Z0 / sqrt(eps_r') in ohms.
///
/// Attenuation deliberately does not enter here; loss lives entirely in the
/// propagation factor of [`slab_reflection`], which keeps interfaces real.
pub fn intrinsic_impedance(medium: &MediumSpec) -> Complex64 {
    Complex64::new(FREE_SPACE_IMPEDANCE / medium.rel_permittivity_real.sqrt(), 0.0)
}

/// Fresnel coefficients for a wave going from impedance `z_a` into `z_b`:
/// r = (Z_b - Z_a)/(Z_b + Z_a), t = 2 Z_b/(Z_a + Z_b).
pub fn fresnel(z_a: Complex64, z_b: Complex64) -> Result<InterfaceCoeffs, EmError> {
    let sum = z_a + z_b;
    if sum.norm() < 1e-12 {
        return Err(EmError::DegenerateInterface);
    }
    Ok(InterfaceCoeffs { r: (z_b - z_a) / sum, t: 2.0 * z_b / sum })
}

/// Complex wavenumber k' = 2 pi f sqrt(eps_r')/c - j alpha, 1/m.
pub fn complex_wavenumber(medium: &MediumSpec, freq: f64) -> Complex64 {
    debug_assert!(freq > 0.0, "frequency must be positive");
    let k = 2.0 * PI * freq * medium.rel_permittivity_real.sqrt() / SPEED_OF_LIGHT;
    Complex64::new(k, -medium.attenuation)
}

/// Net reflection off a finite slab between two semi-infinite media:
/// R = r12 + t12 t23 r23 e^{-j 2 k2' d} / (1 - r21 r23 e^{-j 2 k2' d}).
///
/// The numerator keeps the t23 factor of the source model (its symmetric
/// special case is unaffected since t23 = t21 there); for air-side incidence
/// |R| <= 1 for all passive media.
pub fn slab_reflection(
    outer_a: &MediumSpec,
    slab: &MediumSpec,
    outer_b: &MediumSpec,
    freq: f64,
) -> Result<Complex64, EmError> {
    let d = slab.thickness().ok_or(EmError::MissingThickness)?;
    let z1 = intrinsic_impedance(outer_a);
    let z2 = intrinsic_impedance(slab);
    let z3 = intrinsic_impedance(outer_b);
    let f12 = fresnel(z1, z2)?;
    let f21 = fresnel(z2, z1)?;
    let f23 = fresnel(z2, z3)?;
    let k2 = complex_wavenumber(slab, freq);
    // e^{-j 2 k2' d}; the -j alpha part of k2' becomes the e^{-2 alpha d}
    // round-trip amplitude decay.
    let round_trip = (Complex64::new(0.0, -2.0) * k2 * d).exp();
    combine_slab(f12.r, f21.r, f23.r, f12.t, f23.t, round_trip)
}

/// Closed-form combination step, separated so the resonant-denominator guard
/// can be exercised directly.
pub(crate) fn combine_slab(
    r12: Complex64,
    r21: Complex64,
    r23: Complex64,
    t12: Complex64,
    t23: Complex64,
    round_trip: Complex64,
) -> Result<Complex64, EmError> {
    let den = Complex64::new(1.0, 0.0) - r21 * r23 * round_trip;
    if den.norm() < 1e-12 {
        return Err(EmError::ResonantDenominator);
    }
    Ok(r12 + t12 * t23 * r23 * round_trip / den)
}

/// Reflected power |R|^2 * P_incident, watts.
pub fn reflected_power(r: Complex64, incident_power: f64) -> f64 {
    debug_assert!(incident_power >= 0.0, "incident power must be non-negative");
    r.norm_sqr() * incident_power
}

// ---------------------------------------------------------------------------
// FMCW kinematics
// ---------------------------------------------------------------------------

/// Surface displacement recovered from a phase change:
/// delta_d = (lambda / 4 pi) (phase - phase_ref), m.
pub fn phase_to_displacement(phase: f64, phase_ref: f64, wavelength: f64) -> f64 {
    debug_assert!(wavelength > 0.0, "wavelength must be positive");
    wavelength * (phase - phase_ref) / (4.0 * PI)
}

/// Phase change produced by a surface displacement:
/// delta_phi = (4 pi / lambda) delta_d, rad.
pub fn displacement_to_phase(displacement: f64, wavelength: f64) -> f64 {
    debug_assert!(wavelength > 0.0, "wavelength must be positive");
    4.0 * PI * displacement / wavelength
}

/// Target range from a beat frequency: R = c f_b / (2 S), m.
pub fn beat_freq_to_range(beat_freq: f64, params: &RadarParams) -> f64 {
    debug_assert!(beat_freq >= 0.0, "beat frequency must be non-negative");
    SPEED_OF_LIGHT * beat_freq / (2.0 * params.slope())
}

/// Beat frequency produced by a target at the given range: f_b = 2 R S / c, Hz.
pub fn range_to_beat_freq(range: f64, params: &RadarParams) -> f64 {
    debug_assert!(range >= 0.0, "range must be non-negative");
    2.0 * range * params.slope() / SPEED_OF_LIGHT
}

/// Chirp-to-chirp phase change of a target moving at `velocity` m/s:
/// delta_phi = 4 pi v T_r / lambda, rad.
pub fn doppler_phase(velocity: f64, params: &RadarParams) -> f64 {
    4.0 * PI * velocity * params.chirp_interval / params.wavelength()
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
