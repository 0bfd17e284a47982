//! Capture-to-tensor signal chain: range FFT, stable-bin selection, phase
//! unwrapping, Capon angle spectra, and assembly of the non-negative
//! tone x bin x angle feature tensor.
//!
//! The tensor entry for tone i, selected bin r, angle a is the separable
//! product sigma_phase(i, r) * mean_power(i, r) * capon(i, r, a): oscillation
//! amplitude of the unwrapped bin phase over the tone's frame window, mean
//! bin magnitude normalized to unit max per capture, and a unit-sum angle
//! spectrum. The product form keeps single-pollutant tensors near rank-1,
//! which the decomposition stage relies on. [`TensorOptions`] can replace
//! any factor with a neutral constant for ablation studies.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use num_traits::Float;

use crate::synth::RawCapture;
use crate::tensor::Tensor3;

const PI: f64 = core::f64::consts::PI;

/// Diagonal loading factor for the Capon covariance.
const CAPON_LOADING: f64 = 1e-3;
/// Total power below this is treated as a degenerate capture.
const DEGENERATE_POWER: f64 = 1e-15;

/// Errors from the signal chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum DspError {
    /// Fast-time vector length unusable for the radix-2 FFT.
    #[error("frame length must be a power of two >= 2, got {0}")]
    BadFrameLength(usize),
    /// Bin selection needs a long frame sequence to judge stability.
    #[error("bin selection needs >= 100 frames, got {0}")]
    TooFewFrames(usize),
    /// Bin selection needs at least 3 range bins.
    #[error("bin selection needs >= 3 range bins, got {0}")]
    TooFewBins(usize),
    /// Total power too small to rank bins.
    #[error("total power below 1e-15; capture carries no signal")]
    DegeneratePower,
    /// Covariance estimation needs multiple snapshots.
    #[error("capon needs >= 2 snapshots, got {0}")]
    TooFewSnapshots(usize),
    /// Snapshot dimensions disagree or are too small.
    #[error("snapshots must share one dimension >= 2")]
    BadSnapshotShape,
    /// Covariance trace is zero; diagonal loading cannot regularize.
    #[error("singular covariance: zero trace")]
    SingularCovariance,
    /// Capture frame count does not match its sweep.
    #[error("expected {expected} frames, capture has {got}")]
    FrameCount {
        /// Frames the sweep implies.
        expected: usize,
        /// Frames the capture holds.
        got: usize,
    },
}

/// One chirp's range response.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile {
    /// Complex amplitude per range bin.
    pub bins: Vec<Complex64>,
    /// Range extent of one bin, meters (c / 2B).
    pub bin_width: f64,
}

/// Which tensor factors stay live; disabled factors are replaced by neutral
/// constants (1 for phase and power, uniform 1/angles for the spectrum).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorOptions {
    /// Keep the phase-oscillation factor.
    pub use_phase: bool,
    /// Keep the normalized mean-power factor.
    pub use_power: bool,
    /// Keep the Capon angle spectrum.
    pub use_aoa: bool,
}

impl Default for TensorOptions {
    fn default() -> Self {
        TensorOptions { use_phase: true, use_power: true, use_aoa: true }
    }
}

/// The assembled feature tensor plus its axis labels.
///
/// Under the stock sweep the shape is 101 tones x 3 bins x 31 angles.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTensor {
    /// Non-negative tone x bin x angle values.
    pub values: Tensor3,
    /// Tone frequencies, Hz.
    pub tone_axis: Vec<f64>,
    /// Absolute range-bin indices the middle axis refers to.
    pub bin_axis: [usize; 3],
    /// Angle grid, degrees.
    pub angle_axis: Vec<f64>,
}

// ---------------------------------------------------------------------------
// range FFT
// ---------------------------------------------------------------------------

/// In-place radix-2 decimation-in-time FFT, unnormalized forward transform.
pub(crate) fn fft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two() && n >= 2);
    // Bit-reversal permutation.
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * PI / len as f64;
        let wlen = Complex64::new(ang.cos(), ang.sin());
        let mut i = 0;
        while i < n {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let u = buf[i + k];
                let v = buf[i + k + len / 2] * w;
                buf[i + k] = u + v;
                buf[i + k + len / 2] = u - v;
                w *= wlen;
            }
            i += len;
        }
        len <<= 1;
    }
}

/// Unwindowed range FFT of one chirp's fast-time samples. Bin b responds to
/// reflectors near range b * bin_width.
pub fn range_fft(frame: &[Complex64], bin_width: f64) -> Result<RangeProfile, DspError> {
    if frame.len() < 2 || !frame.len().is_power_of_two() {
        return Err(DspError::BadFrameLength(frame.len()));
    }
    let mut bins = frame.to_vec();
    fft_in_place(&mut bins);
    Ok(RangeProfile { bins, bin_width })
}

// ---------------------------------------------------------------------------
// bin selection
// ---------------------------------------------------------------------------

/// Picks the three range bins to track: the highest-scoring bin and its two
/// spatially adjacent neighbors (clamped at the edges), sorted ascending.
///
/// `frame_powers[f][b]` is the antenna-averaged power of bin b at frame f.
/// The score mean/(1 + CoV) rewards bins that are both strong and stable
/// across frames; ties go to the lower index. Population statistics keep the
/// score deterministic.
pub fn select_bins(frame_powers: &[Vec<f64>]) -> Result<[usize; 3], DspError> {
    if frame_powers.len() < 100 {
        return Err(DspError::TooFewFrames(frame_powers.len()));
    }
    let bins = frame_powers[0].len();
    if bins < 3 {
        return Err(DspError::TooFewBins(bins));
    }
    let frames = frame_powers.len() as f64;
    let mut total = 0.0;
    let mut best = (0usize, f64::NEG_INFINITY);
    for b in 0..bins {
        let mean = frame_powers.iter().map(|row| row[b]).sum::<f64>() / frames;
        let var = frame_powers
            .iter()
            .map(|row| {
                let d = row[b] - mean;
                d * d
            })
            .sum::<f64>()
            / frames;
        total += mean;
        let score = if mean > 0.0 { mean / (1.0 + var.sqrt() / mean) } else { 0.0 };
        if score > best.1 {
            best = (b, score);
        }
    }
    if total < DEGENERATE_POWER {
        return Err(DspError::DegeneratePower);
    }
    let center = best.0.clamp(1, bins - 2);
    Ok([center - 1, center, center + 1])
}

// ---------------------------------------------------------------------------
// phase unwrapping
// ---------------------------------------------------------------------------

/// Maps `x` into (-pi, pi] by adding a multiple of 2 pi.
fn principal_angle(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let shifted = x + PI;
    let mut wrapped = shifted - (shifted / two_pi).floor() * two_pi - PI;
    if wrapped == -PI {
        wrapped = PI;
    }
    wrapped
}

/// Standard 1-D phase unwrap: successive differences are mapped into
/// (-pi, pi] by adding multiples of 2 pi; the first element is unchanged.
/// An empty input yields an empty output.
pub fn unwrap_phase(wrapped: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(wrapped.len());
    let Some(&first) = wrapped.first() else {
        return out;
    };
    out.push(first);
    for i in 1..wrapped.len() {
        let d = wrapped[i] - wrapped[i - 1];
        // Differences already in range pass through exactly; only actual
        // wrap crossings get a 2 pi correction.
        let dd = if d > -PI && d <= PI { d } else { principal_angle(d) };
        out.push(out[i - 1] + dd);
    }
    out
}

// ---------------------------------------------------------------------------
// Capon beamforming
// ---------------------------------------------------------------------------

/// LU factorization with partial pivoting for small complex systems.
struct ComplexLu {
    n: usize,
    lu: Vec<Complex64>,
    piv: Vec<usize>,
}

impl ComplexLu {
    fn factor(matrix: &[Complex64], n: usize) -> Option<Self> {
        let mut lu = matrix.to_vec();
        let mut piv: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut p = col;
            let mut pmag = lu[col * n + col].norm_sqr();
            for row in col + 1..n {
                let mag = lu[row * n + col].norm_sqr();
                if mag > pmag {
                    p = row;
                    pmag = mag;
                }
            }
            if pmag < 1e-300 {
                return None;
            }
            if p != col {
                for k in 0..n {
                    lu.swap(col * n + k, p * n + k);
                }
                piv.swap(col, p);
            }
            let pivot = lu[col * n + col];
            for row in col + 1..n {
                let factor = lu[row * n + col] / pivot;
                lu[row * n + col] = factor;
                for k in col + 1..n {
                    let sub = factor * lu[col * n + k];
                    lu[row * n + k] -= sub;
                }
            }
        }
        Some(ComplexLu { n, lu, piv })
    }

    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut y: Vec<Complex64> = self.piv.iter().map(|&p| b[p]).collect();
        for row in 1..n {
            for k in 0..row {
                let sub = self.lu[row * n + k] * y[k];
                y[row] -= sub;
            }
        }
        for row in (0..n).rev() {
            for k in row + 1..n {
                let sub = self.lu[row * n + k] * y[k];
                y[row] -= sub;
            }
            y[row] /= self.lu[row * n + row];
        }
        y
    }
}

/// The 31-point angle grid: -30..+30 degrees in 2 degree steps.
pub fn default_angle_grid() -> Vec<f64> {
    (0..31).map(|i| -30.0 + 2.0 * i as f64).collect()
}

/// Capon (minimum-variance) angle spectrum from antenna snapshots at one
/// range bin. The sample covariance gets diagonal loading of
/// `1e-3 * trace/M` before inversion; the output is normalized to sum 1.
/// Steering assumes half-wavelength element spacing.
pub fn capon_spectrum(
    snapshots: &[Vec<Complex64>],
    angles: &[f64],
) -> Result<Vec<f64>, DspError> {
    if snapshots.len() < 2 {
        return Err(DspError::TooFewSnapshots(snapshots.len()));
    }
    let m = snapshots[0].len();
    if m < 2 || snapshots.iter().any(|s| s.len() != m) || angles.is_empty() {
        return Err(DspError::BadSnapshotShape);
    }
    let mut cov = vec![Complex64::new(0.0, 0.0); m * m];
    for snap in snapshots {
        for i in 0..m {
            for j in 0..m {
                cov[i * m + j] += snap[i] * snap[j].conj();
            }
        }
    }
    let scale = 1.0 / snapshots.len() as f64;
    for c in &mut cov {
        *c *= scale;
    }
    let trace: f64 = (0..m).map(|i| cov[i * m + i].re).sum();
    if trace <= 0.0 {
        return Err(DspError::SingularCovariance);
    }
    let loading = CAPON_LOADING * trace / m as f64;
    for i in 0..m {
        cov[i * m + i] += Complex64::new(loading, 0.0);
    }
    let lu = ComplexLu::factor(&cov, m).ok_or(DspError::SingularCovariance)?;

    let mut spectrum = Vec::with_capacity(angles.len());
    for &deg in angles {
        let sin_t = deg.to_radians().sin();
        let steer: Vec<Complex64> = (0..m)
            .map(|e| Complex64::new(0.0, PI * e as f64 * sin_t).exp())
            .collect();
        let solved = lu.solve(&steer);
        let denom: f64 = steer
            .iter()
            .zip(&solved)
            .map(|(a, y)| (a.conj() * y).re)
            .sum();
        // Hermitian positive definite after loading, so the quadratic form
        // is positive; the floor only guards against rounding at the edge.
        spectrum.push(1.0 / denom.max(1e-300));
    }
    let sum: f64 = spectrum.iter().sum();
    for s in &mut spectrum {
        *s /= sum;
    }
    Ok(spectrum)
}

// ---------------------------------------------------------------------------
// tensor assembly
// ---------------------------------------------------------------------------

/// Builds the tone x bin x angle tensor from a capture.
///
/// Per tone window: unwrapped-phase standard deviation (population, over the
/// window's frames) of each selected bin's coherent antenna mean, the mean
/// bin magnitude, and the window's Capon spectrum. Mean magnitudes are
/// normalized to unit max across the capture before entering the product.
pub fn build_tensor(
    capture: &RawCapture,
    opts: &TensorOptions,
) -> Result<PhaseTensor, DspError> {
    let tones = capture.sweep.tones();
    let fpt = capture.frames_per_tone;
    if capture.frames != tones * fpt || capture.frames != capture.sweep.total_frames() {
        return Err(DspError::FrameCount {
            expected: capture.sweep.total_frames(),
            got: capture.frames,
        });
    }
    if fpt < 2 {
        return Err(DspError::TooFewSnapshots(fpt));
    }
    let m = capture.antennas;
    let nfft = capture.fast_time;
    if nfft < 2 || !nfft.is_power_of_two() {
        return Err(DspError::BadFrameLength(nfft));
    }

    // Range profiles for every frame and antenna, [frame][antenna][bin].
    let mut profiles = vec![Complex64::new(0.0, 0.0); capture.frames * m * nfft];
    let mut scratch = vec![Complex64::new(0.0, 0.0); nfft];
    for n in 0..capture.frames {
        for a in 0..m {
            let base = (n * m + a) * nfft;
            scratch.copy_from_slice(&capture.data[base..base + nfft]);
            fft_in_place(&mut scratch);
            profiles[base..base + nfft].copy_from_slice(&scratch);
        }
    }

    // Antenna-averaged power per frame and bin.
    let frame_powers: Vec<Vec<f64>> = (0..capture.frames)
        .map(|n| {
            (0..nfft)
                .map(|b| {
                    (0..m)
                        .map(|a| profiles[(n * m + a) * nfft + b].norm_sqr())
                        .sum::<f64>()
                        / m as f64
                })
                .collect()
        })
        .collect();
    let bins = select_bins(&frame_powers)?;
    let angles = default_angle_grid();
    let n_angles = angles.len();

    let mut sigma = vec![0.0; tones * 3];
    let mut pmean = vec![0.0; tones * 3];
    let mut spectra = vec![0.0; tones * 3 * n_angles];
    for i in 0..tones {
        let window = i * fpt..(i + 1) * fpt;
        for (r, &bin) in bins.iter().enumerate() {
            // Coherent antenna mean gives one phase track per bin.
            let phases: Vec<f64> = window
                .clone()
                .map(|n| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for a in 0..m {
                        acc += profiles[(n * m + a) * nfft + bin];
                    }
                    (acc / m as f64).arg()
                })
                .collect();
            let unwrapped = unwrap_phase(&phases);
            let mean = unwrapped.iter().sum::<f64>() / fpt as f64;
            let var = unwrapped.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>()
                / fpt as f64;
            sigma[i * 3 + r] = var.sqrt();

            pmean[i * 3 + r] = window
                .clone()
                .map(|n| frame_powers[n][bin].sqrt())
                .sum::<f64>()
                / fpt as f64;

            if opts.use_aoa {
                let snapshots: Vec<Vec<Complex64>> = window
                    .clone()
                    .map(|n| {
                        (0..m).map(|a| profiles[(n * m + a) * nfft + bin]).collect()
                    })
                    .collect();
                let spec = capon_spectrum(&snapshots, &angles)?;
                spectra[(i * 3 + r) * n_angles..(i * 3 + r + 1) * n_angles]
                    .copy_from_slice(&spec);
            }
        }
    }

    let max_power = pmean.iter().cloned().fold(0.0, f64::max);
    let inv_max = if max_power > 0.0 { 1.0 / max_power } else { 0.0 };

    let mut values = Tensor3::zeros(tones, 3, n_angles);
    for i in 0..tones {
        for r in 0..3 {
            let f_phase = if opts.use_phase { sigma[i * 3 + r] } else { 1.0 };
            let f_power = if opts.use_power { pmean[i * 3 + r] * inv_max } else { 1.0 };
            for a in 0..n_angles {
                let f_angle = if opts.use_aoa {
                    spectra[(i * 3 + r) * n_angles + a]
                } else {
                    1.0 / n_angles as f64
                };
                values.set(i, r, a, f_phase * f_power * f_angle);
            }
        }
    }

    Ok(PhaseTensor {
        values,
        tone_axis: (0..tones).map(|i| capture.sweep.tone_freq(i)).collect(),
        bin_axis: bins,
        angle_axis: angles,
    })
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
