//! Writer for the excitation sweep as a mono 16-bit PCM WAV file.
//!
//! The sweep plays each integer tone from 25 to 125 Hz for exactly one
//! second at 44.1 kHz, phase starting from zero at every tone boundary, so
//! the file doubles as a test signal for any playback chain.

use std::io::Write;
use std::path::Path;

/// Output sample rate in Hz.
pub const SAMPLE_RATE: u32 = 44_100;
/// Number of one-second tones in the sweep.
pub const TONE_COUNT: u32 = 101;
/// Lowest tone frequency in Hz.
pub const FIRST_TONE_HZ: u32 = 25;
/// Peak sample value for the full-scale sine.
pub const PEAK: f64 = 32_767.0;

/// Total samples in the sweep.
pub const fn sweep_len() -> usize {
    (SAMPLE_RATE * TONE_COUNT) as usize
}

/// Renders the full sweep as PCM samples.
pub fn sweep_samples() -> Vec<i16> {
    let mut out = Vec::with_capacity(sweep_len());
    for tone in 0..TONE_COUNT {
        let freq = (FIRST_TONE_HZ + tone) as f64;
        for k in 0..SAMPLE_RATE {
            let t = k as f64 / SAMPLE_RATE as f64;
            let s = PEAK * (core::f64::consts::TAU * freq * t).sin();
            out.push(s.round() as i16);
        }
    }
    out
}

/// Writes `samples` as a mono 16-bit PCM RIFF/WAVE file.
pub fn write_wav(path: &Path, samples: &[i16]) -> std::io::Result<()> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + samples.len() * 2);

    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");

    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&SAMPLE_RATE.to_le_bytes());
    out.extend_from_slice(&(SAMPLE_RATE * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());

    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in samples {
        out.extend_from_slice(&s.to_le_bytes());
    }

    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)
}

/// Renders and writes the sweep in one call.
pub fn write_sweep_wav(path: &Path) -> std::io::Result<()> {
    write_wav(path, &sweep_samples())
}
