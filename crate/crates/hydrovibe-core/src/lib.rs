//! Core numerics for a desk-scale acoustic + mmWave water-pollutant sensor.
//!
//! The crate covers the whole measurement chain in pure, allocation-only code:
//! a physics model of chirp radar reflection off a vibrating liquid surface
//! ([`em`]), a deterministic synthesizer that replaces hardware capture
//! ([`synth`]), range/phase/angle feature extraction ([`dsp`]), non-negative
//! tensor factorization into per-pollutant fingerprints ([`tensor`]),
//! simplex-constrained unmixing against a fingerprint dictionary ([`unmix`]),
//! a forest-to-MLP distillation pipeline ([`learn`]), and the evaluation
//! harness that scores all of it ([`eval`]).
//!
//! The crate is `no_std` + `alloc`; float math goes through `num-traits` so
//! the same code runs hosted and embedded. Everything is deterministic given
//! the seeds carried in the configs.

#![no_std]
#![deny(missing_docs)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dsp;
pub mod em;
pub mod eval;
pub mod la;
pub mod learn;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod unmix;
