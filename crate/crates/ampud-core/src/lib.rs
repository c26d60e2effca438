//! Compressed-sensing reconstruction via approximate message passing (AMP)
//! with a universal denoiser.
//!
//! AMP turns the linear inverse problem `y = Ax + z` into a sequence of
//! scalar additive-white-Gaussian-noise denoising problems. This crate
//! provides the AMP engine together with the denoisers it needs:
//!
//! * [`gm`] — Gaussian-mixture density learning from noisy samples and the
//!   conditional-expectation denoiser built from a fitted mixture,
//! * [`ud`] — the universal denoiser: context quantization splits a
//!   stationary ergodic sequence into near-i.i.d. subsequences which are
//!   denoised independently (two variants: member borrowing, and
//!   KL/MDL-driven cluster merging),
//! * [`window`] — exact Bayesian sliding-window denoisers for two reference
//!   Markov sources, used to check state-evolution tracking,
//! * [`se`] — the state-evolution recursion and an empirical tracking
//!   harness,
//! * [`source`] + [`sensing`] — reproducible test-signal generators and
//!   seeded Gaussian measurement operators.
//!
//! The crate is `no_std`-compatible (requires `alloc`); disable the default
//! `std` feature to use it in that mode. All randomness flows through the
//! splittable counter-based generator in [`rng`], so every result is a pure
//! function of its seeds.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod amp;
pub mod context;
pub mod error;
pub mod gm;
pub mod math;
pub mod metrics;
pub mod mmse;
pub mod rng;
pub mod se;
pub mod sensing;
pub mod source;
pub mod ud;
pub mod window;

pub use amp::{run_amp, AmpRun, AmpState, Damping, Denoiser, DenoiserOutput};
pub use error::{CoreError, Result};
pub use gm::{fit_gm_noisy, EmApproach, EmConfig, GaussianMixture, GmComponent};
pub use rng::Stream;
pub use sensing::{MatrixOperator, MeasurementSystem, SensingOperator};
pub use source::{IidSourceSpec, MarkovSourceSpec, NonzeroDist, SignalModel};
pub use ud::{UdConfig, UdVariant};
