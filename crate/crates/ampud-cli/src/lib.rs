//! Command-line front end for the AMP universal-denoising toolkit: flat
//! key-value experiment configs, raw-float and WAV signal ingestion, the
//! short-time DCT operator for audio experiments, and a parallel benchmark
//! runner that emits plot-ready CSV.

pub mod cli;
pub mod config;
pub mod iofmt;
pub mod runner;
pub mod stdct;
pub mod wav;
