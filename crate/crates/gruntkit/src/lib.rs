//! Acoustic classification pipeline for short non-verbal vocalisations
//! (tennis grunts).
//!
//! The crate covers the full experiment loop:
//!
//! - [`ingest`]: dataset manifests, WAV decoding, 1000 ms clip slicing, and a
//!   deterministic synthetic-corpus generator for desk-scale testing.
//! - [`dsp`]: resampling, STFT, mel filterbank, DCT, MFCC matrices, and
//!   227x227 log-magnitude spectrogram images.
//! - [`lld`]: frame-level low-level descriptors at 10 ms (energy, spectral,
//!   voice), delta coefficients, statistical functionals, and the
//!   mean/middle/flat sequence aggregations.
//! - [`learn`]: a linear SVM trained by stochastic subgradient descent, and
//!   from-scratch LSTM / convolutional-recurrent networks with hand-derived
//!   gradients, Adam/SGD training, and a finite-difference gradient checker.
//! - [`eval`]: player-independent 5-fold planning, cross-validation with
//!   leakage assertions, confusion matrices, UAR, and report assembly.
//! - [`cache`]: the on-disk per-clip feature cache format.
//! - [`cli`]: the `gruntkit` command-line entry points.
//!
//! Everything is deterministic given explicit seeds: identical inputs and
//! seeds reproduce bit-identical corpora, features, model parameters, and
//! reports.

pub mod cache;
pub mod cli;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod learn;
pub mod lld;

pub use error::{Error, Result};
