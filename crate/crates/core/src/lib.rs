//! Signal processing, spectral packing, a small convolutional network engine
//! and evaluation metrics for phonocardiogram (heart sound) denoising.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, WAV IO and the
//! command-line tool live in the companion `pcg-denoise` crate.
//!
//! Pipeline at a glance:
//!
//! * [`synth`] corrupts clean 4 kHz recordings with category-wise noise.
//! * [`signal`] resamples to 1500 Hz; [`spectral`] cuts 1.5 s frames and maps
//!   each to a 64×64×2 packed STFT.
//! * [`models`] builds the U-Net and the skip-free autoencoder on top of the
//!   [`nn`] engine and runs waveform-to-waveform denoising.
//! * [`wavelet`] is the classical thresholding baseline; [`metrics`] scores
//!   all of them.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod fft;
pub mod fixtures;
pub mod math;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod signal;
pub mod spectral;
pub mod synth;
pub mod wavelet;

pub use signal::{normalize, resample, SignalError, Waveform};
