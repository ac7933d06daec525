//! Signal analysis, feature construction, a from-scratch bidirectional
//! recurrent classifier and evaluation statistics for detecting derhotic
//! /ɹ/ productions in child speech.
//!
//! The crate is `no_std` (with `alloc`). Audio decoding, CSV/JSON formats and
//! the command line live in the `rhotic-mdx` companion crate.
//!
//! Module map:
//!
//! - [`signal`]: audio buffers, band-limited resampling, pre-emphasis, framing
//! - [`formant`]: Burg LPC, pole-to-formant conversion, formant tracking,
//!   F3−F2 transforms and age-and-sex normalization
//! - [`features`]: frame series, feature-set channel layouts, tract-variable
//!   validation, utterance z-normalization, source-feature stand-in
//! - [`segmentation`]: TextGrid parsing/serialization and interval binning
//! - [`dataset`]: labels, fixed-length windows, LOPO folds, class weights
//! - [`nn`]: BiLSTM/BiGRU classifier, BPTT, optimizers, training, grid search
//! - [`stats`]: classification metrics, effect sizes, exact Spearman test
//! - [`synth`]: synthetic vowels and feature corpora for closed-loop checks
#![no_std]

extern crate alloc;

pub mod dataset;
pub mod features;
pub mod formant;
mod gemm;
pub mod nn;
pub mod rng;
pub mod segmentation;
pub mod signal;
pub mod stats;
pub mod synth;

/// Internal frame rate of every time series in the crate (10 ms hop).
pub const FRAME_RATE_HZ: f64 = 100.0;
