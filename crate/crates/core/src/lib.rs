//! Oculomotor behavior representation learning.
//!
//! The crate is `no_std` (with `alloc`) and holds every algorithmic piece:
//! gaze canonicalization, I-VT fixation identification, the encoder and its
//! four pre-training decoders with hand-written backpropagation, the
//! pre-training loop, and the downstream evaluation protocols. File formats,
//! configuration parsing and the command line live in the `obf` crate.

#![no_std]

extern crate alloc;

pub mod downstream;
pub mod error;
pub mod fixation;
pub mod gaze;
pub mod math;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod optim;
pub mod pretrain;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use fixation::{ExpertFeatures, FixationLabels, SampleMask};
pub use gaze::{AugmentConfig, RawRecording, RawSample, Scanpath, ScreenGeometry};
pub use model::{Backbone, Embedding, ModelConfig, ObfModel};
pub use pretrain::{PretaskMetrics, PretrainConfig};

/// Canonical sampling rate of every scanpath, in Hz.
pub const CANONICAL_HZ: f64 = 60.0;

/// Coordinate assigned to gaze points far outside the screen.
pub const OFFSCREEN_SENTINEL: f64 = -180.0;
