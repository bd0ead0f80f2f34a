//! Tiny transformers for environmental sound classification.
//!
//! The crate covers the whole pipeline:
//!
//! - [`audio_io`]: WAV decoding, band-limited resampling, dataset manifests and
//!   random fixed-length slicing.
//! - [`dsp`]: STFT/iSTFT, Slaney mel filterbank, log-mel spectrograms, MFCCs,
//!   frame downsampling, 0-1 normalization and raw amplitude reshaping.
//! - [`augment`]: eleven randomized waveform augmentations and a pipeline
//!   applicator.
//! - [`tokenizer`]: curve tokenization of quantized waveforms (absolute and
//!   relative vocabularies).
//! - [`model`]: a BERT-style encoder with a per-position batch norm and a linear
//!   mapping layer, exact parameter / mult-add accounting and checkpoints.
//! - [`train`]: cross-entropy, hand-written reverse-mode gradients, Adam with
//!   linear warmup and the random-slice epoch loop.
//! - [`deploy`]: dynamic int8 weight quantization, quantized inference and a
//!   latency benchmark.
//! - [`cli`]: the `tinyesc` command front end.

pub mod audio_io;
pub mod augment;
pub mod cli;
pub mod config;
pub mod deploy;
pub mod dsp;
pub mod error;
pub mod model;
pub mod rng;
pub mod synth;
pub mod tokenizer;
pub mod train;

pub use audio_io::AudioClip;
pub use error::{Error, Result};

/// Sampling rate every clip is brought to after ingestion.
pub const SAMPLE_RATE: u32 = 44_100;
