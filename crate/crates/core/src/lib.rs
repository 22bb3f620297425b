//! Malware family classification from byte-level grayscale images.
//!
//! The pipeline turns a binary into an image ([`converter`]), boosts local
//! contrast with CLAHE ([`clahe`]), classifies the resized image with a
//! small CNN ([`classifier`]) and scores the result with stratified k-fold
//! cross-validation ([`evaluation`]). [`pipeline`] wires the stages to a
//! dataset on disk.

pub mod clahe;
pub mod classifier;
pub mod converter;
pub mod error;
pub mod evaluation;
pub mod image;
pub mod pipeline;
pub mod png_io;
pub mod rng;

pub use clahe::{enhance, ClaheParams, ClipMode, ClipScale};
pub use converter::{ByteStream, WidthTable};
pub use error::{Error, Result};
pub use evaluation::{ConfusionMatrix, EvalReport};
pub use image::GrayImage;
pub use pipeline::{DatasetManifest, PipelineConfig};
