//! Dataset ingestion, configuration and the end-to-end runs: preprocessing
//! with an on-disk cache, cross-validation, whole-dataset training,
//! single-file classification and image galleries.

mod config;
mod manifest;
mod preprocess;
mod run;

pub use config::PipelineConfig;
pub use manifest::{ingest, DatasetManifest, Family, SampleRef, SkippedFile};
pub use preprocess::{cache_location, content_hash, extract, params_key, preprocess, PreprocessOutput, ProcessedSample};
pub use run::{
    classify_file, classify_stream, crossval_preprocessed, emit_visuals, run_crossval, train_on_manifest, Classification,
    CrossvalOutput, FoldResult, Prediction, VisualsSummary,
};
