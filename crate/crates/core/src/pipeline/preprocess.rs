use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::clahe::{enhance, ClaheParams};
use crate::converter::{convert, ByteStream, WidthTable};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::png_io::{decode_png, encode_png};

use super::config::PipelineConfig;
use super::manifest::{DatasetManifest, SkippedFile};

/// Converter followed by CLAHE and resize: the full feature extraction.
pub fn extract(stream: &ByteStream, params: &ClaheParams) -> Result<GrayImage> {
    enhance(&convert(stream, &WidthTable::default())?, params)
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Short digest of everything that affects an extracted image.
pub fn params_key(params: &ClaheParams) -> String {
    let mut h = Sha256::new();
    h.update(params.canonical().as_bytes());
    for (bound, width) in WidthTable::default().rows() {
        h.update(format!("{bound:?}:{width};").as_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessedSample {
    pub path: PathBuf,
    pub label: usize,
    /// SHA-256 of the file content.
    pub hash: String,
    pub image: GrayImage,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PreprocessOutput {
    /// Manifest order, failed files left out.
    pub samples: Vec<ProcessedSample>,
    pub failures: Vec<SkippedFile>,
    pub cache_hits: usize,
    pub computed: usize,
}

/// Where images for `params` are cached under `cache_dir`.
pub fn cache_location(cache_dir: &Path, params: &ClaheParams) -> PathBuf {
    cache_dir.join(params_key(params))
}

enum Outcome {
    Hit(ProcessedSample),
    Computed(ProcessedSample),
}

fn process_one(path: &Path, label: usize, params: &ClaheParams, cache: Option<&Path>) -> Result<Outcome> {
    let stream = ByteStream::read(path)?;
    let hash = content_hash(&stream.bytes);
    let cached = cache.map(|dir| dir.join(format!("{hash}.png")));
    if let Some(file) = &cached {
        if let Ok(bytes) = std::fs::read(file) {
            match decode_png(&bytes) {
                Ok(image) if image.width() == params.target_size && image.height() == params.target_size => {
                    return Ok(Outcome::Hit(ProcessedSample {
                        path: path.to_path_buf(),
                        label,
                        hash,
                        image,
                    }));
                }
                _ => log::warn!("ignoring unreadable cache entry {}", file.display()),
            }
        }
    }
    let image = extract(&stream, params)?;
    if let Some(file) = &cached {
        // Same content always yields the same bytes, so concurrent writers
        // of one entry cannot disagree; rename keeps readers from seeing a
        // partial file.
        let tmp = file.with_extension(format!("png.{}.tmp", std::process::id()));
        let png = encode_png(&image)?;
        std::fs::write(&tmp, png).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, file).map_err(|e| Error::io(file, e))?;
    }
    Ok(Outcome::Computed(ProcessedSample {
        path: path.to_path_buf(),
        label,
        hash,
        image,
    }))
}

/// Extracts every file of the manifest, reusing cached images whose
/// content hash and CLAHE parameters match. A failing file is recorded and
/// skipped; more than half failing aborts the run.
pub fn preprocess(manifest: &DatasetManifest, config: &PipelineConfig) -> Result<PreprocessOutput> {
    config.clahe.validate()?;
    let cache = match &config.cache_dir {
        Some(dir) => {
            let loc = cache_location(dir, &config.clahe);
            std::fs::create_dir_all(&loc).map_err(|e| Error::io(&loc, e))?;
            Some(loc)
        }
        None => None,
    };
    let refs = manifest.samples();
    let results: Vec<Result<Outcome>> = refs
        .par_iter()
        .map(|r| process_one(&r.path, r.label, &config.clahe, cache.as_deref()))
        .collect();

    let mut out = PreprocessOutput::default();
    for (r, res) in refs.iter().zip(results) {
        match res {
            Ok(Outcome::Hit(s)) => {
                out.cache_hits += 1;
                out.samples.push(s);
            }
            Ok(Outcome::Computed(s)) => {
                out.computed += 1;
                out.samples.push(s);
            }
            Err(e) => {
                log::warn!("preprocessing {} failed: {e}", r.path.display());
                out.failures.push(SkippedFile {
                    path: r.path.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    let total = refs.len();
    if out.samples.is_empty() {
        return Err(Error::EmptyDataset(manifest.root.clone()));
    }
    if out.failures.len() * 2 > total {
        return Err(Error::TooManyFailures {
            failed: out.failures.len(),
            total,
        });
    }
    if let Some(loc) = &cache {
        write_index(&loc.join("index.csv"), manifest, config, &out)?;
    }
    log::info!(
        "preprocessed {} files ({} cached, {} computed, {} failed)",
        total,
        out.cache_hits,
        out.computed,
        out.failures.len()
    );
    Ok(out)
}

fn write_index(path: &Path, manifest: &DatasetManifest, config: &PipelineConfig, out: &PreprocessOutput) -> Result<()> {
    let names = manifest.family_names();
    let mut text = String::from("path,family,s,hash\n");
    for s in &out.samples {
        let _ = writeln!(
            text,
            "{},{},{},{}",
            s.path.display(),
            names[s.label],
            config.clahe.target_size,
            s.hash
        );
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
