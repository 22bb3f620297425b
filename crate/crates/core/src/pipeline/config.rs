use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clahe::ClaheParams;
use crate::classifier::{ClassifierConfig, ConvSpec};
use crate::error::{Error, Result};
use crate::rng;

/// Everything a pipeline run depends on. One `seed` drives every random
/// stream: CLAHE random clipping, fold assignment and per-fold training.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub clahe: ClaheParams,
    /// Architecture and training settings. `classes` and the input size are
    /// filled in from the dataset and `clahe.target_size` at run time.
    pub classifier: ClassifierConfig,
    pub folds: usize,
    pub seed: u64,
    /// Where preprocessed images are cached; `None` disables the cache.
    pub cache_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            clahe: ClaheParams::default(),
            classifier: ClassifierConfig::default(),
            folds: 10,
            seed: 0,
            cache_dir: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// On-disk form: a flat table, every key optional.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    region_width: Option<usize>,
    grid_b: Option<usize>,
    clip_limit: Option<f64>,
    clip_scale: Option<String>,
    clip_mode: Option<String>,
    target_size: Option<usize>,
    conv_filters: Option<Vec<usize>>,
    conv_kernels: Option<Vec<usize>>,
    pool_size: Option<usize>,
    pool_stride: Option<usize>,
    dropout: Option<f32>,
    dense_units: Option<Vec<usize>>,
    l2: Option<f32>,
    learning_rate: Option<f32>,
    batch_size: Option<usize>,
    epochs: Option<usize>,
    patience: Option<usize>,
    folds: Option<usize>,
    seed: Option<u64>,
    cache_dir: Option<PathBuf>,
    out_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg = Self::default();
        let c = &mut cfg.clahe;
        if let Some(v) = file.region_width {
            c.region_width = v;
        }
        if let Some(v) = file.grid_b {
            c.grid_rows = v;
        }
        if let Some(v) = file.clip_limit {
            c.clip_limit = v;
        }
        if let Some(v) = file.clip_scale {
            c.clip_scale = v.parse()?;
        }
        if let Some(v) = file.clip_mode {
            c.clip_mode = v.parse()?;
        }
        if let Some(v) = file.target_size {
            c.target_size = v;
        }

        let k = &mut cfg.classifier;
        match (file.conv_filters, file.conv_kernels) {
            (None, None) => {}
            (filters, kernels) => {
                let filters = filters.unwrap_or_else(|| k.conv.iter().map(|c| c.filters).collect());
                let kernels = kernels.unwrap_or_else(|| k.conv.iter().map(|c| c.kernel).collect());
                if filters.len() != kernels.len() {
                    return Err(Error::Config(format!(
                        "conv_filters has {} entries but conv_kernels has {}",
                        filters.len(),
                        kernels.len()
                    )));
                }
                k.conv = filters
                    .into_iter()
                    .zip(kernels)
                    .map(|(filters, kernel)| ConvSpec { filters, kernel })
                    .collect();
            }
        }
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = file.$field { $target = v; })*
            };
        }
        set!(
            pool_size => k.pool_size,
            pool_stride => k.pool_stride,
            dropout => k.dropout,
            dense_units => k.dense,
            l2 => k.l2,
            learning_rate => k.learning_rate,
            batch_size => k.batch_size,
            epochs => k.epochs,
            patience => k.patience,
            folds => cfg.folds,
            out_dir => cfg.out_dir,
        );
        if let Some(v) = file.seed {
            cfg.set_seed(v);
        }
        cfg.cache_dir = file.cache_dir;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Every key written out; `from_toml_str` reads it back unchanged.
    pub fn to_toml_string(&self) -> String {
        let k = &self.classifier;
        let file = ConfigFile {
            region_width: Some(self.clahe.region_width),
            grid_b: Some(self.clahe.grid_rows),
            clip_limit: Some(self.clahe.clip_limit),
            clip_scale: Some(self.clahe.clip_scale.to_string()),
            clip_mode: Some(self.clahe.clip_mode.to_string()),
            target_size: Some(self.clahe.target_size),
            conv_filters: Some(k.conv.iter().map(|c| c.filters).collect()),
            conv_kernels: Some(k.conv.iter().map(|c| c.kernel).collect()),
            pool_size: Some(k.pool_size),
            pool_stride: Some(k.pool_stride),
            dropout: Some(k.dropout),
            dense_units: Some(k.dense.clone()),
            l2: Some(k.l2),
            learning_rate: Some(k.learning_rate),
            batch_size: Some(k.batch_size),
            epochs: Some(k.epochs),
            patience: Some(k.patience),
            folds: Some(self.folds),
            seed: Some(self.seed),
            cache_dir: self.cache_dir.clone(),
            out_dir: Some(self.out_dir.clone()),
        };
        toml::to_string(&file).expect("config serializes")
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.clahe.seed = seed;
        self.classifier.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.clahe.validate()?;
        if self.folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {}", self.folds)));
        }
        self.classifier_for(self.classifier.classes.max(1), 0).validate()
    }

    /// Classifier settings for a dataset with `classes` families, seeded
    /// for training stream `task`.
    pub fn classifier_for(&self, classes: usize, task: u64) -> ClassifierConfig {
        let mut c = self.classifier.clone();
        c.classes = classes;
        c.input_width = self.clahe.target_size;
        c.input_height = self.clahe.target_size;
        c.seed = rng::derive_seed(self.seed, task);
        c
    }
}
