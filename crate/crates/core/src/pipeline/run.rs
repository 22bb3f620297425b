use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::clahe::{equalize, ClaheParams};
use crate::classifier::{load_model, save_model, train, LabeledSample, ModelState, TrainingLog};
use crate::converter::{convert, ByteStream, WidthTable};
use crate::error::{Error, Result};
use crate::evaluation::{
    fold_assignments, measure_mpe, stratified_folds, weighted_report, ConfusionMatrix, EvalReport, Mpe, StageTimer,
    StageTimes,
};
use crate::png_io::write_png;
use crate::rng;

use super::config::PipelineConfig;
use super::manifest::{DatasetManifest, SkippedFile};
use super::preprocess::{content_hash, extract, preprocess, PreprocessOutput};

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub log: TrainingLog,
}

/// Outcome for one test sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub path: String,
    pub fold: usize,
    pub truth: usize,
    pub predicted: usize,
    pub confidence: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossvalOutput {
    pub report: EvalReport,
    pub folds: Vec<FoldResult>,
    pub predictions: Vec<Prediction>,
    pub times: StageTimes,
}

fn in_fold(e: Error, fold: usize) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("fold {fold}: {m}")),
        Error::Numerics(m) => Error::Numerics(format!("fold {fold}: {m}")),
        other => other,
    }
}

fn write_file(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Stratified k-fold cross-validation. Writes into `config.out_dir`:
/// `config.toml`, `fold_<i>.model`, `fold_<i>_training.csv`,
/// `predictions.csv`, `folds.csv`, `confusion.csv`, `report.csv`,
/// `report.txt` and `timing.csv`. Everything except `timing.csv` is a pure
/// function of the dataset and config.
pub fn run_crossval(manifest: &DatasetManifest, config: &PipelineConfig) -> Result<CrossvalOutput> {
    config.validate()?;
    let pre = preprocess(manifest, config)?;
    crossval_preprocessed(manifest, &pre, config)
}

/// [`run_crossval`] on already extracted samples.
pub fn crossval_preprocessed(
    manifest: &DatasetManifest,
    pre: &PreprocessOutput,
    config: &PipelineConfig,
) -> Result<CrossvalOutput> {
    let names = manifest.family_names();
    let labels: Vec<usize> = pre.samples.iter().map(|s| s.label).collect();
    let folds = stratified_folds(&labels, config.folds, config.seed)?;
    let assignment = fold_assignments(&folds, labels.len());
    let out_dir = &config.out_dir;
    create_dir(out_dir)?;
    write_file(out_dir, "config.toml", config.to_toml_string())?;

    let mut cm = ConfusionMatrix::new(names.clone());
    let mut extraction = StageTimer::default();
    let mut classification = StageTimer::default();
    let mut fold_results = Vec::new();
    let mut predictions = Vec::new();

    for (f, test) in folds.iter().enumerate() {
        let train_set: Vec<LabeledSample> = pre
            .samples
            .iter()
            .zip(&assignment)
            .filter(|(_, &a)| a != f)
            .map(|(s, _)| LabeledSample {
                image: s.image.clone(),
                label: s.label,
            })
            .collect();
        log::info!("fold {}/{}: training on {} samples", f + 1, folds.len(), train_set.len());
        let cfg = config.classifier_for(names.len(), rng::derive_seed(rng::stream_tag(b"fold"), f as u64));
        let mut model = ModelState::<f32>::init(&cfg).map_err(|e| in_fold(e, f))?;
        model.set_labels(names.clone())?;
        let (model, log) = train(model, &train_set).map_err(|e| in_fold(e, f))?;
        save_model(&model, out_dir.join(format!("fold_{f}.model")))?;
        write_file(out_dir, &format!("fold_{f}_training.csv"), log.to_csv())?;

        for &i in test {
            let sample = &pre.samples[i];
            let stream = ByteStream::read(&sample.path)?;
            let image = extraction.time(|| extract(&stream, &config.clahe))?;
            let (predicted, probs) = classification.time(|| model.predict(&image))?;
            cm.record(sample.label, predicted)?;
            predictions.push(Prediction {
                path: manifest.display_path(&sample.path),
                fold: f,
                truth: sample.label,
                predicted,
                confidence: probs[predicted],
            });
        }
        fold_results.push(FoldResult {
            fold: f,
            train_size: train_set.len(),
            test_size: test.len(),
            log,
        });
    }

    predictions.sort_by(|a, b| a.path.cmp(&b.path));
    let times = StageTimes {
        extraction: extraction.total,
        classification: classification.total,
    };
    let mut report = weighted_report(&cm);
    report.fold_assignments = assignment;
    report.mpe = Some(measure_mpe(times, labels.len())?);

    write_file(out_dir, "confusion.csv", cm.to_csv_string())?;
    write_file(out_dir, "report.csv", report.to_csv())?;
    write_file(out_dir, "report.txt", report.to_text())?;
    write_file(out_dir, "folds.csv", report.folds_csv())?;
    write_file(out_dir, "predictions.csv", predictions_csv(&predictions, &names))?;
    write_file(out_dir, "timing.csv", report.mpe.as_ref().map(Mpe::to_csv).unwrap_or_default())?;

    Ok(CrossvalOutput {
        report,
        folds: fold_results,
        predictions,
        times,
    })
}

fn predictions_csv(predictions: &[Prediction], names: &[String]) -> String {
    let mut out = String::from("path,fold,family,predicted,confidence\n");
    for p in predictions {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6}",
            p.path, p.fold, names[p.truth], names[p.predicted], p.confidence
        );
    }
    out
}

/// Trains one model on the whole dataset.
pub fn train_on_manifest(manifest: &DatasetManifest, config: &PipelineConfig) -> Result<(ModelState<f32>, TrainingLog)> {
    config.validate()?;
    let pre = preprocess(manifest, config)?;
    let names = manifest.family_names();
    let cfg = config.classifier_for(names.len(), rng::stream_tag(b"train"));
    let mut model = ModelState::<f32>::init(&cfg)?;
    model.set_labels(names)?;
    let data: Vec<LabeledSample> = pre
        .samples
        .into_iter()
        .map(|s| LabeledSample {
            image: s.image,
            label: s.label,
        })
        .collect();
    train(model, &data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub family: String,
    pub class: usize,
    /// Indexed like the model's labels.
    pub probabilities: Vec<f32>,
    pub labels: Vec<String>,
    pub mpe: Mpe,
}

impl Classification {
    pub fn confidence(&self) -> f32 {
        self.probabilities[self.class]
    }
}

/// Extracts and classifies one sample, timing both stages.
pub fn classify_stream(model: &ModelState<f32>, stream: &ByteStream, params: &ClaheParams) -> Result<Classification> {
    let cfg = model.config();
    if cfg.input_width != params.target_size || cfg.input_height != params.target_size {
        return Err(Error::Config(format!(
            "model expects {}x{} inputs but target_size is {}",
            cfg.input_width, cfg.input_height, params.target_size
        )));
    }
    let mut extraction = StageTimer::default();
    let mut classification = StageTimer::default();
    let image = extraction.time(|| extract(stream, params))?;
    let (class, probabilities) = classification.time(|| model.predict(&image))?;
    let mpe = measure_mpe(
        StageTimes {
            extraction: extraction.total,
            classification: classification.total,
        },
        1,
    )?;
    Ok(Classification {
        family: model.label_name(class),
        class,
        probabilities,
        labels: model.labels().to_vec(),
        mpe,
    })
}

pub fn classify_file(
    model_path: impl AsRef<Path>,
    binary_path: impl AsRef<Path>,
    config: &PipelineConfig,
) -> Result<Classification> {
    let model = load_model(model_path)?;
    let stream = ByteStream::read(binary_path)?;
    classify_stream(&model, &stream, &config.clahe)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VisualsSummary {
    pub written: Vec<PathBuf>,
    pub failures: Vec<SkippedFile>,
}

/// Writes `<family>/<hash>_raw.png` (converter output) and
/// `<family>/<hash>_clahe.png` (enhanced, before resizing) per sample.
/// `<hash>` is the first 16 hex digits of the content hash.
pub fn emit_visuals(manifest: &DatasetManifest, config: &PipelineConfig, out_dir: impl AsRef<Path>) -> Result<VisualsSummary> {
    config.clahe.validate()?;
    let out_dir = out_dir.as_ref();
    let mut summary = VisualsSummary::default();
    for family in &manifest.families {
        let dir = out_dir.join(&family.name);
        for path in &family.files {
            let res = (|| -> Result<[PathBuf; 2]> {
                let stream = ByteStream::read(path)?;
                let raw = convert(&stream, &WidthTable::default())?;
                let enhanced = equalize(&raw, &config.clahe)?;
                create_dir(&dir)?;
                let stem = &content_hash(&stream.bytes)[..16];
                let raw_path = dir.join(format!("{stem}_raw.png"));
                let clahe_path = dir.join(format!("{stem}_clahe.png"));
                write_png(&raw, &raw_path)?;
                write_png(&enhanced, &clahe_path)?;
                Ok([raw_path, clahe_path])
            })();
            match res {
                Ok(paths) => summary.written.extend(paths),
                Err(e) => {
                    log::warn!("visualizing {} failed: {e}", path.display());
                    summary.failures.push(SkippedFile {
                        path: path.clone(),
                        reason: e.to_string(),
                    });
                }
            }
        }
    }
    Ok(summary)
}
