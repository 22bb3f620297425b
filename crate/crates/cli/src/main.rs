use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use malgray_core::clahe::{build_grid, equalize, resize, write_mapping_csv, ClipMode};
use malgray_core::classifier::save_model;
use malgray_core::converter::{convert, ByteStream, WidthTable};
use malgray_core::evaluation::{weighted_report, ConfusionMatrix};
use malgray_core::pipeline::{
    classify_file, emit_visuals, ingest, run_crossval, train_on_manifest, PipelineConfig,
};
use malgray_core::png_io::{read_png, write_png};
use malgray_core::Error;

/// Exit status for command-line usage errors.
const USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "malgray", version, about = "Malware family classification from byte images")]
struct Cli {
    #[command(flatten)]
    opts: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Settings applied on top of the config file.
#[derive(Args, Debug)]
struct Overrides {
    /// Flat TOML file with pipeline settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    clip_limit: Option<f64>,
    /// `uniform` or `random`.
    #[arg(long, global = true)]
    clip_mode: Option<ClipMode>,
    /// Vertical region count.
    #[arg(long, global = true)]
    grid_b: Option<usize>,
    #[arg(long, global = true)]
    region_width: Option<usize>,
    #[arg(long, global = true)]
    target_size: Option<usize>,
    #[arg(long, global = true)]
    pool_stride: Option<usize>,
    #[arg(long, global = true)]
    folds: Option<usize>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    /// Directory for cached preprocessed images.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Output file or directory, depending on the command.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert a binary into a grayscale PNG.
    Convert { input: PathBuf },
    /// Enhance a binary (or, with --from-png, a grayscale PNG).
    Enhance {
        input: PathBuf,
        #[arg(long)]
        from_png: bool,
        /// Keep the original size instead of resizing to the target size.
        #[arg(long)]
        no_resize: bool,
        /// Write every region's equalization table to this CSV file.
        #[arg(long)]
        mapping_csv: Option<PathBuf>,
    },
    /// Train one model on a whole dataset.
    Train { dataset: PathBuf },
    /// Stratified k-fold cross-validation with report and per-fold models.
    Crossval { dataset: PathBuf },
    /// Classify one binary with a trained model.
    Classify { model: PathBuf, input: PathBuf },
    /// Write raw and enhanced PNGs for every sample.
    Visualize {
        dataset: PathBuf,
        /// Only the first N files of each family.
        #[arg(long)]
        per_family: Option<usize>,
    },
    /// Metrics table from a confusion matrix CSV.
    Report { confusion: PathBuf },
}

impl Overrides {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_file(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.set_seed(v);
        }
        if let Some(v) = self.clip_limit {
            cfg.clahe.clip_limit = v;
        }
        if let Some(v) = self.clip_mode {
            cfg.clahe.clip_mode = v;
        }
        if let Some(v) = self.grid_b {
            cfg.clahe.grid_rows = v;
        }
        if let Some(v) = self.region_width {
            cfg.clahe.region_width = v;
        }
        if let Some(v) = self.target_size {
            cfg.clahe.target_size = v;
        }
        if let Some(v) = self.pool_stride {
            cfg.classifier.pool_stride = v;
        }
        if let Some(v) = self.folds {
            cfg.folds = v;
        }
        if let Some(v) = self.epochs {
            cfg.classifier.epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.classifier.batch_size = v;
        }
        if let Some(v) = &self.cache_dir {
            cfg.cache_dir = Some(v.clone());
        }
        if let Some(v) = &self.out {
            cfg.out_dir = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_file(opts: &Overrides, input: &Path, suffix: &str) -> PathBuf {
    opts.out.clone().unwrap_or_else(|| {
        let stem = input.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        input.with_file_name(format!("{stem}{suffix}"))
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = cli.opts.load()?;
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Convert { input } => {
            let img = convert(&ByteStream::read(&input)?, &WidthTable::default())?;
            let out = out_file(&cli.opts, &input, ".png");
            write_png(&img, &out)?;
            writeln!(stdout, "{} -> {} ({}x{})", input.display(), out.display(), img.width(), img.height())?;
        }
        Command::Enhance {
            input,
            from_png,
            no_resize,
            mapping_csv,
        } => {
            let img = if from_png {
                read_png(&input)?
            } else {
                convert(&ByteStream::read(&input)?, &WidthTable::default())?
            };
            let mut enhanced = equalize(&img, &cfg.clahe)?;
            if !no_resize {
                enhanced = resize(&enhanced, cfg.clahe.target_size);
            }
            let out = out_file(&cli.opts, &input, ".clahe.png");
            write_png(&enhanced, &out)?;
            if let Some(path) = mapping_csv {
                let grid = build_grid(&img, &cfg.clahe)?;
                let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                write_mapping_csv(&grid, std::io::BufWriter::new(file))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            writeln!(
                stdout,
                "{} -> {} ({}x{})",
                input.display(),
                out.display(),
                enhanced.width(),
                enhanced.height()
            )?;
        }
        Command::Train { dataset } => {
            let manifest = ingest(&dataset)?;
            let (model, log) = train_on_manifest(&manifest, &cfg)?;
            create_dir(&cfg.out_dir)?;
            let model_path = cfg.out_dir.join("model.bin");
            save_model(&model, &model_path)?;
            let log_path = cfg.out_dir.join("training.csv");
            std::fs::write(&log_path, log.to_csv()).with_context(|| format!("writing {}", log_path.display()))?;
            let last = log.epochs.last();
            writeln!(
                stdout,
                "trained on {} files of {} families for {} epochs (final loss {:.4}); model at {}",
                manifest.total_files(),
                manifest.families.len(),
                log.epochs.len(),
                last.map_or(f64::NAN, |e| e.loss),
                model_path.display()
            )?;
        }
        Command::Crossval { dataset } => {
            let manifest = ingest(&dataset)?;
            let out = run_crossval(&manifest, &cfg)?;
            write!(stdout, "{}", out.report.to_text())?;
            if let Some(mpe) = out.report.mpe {
                writeln!(
                    stdout,
                    "MPE: extraction {:.3} ms + classification {:.3} ms = {:.3} ms",
                    mpe.extraction_ms, mpe.classification_ms, mpe.total_ms
                )?;
            }
            writeln!(stdout, "artifacts in {}", cfg.out_dir.display())?;
        }
        Command::Classify { model, input } => {
            let c = classify_file(&model, &input, &cfg)?;
            writeln!(stdout, "family: {}", c.family)?;
            writeln!(stdout, "confidence: {:.4}", c.confidence())?;
            writeln!(stdout, "extraction_ms: {:.3}", c.mpe.extraction_ms)?;
            writeln!(stdout, "classification_ms: {:.3}", c.mpe.classification_ms)?;
            for (label, p) in c.labels.iter().zip(&c.probabilities) {
                writeln!(stdout, "  {label}: {p:.4}")?;
            }
        }
        Command::Visualize { dataset, per_family } => {
            let mut manifest = ingest(&dataset)?;
            if let Some(n) = per_family {
                manifest = manifest.truncated(n);
            }
            let summary = emit_visuals(&manifest, &cfg, &cfg.out_dir)?;
            writeln!(
                stdout,
                "wrote {} images to {} ({} files failed)",
                summary.written.len(),
                cfg.out_dir.display(),
                summary.failures.len()
            )?;
        }
        Command::Report { confusion } => {
            let file = std::fs::File::open(&confusion).map_err(|e| Error::Io {
                path: confusion.clone(),
                source: e,
            })?;
            let cm = ConfusionMatrix::read_csv(file)?;
            let report = weighted_report(&cm);
            write!(stdout, "{}", report.to_text())?;
            if let Some(dir) = &cli.opts.out {
                create_dir(dir)?;
                std::fs::write(dir.join("report.csv"), report.to_csv())?;
                std::fs::write(dir.join("report.txt"), report.to_text())?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<Error>().map_or(1, Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
