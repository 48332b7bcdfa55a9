use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use livfuse_core::experiment::{
    fuse_files, generate_synthetic, predict_sample, report_files, train_image, train_tabular, Branch, ExperimentConfig,
    FuseInput, LabelFile, ModelArchive, ProbabilityFile, Sample, TrainOutcome,
};
use livfuse_core::experiment::files::format_probs;
use livfuse_core::image::load_pgm;
use livfuse_core::metrics::ReportFormat;
use livfuse_core::{AlignMode, Error, Result};

#[derive(Parser)]
#[command(name = "livfuse", version, about = "Hybrid clinical + imaging fibrosis staging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the boosted-tree model on the clinical table.
    TrainTabular(TrainArgs),
    /// Train the texture-feature model on images or a feature CSV.
    TrainImage(TrainArgs),
    /// Fuse two or more probability files.
    Fuse(FuseArgs),
    /// Score one sample through saved models.
    Predict(PredictArgs),
    /// Write a synthetic paired dataset and experiment config.
    Generate(GenerateArgs),
    /// Render metrics files as comparison tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(required = true, num_args = 2..)]
    files: Vec<PathBuf>,
    #[arg(long, default_value = "strict", value_parser = parse_mode)]
    mode: AlignMode,
    /// Accuracy per file, in the order the files are given.
    #[arg(long)]
    accuracy: Vec<f64>,
    /// `id,label` CSV; enables hybrid metrics.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    tabular_model: Option<PathBuf>,
    #[arg(long)]
    image_model: Option<PathBuf>,
    /// One clinical CSV record, fields in schema order.
    #[arg(long, allow_hyphen_values = true)]
    clinical_row: Option<String>,
    /// A binary PGM image.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Comma-separated image feature vector.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "image")]
    image_features: Option<String>,
    #[arg(long, default_value = "strict", value_parser = parse_mode)]
    mode: AlignMode,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 600)]
    n: usize,
    #[arg(long, default_value_t = 0.2)]
    noise: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Markdown,
    Json,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Display name per file; defaults to the file stem.
    #[arg(long = "name")]
    names: Vec<String>,
    #[arg(long, value_enum, default_value = "markdown")]
    format: Format,
}

fn parse_mode(s: &str) -> std::result::Result<AlignMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn load_config(args: &TrainArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn finish_train(outcome: TrainOutcome, out_dir: &Path, prefix: &str) -> Result<()> {
    let written = outcome.write(out_dir, prefix)?;
    println!("validation accuracy: {}", outcome.metrics.accuracy);
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem().and_then(|s| s.to_str()).unwrap_or("input").to_string()
}

fn run(command: Command) -> std::result::Result<(), Failure> {
    match command {
        Command::TrainTabular(args) => {
            let cfg = load_config(&args)?;
            finish_train(train_tabular(&cfg)?, &cfg.out_dir, "tabular")?;
        }
        Command::TrainImage(args) => {
            let cfg = load_config(&args)?;
            finish_train(train_image(&cfg)?, &cfg.out_dir, "image")?;
        }
        Command::Fuse(args) => {
            if !args.accuracy.is_empty() && args.accuracy.len() != args.files.len() {
                return Err(Failure::Usage(format!(
                    "--accuracy given {} times for {} files",
                    args.accuracy.len(),
                    args.files.len()
                )));
            }
            let inputs = args
                .files
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    Ok(FuseInput {
                        name: stem(p),
                        file: ProbabilityFile::read(p)?,
                        accuracy: args.accuracy.get(i).copied(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let labels = args.labels.as_deref().map(LabelFile::read).transpose()?;
            let outcome = fuse_files(&inputs, args.mode, labels.as_ref())?;
            for m in &outcome.modalities {
                println!("modality {}: accuracy {} weight {} dropped {}", m.name, m.accuracy, m.weight, m.dropped);
            }
            if let Some(m) = &outcome.metrics {
                println!("hybrid accuracy: {}", m.accuracy);
            }
            for p in outcome.write(&args.out)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Predict(args) => {
            let mut branches = Vec::new();
            if let Some(path) = &args.tabular_model {
                let sample = args.clinical_row.clone().map(Sample::ClinicalRow);
                branches.push(Branch { name: "tabular".into(), archive: ModelArchive::load(path)?, sample });
            } else if args.clinical_row.is_some() {
                return Err(Failure::Usage("--clinical-row needs --tabular-model".into()));
            }
            if let Some(path) = &args.image_model {
                let sample = match (&args.image, &args.image_features) {
                    (Some(p), _) => {
                        let bytes = std::fs::read(p).map_err(|e| Error::Io { path: p.display().to_string(), source: e })?;
                        Some(Sample::Image(load_pgm(&bytes)?))
                    }
                    (None, Some(text)) => Some(Sample::Features(parse_vector(text)?)),
                    (None, None) => None,
                };
                branches.push(Branch { name: "image".into(), archive: ModelArchive::load(path)?, sample });
            } else if args.image.is_some() || args.image_features.is_some() {
                return Err(Failure::Usage("--image/--image-features need --image-model".into()));
            }
            if branches.is_empty() {
                return Err(Failure::Usage("give --tabular-model and/or --image-model".into()));
            }
            let p = predict_sample(&branches, args.mode)?;
            println!("class: {} ({})", p.name, p.class);
            println!("probabilities: {}", format_probs(&p.probs));
        }
        Command::Generate(args) => {
            let data = generate_synthetic(args.n, args.noise, args.seed)?;
            let config = data.write_to(&args.out, args.seed)?;
            println!("wrote {} samples; config {}", args.n, config.display());
        }
        Command::Report(args) => {
            let format = match args.format {
                Format::Markdown => ReportFormat::Markdown,
                Format::Json => ReportFormat::Json,
            };
            if !args.names.is_empty() && args.names.len() != args.files.len() {
                return Err(Failure::Usage(format!("{} names for {} files", args.names.len(), args.files.len())));
            }
            print!("{}", report_files(&args.files, &args.names, format)?);
        }
    }
    Ok(())
}

fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .enumerate()
        .map(|(i, f)| {
            f.trim().parse::<f64>().map_err(|_| Error::Parse { record: 1, msg: format!("feature {i}: {f:?} is not a number") })
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
