//! Command-line interface.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use birdcall_core::dsp::{spectrogram, DEFAULT_FRAME_MS, DEFAULT_HOP_MS};
use birdcall_core::metrics::{compute_metrics, confusion_matrix};
use birdcall_core::nn::Network;
use birdcall_core::train::{evaluate, predict_labels, stratified_split, train_with_progress};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::audio_file::{read_clip, write_clip};
use crate::config::{resolve_path, AppConfig};
use crate::error::Error;
use crate::features::{featurize_manifest, FeatureTable};
use crate::fixtures::{generate_fixtures, synth_recording, MANIFEST_NAME};
use crate::history::export_history;
use crate::manifest::load_manifest;
use crate::model_file::{load_model, save_model, SavedModel};
use crate::render::render_spectrogram;
use crate::report::{report_json_bytes, write_report_csv, EvaluationReport};
use crate::server::{serve, ServiceState};

#[derive(Debug, Parser)]
#[command(
    name = "birdcall",
    version,
    about = "Bird-call classification from MFCC features"
)]
pub struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic five-class WAV dataset and its manifest.
    Synth(SynthArgs),
    /// Compute one MFCC vector per manifest entry.
    Featurize(FeaturizeArgs),
    /// Train a model on a feature CSV.
    Train(TrainArgs),
    /// Score a model on a feature CSV.
    Evaluate(EvaluateArgs),
    /// Classify a recording window by window.
    Classify(ClassifyArgs),
    /// Render a power spectrogram as a PNG.
    Spectrogram(SpectrogramArgs),
    /// Serve POST /classify and GET /healthz.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    pub per_class: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write `recording.wav` of this many seconds.
    #[arg(long, value_name = "SECONDS")]
    pub recording: Option<f64>,
    /// Class index (0-4) of the recording.
    #[arg(long, default_value_t = 0, requires = "recording")]
    pub recording_class: usize,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// History CSV (a PNG plot is written beside it). Defaults to `<out>.history.csv`.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Held-out feature rows. Defaults to `<out>.test.csv`.
    #[arg(long)]
    pub test_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Metrics JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub audio: PathBuf,
    /// Report JSON; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Source name in the report. Defaults to the audio file name.
    #[arg(long)]
    pub source: Option<String>,
}

#[derive(Debug, Args)]
pub struct SpectrogramArgs {
    #[arg(long)]
    pub audio: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FRAME_MS)]
    pub frame_ms: f64,
    #[arg(long, default_value_t = DEFAULT_HOP_MS)]
    pub hop_ms: f64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[arg(long)]
    pub threshold: Option<f64>,
}

/// Parses `argv`, runs the command and returns the process exit code:
/// 0 on success, 1 on runtime failure, 2 on usage or config errors.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Config(_)) => 2,
                _ => 1,
            }
        }
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = AppConfig::load_or_default(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(args) => synth(args),
        Command::Featurize(args) => featurize(args, &config),
        Command::Train(args) => {
            if let Some(v) = args.epochs {
                config.training.epochs = v;
            }
            if let Some(v) = args.batch_size {
                config.training.batch_size = v;
            }
            if let Some(v) = args.seed {
                config.training.seed = v;
            }
            if let Some(v) = args.test_fraction {
                config.training.test_fraction = v;
            }
            config.validate()?;
            train(args, &config)
        }
        Command::Evaluate(args) => evaluate_cmd(args, &config),
        Command::Classify(args) => {
            if let Some(t) = args.threshold {
                config.pipeline.confidence_threshold = t;
            }
            config.validate()?;
            classify(args, &config)
        }
        Command::Spectrogram(args) => spectrogram_cmd(args),
        Command::Serve(args) => {
            if let Some(t) = args.threshold {
                config.pipeline.confidence_threshold = t;
            }
            config.validate()?;
            serve_cmd(args, &config)
        }
    }
}

fn synth(args: SynthArgs) -> anyhow::Result<()> {
    let manifest = generate_fixtures(args.per_class, args.seed, &args.out)?;
    println!(
        "wrote {} clips in {} classes and {}",
        manifest.len(),
        manifest.labels().len(),
        args.out.join(MANIFEST_NAME).display()
    );
    if let Some(seconds) = args.recording {
        let clip = synth_recording(args.recording_class, seconds, args.seed)?;
        let path = args.out.join("recording.wav");
        write_clip(&path, &clip)?;
        println!("wrote {seconds} s recording to {}", path.display());
    }
    Ok(())
}

fn featurize(args: FeaturizeArgs, config: &AppConfig) -> anyhow::Result<()> {
    let manifest_path = resolve_path(args.manifest, &config.paths.manifest, "manifest")?;
    let manifest = load_manifest(&manifest_path)?;
    let table = featurize_manifest(&manifest, &manifest_path, &config.features)?;
    table.write_csv(&args.out)?;
    println!(
        "wrote {} feature rows of width {} to {}",
        table.rows.len(),
        table.width(),
        args.out.display()
    );
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

fn train(args: TrainArgs, config: &AppConfig) -> anyhow::Result<()> {
    let features_path = resolve_path(args.features, &config.paths.features, "features")?;
    let table = FeatureTable::read_csv(&features_path)?;
    if table.width() != config.features.n_mfcc {
        return Err(Error::Config(format!(
            "{} has {} coefficients per row but the feature config expects {}",
            features_path.display(),
            table.width(),
            config.features.n_mfcc
        ))
        .into());
    }
    let labels = table.labels();
    let data = table.to_dataset(&labels)?;
    let tc = &config.training;
    let split = stratified_split(&data.labels, labels.len(), tc.test_fraction, tc.seed)?;
    let (train_set, test_set) = (data.subset(&split.train), data.subset(&split.test));

    let model_config = config.model.model_config(table.width(), labels.len());
    let net = Network::new(model_config, &mut ChaCha8Rng::seed_from_u64(tc.seed))?;
    let (_, pre_acc) = evaluate(&net, &test_set)?;
    eprintln!(
        "training {} parameters on {} rows, holding out {}; accuracy before training {pre_acc:.4}",
        net.param_count(),
        train_set.len(),
        test_set.len()
    );
    let (net, history) = train_with_progress(net, &train_set, &test_set, tc, |e| {
        if e.epoch == 1 || e.epoch % 10 == 0 {
            eprintln!(
                "epoch {:>4}  loss {:.4}  acc {:.4}  val_loss {:.4}  val_acc {:.4}",
                e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc
            );
        }
    })?;

    let n_params = net.param_count();
    let model = SavedModel {
        network: net,
        labels,
        features: config.features.clone(),
    };
    let id = save_model(&args.out, &model)?;
    let history_path = args
        .history
        .unwrap_or_else(|| sibling(&args.out, ".history.csv"));
    let plot = export_history(&history, &history_path)?;
    let test_path = args
        .test_out
        .unwrap_or_else(|| sibling(&args.out, ".test.csv"));
    table.subset(&split.test).write_csv(&test_path)?;
    println!(
        "saved model {id} ({n_params} parameters) to {}",
        args.out.display()
    );
    println!("history: {} and {}", history_path.display(), plot.display());
    println!("held-out rows: {}", test_path.display());
    Ok(())
}

fn evaluate_cmd(args: EvaluateArgs, config: &AppConfig) -> anyhow::Result<()> {
    let model_path = resolve_path(args.model, &config.paths.model, "model")?;
    let features_path = resolve_path(args.features, &config.paths.features, "features")?;
    let loaded = load_model(&model_path)?;
    let table = FeatureTable::read_csv(&features_path)?;
    let model = &loaded.model;
    let data = table.to_dataset(&model.labels)?;
    let predicted = predict_labels(&model.network, &data)?;
    let cm = confusion_matrix(&predicted, &data.labels, model.labels.len())?;
    let metrics = compute_metrics(&cm)?;
    let (loss, _) = evaluate(&model.network, &data)?;
    let report = EvaluationReport::new(&loaded.model_id, &model.labels, &cm, &metrics, loss);
    print!("{}", report.table());
    if let Some(out) = args.out {
        fs::write(&out, report.to_json_bytes()?)
            .with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn classify(args: ClassifyArgs, config: &AppConfig) -> anyhow::Result<()> {
    let model_path = resolve_path(args.model, &config.paths.model, "model")?;
    let loaded = load_model(&model_path)?;
    let classifier = loaded.model.into_classifier()?;
    let pipeline = config.pipeline_config(classifier.featurizer().config().clone());
    let bytes = fs::read(&args.audio).map_err(|e| Error::Io {
        path: args.audio.clone(),
        source: e,
    })?;
    let source = args.source.unwrap_or_else(|| {
        args.audio.file_name().map_or_else(
            || args.audio.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        )
    });
    let report = classifier
        .report_for_wav(&bytes, &source, &loaded.model_id, &pipeline)
        .with_context(|| format!("classifying {}", args.audio.display()))?;
    let json = report_json_bytes(&report)?;
    match &args.out {
        Some(out) => fs::write(out, &json).with_context(|| format!("writing {}", out.display()))?,
        None => std::io::stdout().write_all(&json)?,
    }
    if let Some(csv) = &args.csv {
        write_report_csv(csv, &report, classifier.labels())?;
    }
    if args.out.is_some() {
        println!("{} detections in {}", report.detections.len(), source);
    }
    Ok(())
}

fn spectrogram_cmd(args: SpectrogramArgs) -> anyhow::Result<()> {
    let clip = read_clip(&args.audio)?;
    let spec = spectrogram(&clip, args.frame_ms, args.hop_ms)?;
    render_spectrogram(&spec, &args.out)?;
    println!(
        "wrote {}x{} spectrogram to {}",
        spec.n_frames(),
        spec.n_bins(),
        args.out.display()
    );
    Ok(())
}

fn serve_cmd(args: ServeArgs, config: &AppConfig) -> anyhow::Result<()> {
    let model_path = resolve_path(args.model, &config.paths.model, "model")?;
    let loaded = load_model(&model_path)?;
    let classifier = loaded.model.into_classifier()?;
    let pipeline = config.pipeline_config(classifier.featurizer().config().clone());
    let state = Arc::new(ServiceState {
        classifier,
        model_id: loaded.model_id,
        pipeline,
    });
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(args.addr)
            .await
            .with_context(|| format!("binding {}", args.addr))?;
        println!(
            "listening on http://{} (model {})",
            listener.local_addr()?,
            state.model_id
        );
        std::io::stdout().flush()?;
        serve(listener, state).await?;
        Ok(())
    })
}
