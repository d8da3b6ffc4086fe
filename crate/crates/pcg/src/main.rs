use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use pcg_core::models::INFERENCE_RELATIVE_REGULARIZATION;
use pcg_core::synth::Partition;
use pcg_core::wavelet::{Extension, ThresholdMode, ThresholdRule, Wavelet, WaveletConfig};
use pcg_denoise::corpus::{write_demo_corpus, DemoCorpus};
use pcg_denoise::manifest::MANIFEST_FILE;
use pcg_denoise::pipeline::{
    create_dir, denoise_manifest, make_denoiser, manifest_stats, plot_entry, reconstruction,
    run_eval, run_synth, run_train, sampled_stats, write_json, write_report, write_stats,
    ManifestSource, Method, ModelKind, ReconstructionKind, SynthOptions, TrainOptions,
    TOOL_VERSION,
};
use pcg_denoise::report::{report_table, stats_table};
use pcg_denoise::wav::{read_wav, write_wav};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(
    name = "pcg-denoise",
    version,
    about = "Phonocardiogram denoising: synthesis, training and evaluation"
)]
struct Cli {
    /// Master seed; overrides any seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run single-threaded.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a small synthetic clean and noise corpus.
    DemoCorpus(DemoArgs),
    /// Mix clean recordings with noise into a dataset and manifest.
    Synth(SynthArgs),
    /// Train a U-Net or DAE on a manifest's train and validation partitions.
    Train(TrainArgs),
    /// Denoise one WAV file or every entry of a manifest.
    Denoise(DenoiseArgs),
    /// Score methods on a manifest's test partition.
    Eval(EvalArgs),
    /// Segment duration statistics of a manifest or of fresh draws.
    Stats(StatsArgs),
    /// Waveform overlays and spectrum heatmap data for one recording.
    Plot(PlotArgs),
}

#[derive(Args)]
struct DemoArgs {
    /// Number of clean recordings.
    #[arg(long)]
    clean_count: Option<usize>,
    /// Noise files per category.
    #[arg(long)]
    noise_per_category: Option<usize>,
    /// Length of each noise file in seconds.
    #[arg(long)]
    noise_seconds: Option<f64>,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory of 4 kHz clean WAV files.
    #[arg(long)]
    clean: Option<PathBuf>,
    /// Directory with one subdirectory of WAV files per noise category.
    #[arg(long)]
    noise: Option<PathBuf>,
    /// Noisy variants per clean recording.
    #[arg(long)]
    variants: Option<usize>,
    /// Multiplier on the expected number of noise segments.
    #[arg(long)]
    density_scale: Option<f64>,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    ratios: Option<Vec<f64>>,
}

#[derive(Args)]
struct TrainArgs {
    /// Manifest written by `synth`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Architecture to train.
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    /// Frames per optimizer step.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Maximum number of epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Epochs without validation improvement before stopping.
    #[arg(long)]
    patience: Option<usize>,
    /// Nadam learning rate.
    #[arg(long)]
    lr: Option<f64>,
}

#[derive(Args, Clone)]
struct InferenceArgs {
    /// Directory holding `unet.pcgu` and `dae.pcgu` (default: --out).
    #[arg(long)]
    models: Option<PathBuf>,
    /// Inverse of the packed spectrum (default: least-squares).
    #[arg(long, value_enum)]
    reconstruction: Option<ReconstructionKind>,
    /// Relative Tikhonov weight of the least-squares reconstruction.
    #[arg(long)]
    regularization: Option<f64>,
    /// Wavelet family for `wt`: db4, db8 or sym8.
    #[arg(long)]
    wavelet: Option<String>,
    /// Decomposition levels for `wt`.
    #[arg(long)]
    levels: Option<usize>,
    /// `universal` or a fixed numeric threshold.
    #[arg(long)]
    threshold: Option<String>,
    /// Hard instead of soft thresholding.
    #[arg(long)]
    hard: bool,
    /// Periodic instead of symmetric boundary extension.
    #[arg(long)]
    periodization: bool,
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// Checkpoint for network methods (default: `<models>/<method>.pcgu`).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// A single 4 kHz noisy WAV.
    #[arg(long, conflicts_with = "manifest")]
    input: Option<PathBuf>,
    /// Denoise every entry of this manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Restrict manifest mode to one partition.
    #[arg(long, value_parser = parse_partition)]
    partition: Option<Partition>,
    #[command(flatten)]
    inference: InferenceArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Manifest written by `synth`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Methods to score, comma separated (default: unet,wt,dae).
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[command(flatten)]
    inference: InferenceArgs,
}

#[derive(Args)]
struct StatsArgs {
    /// Summarize the segments recorded in this manifest.
    #[arg(long, conflicts_with = "draws")]
    manifest: Option<PathBuf>,
    /// Durations to draw per category when no manifest is given.
    #[arg(long)]
    draws: Option<usize>,
}

#[derive(Args)]
struct PlotArgs {
    /// Manifest written by `synth`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Manifest entry id.
    #[arg(long)]
    id: String,
    /// Methods to overlay, comma separated (default: none).
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Frame of the noisy input shown in the heatmap.
    #[arg(long, default_value_t = 0)]
    frame: usize,
    #[command(flatten)]
    inference: InferenceArgs,
}

fn parse_partition(s: &str) -> Result<Partition, String> {
    [Partition::Train, Partition::Val, Partition::Test]
        .into_iter()
        .find(|p| p.label() == s)
        .ok_or_else(|| format!("unknown partition `{s}` (train, val, test)"))
}

/// Contents of `--config`: one optional section per command.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    threads: Option<usize>,
    demo: Option<DemoSettings>,
    synth: Option<SynthOptions>,
    train: Option<TrainOptions>,
    inference: Option<InferenceSettings>,
    eval: Option<EvalSettings>,
    stats: Option<StatsSettings>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct DemoSettings {
    clean_count: usize,
    noise_per_category: usize,
    noise_seconds: f64,
}

impl Default for DemoSettings {
    fn default() -> Self {
        let d = DemoCorpus::default();
        Self {
            clean_count: d.clean_count,
            noise_per_category: d.noise_per_category,
            noise_seconds: d.noise_seconds,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct InferenceSettings {
    models: Option<PathBuf>,
    reconstruction: ReconstructionKind,
    regularization: f64,
    wavelet: WaveletConfig,
}

impl Default for InferenceSettings {
    fn default() -> Self {
        Self {
            models: None,
            reconstruction: ReconstructionKind::LeastSquares,
            regularization: INFERENCE_RELATIVE_REGULARIZATION,
            wavelet: WaveletConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct EvalSettings {
    manifest: PathBuf,
    methods: Vec<Method>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            manifest: PathBuf::from(MANIFEST_FILE),
            methods: vec![Method::Unet, Method::Wt, Method::Dae],
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct StatsSettings {
    manifest: Option<PathBuf>,
    draws: Option<usize>,
}

/// Everything a run resolved, written to `<out>/run_config.json`.
#[derive(Serialize)]
struct RunRecord<'a, T: Serialize> {
    tool_version: &'a str,
    command: &'a str,
    seed: u64,
    threads: usize,
    out: &'a Path,
    options: T,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file: FileConfig = match &cli.config {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => FileConfig::default(),
    };
    let threads = if cli.deterministic {
        1
    } else {
        cli.threads
            .or(file.threads)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    };
    if threads == 0 {
        bail!("--threads must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")?;
    let seed_override = cli.seed.or(file.seed);
    let ctx = Ctx {
        out: cli.out.clone(),
        threads,
        seed: seed_override.unwrap_or(0),
    };
    create_dir(&ctx.out)?;

    match cli.command {
        Command::DemoCorpus(a) => {
            let mut s = file.demo.unwrap_or_default();
            set(&mut s.clean_count, a.clean_count);
            set(&mut s.noise_per_category, a.noise_per_category);
            set(&mut s.noise_seconds, a.noise_seconds);
            ctx.record("demo-corpus", &s)?;
            let cfg = DemoCorpus {
                clean_count: s.clean_count,
                noise_per_category: s.noise_per_category,
                noise_seconds: s.noise_seconds,
                seed: ctx.seed,
                ..DemoCorpus::default()
            };
            let (clean, noise) = write_demo_corpus(&ctx.out, &cfg)?;
            println!("{}\n{}", clean.display(), noise.display());
        }
        Command::Synth(a) => {
            let mut s = file.synth.unwrap_or_default();
            set(&mut s.clean, a.clean);
            set(&mut s.noise, a.noise);
            set(&mut s.variants, a.variants);
            set(&mut s.density_scale, a.density_scale);
            if let Some(r) = a.ratios {
                s.ratios = [r[0], r[1], r[2]];
            }
            if let Some(seed) = seed_override {
                s.seed = seed;
            }
            ctx.record("synth", &s)?;
            let m = run_synth(&s, &ctx.out)?;
            println!("{}", ctx.out.join(MANIFEST_FILE).display());
            info!("{} entries", m.entries.len());
        }
        Command::Train(a) => {
            let mut s = file.train.unwrap_or_default();
            set(&mut s.manifest, a.manifest);
            set(&mut s.model, a.model);
            set(&mut s.batch_size, a.batch_size);
            set(&mut s.max_epochs, a.epochs);
            set(&mut s.patience, a.patience);
            set(&mut s.learning_rate, a.lr);
            if let Some(seed) = seed_override {
                s.seed = seed;
            }
            ctx.record("train", &s)?;
            let outcome = run_train(&s, &ctx.out, |_| {})?;
            let h = &outcome.card.history;
            println!(
                "{}: best epoch {} val_mse {:.6} ({:?})",
                outcome.checkpoint.display(),
                h.best_epoch,
                h.best_val_mse,
                h.stop
            );
        }
        Command::Denoise(a) => {
            let inf = a.inference.resolve(file.inference.clone(), &ctx.out)?;
            ctx.record(
                "denoise",
                serde_json::json!({
                    "method": a.method, "checkpoint": a.checkpoint, "input": a.input, "manifest": a.manifest,
                    "partition": a.partition, "inference": inf,
                }),
            )?;
            let recon = reconstruction(inf.reconstruction, inf.regularization);
            let checkpoint = a
                .checkpoint
                .clone()
                .unwrap_or_else(|| inf.checkpoint(a.method));
            let d = make_denoiser(a.method, Some(&checkpoint), &recon, inf.wavelet)?;
            match (a.input, a.manifest) {
                (Some(input), None) => {
                    let noisy = read_wav(&input)?;
                    let est = d.apply(&noisy)?;
                    let stem = input
                        .file_stem()
                        .map_or_else(|| "input".into(), |s| s.to_string_lossy().into_owned());
                    let path = ctx.out.join(format!("{stem}_{}.wav", a.method.label()));
                    write_wav(&est, &path)?;
                    println!("{}", path.display());
                }
                (None, Some(manifest)) => {
                    let src = ManifestSource::load(&manifest)?;
                    let written = denoise_manifest(&src, a.partition, &d, &ctx.out)?;
                    info!("wrote {} files", written.len());
                }
                _ => bail!("give exactly one of --input or --manifest"),
            }
        }
        Command::Eval(a) => {
            let mut s = file.eval.unwrap_or_default();
            set(&mut s.manifest, a.manifest);
            set(&mut s.methods, a.methods);
            let inf = a.inference.resolve(file.inference.clone(), &ctx.out)?;
            ctx.record("eval", serde_json::json!({ "eval": s, "inference": inf }))?;
            let recon = reconstruction(inf.reconstruction, inf.regularization);
            let denoisers = s
                .methods
                .iter()
                .map(|&m| make_denoiser(m, Some(&inf.checkpoint(m)), &recon, inf.wavelet))
                .collect::<Result<Vec<_>, _>>()?;
            let src = ManifestSource::load(&s.manifest)?;
            let report = run_eval(&src, &denoisers)?;
            let path = write_report(&report, &ctx.out)?;
            print!("{}", report_table(&report));
            info!("wrote {}", path.display());
        }
        Command::Stats(a) => {
            let mut s = file.stats.unwrap_or_default();
            if a.manifest.is_some() || a.draws.is_some() {
                s.manifest = a.manifest;
                s.draws = a.draws;
            }
            ctx.record("stats", &s)?;
            let stats = match (&s.manifest, s.draws) {
                (Some(m), _) => manifest_stats(&ManifestSource::load(m)?.manifest),
                (None, draws) => sampled_stats(draws.unwrap_or(10_000), ctx.seed),
            };
            write_stats(&stats, &ctx.out)?;
            print!("{}", stats_table(&stats));
        }
        Command::Plot(a) => {
            let manifest = a.manifest.unwrap_or_else(|| PathBuf::from(MANIFEST_FILE));
            let methods = a.methods.unwrap_or_default();
            let inf = a.inference.resolve(file.inference.clone(), &ctx.out)?;
            ctx.record(
                "plot",
                serde_json::json!({ "manifest": manifest, "id": a.id, "methods": methods, "frame": a.frame, "inference": inf }),
            )?;
            let recon = reconstruction(inf.reconstruction, inf.regularization);
            let denoisers = methods
                .iter()
                .map(|&m| make_denoiser(m, Some(&inf.checkpoint(m)), &recon, inf.wavelet))
                .collect::<Result<Vec<_>, _>>()?;
            let src = ManifestSource::load(&manifest)?;
            for p in plot_entry(&src, &a.id, &denoisers, a.frame, &ctx.out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

struct Ctx {
    out: PathBuf,
    threads: usize,
    seed: u64,
}

impl Ctx {
    fn record<T: Serialize>(&self, command: &str, options: T) -> Result<()> {
        let rec = RunRecord {
            tool_version: TOOL_VERSION,
            command,
            seed: self.seed,
            threads: self.threads,
            out: &self.out,
            options,
        };
        write_json(&rec, &self.out.join("run_config.json"))?;
        info!("{command}: seed {} threads {}", self.seed, self.threads);
        Ok(())
    }
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

impl InferenceArgs {
    fn resolve(&self, base: Option<InferenceSettings>, out: &Path) -> Result<InferenceSettings> {
        let mut s = base.unwrap_or_default();
        if self.models.is_some() {
            s.models = self.models.clone();
        }
        if s.models.is_none() {
            s.models = Some(out.to_path_buf());
        }
        set(&mut s.reconstruction, self.reconstruction);
        set(&mut s.regularization, self.regularization);
        if let Some(w) = &self.wavelet {
            s.wavelet.wavelet =
                Wavelet::from_label(w).with_context(|| format!("unknown wavelet `{w}`"))?;
        }
        set(&mut s.wavelet.levels, self.levels);
        if let Some(t) = &self.threshold {
            s.wavelet.rule = match t.as_str() {
                "universal" => ThresholdRule::Universal,
                v => {
                    ThresholdRule::Fixed(v.parse().with_context(|| format!("bad threshold `{v}`"))?)
                }
            };
        }
        if self.hard {
            s.wavelet.mode = ThresholdMode::Hard;
        }
        if self.periodization {
            s.wavelet.extension = Extension::Periodization;
        }
        Ok(s)
    }
}

impl InferenceSettings {
    fn checkpoint(&self, m: Method) -> PathBuf {
        self.models
            .clone()
            .unwrap_or_default()
            .join(format!("{}.pcgu", m.label()))
    }
}
