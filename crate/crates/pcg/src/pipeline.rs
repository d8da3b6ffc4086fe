//! The file-level steps behind each subcommand: synthesis, training,
//! denoising, evaluation, statistics and plots.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use pcg_core::metrics::{EvalPair, EvalReport, MetricError};
use pcg_core::models::{
    build_dae, build_unet, denoise_waveform, model_frames, training_pair, ModelError,
    Reconstruction, UNetConfig, SPECTRAL_GAIN,
};
use pcg_core::nn::{
    checkpoint_tensors, decode_checkpoint, encode_checkpoint, restore_checkpoint, train,
    CheckpointError, EpochRecord, History, Nadam, NadamConfig, Network, NnError, Tensor,
    TrainConfig, TrainSet,
};
use pcg_core::signal::{CORPUS_RATE_HZ, MODEL_RATE_HZ};
use pcg_core::spectral::{stft, LeastSquaresInverse, SpectralError, PACKED_LEN};
use pcg_core::synth::{
    plan_variant, recipe_durations, render, segment_stats, split_subjects, NoiseCategory,
    Partition, SegmentStats, SynthConfig, SynthError, MAX_SEGMENT_S,
};
use pcg_core::wavelet::{wt_denoise, WaveletConfig, WaveletError};
use pcg_core::{resample, SignalError, Waveform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{load_clean, load_clean_dir, load_noise_dir, load_noise_files, CorpusError};
use crate::manifest::{base_dir, DatasetManifest, ManifestEntry, ManifestError, MANIFEST_FILE};
use crate::plot::{heatmap_csv, traces_csv, traces_svg, Trace};
use crate::report::{write_history_csv, write_report_csv, write_stats_csv};
use crate::wav::{read_wav, write_wav, WavError};

pub const TOOL_VERSION: &str = concat!("pcg-denoise ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error("entry `{entry}`: {source}")]
    Entry {
        entry: String,
        source: Box<PipelineError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Checkpoint {
        path: PathBuf,
        source: CheckpointError,
    },
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
    #[error("{0}")]
    Invalid(String),
}

type Result<T, E = PipelineError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.into(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> PipelineError + '_ {
    move |source| PipelineError::Csv {
        path: path.into(),
        source,
    }
}

fn in_entry<T>(entry: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| PipelineError::Entry {
        entry: entry.into(),
        source: Box::new(e),
    })
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| PipelineError::Json {
        path: path.into(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| PipelineError::Json {
        path: path.into(),
        source,
    })
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthOptions {
    pub clean: PathBuf,
    pub noise: PathBuf,
    pub variants: usize,
    pub density_scale: f64,
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            clean: PathBuf::from("clean"),
            noise: PathBuf::from("noise"),
            variants: pcg_core::synth::DEFAULT_VARIANTS,
            density_scale: 1.0,
            ratios: [0.64, 0.16, 0.20],
            seed: 0,
        }
    }
}

/// Mix every clean recording with `variants` noise recipes, write the noisy
/// WAVs under `out/noisy/` and the manifest to `out/manifest.json`.
pub fn run_synth(opts: &SynthOptions, out: &Path) -> Result<DatasetManifest> {
    for dir in [&opts.clean, &opts.noise] {
        if !dir.is_dir() {
            return Err(PipelineError::Invalid(format!(
                "{}: not a directory",
                dir.display()
            )));
        }
    }
    let cleans = load_clean_dir(&opts.clean)?;
    let (corpus, noise_files) = load_noise_dir(&opts.noise)?;
    let cfg = SynthConfig {
        variants_per_clean: opts.variants,
        master_seed: opts.seed,
        density_scale: opts.density_scale,
    };
    if opts.variants == 0 {
        return Err(PipelineError::Invalid("variants must be at least 1".into()));
    }
    let ids: Vec<&str> = cleans.iter().map(|(id, ..)| id.as_str()).collect();
    let ratios = (opts.ratios[0], opts.ratios[1], opts.ratios[2]);
    let partitions = split_subjects(&ids, ratios, opts.seed)?;
    let noisy_dir = out.join("noisy");
    create_dir(&noisy_dir)?;

    let jobs: Vec<(usize, u32)> = (0..cleans.len())
        .flat_map(|c| (0..opts.variants as u32).map(move |v| (c, v)))
        .collect();
    let entries: Vec<ManifestEntry> = jobs
        .par_iter()
        .map(|&(c, v)| {
            let (id, path, clean) = &cleans[c];
            let recipe = plan_variant(id, clean.len(), &corpus, v, &cfg)?;
            let noisy = render(&recipe, clean, &corpus)?;
            let rel = PathBuf::from("noisy").join(format!("{id}_v{v:02}.wav"));
            write_wav(&noisy, out.join(&rel))?;
            Ok(ManifestEntry {
                id: format!("{id}_v{v:02}"),
                noisy: rel,
                clean: path.clone(),
                subject: id.clone(),
                partition: partitions[c],
                recipe,
            })
        })
        .collect::<Result<_>>()?;

    let mut noise_sources: BTreeMap<NoiseCategory, Vec<PathBuf>> = BTreeMap::new();
    for (c, p) in noise_files {
        noise_sources.entry(c).or_default().push(p);
    }
    let manifest = DatasetManifest {
        tool_version: TOOL_VERSION.into(),
        master_seed: opts.seed,
        variants_per_clean: opts.variants,
        density_scale: opts.density_scale,
        ratios: opts.ratios,
        noise_sources,
        entries,
    };
    manifest.save(&out.join(MANIFEST_FILE))?;
    info!(
        "wrote {} noisy recordings from {} clean recordings",
        manifest.entries.len(),
        cleans.len()
    );
    Ok(manifest)
}

/// Re-render an entry from its recipe and the recorded noise files.
pub fn replay_entry(manifest: &DatasetManifest, entry: &ManifestEntry) -> Result<Waveform> {
    let corpus = load_noise_files(&manifest.noise_sources)?;
    let clean = load_clean(&entry.clean)?;
    Ok(render(&entry.recipe, &clean, &corpus)?)
}

// ---------------------------------------------------------------- data

pub struct ManifestSource {
    pub path: PathBuf,
    pub manifest: DatasetManifest,
}

impl ManifestSource {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self {
            path: path.into(),
            manifest: DatasetManifest::load(path)?,
        })
    }

    pub fn noisy(&self, e: &ManifestEntry) -> Result<Waveform> {
        let w = in_entry(
            &e.id,
            read_wav(base_dir(&self.path).join(&e.noisy)).map_err(Into::into),
        )?;
        in_entry(&e.id, w.require(CORPUS_RATE_HZ).map_err(Into::into))?;
        Ok(w)
    }

    pub fn clean(&self, e: &ManifestEntry) -> Result<Waveform> {
        in_entry(&e.id, load_clean(&e.clean).map_err(Into::into))
    }

    pub fn entries(&self, p: Partition) -> Vec<&ManifestEntry> {
        self.manifest.partition(p).collect()
    }
}

/// Packed input and target spectra of every frame in one partition.
pub struct Dataset {
    pub inputs: Tensor<f32>,
    pub targets: Tensor<f32>,
    pub recordings: usize,
}

impl Dataset {
    pub fn frames(&self) -> usize {
        self.inputs.shape()[0]
    }

    pub fn as_train_set(&self) -> Result<TrainSet<'_, f32>> {
        Ok(TrainSet::new(&self.inputs, &self.targets)?)
    }
}

pub fn load_dataset(src: &ManifestSource, partition: Partition) -> Result<Dataset> {
    let entries = src.entries(partition);
    if entries.is_empty() {
        return Err(PipelineError::Invalid(format!(
            "{}: {} partition is empty",
            src.path.display(),
            partition.label()
        )));
    }
    let pairs: Vec<(Tensor<f32>, Tensor<f32>)> = entries
        .par_iter()
        .map(|e| {
            let noisy = src.noisy(e)?;
            let clean = src.clean(e)?;
            in_entry(&e.id, training_pair(&noisy, &clean).map_err(Into::into))
        })
        .collect::<Result<_>>()?;
    let frames: usize = pairs.iter().map(|(x, _)| x.shape()[0]).sum();
    let mut inputs = Vec::with_capacity(frames * PACKED_LEN);
    let mut targets = Vec::with_capacity(frames * PACKED_LEN);
    for (x, y) in pairs {
        inputs.extend_from_slice(x.data());
        targets.extend_from_slice(y.data());
    }
    let shape = [frames, 64, 64, 2];
    Ok(Dataset {
        inputs: Tensor::from_vec(&shape, inputs)?,
        targets: Tensor::from_vec(&shape, targets)?,
        recordings: entries.len(),
    })
}

// ---------------------------------------------------------------- models

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Unet,
    Dae,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Unet => "unet",
            ModelKind::Dae => "dae",
        }
    }

    pub fn architecture(self) -> UNetConfig {
        match self {
            ModelKind::Unet => UNetConfig::default(),
            ModelKind::Dae => UNetConfig::dae(),
        }
    }

    pub fn build(self, arch: &UNetConfig, seed: u64) -> Result<Network<f32>> {
        Ok(match self {
            ModelKind::Unet => build_unet(arch, seed)?,
            ModelKind::Dae => build_dae(arch, seed)?,
        })
    }
}

/// JSON sidecar stored next to each checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCard {
    pub tool_version: String,
    pub model: ModelKind,
    pub architecture: UNetConfig,
    pub init_seed: u64,
    pub parameters: usize,
    pub spectral_gain: f64,
    pub train: TrainConfig,
    pub optimizer: NadamConfig,
    pub manifest: PathBuf,
    pub train_frames: usize,
    pub val_frames: usize,
    pub history: History,
}

pub fn sidecar_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("json")
}

pub fn save_model(
    checkpoint: &Path,
    net: &Network<f32>,
    optimizer: Option<&Nadam<f32>>,
    card: &ModelCard,
) -> Result<()> {
    let bytes = encode_checkpoint(&checkpoint_tensors(net, optimizer));
    fs::write(checkpoint, bytes).map_err(io_err(checkpoint))?;
    write_json(card, &sidecar_path(checkpoint))
}

pub fn load_model(checkpoint: &Path) -> Result<(Network<f32>, ModelCard, Option<Nadam<f32>>)> {
    let card: ModelCard = read_json(&sidecar_path(checkpoint))?;
    let bytes = fs::read(checkpoint).map_err(io_err(checkpoint))?;
    let tensors = decode_checkpoint(&bytes).map_err(|source| PipelineError::Checkpoint {
        path: checkpoint.into(),
        source,
    })?;
    let mut net = card.model.build(&card.architecture, card.init_seed)?;
    let opt = restore_checkpoint(&mut net, &tensors, card.optimizer)?;
    Ok((net, card, opt))
}

// ---------------------------------------------------------------- train

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub manifest: PathBuf,
    pub model: ModelKind,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        let t = TrainConfig::default();
        let o = NadamConfig::default();
        Self {
            manifest: PathBuf::from(MANIFEST_FILE),
            model: ModelKind::Unet,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            learning_rate: o.learning_rate,
            beta1: o.beta1,
            beta2: o.beta2,
            epsilon: o.epsilon,
            seed: 0,
        }
    }
}

impl TrainOptions {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed: self.seed,
        }
    }

    pub fn optimizer(&self) -> NadamConfig {
        NadamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub card: ModelCard,
    pub net: Network<f32>,
}

/// Train on the manifest's train partition, validate on val, and write
/// `{model}.pcgu`, its JSON sidecar and `{model}_history.csv` into `out`.
pub fn run_train(
    opts: &TrainOptions,
    out: &Path,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    let src = ManifestSource::load(&opts.manifest)?;
    let train_data = load_dataset(&src, Partition::Train)?;
    let val_data = load_dataset(&src, Partition::Val)?;
    info!(
        "training {} on {} frames, validating on {} frames",
        opts.model.label(),
        train_data.frames(),
        val_data.frames()
    );
    let arch = opts.model.architecture();
    let mut net = opts.model.build(&arch, opts.seed)?;
    let mut opt = Nadam::new(opts.optimizer(), &net.params());
    let cfg = opts.train_config();
    let history = train(
        &mut net,
        &mut opt,
        train_data.as_train_set()?,
        val_data.as_train_set()?,
        &cfg,
        |r| {
            info!(
                "{} epoch {:>3}: train {:.6} val {:.6}{}",
                opts.model.label(),
                r.epoch,
                r.train_mse,
                r.val_mse,
                if r.improved { " *" } else { "" }
            );
            on_epoch(r)
        },
    )?;
    create_dir(out)?;
    let card = ModelCard {
        tool_version: TOOL_VERSION.into(),
        model: opts.model,
        architecture: arch,
        init_seed: opts.seed,
        parameters: net.num_params(),
        spectral_gain: SPECTRAL_GAIN,
        train: cfg,
        optimizer: opts.optimizer(),
        manifest: opts.manifest.clone(),
        train_frames: train_data.frames(),
        val_frames: val_data.frames(),
        history,
    };
    let checkpoint = out.join(format!("{}.pcgu", opts.model.label()));
    save_model(&checkpoint, &net, Some(&opt), &card)?;
    let hist = out.join(format!("{}_history.csv", opts.model.label()));
    write_history_csv(&card.history, &hist).map_err(csv_err(&hist))?;
    Ok(TrainOutcome {
        checkpoint,
        card,
        net,
    })
}

// ---------------------------------------------------------------- denoise

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Unet,
    Dae,
    Wt,
    /// The noisy input itself, resampled to the model rate.
    Noop,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Unet => "unet",
            Method::Dae => "dae",
            Method::Wt => "wt",
            Method::Noop => "noop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReconstructionKind {
    #[default]
    LeastSquares,
    Bilinear,
}

pub fn reconstruction(kind: ReconstructionKind, relative_regularization: f64) -> Reconstruction {
    match kind {
        ReconstructionKind::LeastSquares => Reconstruction::LeastSquares(
            LeastSquaresInverse::with_regularization(relative_regularization),
        ),
        ReconstructionKind::Bilinear => Reconstruction::Bilinear,
    }
}

/// A method ready to map a 4 kHz noisy recording to a 1500 Hz estimate.
pub enum Denoiser<'a> {
    Network {
        method: Method,
        net: Network<f32>,
        reconstruction: &'a Reconstruction,
    },
    Wavelet(WaveletConfig),
    Noop,
}

impl Denoiser<'_> {
    pub fn method(&self) -> Method {
        match self {
            Denoiser::Network { method, .. } => *method,
            Denoiser::Wavelet(_) => Method::Wt,
            Denoiser::Noop => Method::Noop,
        }
    }

    pub fn apply(&self, noisy: &Waveform) -> Result<Waveform> {
        Ok(match self {
            Denoiser::Network {
                net,
                reconstruction,
                ..
            } => denoise_waveform(net, noisy, reconstruction)?,
            Denoiser::Wavelet(cfg) => wt_denoise(noisy, cfg)?,
            Denoiser::Noop => resample(noisy, MODEL_RATE_HZ)?,
        })
    }
}

/// Build the denoiser for `method`; network methods need a checkpoint.
pub fn make_denoiser<'a>(
    method: Method,
    checkpoint: Option<&Path>,
    reconstruction: &'a Reconstruction,
    wavelet: WaveletConfig,
) -> Result<Denoiser<'a>> {
    Ok(match method {
        Method::Unet | Method::Dae => {
            let path = checkpoint.ok_or_else(|| {
                PipelineError::Invalid(format!("method {} needs a checkpoint", method.label()))
            })?;
            let (net, card, _) = load_model(path)?;
            let expected = if method == Method::Unet {
                ModelKind::Unet
            } else {
                ModelKind::Dae
            };
            if card.model != expected {
                return Err(PipelineError::Invalid(format!(
                    "{} holds a {} model, not {}",
                    path.display(),
                    card.model.label(),
                    method.label()
                )));
            }
            Denoiser::Network {
                method,
                net,
                reconstruction,
            }
        }
        Method::Wt => Denoiser::Wavelet(wavelet),
        Method::Noop => Denoiser::Noop,
    })
}

/// Denoise every entry of `partition` (or all entries) into `out/{method}/`.
pub fn denoise_manifest(
    src: &ManifestSource,
    partition: Option<Partition>,
    denoiser: &Denoiser<'_>,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    let dir = out.join(denoiser.method().label());
    create_dir(&dir)?;
    let entries: Vec<&ManifestEntry> = src
        .manifest
        .entries
        .iter()
        .filter(|e| partition.is_none_or(|p| e.partition == p))
        .collect();
    entries
        .iter()
        .map(|e| {
            let noisy = src.noisy(e)?;
            let est = in_entry(&e.id, denoiser.apply(&noisy))?;
            let path = dir.join(format!("{}.wav", e.id));
            write_wav(&est, &path)?;
            Ok(path)
        })
        .collect()
}

// ---------------------------------------------------------------- eval

/// Score each denoiser on the test partition against the clean references
/// resampled to 1500 Hz. A `noop` row is added when absent.
pub fn run_eval(src: &ManifestSource, denoisers: &[Denoiser<'_>]) -> Result<EvalReport> {
    let entries = src.entries(Partition::Test);
    if entries.is_empty() {
        return Err(PipelineError::Invalid(format!(
            "{}: test partition is empty",
            src.path.display()
        )));
    }
    let noop = Denoiser::Noop;
    let mut all: Vec<&Denoiser<'_>> = denoisers.iter().collect();
    if !all.iter().any(|d| d.method() == Method::Noop) {
        all.push(&noop);
    }
    let mut report = EvalReport::new();
    for d in &all {
        report.methods.push(d.method().label().into());
    }
    let mut clean_cache: HashMap<PathBuf, Waveform> = HashMap::new();
    for e in entries {
        let reference = match clean_cache.get(&e.clean) {
            Some(w) => w.clone(),
            None => {
                let w = in_entry(
                    &e.id,
                    resample(&src.clean(e)?, MODEL_RATE_HZ).map_err(Into::into),
                )?;
                clean_cache.insert(e.clean.clone(), w.clone());
                w
            }
        };
        let noisy = src.noisy(e)?;
        for d in &all {
            let est = in_entry(&e.id, d.apply(&noisy))?;
            let pair = in_entry(
                &e.id,
                EvalPair::new(e.id.clone(), &reference, &est).map_err(Into::into),
            )?;
            if pair.trimmed > 0 {
                warn!(
                    "{}: trimmed {} samples to align {}",
                    e.id,
                    pair.trimmed,
                    d.method().label()
                );
            }
            report.push(
                d.method().label(),
                &e.id,
                in_entry(&e.id, pair.metrics().map_err(Into::into))?,
            );
        }
    }
    Ok(report)
}

pub fn write_report(report: &EvalReport, out: &Path) -> Result<PathBuf> {
    create_dir(out)?;
    let csv_path = out.join("report.csv");
    write_report_csv(report, &csv_path).map_err(csv_err(&csv_path))?;
    let txt = out.join("report.txt");
    fs::write(&txt, crate::report::report_table(report)).map_err(io_err(&txt))?;
    Ok(csv_path)
}

// ---------------------------------------------------------------- stats

/// Statistics of every placed segment in a manifest.
pub fn manifest_stats(m: &DatasetManifest) -> Vec<SegmentStats> {
    segment_stats(&recipe_durations(m.entries.iter().map(|e| &e.recipe)))
}

/// Statistics of `draws` durations sampled per category.
pub fn sampled_stats(draws: usize, seed: u64) -> Vec<SegmentStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = Vec::with_capacity(draws * NoiseCategory::ALL.len());
    for c in NoiseCategory::ALL {
        for _ in 0..draws {
            // Round to whole samples as extraction does.
            let s = c.sample_duration(MAX_SEGMENT_S, &mut rng);
            d.push((
                c,
                (s * CORPUS_RATE_HZ as f64).round() / CORPUS_RATE_HZ as f64,
            ));
        }
    }
    segment_stats(&d)
}

pub fn write_stats(stats: &[SegmentStats], out: &Path) -> Result<PathBuf> {
    create_dir(out)?;
    let path = out.join("stats.csv");
    write_stats_csv(stats, &path).map_err(csv_err(&path))?;
    Ok(path)
}

// ---------------------------------------------------------------- plot

/// For one recording: `{id}_traces.csv`, `{id}_traces.svg` and
/// `{id}_spectrum.csv` (65×72 magnitudes of frame `frame` of the noisy input).
pub fn plot_entry(
    src: &ManifestSource,
    id: &str,
    denoisers: &[Denoiser<'_>],
    frame: usize,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    let e = src.manifest.find(id).ok_or_else(|| {
        PipelineError::Invalid(format!("{}: no entry `{id}`", src.path.display()))
    })?;
    create_dir(out)?;
    let clean = resample(&src.clean(e)?, MODEL_RATE_HZ)?;
    let noisy_4k = src.noisy(e)?;
    let noisy = resample(&noisy_4k, MODEL_RATE_HZ)?;
    let estimates: Vec<(Method, Waveform)> = denoisers
        .iter()
        .filter(|d| d.method() != Method::Noop)
        .map(|d| Ok((d.method(), in_entry(id, d.apply(&noisy_4k))?)))
        .collect::<Result<_>>()?;
    let mut traces = vec![
        Trace {
            name: "clean",
            samples: &clean.samples,
        },
        Trace {
            name: "noisy",
            samples: &noisy.samples,
        },
    ];
    for (m, w) in &estimates {
        traces.push(Trace {
            name: m.label(),
            samples: &w.samples,
        });
    }
    let csv_path = out.join(format!("{id}_traces.csv"));
    traces_csv(&traces, MODEL_RATE_HZ, &csv_path).map_err(csv_err(&csv_path))?;
    let svg_path = out.join(format!("{id}_traces.svg"));
    fs::write(&svg_path, traces_svg(id, &traces, MODEL_RATE_HZ)).map_err(io_err(&svg_path))?;

    let frames = model_frames(&noisy_4k)?;
    let f = frames.get(frame).ok_or_else(|| {
        PipelineError::Invalid(format!(
            "{id} has {} frames; frame {frame} does not exist",
            frames.len()
        ))
    })?;
    let heat_path = out.join(format!("{id}_spectrum.csv"));
    heatmap_csv(&stft(f)?, &heat_path).map_err(csv_err(&heat_path))?;
    Ok(vec![csv_path, svg_path, heat_path])
}
