//! Loading clean and noise corpora from disk, and writing the synthetic demo corpus.

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use pcg_core::fixtures::{synthetic_noise, synthetic_pcg};
use pcg_core::signal::{CORPUS_RATE_HZ, NOISE_CORPUS_RATE_HZ};
use pcg_core::synth::{NoiseCategory, NoiseCorpus, SynthError};
use pcg_core::{resample, SignalError, Waveform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::wav::{read_wav, write_wav, WavError};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: no WAV files found")]
    NoFiles { path: PathBuf },
    #[error("{path}: {rate} Hz is not a corpus rate (expected {expected})")]
    Rate {
        path: PathBuf,
        rate: u32,
        expected: String,
    },
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error("{path}: {source}")]
    Signal { path: PathBuf, source: SignalError },
    #[error("{path}: {source}")]
    Synth { path: PathBuf, source: SynthError },
}

/// `*.wav` files directly inside `dir`, sorted by name.
pub fn wav_files(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let io = |source| CorpusError::Io {
        path: dir.into(),
        source,
    };
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let p = entry.map_err(io)?.path();
        if p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn absolute(p: &Path) -> PathBuf {
    fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

/// A clean recording at 4 kHz, peak-normalized.
pub fn load_clean(path: &Path) -> Result<Waveform, CorpusError> {
    let w = read_wav(path)?;
    if w.sample_rate_hz != CORPUS_RATE_HZ {
        return Err(CorpusError::Rate {
            path: path.into(),
            rate: w.sample_rate_hz,
            expected: format!("{CORPUS_RATE_HZ}"),
        });
    }
    Ok(w.normalized())
}

/// Every clean WAV in `dir` as `(id, path, waveform)`; the id is the file stem.
pub fn load_clean_dir(dir: &Path) -> Result<Vec<(String, PathBuf, Waveform)>, CorpusError> {
    let files = wav_files(dir)?;
    if files.is_empty() {
        return Err(CorpusError::NoFiles { path: dir.into() });
    }
    files
        .into_iter()
        .map(|p| {
            let w = load_clean(&p)?;
            let id = p
                .file_stem()
                .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            Ok((id, absolute(&p), w))
        })
        .collect()
}

/// A noise file brought to the 4 kHz corpus rate.
pub fn load_noise(path: &Path) -> Result<Waveform, CorpusError> {
    let w = read_wav(path)?;
    match w.sample_rate_hz {
        NOISE_CORPUS_RATE_HZ => {
            resample(&w, CORPUS_RATE_HZ).map_err(|source| CorpusError::Signal {
                path: path.into(),
                source,
            })
        }
        CORPUS_RATE_HZ => Ok(w),
        rate => Err(CorpusError::Rate {
            path: path.into(),
            rate,
            expected: format!("{NOISE_CORPUS_RATE_HZ} or {CORPUS_RATE_HZ}"),
        }),
    }
}

/// Noise files from one subdirectory per category. Subdirectories whose
/// names are not one of the five categories are skipped with a warning.
pub fn load_noise_dir(
    dir: &Path,
) -> Result<(NoiseCorpus, Vec<(NoiseCategory, PathBuf)>), CorpusError> {
    let io = |source| CorpusError::Io {
        path: dir.into(),
        source,
    };
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    let mut corpus = NoiseCorpus::new();
    let mut files = Vec::new();
    for sub in subdirs {
        let name = sub
            .file_name()
            .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        let Ok(category) = NoiseCategory::from_label(&name) else {
            warn!(
                "skipping noise directory {} (not a recognised category)",
                sub.display()
            );
            continue;
        };
        for p in wav_files(&sub)? {
            let w = load_noise(&p)?;
            let id = absolute(&p);
            corpus
                .add(category, id.to_string_lossy().into_owned(), w)
                .map_err(|source| CorpusError::Synth {
                    path: p.clone(),
                    source,
                })?;
            files.push((category, id));
        }
    }
    corpus
        .check_complete()
        .map_err(|source| CorpusError::Synth {
            path: dir.into(),
            source,
        })?;
    Ok((corpus, files))
}

/// Rebuild a noise corpus from the file lists recorded in a manifest.
pub fn load_noise_files(
    sources: &std::collections::BTreeMap<NoiseCategory, Vec<PathBuf>>,
) -> Result<NoiseCorpus, CorpusError> {
    let mut corpus = NoiseCorpus::new();
    for (&c, paths) in sources {
        for p in paths {
            corpus
                .add(c, p.to_string_lossy().into_owned(), load_noise(p)?)
                .map_err(|source| CorpusError::Synth {
                    path: p.clone(),
                    source,
                })?;
        }
    }
    Ok(corpus)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoCorpus {
    pub clean_count: usize,
    /// Clean durations are uniform in this range, in seconds.
    pub clean_seconds: (f64, f64),
    pub noise_per_category: usize,
    pub noise_seconds: f64,
    pub seed: u64,
}

impl Default for DemoCorpus {
    fn default() -> Self {
        Self {
            clean_count: 20,
            clean_seconds: (3.5, 6.0),
            noise_per_category: 4,
            noise_seconds: 10.0,
            seed: 0,
        }
    }
}

/// Write `clean/*.wav` at 4 kHz and `noise/<category>/*.wav` at 44.1 kHz
/// under `root`. Returns the two directories.
pub fn write_demo_corpus(root: &Path, cfg: &DemoCorpus) -> Result<(PathBuf, PathBuf), CorpusError> {
    let clean_dir = root.join("clean");
    let noise_dir = root.join("noise");
    let mkdir = |p: &Path| {
        fs::create_dir_all(p).map_err(|source| CorpusError::Io {
            path: p.into(),
            source,
        })
    };
    mkdir(&clean_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for i in 0..cfg.clean_count {
        let (lo, hi) = cfg.clean_seconds;
        let seconds = if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        };
        let w = synthetic_pcg(seconds, CORPUS_RATE_HZ, &mut rng);
        write_wav(&w, clean_dir.join(format!("subject{i:03}.wav")))?;
    }
    for c in NoiseCategory::ALL {
        let dir = noise_dir.join(c.label());
        mkdir(&dir)?;
        for i in 0..cfg.noise_per_category {
            let w = synthetic_noise(c, cfg.noise_seconds, NOISE_CORPUS_RATE_HZ, &mut rng);
            write_wav(&w, dir.join(format!("{}_{i:02}.wav", c.label())))?;
        }
    }
    Ok((clean_dir, noise_dir))
}
