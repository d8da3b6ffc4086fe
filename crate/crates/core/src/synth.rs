//! Noisy-recording synthesis: category-wise noise segments are cut from a
//! noise corpus, dropped onto zero vectors, peak-normalized and summed into
//! a clean recording, which is normalized again.
//!
//! Every variant is described by a [`MixRecipe`] that lists each placement
//! explicitly, so [`render`] can replay it without any randomness.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};

use crate::math;
use crate::signal::{normalize, normalize_in_place, Waveform, CORPUS_RATE_HZ};

pub const MIN_SEGMENT_S: f64 = 0.05;
pub const MAX_SEGMENT_S: f64 = 4.0;
pub const DEFAULT_VARIANTS: usize = 20;
pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.64, 0.16, 0.20);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NoiseCategory {
    ChildSpeech,
    Hiss,
    CrumplingCrinkling,
    Cough,
    Sneeze,
}

impl NoiseCategory {
    pub const ALL: [NoiseCategory; 5] = [
        NoiseCategory::ChildSpeech,
        NoiseCategory::Hiss,
        NoiseCategory::CrumplingCrinkling,
        NoiseCategory::Cough,
        NoiseCategory::Sneeze,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::ChildSpeech => "child_speech",
            Self::Hiss => "hiss",
            Self::CrumplingCrinkling => "crumpling_crinkling",
            Self::Cough => "cough",
            Self::Sneeze => "sneeze",
        }
    }

    /// Accepts the snake-case labels and, case-insensitively, the long
    /// corpus names ("Child speech, kid speaking", "Crumpling, crinkling").
    pub fn from_label(label: &str) -> Result<Self, SynthError> {
        let norm: String = label
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(|c| c.to_lowercase())
            .collect();
        match norm.as_str() {
            "childspeech" | "childspeechkidspeaking" => Ok(Self::ChildSpeech),
            "hiss" => Ok(Self::Hiss),
            "crumplingcrinkling" | "crumplingandcrinkling" => Ok(Self::CrumplingCrinkling),
            "cough" => Ok(Self::Cough),
            "sneeze" => Ok(Self::Sneeze),
            _ => Err(SynthError::UnknownCategory(label.into())),
        }
    }

    /// Target segment duration mean and standard deviation in seconds.
    pub fn duration_moments(self) -> (f64, f64) {
        match self {
            Self::ChildSpeech => (0.76, 0.76),
            Self::Hiss => (0.64, 0.68),
            Self::CrumplingCrinkling => (0.62, 0.66),
            Self::Cough => (0.84, 0.73),
            Self::Sneeze => (0.84, 0.73),
        }
    }

    /// Log-normal with the target moments, before clipping.
    pub fn length_distribution(self) -> LogNormal<f64> {
        let (mean, sd) = self.duration_moments();
        let s2 = math::ln(1.0 + (sd / mean) * (sd / mean));
        let mu = math::ln(mean) - s2 / 2.0;
        LogNormal::new(mu, math::sqrt(s2)).expect("finite positive sigma")
    }

    /// One segment duration, clipped to `[MIN_SEGMENT_S, max_s]`.
    pub fn sample_duration<R: Rng + ?Sized>(self, max_s: f64, rng: &mut R) -> f64 {
        let d: f64 = self.length_distribution().sample(rng);
        d.clamp(MIN_SEGMENT_S, max_s.clamp(MIN_SEGMENT_S, MAX_SEGMENT_S))
    }
}

impl core::fmt::Display for NoiseCategory {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("unknown noise category `{0}`")]
    UnknownCategory(String),
    #[error("noise source is {samples} samples; at least {min} are needed")]
    TooShort { samples: usize, min: usize },
    #[error("segment of {segment} samples does not fit a {length}-sample vector")]
    Placement { segment: usize, length: usize },
    #[error("length mismatch: clean has {clean} samples, noise vector {index} has {noise}")]
    LengthMismatch {
        clean: usize,
        noise: usize,
        index: usize,
    },
    #[error("{0}")]
    Config(String),
    #[error("expected {expected} Hz audio, got {actual} Hz")]
    WrongRate { expected: u32, actual: u32 },
}

fn seconds_to_samples(s: f64) -> usize {
    math::round(s * CORPUS_RATE_HZ as f64) as usize
}

fn min_segment_samples() -> usize {
    seconds_to_samples(MIN_SEGMENT_S)
}

fn require_rate(w: &Waveform) -> Result<(), SynthError> {
    if w.sample_rate_hz != CORPUS_RATE_HZ {
        return Err(SynthError::WrongRate {
            expected: CORPUS_RATE_HZ,
            actual: w.sample_rate_hz,
        });
    }
    Ok(())
}

/// A contiguous slice of a noise source.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSegment {
    pub category: NoiseCategory,
    /// Start within the source, in samples.
    pub source_offset: usize,
    pub samples: Vec<f64>,
}

impl NoiseSegment {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / CORPUS_RATE_HZ as f64
    }
}

/// Offset and length of one random slice of a `source_len`-sample source
/// whose length is capped at `cap` samples.
fn draw_slice<R: Rng + ?Sized>(
    category: NoiseCategory,
    source_len: usize,
    cap: usize,
    rng: &mut R,
) -> (usize, usize) {
    let limit = source_len.min(cap);
    let max_s = limit as f64 / CORPUS_RATE_HZ as f64;
    let len = seconds_to_samples(category.sample_duration(max_s, rng)).clamp(1, limit);
    let offset = rng.random_range(0..=source_len - len);
    (offset, len)
}

/// `count` random slices of `noise`, lengths from the category distribution.
pub fn extract_segments<R: Rng + ?Sized>(
    noise: &Waveform,
    category: NoiseCategory,
    count: usize,
    rng: &mut R,
) -> Result<Vec<NoiseSegment>, SynthError> {
    require_rate(noise)?;
    if noise.len() < min_segment_samples() {
        return Err(SynthError::TooShort {
            samples: noise.len(),
            min: min_segment_samples(),
        });
    }
    if count == 0 {
        return Err(SynthError::Config(
            "segment count must be at least 1".into(),
        ));
    }
    Ok((0..count)
        .map(|_| {
            let (offset, len) = draw_slice(category, noise.len(), usize::MAX, rng);
            NoiseSegment {
                category,
                source_offset: offset,
                samples: noise.samples[offset..offset + len].to_vec(),
            }
        })
        .collect())
}

fn add_at(dst: &mut [f64], src: &[f64], offset: usize) {
    for (d, s) in dst[offset..offset + src.len()].iter_mut().zip(src) {
        *d += s;
    }
}

/// Sum segments onto a zero vector at explicit offsets, then peak-normalize.
pub fn place_segments(segments: &[(&[f64], usize)], length: usize) -> Result<Vec<f64>, SynthError> {
    let mut v = vec![0.0; length];
    for &(seg, offset) in segments {
        if offset + seg.len() > length {
            return Err(SynthError::Placement {
                segment: seg.len(),
                length,
            });
        }
        add_at(&mut v, seg, offset);
    }
    normalize_in_place(&mut v);
    Ok(v)
}

/// Sum segments onto a zero vector at uniformly random offsets, then
/// peak-normalize. Returns the vector and the chosen offsets.
pub fn build_noise_vector<R: Rng + ?Sized>(
    segments: &[NoiseSegment],
    length: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<usize>), SynthError> {
    let mut offsets = Vec::with_capacity(segments.len());
    for s in segments {
        if s.samples.len() > length {
            return Err(SynthError::Placement {
                segment: s.samples.len(),
                length,
            });
        }
        offsets.push(rng.random_range(0..=length - s.samples.len()));
    }
    let pairs: Vec<(&[f64], usize)> = segments
        .iter()
        .zip(&offsets)
        .map(|(s, &o)| (&s.samples[..], o))
        .collect();
    Ok((place_segments(&pairs, length)?, offsets))
}

/// `normalize(clean + Σ noise)`.
pub fn mix(clean: &Waveform, noise_vectors: &[Vec<f64>]) -> Result<Waveform, SynthError> {
    require_rate(clean)?;
    let mut out = clean.samples.clone();
    for (index, v) in noise_vectors.iter().enumerate() {
        if v.len() != out.len() {
            return Err(SynthError::LengthMismatch {
                clean: out.len(),
                noise: v.len(),
                index,
            });
        }
        out.iter_mut().zip(v).for_each(|(a, b)| *a += b);
    }
    Ok(Waveform::new(normalize(&out), CORPUS_RATE_HZ))
}

/// Noise sources per category, all at 4 kHz.
#[derive(Debug, Clone, Default)]
pub struct NoiseCorpus {
    sources: BTreeMap<NoiseCategory, Vec<(String, Waveform)>>,
}

impl NoiseCorpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(
        &mut self,
        category: NoiseCategory,
        id: String,
        w: Waveform,
    ) -> Result<(), SynthError> {
        require_rate(&w)?;
        if w.len() < min_segment_samples() {
            return Err(SynthError::TooShort {
                samples: w.len(),
                min: min_segment_samples(),
            });
        }
        self.sources.entry(category).or_default().push((id, w));
        Ok(())
    }

    pub fn sources(&self, category: NoiseCategory) -> &[(String, Waveform)] {
        self.sources.get(&category).map_or(&[], |v| v.as_slice())
    }

    /// Fails unless every category has at least one source.
    pub fn check_complete(&self) -> Result<(), SynthError> {
        for c in NoiseCategory::ALL {
            if self.sources(c).is_empty() {
                return Err(SynthError::Config(format!(
                    "noise corpus has no `{c}` source"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Placement {
    pub category: NoiseCategory,
    /// Index into the corpus sources of this category.
    pub source: usize,
    pub source_offset: usize,
    pub len: usize,
    /// Start within the clean recording.
    pub offset: usize,
}

impl Placement {
    pub fn duration_s(&self) -> f64 {
        self.len as f64 / CORPUS_RATE_HZ as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MixRecipe {
    pub clean_id: String,
    pub variant_index: u32,
    pub categories: Vec<NoiseCategory>,
    pub placements: Vec<Placement>,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SynthConfig {
    pub variants_per_clean: usize,
    pub master_seed: u64,
    /// Multiplies the per-category Poisson rate of segments.
    pub density_scale: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            variants_per_clean: DEFAULT_VARIANTS,
            master_seed: 0,
            density_scale: 1.0,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xCBF2_9CE4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01B3)
    })
}

/// Seed of one variant, independent of generation order.
pub fn variant_seed(master_seed: u64, clean_id: &str, variant_index: u32) -> u64 {
    let a = splitmix64(master_seed);
    let b = splitmix64(a ^ fnv1a64(clean_id.as_bytes()));
    splitmix64(b ^ variant_index as u64)
}

/// Draw the categories and placements of one noisy variant.
pub fn plan_variant(
    clean_id: &str,
    clean_len: usize,
    corpus: &NoiseCorpus,
    variant_index: u32,
    cfg: &SynthConfig,
) -> Result<MixRecipe, SynthError> {
    corpus.check_complete()?;
    if clean_len == 0 {
        return Err(SynthError::Config(format!(
            "clean recording `{clean_id}` is empty"
        )));
    }
    if !(cfg.density_scale > 0.0 && cfg.density_scale.is_finite()) {
        return Err(SynthError::Config("density scale must be positive".into()));
    }
    let rng_seed = variant_seed(cfg.master_seed, clean_id, variant_index);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut categories: Vec<NoiseCategory> = NoiseCategory::ALL
        .iter()
        .copied()
        .filter(|_| rng.random_bool(0.5))
        .collect();
    if categories.is_empty() {
        categories.push(*NoiseCategory::ALL.choose(&mut rng).expect("non-empty"));
    }
    let duration = clean_len as f64 / CORPUS_RATE_HZ as f64;
    let rate = duration / 2.0 * cfg.density_scale;
    let poisson =
        Poisson::new(rate).map_err(|e| SynthError::Config(format!("segment rate {rate}: {e}")))?;
    let mut placements = Vec::new();
    for &category in &categories {
        let count = (poisson.sample(&mut rng) as usize).max(1);
        let sources = corpus.sources(category);
        for _ in 0..count {
            let source = rng.random_range(0..sources.len());
            let src_len = sources[source].1.len();
            let (source_offset, len) = draw_slice(category, src_len, clean_len, &mut rng);
            let offset = rng.random_range(0..=clean_len - len);
            placements.push(Placement {
                category,
                source,
                source_offset,
                len,
                offset,
            });
        }
    }
    Ok(MixRecipe {
        clean_id: clean_id.into(),
        variant_index,
        categories,
        placements,
        rng_seed,
    })
}

/// Category-wise noise vectors of a recipe, in `recipe.categories` order.
pub fn noise_vectors(
    recipe: &MixRecipe,
    clean_len: usize,
    corpus: &NoiseCorpus,
) -> Result<Vec<Vec<f64>>, SynthError> {
    recipe
        .categories
        .iter()
        .map(|&c| {
            let mut pairs = Vec::new();
            for p in recipe.placements.iter().filter(|p| p.category == c) {
                let (_, src) = corpus.sources(c).get(p.source).ok_or_else(|| {
                    SynthError::Config(format!(
                        "recipe refers to missing `{c}` source {}",
                        p.source
                    ))
                })?;
                if p.source_offset + p.len > src.len() {
                    return Err(SynthError::Placement {
                        segment: p.len,
                        length: src.len(),
                    });
                }
                pairs.push((
                    &src.samples[p.source_offset..p.source_offset + p.len],
                    p.offset,
                ));
            }
            place_segments(&pairs, clean_len)
        })
        .collect()
}

/// Replay a recipe against its clean recording.
pub fn render(
    recipe: &MixRecipe,
    clean: &Waveform,
    corpus: &NoiseCorpus,
) -> Result<Waveform, SynthError> {
    mix(clean, &noise_vectors(recipe, clean.len(), corpus)?)
}

/// Plan and render every variant of every clean recording, in input order.
pub fn synthesize(
    cleans: &[(String, Waveform)],
    corpus: &NoiseCorpus,
    cfg: &SynthConfig,
) -> Result<Vec<(MixRecipe, Waveform)>, SynthError> {
    if cleans.is_empty() {
        return Err(SynthError::Config("clean corpus is empty".into()));
    }
    corpus.check_complete()?;
    let mut out = Vec::with_capacity(cleans.len() * cfg.variants_per_clean);
    for (id, clean) in cleans {
        require_rate(clean)?;
        for v in 0..cfg.variants_per_clean {
            let recipe = plan_variant(id, clean.len(), corpus, v as u32, cfg)?;
            let noisy = render(&recipe, clean, corpus)?;
            out.push((recipe, noisy));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Val, Partition::Test];

    pub fn label(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
        }
    }
}

/// Subject counts per partition by largest-remainder rounding, with every
/// partition non-empty.
pub fn partition_sizes(subjects: usize, ratios: (f64, f64, f64)) -> Result<[usize; 3], SynthError> {
    let r = [ratios.0, ratios.1, ratios.2];
    if r.iter().any(|&x| !(x > 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(SynthError::Config(format!(
            "ratios {ratios:?} must be positive and sum to 1"
        )));
    }
    if subjects < 3 {
        return Err(SynthError::Config(format!(
            "{subjects} subjects cannot fill three non-empty partitions"
        )));
    }
    let quotas: Vec<f64> = r.iter().map(|&x| x * subjects as f64).collect();
    let mut sizes = [0usize; 3];
    for i in 0..3 {
        sizes[i] = math::floor(quotas[i] + 1e-9) as usize;
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - sizes[a] as f64;
        let fb = quotas[b] - sizes[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut left = subjects - sizes.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    for i in 0..3 {
        while sizes[i] == 0 {
            let donor = (0..3)
                .max_by_key(|&j| (sizes[j], core::cmp::Reverse(j)))
                .expect("three partitions");
            sizes[donor] -= 1;
            sizes[i] += 1;
        }
    }
    Ok(sizes)
}

/// Shuffle the distinct subjects with `seed` and assign them to partitions.
/// Returns one partition per input subject id, in input order.
pub fn split_subjects(
    subject_ids: &[&str],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<Vec<Partition>, SynthError> {
    let mut unique: Vec<&str> = subject_ids.to_vec();
    unique.sort_unstable();
    unique.dedup();
    let sizes = partition_sizes(unique.len(), ratios)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    unique.shuffle(&mut rng);
    let mut assignment = BTreeMap::new();
    let mut it = unique.into_iter();
    for (p, &n) in Partition::ALL.iter().zip(&sizes) {
        for s in it.by_ref().take(n) {
            assignment.insert(s, *p);
        }
    }
    Ok(subject_ids.iter().map(|s| assignment[s]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SegmentStats {
    pub category: NoiseCategory,
    pub count: usize,
    pub mean_s: f64,
    /// Population standard deviation.
    pub std_s: f64,
    /// Centre of the most populated 0.01 s bin; ties go to the shorter bin.
    pub mode_s: f64,
}

/// Statistics of segment durations, one entry per category that has any.
pub fn segment_stats(durations: &[(NoiseCategory, f64)]) -> Vec<SegmentStats> {
    let mut out = Vec::new();
    for c in NoiseCategory::ALL {
        let d: Vec<f64> = durations
            .iter()
            .filter(|(k, _)| *k == c)
            .map(|&(_, s)| s)
            .collect();
        if d.is_empty() {
            continue;
        }
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
        for &x in &d {
            *bins.entry(math::round(x / 0.01) as i64).or_default() += 1;
        }
        let mut best = (i64::MIN, 0usize);
        for (&b, &k) in &bins {
            if k > best.1 {
                best = (b, k);
            }
        }
        out.push(SegmentStats {
            category: c,
            count: d.len(),
            mean_s: mean,
            std_s: math::sqrt(var),
            mode_s: best.0 as f64 * 0.01,
        });
    }
    out
}

/// Durations of every placement across recipes.
pub fn recipe_durations<'a>(
    recipes: impl IntoIterator<Item = &'a MixRecipe>,
) -> Vec<(NoiseCategory, f64)> {
    recipes
        .into_iter()
        .flat_map(|r| r.placements.iter().map(|p| (p.category, p.duration_s())))
        .collect()
}
