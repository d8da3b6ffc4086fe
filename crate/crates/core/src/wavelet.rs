//! Multilevel discrete wavelet transform and the universal-threshold
//! shrinkage denoiser used as the classical comparison arm.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::signal::{resample, SignalError, Waveform, MODEL_RATE_HZ};

const DB4: [f64; 8] = [
    -0.010597401785069032,
    0.0328830116668852,
    0.030841381835560764,
    -0.18703481171909309,
    -0.027983769416859854,
    0.6308807679298589,
    0.7148465705529157,
    0.2303778133088965,
];

const DB8: [f64; 16] = [
    -0.00011747678412476953,
    0.0006754494064505693,
    -0.00039174037337694705,
    -0.004870352993451574,
    0.008746094047405777,
    0.013981027917398282,
    -0.044088253930794755,
    -0.017369301001807547,
    0.12874742662047847,
    0.0004724845739132828,
    -0.2840155429615469,
    -0.015829105256349306,
    0.5853546836542067,
    0.6756307362972898,
    0.31287159091429995,
    0.05441584224310401,
];

const SYM8: [f64; 16] = [
    -0.0033824159510061256,
    -0.0005421323317911481,
    0.03169508781149298,
    0.007607487324917605,
    -0.1432942383508097,
    -0.061273359067658524,
    0.4813596512583722,
    0.7771857517005235,
    0.3644418948353314,
    -0.05194583810770904,
    -0.027219029917056003,
    0.049137179673607506,
    0.003808752013890615,
    -0.01495225833704823,
    -0.0003029205147213668,
    0.0018899503327594609,
];

/// Median absolute deviation to Gaussian standard deviation.
pub const MAD_TO_SIGMA: f64 = 0.6745;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Wavelet {
    #[default]
    Db4,
    Db8,
    Sym8,
}

impl Wavelet {
    pub const ALL: [Wavelet; 3] = [Wavelet::Db4, Wavelet::Db8, Wavelet::Sym8];

    /// Analysis low-pass filter.
    pub fn dec_lo(self) -> &'static [f64] {
        match self {
            Wavelet::Db4 => &DB4,
            Wavelet::Db8 => &DB8,
            Wavelet::Sym8 => &SYM8,
        }
    }

    /// Analysis high-pass filter, the quadrature mirror of [`Wavelet::dec_lo`].
    pub fn dec_hi(self) -> Vec<f64> {
        let h = self.dec_lo();
        let f = h.len();
        (0..f)
            .map(|j| {
                if j % 2 == 0 {
                    -h[f - 1 - j]
                } else {
                    h[f - 1 - j]
                }
            })
            .collect()
    }

    pub fn filter_len(self) -> usize {
        self.dec_lo().len()
    }

    pub fn label(self) -> &'static str {
        match self {
            Wavelet::Db4 => "db4",
            Wavelet::Db8 => "db8",
            Wavelet::Sym8 => "sym8",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|w| w.label() == s)
    }
}

/// Boundary handling of the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Extension {
    /// Half-sample mirror; coefficient counts grow by about half a filter per level.
    #[default]
    Symmetric,
    /// Circular wrap; each level halves the length exactly, so the
    /// transform is orthogonal.
    Periodization,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ThresholdRule {
    /// `σ √(2 ln N)` with `σ = median|d| / 0.6745` per level.
    #[default]
    Universal,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ThresholdMode {
    #[default]
    Soft,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WaveletConfig {
    pub wavelet: Wavelet,
    pub levels: usize,
    pub rule: ThresholdRule,
    pub mode: ThresholdMode,
    pub extension: Extension,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        Self {
            wavelet: Wavelet::Db4,
            levels: 5,
            rule: ThresholdRule::Universal,
            mode: ThresholdMode::Soft,
            extension: Extension::Symmetric,
        }
    }
}

impl WaveletConfig {
    /// Deepest usable level for `n` samples: `floor(log2(n / filter_len))`, at least 1.
    pub fn max_levels(&self, n: usize) -> usize {
        let f = self.wavelet.filter_len();
        let mut levels = 0;
        while n >> (levels + 1) >= f {
            levels += 1;
        }
        levels.max(1)
    }

    /// Requested levels clamped to `1..=max_levels(n)`.
    pub fn effective_levels(&self, n: usize) -> usize {
        self.levels.clamp(1, self.max_levels(n))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WaveletError {
    #[error("input of {len} samples is shorter than the {filter}-tap filter")]
    TooShort { len: usize, filter: usize },
    #[error("coefficient pyramid is inconsistent: {0}")]
    BadPyramid(&'static str),
    #[error("invalid threshold {0}")]
    BadThreshold(f64),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Coefficients of a multilevel transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    /// Coarsest approximation.
    pub approx: Vec<f64>,
    /// Detail bands, coarsest first.
    pub details: Vec<Vec<f64>>,
    /// Input length at each level, finest first; the synthesis trims to these.
    lengths: Vec<usize>,
}

impl Pyramid {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    pub fn signal_len(&self) -> usize {
        self.lengths[0]
    }

    /// Every coefficient, approximation first.
    pub fn coefficients(&self) -> impl Iterator<Item = f64> + '_ {
        self.approx
            .iter()
            .chain(self.details.iter().flatten())
            .copied()
    }
}

fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -1 - i;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

fn analyze(x: &[f64], lo: &[f64], hi: &[f64], ext: Extension) -> (Vec<f64>, Vec<f64>) {
    let f = lo.len();
    match ext {
        Extension::Symmetric => {
            let out = (x.len() + f - 1) / 2;
            let mut a = vec![0.0; out];
            let mut d = vec![0.0; out];
            for k in 0..out {
                for j in 0..f {
                    let v = x[mirror((2 * k + 1) as isize - j as isize, x.len())];
                    a[k] += lo[j] * v;
                    d[k] += hi[j] * v;
                }
            }
            (a, d)
        }
        Extension::Periodization => {
            let padded = periodization_pad(x);
            let n = padded.len();
            let out = n / 2;
            let mut a = vec![0.0; out];
            let mut d = vec![0.0; out];
            for k in 0..out {
                for j in 0..f {
                    let v = padded[(2 * k + 1 + f * n - j) % n];
                    a[k] += lo[j] * v;
                    d[k] += hi[j] * v;
                }
            }
            (a, d)
        }
    }
}

/// Odd lengths repeat the last sample.
fn periodization_pad(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    if v.len() % 2 == 1 {
        v.push(*x.last().expect("non-empty"));
    }
    v
}

fn synthesize(
    a: &[f64],
    d: &[f64],
    lo: &[f64],
    hi: &[f64],
    ext: Extension,
    len: usize,
) -> Vec<f64> {
    let f = lo.len();
    let l = a.len();
    match ext {
        Extension::Symmetric => {
            // Full upsampled convolution with the reversed filters, keeping
            // the samples aligned with the original signal.
            let mut full = vec![0.0; 2 * l + f - 2];
            for k in 0..l {
                for j in 0..f {
                    full[2 * k + j] += a[k] * lo[f - 1 - j] + d[k] * hi[f - 1 - j];
                }
            }
            full[f - 2..f - 2 + len].to_vec()
        }
        Extension::Periodization => {
            let n = 2 * l;
            let mut x = vec![0.0; n];
            for k in 0..l {
                for j in 0..f {
                    x[(2 * k + 1 + f * n - j) % n] += lo[j] * a[k] + hi[j] * d[k];
                }
            }
            x.truncate(len);
            x
        }
    }
}

/// Multilevel analysis with [`WaveletConfig::effective_levels`] levels.
pub fn dwt(x: &[f64], cfg: &WaveletConfig) -> Result<Pyramid, WaveletError> {
    let filter = cfg.wavelet.filter_len();
    if x.len() < filter {
        return Err(WaveletError::TooShort {
            len: x.len(),
            filter,
        });
    }
    let lo = cfg.wavelet.dec_lo();
    let hi = cfg.wavelet.dec_hi();
    let levels = cfg.effective_levels(x.len());
    let mut approx = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    let mut lengths = Vec::with_capacity(levels);
    for _ in 0..levels {
        lengths.push(approx.len());
        let (a, d) = analyze(&approx, lo, &hi, cfg.extension);
        details.push(d);
        approx = a;
    }
    details.reverse();
    Ok(Pyramid {
        approx,
        details,
        lengths,
    })
}

/// Inverse of [`dwt`]; `cfg` must use the same wavelet and extension.
pub fn idwt(p: &Pyramid, cfg: &WaveletConfig) -> Result<Vec<f64>, WaveletError> {
    if p.details.len() != p.lengths.len() || p.details.is_empty() {
        return Err(WaveletError::BadPyramid("level count"));
    }
    let lo = cfg.wavelet.dec_lo();
    let hi = cfg.wavelet.dec_hi();
    let mut approx = p.approx.clone();
    for (d, &len) in p.details.iter().zip(p.lengths.iter().rev()) {
        if d.len() != approx.len() {
            return Err(WaveletError::BadPyramid("band lengths"));
        }
        approx = synthesize(&approx, d, lo, &hi, cfg.extension, len);
    }
    Ok(approx)
}

/// Shrink one coefficient toward zero.
pub fn threshold(v: f64, t: f64, mode: ThresholdMode) -> f64 {
    match mode {
        ThresholdMode::Soft => v.signum() * (v.abs() - t).max(0.0),
        ThresholdMode::Hard => {
            if v.abs() > t {
                v
            } else {
                0.0
            }
        }
    }
}

/// Universal threshold of one detail band for a signal of `n` samples.
pub fn universal_threshold(detail: &[f64], n: usize) -> f64 {
    let abs: Vec<f64> = detail.iter().map(|d| d.abs()).collect();
    let sigma = math::median(&abs).unwrap_or(0.0) / MAD_TO_SIGMA;
    sigma * math::sqrt(2.0 * math::ln(n as f64))
}

/// Threshold every detail band of `x` and resynthesize; the output has the input's length.
pub fn denoise_samples(x: &[f64], cfg: &WaveletConfig) -> Result<Vec<f64>, WaveletError> {
    if let ThresholdRule::Fixed(t) = cfg.rule {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(WaveletError::BadThreshold(t));
        }
    }
    let mut p = dwt(x, cfg)?;
    for band in &mut p.details {
        let t = match cfg.rule {
            ThresholdRule::Universal => universal_threshold(band, x.len()),
            ThresholdRule::Fixed(t) => t,
        };
        for v in band.iter_mut() {
            *v = threshold(*v, t, cfg.mode);
        }
    }
    idwt(&p, cfg)
}

/// Resample to the model rate and denoise, matching the rate of the network outputs.
pub fn wt_denoise(w: &Waveform, cfg: &WaveletConfig) -> Result<Waveform, WaveletError> {
    let at_model = resample(w, MODEL_RATE_HZ)?;
    let samples = denoise_samples(&at_model.samples, cfg)?;
    Ok(Waveform::new(samples, MODEL_RATE_HZ))
}
