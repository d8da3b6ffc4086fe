//! Time-domain waveforms, peak normalization and rational-ratio resampling.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::math;

/// Sample rate of the raw noise corpus.
pub const NOISE_CORPUS_RATE_HZ: u32 = 44_100;
/// Sample rate of clean recordings and of every synthesized noisy recording.
pub const CORPUS_RATE_HZ: u32 = 4_000;
/// Sample rate the spectral model operates at.
pub const MODEL_RATE_HZ: u32 = 1_500;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SignalError {
    #[error("target sample rate must be positive")]
    ZeroRate,
    #[error("waveform is empty")]
    Empty,
    #[error("expected sample rate {expected} Hz, got {actual} Hz")]
    WrongRate { expected: u32, actual: u32 },
}

/// Mono sample vector tagged with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        Self {
            samples,
            sample_rate_hz,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn peak(&self) -> f64 {
        peak(&self.samples)
    }

    /// Fails unless the waveform is non-empty and sampled at `hz`.
    pub fn require(&self, hz: u32) -> Result<(), SignalError> {
        if self.samples.is_empty() {
            return Err(SignalError::Empty);
        }
        if self.sample_rate_hz != hz {
            return Err(SignalError::WrongRate {
                expected: hz,
                actual: self.sample_rate_hz,
            });
        }
        Ok(())
    }

    pub fn normalized(&self) -> Self {
        Self::new(normalize(&self.samples), self.sample_rate_hz)
    }
}

pub fn peak(samples: &[f64]) -> f64 {
    samples.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
}

/// Peak scaling to `[-1, 1]`. An all-zero input comes back as zeros.
pub fn normalize(samples: &[f64]) -> Vec<f64> {
    let p = peak(samples);
    if p > 0.0 {
        samples.iter().map(|&x| x / p).collect()
    } else {
        vec![0.0; samples.len()]
    }
}

pub fn normalize_in_place(samples: &mut [f64]) {
    let p = peak(samples);
    if p > 0.0 {
        samples.iter_mut().for_each(|x| *x /= p);
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Stopband attenuation the anti-aliasing filter is designed for.
const STOPBAND_DB: f64 = 65.0;
/// Passband edge as a fraction of the lower of the two Nyquist frequencies.
const PASSBAND_EDGE: f64 = 0.95;

/// Kaiser-windowed sinc polyphase resampler for a fixed `up / down` ratio.
///
/// The prototype low-pass runs at `up * source_rate`. Its stopband begins at
/// the lower Nyquist frequency and its passband extends to 95% of it.
#[derive(Debug, Clone)]
pub struct Resampler {
    up: usize,
    down: usize,
    taps: Vec<f64>,
}

impl Resampler {
    pub fn new(source_hz: u32, target_hz: u32) -> Result<Self, SignalError> {
        if source_hz == 0 || target_hz == 0 {
            return Err(SignalError::ZeroRate);
        }
        let g = gcd(source_hz as u64, target_hz as u64);
        let up = (target_hz as u64 / g) as usize;
        let down = (source_hz as u64 / g) as usize;
        if up == 1 && down == 1 {
            return Ok(Self {
                up,
                down,
                taps: vec![1.0],
            });
        }
        let m = up.max(down) as f64;
        // Frequencies below are normalized to the upsampled Nyquist (1.0).
        let stop = 1.0 / m;
        let pass = PASSBAND_EDGE / m;
        let cutoff = 0.5 * (pass + stop);
        let width_rad = PI * (stop - pass);
        let beta = 0.1102 * (STOPBAND_DB - 8.7);
        let mut n = math::ceil((STOPBAND_DB - 7.95) / (2.285 * width_rad)) as usize + 1;
        if n.is_multiple_of(2) {
            n += 1;
        }
        let centre = (n - 1) as f64 / 2.0;
        let i0_beta = math::bessel_i0(beta);
        let taps = (0..n)
            .map(|i| {
                let t = i as f64 - centre;
                let r = t / centre;
                let window = math::bessel_i0(beta * math::sqrt((1.0 - r * r).max(0.0))) / i0_beta;
                let arg = cutoff * t;
                let sinc = if arg == 0.0 {
                    1.0
                } else {
                    math::sin(PI * arg) / (PI * arg)
                };
                up as f64 * cutoff * sinc * window
            })
            .collect();
        Ok(Self { up, down, taps })
    }

    pub fn ratio(&self) -> (usize, usize) {
        (self.up, self.down)
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        let num = input_len as u64 * self.up as u64;
        let q = self.down as u64;
        ((num + q / 2) / q) as usize
    }

    pub fn process(&self, input: &[f64]) -> Vec<f64> {
        if self.up == 1 && self.down == 1 {
            return input.to_vec();
        }
        let n_out = self.output_len(input.len());
        let n_taps = self.taps.len() as i64;
        let centre = (n_taps - 1) / 2;
        let (p, q) = (self.up as i64, self.down as i64);
        let len = input.len() as i64;
        let mut out = Vec::with_capacity(n_out);
        for m in 0..n_out as i64 {
            // Upsampled-grid index of this output sample, shifted so tap
            // `centre` lines up with it.
            let pos = m * q + centre;
            let k_hi = (pos / p).min(len - 1);
            let k_lo = div_ceil(pos - n_taps + 1, p).max(0);
            let mut acc = 0.0;
            let mut k = k_lo;
            while k <= k_hi {
                acc += input[k as usize] * self.taps[(pos - k * p) as usize];
                k += 1;
            }
            out.push(acc);
        }
        out
    }
}

fn div_ceil(a: i64, b: i64) -> i64 {
    let d = a.div_euclid(b);
    if a.rem_euclid(b) == 0 {
        d
    } else {
        d + 1
    }
}

/// Resample to `target_hz`; identity when the rates already agree.
pub fn resample(w: &Waveform, target_hz: u32) -> Result<Waveform, SignalError> {
    if target_hz == 0 {
        return Err(SignalError::ZeroRate);
    }
    if w.samples.is_empty() {
        return Err(SignalError::Empty);
    }
    if w.sample_rate_hz == target_hz {
        return Ok(w.clone());
    }
    let r = Resampler::new(w.sample_rate_hz, target_hz)?;
    Ok(Waveform::new(r.process(&w.samples), target_hz))
}
