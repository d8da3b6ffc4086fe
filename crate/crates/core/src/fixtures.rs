//! Synthetic stand-ins for clean heart-sound recordings and for each noise
//! category. They drive the tests, the demo corpus and the desk-scale
//! experiments when no real corpus is at hand.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::math;
use crate::signal::{normalize, Waveform};
use crate::synth::NoiseCategory;

/// Second-order Butterworth section in direct form I.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn new(cutoff_hz: f64, rate: f64, highpass: bool) -> Self {
        let w0 = 2.0 * PI * (cutoff_hz / rate).min(0.49);
        let alpha = math::sin(w0) / math::sqrt(2.0);
        let c = math::cos(w0);
        let a0 = 1.0 + alpha;
        let b = if highpass {
            [(1.0 + c) / 2.0, -(1.0 + c), (1.0 + c) / 2.0]
        } else {
            [(1.0 - c) / 2.0, 1.0 - c, (1.0 - c) / 2.0]
        };
        Self {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [-2.0 * c / a0, (1.0 - alpha) / a0],
        }
    }

    fn run(&self, x: &[f64]) -> Vec<f64> {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        x.iter()
            .map(|&x0| {
                let y0 = self.b[0] * x0 + self.b[1] * x1 + self.b[2] * x2
                    - self.a[0] * y1
                    - self.a[1] * y2;
                x2 = x1;
                x1 = x0;
                y2 = y1;
                y1 = y0;
                y0
            })
            .collect()
    }
}

/// High-pass at `lo` then low-pass at `hi`.
pub fn bandpass(x: &[f64], lo_hz: f64, hi_hz: f64, rate_hz: u32) -> Vec<f64> {
    let rate = rate_hz as f64;
    Biquad::new(hi_hz, rate, false).run(&Biquad::new(lo_hz, rate, true).run(x))
}

fn gaussian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Heart-sound-like signal: Gaussian-windowed S1 (40–70 Hz) and S2
/// (60–100 Hz, 0.7 amplitude, 0.3 s later) bursts at 60–90 beats per minute
/// with ±5% beat-to-beat jitter. Peak-normalized.
pub fn synthetic_pcg<R: Rng + ?Sized>(duration_s: f64, rate_hz: u32, rng: &mut R) -> Waveform {
    let rate = rate_hz as f64;
    let n = math::round(duration_s * rate) as usize;
    let mut x = vec![0.0; n];
    let period = 60.0 / rng.random_range(60.0..90.0);
    let mut beat = rng.random_range(0.0..period);
    while beat < duration_s {
        let s1 = (0.0, rng.random_range(40.0..70.0), 0.03, 1.0);
        let s2 = (0.3, rng.random_range(60.0..100.0), 0.022, 0.7);
        for (offset, freq, width, amp) in [s1, s2] {
            let centre = beat + offset;
            let lo = ((centre - 5.0 * width) * rate).max(0.0) as usize;
            let hi = (((centre + 5.0 * width) * rate).max(0.0) as usize).min(n);
            for (i, v) in x.iter_mut().enumerate().take(hi).skip(lo) {
                let t = i as f64 / rate - centre;
                *v += amp
                    * math::exp(-0.5 * (t / width) * (t / width))
                    * math::sin(2.0 * PI * freq * t);
            }
        }
        beat += period * rng.random_range(0.95..1.05);
    }
    Waveform::new(normalize(&x), rate_hz)
}

/// Noise of one category at `rate_hz`, peak-normalized.
pub fn synthetic_noise<R: Rng + ?Sized>(
    category: NoiseCategory,
    duration_s: f64,
    rate_hz: u32,
    rng: &mut R,
) -> Waveform {
    let rate = rate_hz as f64;
    let n = math::round(duration_s * rate) as usize;
    let t = |i: usize| i as f64 / rate;
    let x = match category {
        NoiseCategory::Hiss => {
            let wobble = rng.random_range(0.1..0.5);
            let base = bandpass(&gaussian(n, rng), 300.0, 1900.0, rate_hz);
            base.iter()
                .enumerate()
                .map(|(i, v)| v * (0.6 + 0.4 * math::sin(2.0 * PI * wobble * t(i))))
                .collect()
        }
        NoiseCategory::CrumplingCrinkling => {
            let mut clicks = vec![0.0; n];
            let k = Poisson::new(60.0 * duration_s).map_or(0.0, |p| p.sample(rng)) as usize;
            for _ in 0..k {
                let i = rng.random_range(0..n.max(1));
                let g: f64 = StandardNormal.sample(rng);
                clicks[i.min(n - 1)] += g * rng.random_range(0.2..1.0);
            }
            let bed = bandpass(&gaussian(n, rng), 400.0, 1800.0, rate_hz);
            bandpass(&clicks, 200.0, 1800.0, rate_hz)
                .iter()
                .zip(&bed)
                .map(|(c, b)| c + 0.05 * b)
                .collect()
        }
        NoiseCategory::ChildSpeech => {
            let f0 = rng.random_range(250.0..400.0);
            let syllable = rng.random_range(3.0..5.0);
            let phase0 = rng.random_range(0.0..2.0 * PI);
            let mut phase = 0.0;
            (0..n)
                .map(|i| {
                    phase += 2.0 * PI * f0 * (1.0 + 0.05 * math::sin(2.0 * PI * 5.0 * t(i))) / rate;
                    let voice: f64 = (1..=5)
                        .map(|h| math::sin(h as f64 * phase) / h as f64)
                        .sum();
                    let env = math::sin(2.0 * PI * syllable * t(i) + phase0).max(0.0);
                    voice * env * env
                })
                .collect()
        }
        NoiseCategory::Cough | NoiseCategory::Sneeze => {
            let cough = category == NoiseCategory::Cough;
            let mut x = vec![0.0; n];
            let mut start = 0.0;
            while start < duration_s {
                let len = if cough {
                    rng.random_range(0.2..0.5)
                } else {
                    rng.random_range(0.4..0.9)
                };
                let decay = if cough { 0.08 } else { 0.2 };
                let i0 = (start * rate) as usize;
                let m = (len * rate) as usize;
                for j in 0..m.min(n.saturating_sub(i0)) {
                    let tt = j as f64 / rate;
                    let g: f64 = StandardNormal.sample(rng);
                    x[i0 + j] += g * math::exp(-tt / decay) * (1.0 - math::exp(-tt / 0.01));
                }
                start += len + rng.random_range(0.2..1.0);
            }
            if cough {
                bandpass(&x, 150.0, 1900.0, rate_hz)
            } else {
                bandpass(&x, 300.0, 1950.0, rate_hz)
            }
        }
    };
    Waveform::new(normalize(&x), rate_hz)
}
