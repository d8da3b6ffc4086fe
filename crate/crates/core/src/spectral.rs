//! Framing, STFT and the 64×64×2 packed spectrum the networks consume.
//!
//! Frames are 1.5 s at 1500 Hz (2250 samples). Each frame is transformed with
//! a 64-sample periodic Hann window, hop 32, 128-point FFT and "spectrum"
//! scaling (each segment transform divided by the window sum). The frame is
//! zero-extended by 32 samples at both ends and zero-padded at the tail to a
//! whole number of hops, which yields exactly 65 bins × 72 time steps.
//!
//! Packing resizes the real and imaginary planes to 64×64 with corner-aligned
//! bilinear interpolation. Two ways back are provided: [`unpack`] followed by
//! [`istft`] (bilinear up-resize), and [`LeastSquaresInverse`], which solves a
//! Tikhonov-regularized least-squares problem for the frame whose packed
//! spectrum is closest to the given one.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::fft::Fft;
use crate::math;
use crate::signal::{Waveform, MODEL_RATE_HZ};

pub const FRAME_LEN: usize = 2250;
pub const SEGMENT_LEN: usize = 64;
pub const HOP: usize = 32;
pub const FFT_LEN: usize = 128;
pub const FREQ_BINS: usize = FFT_LEN / 2 + 1;
pub const TIME_STEPS: usize = 72;
pub const PACKED_SIDE: usize = 64;
pub const PACKED_LEN: usize = PACKED_SIDE * PACKED_SIDE * 2;

const BOUNDARY: usize = SEGMENT_LEN / 2;
const EXTENDED_LEN: usize = (TIME_STEPS - 1) * HOP + SEGMENT_LEN;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpectralError {
    #[error("expected a {expected} Hz waveform, got {actual} Hz")]
    WrongRate { expected: u32, actual: u32 },
    #[error("waveform is empty")]
    Empty,
    #[error("frame must hold {FRAME_LEN} samples, got {0}")]
    FrameLength(usize),
    #[error("expected {expected} values, got {actual}")]
    Shape { expected: usize, actual: usize },
    #[error("pad length {pad_len} out of range for a {FRAME_LEN}-sample frame")]
    PadLength { pad_len: usize },
    #[error("frame {index} is padded but is not the final frame")]
    PaddedInterior { index: usize },
}

/// One 1.5 s analysis frame. `pad_len` trailing samples are zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub samples: Vec<f64>,
    pub pad_len: usize,
}

impl Frame {
    pub fn new(samples: Vec<f64>, pad_len: usize) -> Result<Self, SpectralError> {
        if samples.len() != FRAME_LEN {
            return Err(SpectralError::FrameLength(samples.len()));
        }
        if pad_len >= FRAME_LEN {
            return Err(SpectralError::PadLength { pad_len });
        }
        Ok(Self { samples, pad_len })
    }

    pub fn valid_len(&self) -> usize {
        FRAME_LEN - self.pad_len
    }
}

/// 65 × 72 complex STFT matrix, row-major (frequency bin, time step).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    bins: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub const ROWS: usize = FREQ_BINS;
    pub const COLS: usize = TIME_STEPS;

    pub fn zeros() -> Self {
        Self {
            bins: vec![Complex64::new(0.0, 0.0); FREQ_BINS * TIME_STEPS],
        }
    }

    pub fn from_vec(bins: Vec<Complex64>) -> Result<Self, SpectralError> {
        if bins.len() != FREQ_BINS * TIME_STEPS {
            return Err(SpectralError::Shape {
                expected: FREQ_BINS * TIME_STEPS,
                actual: bins.len(),
            });
        }
        Ok(Self { bins })
    }

    pub fn shape(&self) -> (usize, usize) {
        (FREQ_BINS, TIME_STEPS)
    }

    pub fn get(&self, bin: usize, step: usize) -> Complex64 {
        self.bins[bin * TIME_STEPS + step]
    }

    pub fn set(&mut self, bin: usize, step: usize, value: Complex64) {
        self.bins[bin * TIME_STEPS + step] = value;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::sqrt(self.bins.iter().map(|z| z.norm_sqr()).sum())
    }
}

impl core::ops::Add for &ComplexSpectrum {
    type Output = ComplexSpectrum;

    fn add(self, rhs: &ComplexSpectrum) -> ComplexSpectrum {
        ComplexSpectrum {
            bins: self
                .bins
                .iter()
                .zip(&rhs.bins)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

/// 64 × 64 × 2 real tensor: (frequency, time, {real, imaginary}).
#[derive(Debug, Clone, PartialEq)]
pub struct PackedSpectrum {
    data: Vec<f64>,
}

impl PackedSpectrum {
    pub const SHAPE: [usize; 3] = [PACKED_SIDE, PACKED_SIDE, 2];

    pub fn zeros() -> Self {
        Self {
            data: vec![0.0; PACKED_LEN],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self, SpectralError> {
        if data.len() != PACKED_LEN {
            return Err(SpectralError::Shape {
                expected: PACKED_LEN,
                actual: data.len(),
            });
        }
        Ok(Self { data })
    }

    pub fn shape(&self) -> [usize; 3] {
        Self::SHAPE
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * PACKED_SIDE + col) * 2 + channel]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// Split a 1500 Hz waveform into non-overlapping 2250-sample frames, zero
/// padding the last one.
pub fn frame_signal(w: &Waveform) -> Result<Vec<Frame>, SpectralError> {
    if w.sample_rate_hz != MODEL_RATE_HZ {
        return Err(SpectralError::WrongRate {
            expected: MODEL_RATE_HZ,
            actual: w.sample_rate_hz,
        });
    }
    if w.samples.is_empty() {
        return Err(SpectralError::Empty);
    }
    Ok(w.samples
        .chunks(FRAME_LEN)
        .map(|chunk| {
            let pad_len = FRAME_LEN - chunk.len();
            let mut samples = chunk.to_vec();
            samples.resize(FRAME_LEN, 0.0);
            Frame { samples, pad_len }
        })
        .collect())
}

/// Concatenate frames, dropping the final frame's padding.
pub fn reconstruct(frames: &[Frame]) -> Result<Waveform, SpectralError> {
    let mut samples = Vec::with_capacity(frames.len() * FRAME_LEN);
    for (i, f) in frames.iter().enumerate() {
        if f.samples.len() != FRAME_LEN {
            return Err(SpectralError::FrameLength(f.samples.len()));
        }
        if f.pad_len > 0 && i + 1 != frames.len() {
            return Err(SpectralError::PaddedInterior { index: i });
        }
        samples.extend_from_slice(&f.samples[..f.valid_len()]);
    }
    Ok(Waveform::new(samples, MODEL_RATE_HZ))
}

/// Reusable STFT/ISTFT state: FFT plan and window.
#[derive(Debug, Clone)]
pub struct Stft {
    fft: Fft,
    window: [f64; SEGMENT_LEN],
    scale: f64,
}

impl Default for Stft {
    fn default() -> Self {
        Self::new()
    }
}

impl Stft {
    pub fn new() -> Self {
        let mut window = [0.0; SEGMENT_LEN];
        for (n, w) in window.iter_mut().enumerate() {
            *w = 0.5 - 0.5 * math::cos(2.0 * PI * n as f64 / SEGMENT_LEN as f64);
        }
        let scale = 1.0 / window.iter().sum::<f64>();
        Self {
            fft: Fft::new(FFT_LEN),
            window,
            scale,
        }
    }

    pub fn window(&self) -> &[f64; SEGMENT_LEN] {
        &self.window
    }

    pub fn forward(&self, samples: &[f64]) -> Result<ComplexSpectrum, SpectralError> {
        if samples.len() != FRAME_LEN {
            return Err(SpectralError::FrameLength(samples.len()));
        }
        let mut out = ComplexSpectrum::zeros();
        let mut buf = [Complex64::new(0.0, 0.0); FFT_LEN];
        for step in 0..TIME_STEPS {
            buf.fill(Complex64::new(0.0, 0.0));
            let start = step * HOP;
            for (n, slot) in buf.iter_mut().take(SEGMENT_LEN).enumerate() {
                let ext = start + n;
                if ext >= BOUNDARY && ext - BOUNDARY < FRAME_LEN {
                    *slot = Complex64::new(samples[ext - BOUNDARY] * self.window[n], 0.0);
                }
            }
            self.fft.forward(&mut buf);
            for bin in 0..FREQ_BINS {
                out.set(bin, step, buf[bin] * self.scale);
            }
        }
        Ok(out)
    }

    /// Overlap-add inverse normalized by the summed squared window.
    pub fn inverse(&self, spectrum: &ComplexSpectrum) -> Vec<f64> {
        let mut acc = vec![0.0; EXTENDED_LEN];
        let mut norm = vec![0.0; EXTENDED_LEN];
        let mut buf = [Complex64::new(0.0, 0.0); FFT_LEN];
        for step in 0..TIME_STEPS {
            for bin in 0..FREQ_BINS {
                buf[bin] = spectrum.get(bin, step) / self.scale;
            }
            // Real signal: negative frequencies by conjugate symmetry. The
            // imaginary parts of DC and Nyquist carry no real-signal content.
            buf[0] = Complex64::new(buf[0].re, 0.0);
            buf[FFT_LEN / 2] = Complex64::new(buf[FFT_LEN / 2].re, 0.0);
            for bin in 1..FFT_LEN / 2 {
                buf[FFT_LEN - bin] = buf[bin].conj();
            }
            self.fft.inverse(&mut buf);
            let start = step * HOP;
            for n in 0..SEGMENT_LEN {
                let seg = buf[n].re / FFT_LEN as f64;
                acc[start + n] += seg * self.window[n];
                norm[start + n] += self.window[n] * self.window[n];
            }
        }
        (0..FRAME_LEN)
            .map(|t| {
                let i = t + BOUNDARY;
                if norm[i] > 1e-10 {
                    acc[i] / norm[i]
                } else {
                    acc[i]
                }
            })
            .collect()
    }

    /// Adjoint of [`Stft::forward`] viewed as a real-linear map from the
    /// frame to the interleaved (re, im) pairs of every bin.
    fn adjoint(&self, spectrum: &ComplexSpectrum, out: &mut [f64]) {
        out.fill(0.0);
        let mut buf = [Complex64::new(0.0, 0.0); FFT_LEN];
        for step in 0..TIME_STEPS {
            buf.fill(Complex64::new(0.0, 0.0));
            for bin in 0..FREQ_BINS {
                buf[bin] = spectrum.get(bin, step);
            }
            self.fft.inverse(&mut buf);
            let start = step * HOP;
            for n in 0..SEGMENT_LEN {
                let ext = start + n;
                if ext >= BOUNDARY && ext - BOUNDARY < FRAME_LEN {
                    out[ext - BOUNDARY] += self.scale * self.window[n] * buf[n].re;
                }
            }
        }
    }
}

pub fn stft(frame: &Frame) -> Result<ComplexSpectrum, SpectralError> {
    Stft::new().forward(&frame.samples)
}

pub fn istft(spectrum: &ComplexSpectrum, pad_len: usize) -> Result<Frame, SpectralError> {
    if spectrum.bins.len() != FREQ_BINS * TIME_STEPS {
        return Err(SpectralError::Shape {
            expected: FREQ_BINS * TIME_STEPS,
            actual: spectrum.bins.len(),
        });
    }
    Frame::new(Stft::new().inverse(spectrum), pad_len)
}

/// Corner-aligned linear interpolation weights along one axis.
#[derive(Debug, Clone)]
struct ResizeAxis {
    taps: Vec<(usize, usize, f64)>,
}

impl ResizeAxis {
    fn new(from: usize, to: usize) -> Self {
        let taps = (0..to)
            .map(|i| {
                let pos = if to > 1 {
                    i as f64 * (from - 1) as f64 / (to - 1) as f64
                } else {
                    0.0
                };
                let lo = (math::floor(pos) as usize).min(from - 1);
                let hi = (lo + 1).min(from - 1);
                (lo, hi, pos - lo as f64)
            })
            .collect();
        Self { taps }
    }
}

/// Separable bilinear resize of a row-major `rows × cols` plane.
#[derive(Debug, Clone)]
pub struct BilinearResize {
    src: (usize, usize),
    dst: (usize, usize),
    rows: ResizeAxis,
    cols: ResizeAxis,
}

impl BilinearResize {
    pub fn new(src: (usize, usize), dst: (usize, usize)) -> Self {
        Self {
            src,
            dst,
            rows: ResizeAxis::new(src.0, dst.0),
            cols: ResizeAxis::new(src.1, dst.1),
        }
    }

    pub fn apply(&self, plane: &[f64]) -> Vec<f64> {
        assert_eq!(plane.len(), self.src.0 * self.src.1);
        let (sr, sc) = self.src;
        let (dr, dc) = self.dst;
        // Columns first, then rows.
        let mut tmp = vec![0.0; sr * dc];
        for r in 0..sr {
            for (c, &(lo, hi, t)) in self.cols.taps.iter().enumerate() {
                tmp[r * dc + c] = plane[r * sc + lo] * (1.0 - t) + plane[r * sc + hi] * t;
            }
        }
        let mut out = vec![0.0; dr * dc];
        for (r, &(lo, hi, t)) in self.rows.taps.iter().enumerate() {
            for c in 0..dc {
                out[r * dc + c] = tmp[lo * dc + c] * (1.0 - t) + tmp[hi * dc + c] * t;
            }
        }
        out
    }

    fn apply_adjoint(&self, plane: &[f64]) -> Vec<f64> {
        let (sr, sc) = self.src;
        let (_, dc) = self.dst;
        let mut tmp = vec![0.0; sr * dc];
        for (r, &(lo, hi, t)) in self.rows.taps.iter().enumerate() {
            for c in 0..dc {
                let v = plane[r * dc + c];
                tmp[lo * dc + c] += v * (1.0 - t);
                tmp[hi * dc + c] += v * t;
            }
        }
        let mut out = vec![0.0; sr * sc];
        for r in 0..sr {
            for (c, &(lo, hi, t)) in self.cols.taps.iter().enumerate() {
                let v = tmp[r * dc + c];
                out[r * sc + lo] += v * (1.0 - t);
                out[r * sc + hi] += v * t;
            }
        }
        out
    }
}

fn split_planes(s: &ComplexSpectrum) -> (Vec<f64>, Vec<f64>) {
    (
        s.bins.iter().map(|z| z.re).collect(),
        s.bins.iter().map(|z| z.im).collect(),
    )
}

fn interleave(re: &[f64], im: &[f64]) -> Vec<f64> {
    re.iter().zip(im).flat_map(|(&a, &b)| [a, b]).collect()
}

/// Resize real and imaginary planes 65×72 → 64×64 and stack them as channels.
pub fn pack(s: &ComplexSpectrum) -> Result<PackedSpectrum, SpectralError> {
    if s.bins.len() != FREQ_BINS * TIME_STEPS {
        return Err(SpectralError::Shape {
            expected: FREQ_BINS * TIME_STEPS,
            actual: s.bins.len(),
        });
    }
    let down = BilinearResize::new((FREQ_BINS, TIME_STEPS), (PACKED_SIDE, PACKED_SIDE));
    let (re, im) = split_planes(s);
    Ok(PackedSpectrum {
        data: interleave(&down.apply(&re), &down.apply(&im)),
    })
}

/// Resize both channels back 64×64 → 65×72 and recombine as `re + i·im`.
pub fn unpack(t: &PackedSpectrum) -> Result<ComplexSpectrum, SpectralError> {
    if t.data.len() != PACKED_LEN {
        return Err(SpectralError::Shape {
            expected: PACKED_LEN,
            actual: t.data.len(),
        });
    }
    let up = BilinearResize::new((PACKED_SIDE, PACKED_SIDE), (FREQ_BINS, TIME_STEPS));
    let re: Vec<f64> = t.data.iter().step_by(2).copied().collect();
    let im: Vec<f64> = t.data.iter().skip(1).step_by(2).copied().collect();
    let (re, im) = (up.apply(&re), up.apply(&im));
    Ok(ComplexSpectrum {
        bins: re
            .iter()
            .zip(&im)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect(),
    })
}

/// Relative regularization: the Tikhonov weight is this squared times the
/// largest eigenvalue of the normal matrix.
pub const LS_RELATIVE_REGULARIZATION: f64 = 1e-3;

/// Regularized least-squares inverse of `pack ∘ stft`.
///
/// The forward map takes 2250 samples to 8192 packed values. It is built once
/// as an explicit normal matrix `AᵀA + λI` and Cholesky-factored; each
/// inversion is then two triangular solves.
#[derive(Debug, Clone)]
pub struct LeastSquaresInverse {
    stft: Stft,
    down: BilinearResize,
    /// Lower-triangular Cholesky factor, row-major `FRAME_LEN²`.
    factor: Vec<f64>,
    lambda: f64,
}

impl LeastSquaresInverse {
    pub fn new() -> Self {
        Self::with_regularization(LS_RELATIVE_REGULARIZATION)
    }

    pub fn with_regularization(relative: f64) -> Self {
        let stft = Stft::new();
        let down = BilinearResize::new((FREQ_BINS, TIME_STEPS), (PACKED_SIDE, PACKED_SIDE));
        let n = FRAME_LEN;
        let mut normal = vec![0.0; n * n];
        let mut impulse = vec![0.0; n];
        let mut column = vec![0.0; n];
        for j in 0..n {
            impulse[j] = 1.0;
            let packed = forward_packed(&stft, &down, &impulse);
            adjoint_packed(&stft, &down, &packed, &mut column);
            impulse[j] = 0.0;
            for i in 0..n {
                normal[i * n + j] = column[i];
            }
        }
        // Symmetrize away rounding asymmetry.
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (normal[i * n + j] + normal[j * n + i]);
                normal[i * n + j] = v;
                normal[j * n + i] = v;
            }
        }
        let lambda = relative * relative * largest_eigenvalue(&normal, n);
        for i in 0..n {
            normal[i * n + i] += lambda;
        }
        cholesky_in_place(&mut normal, n);
        Self {
            stft,
            down,
            factor: normal,
            lambda,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Frame samples minimizing `|pack(stft(x)) - p|² + λ|x|²`.
    pub fn solve(&self, packed: &PackedSpectrum) -> Vec<f64> {
        let n = FRAME_LEN;
        let mut x = vec![0.0; n];
        adjoint_packed(&self.stft, &self.down, &packed.data, &mut x);
        let l = &self.factor;
        for i in 0..n {
            let row = &l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / l[i * n + i];
        }
        for i in (0..n).rev() {
            x[i] /= l[i * n + i];
            let xi = x[i];
            for (xk, lik) in x[..i].iter_mut().zip(&l[i * n..i * n + i]) {
                *xk -= lik * xi;
            }
        }
        x
    }

    pub fn invert(&self, packed: &PackedSpectrum, pad_len: usize) -> Result<Frame, SpectralError> {
        Frame::new(self.solve(packed), pad_len)
    }
}

impl Default for LeastSquaresInverse {
    fn default() -> Self {
        Self::new()
    }
}

fn forward_packed(stft: &Stft, down: &BilinearResize, samples: &[f64]) -> Vec<f64> {
    let s = stft.forward(samples).expect("frame length");
    let (re, im) = split_planes(&s);
    interleave(&down.apply(&re), &down.apply(&im))
}

fn adjoint_packed(stft: &Stft, down: &BilinearResize, packed: &[f64], out: &mut [f64]) {
    let re: Vec<f64> = packed.iter().step_by(2).copied().collect();
    let im: Vec<f64> = packed.iter().skip(1).step_by(2).copied().collect();
    let (re, im) = (down.apply_adjoint(&re), down.apply_adjoint(&im));
    let spectrum = ComplexSpectrum {
        bins: re
            .iter()
            .zip(&im)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect(),
    };
    stft.adjoint(&spectrum, out);
}

fn largest_eigenvalue(m: &[f64], n: usize) -> f64 {
    let mut v = vec![1.0 / math::sqrt(n as f64); n];
    let mut w = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..200 {
        for i in 0..n {
            w[i] = m[i * n..(i + 1) * n]
                .iter()
                .zip(&v)
                .map(|(a, b)| a * b)
                .sum();
        }
        let norm = math::sqrt(w.iter().map(|x| x * x).sum());
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v.iter_mut().zip(&w).for_each(|(a, b)| *a = b / norm);
        if (next - estimate).abs() <= 1e-12 * next {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// Overwrites the lower triangle of a symmetric positive-definite matrix
/// with its Cholesky factor.
fn cholesky_in_place(a: &mut [f64], n: usize) {
    for j in 0..n {
        let d = a[j * n + j] - a[j * n..j * n + j].iter().map(|x| x * x).sum::<f64>();
        assert!(d > 0.0, "normal matrix is not positive definite");
        let diag = math::sqrt(d);
        a[j * n + j] = diag;
        for i in j + 1..n {
            let (upper, lower) = a.split_at_mut(i * n);
            let rj = &upper[j * n..j * n + j];
            let ri = &mut lower[..n];
            let s: f64 = ri[..j].iter().zip(rj).map(|(x, y)| x * y).sum();
            ri[j] = (ri[j] - s) / diag;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_from(f: impl Fn(usize) -> f64) -> Frame {
        Frame::new((0..FRAME_LEN).map(f).collect(), 0).unwrap()
    }

    #[test]
    fn framing_examples() {
        let w = Waveform::new(vec![1.0; 4500], MODEL_RATE_HZ);
        let frames = frame_signal(&w).unwrap();
        assert_eq!(frames.len(), 2);
        assert!(frames.iter().all(|f| f.pad_len == 0));

        let frames = frame_signal(&Waveform::new(vec![1.0; 2251], MODEL_RATE_HZ)).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[1].pad_len, 2249);

        let frames = frame_signal(&Waveform::new(vec![1.0; 1000], MODEL_RATE_HZ)).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].pad_len, 1250);
        assert_eq!(frames[0].samples[1000], 0.0);

        assert_eq!(
            frame_signal(&Waveform::new(vec![1.0; 10], 4000)),
            Err(SpectralError::WrongRate {
                expected: 1500,
                actual: 4000
            })
        );
    }

    #[test]
    fn reconstruct_examples() {
        let single = Frame::new(vec![0.5; FRAME_LEN], 1250).unwrap();
        assert_eq!(reconstruct(core::slice::from_ref(&single)).unwrap().len(), 1000);
        let full = Frame::new(vec![0.5; FRAME_LEN], 0).unwrap();
        assert_eq!(
            reconstruct(&[full.clone(), full.clone()]).unwrap().len(),
            4500
        );
        assert_eq!(
            reconstruct(&[single, full]),
            Err(SpectralError::PaddedInterior { index: 0 })
        );
    }

    #[test]
    fn stft_shape_and_zero() {
        let s = stft(&frame_from(|_| 0.0)).unwrap();
        assert_eq!(s.shape(), (65, 72));
        assert!(s.as_slice().iter().all(|z| z.norm() == 0.0));
        assert_eq!(
            Stft::new().forward(&[0.0; 10]),
            Err(SpectralError::FrameLength(10))
        );
    }

    #[test]
    fn tone_on_bin_twenty_dominates() {
        // 234.375 Hz = 20 * 1500 / 128.
        let f = frame_from(|n| math::sin(2.0 * PI * 234.375 * n as f64 / 1500.0));
        let s = stft(&f).unwrap();
        for step in 2..70 {
            let peak = s.get(20, step).norm();
            // Hann main lobe spans ±2 bins of a 64-point segment, i.e. ±4
            // bins at 128 points; outside it the margin is well over 20 dB.
            for bin in 0..FREQ_BINS {
                if bin.abs_diff(20) > 4 {
                    let db = 20.0 * math::log10(peak / s.get(bin, step).norm().max(1e-300));
                    assert!(db >= 20.0, "bin {bin} step {step}: {db} dB");
                }
            }
            assert!(s.get(20, step).norm() >= s.get(19, step).norm());
            assert!(s.get(20, step).norm() >= s.get(21, step).norm());
        }
    }

    #[test]
    fn spectrum_scaling_gives_half_amplitude_for_unit_tone() {
        // With window-sum scaling a unit sinusoid on a bin centre reads 0.5.
        let f = frame_from(|n| math::cos(2.0 * PI * 234.375 * n as f64 / 1500.0));
        let s = stft(&f).unwrap();
        assert!((s.get(20, 36).norm() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn round_trip_and_zero_inverse() {
        let f = frame_from(|n| math::sin(n as f64 * 0.37) + 0.2 * math::cos(n as f64 * 1.91));
        let back = istft(&stft(&f).unwrap(), 0).unwrap();
        let err = f
            .samples
            .iter()
            .zip(&back.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
        let zero = istft(&ComplexSpectrum::zeros(), 0).unwrap();
        assert!(zero.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bilinear_reproduces_affine_ramp() {
        let ramp: Vec<f64> = (0..FREQ_BINS)
            .flat_map(|i| (0..TIME_STEPS).map(move |j| (i + j) as f64))
            .collect();
        let r = BilinearResize::new((FREQ_BINS, TIME_STEPS), (PACKED_SIDE, PACKED_SIDE));
        let out = r.apply(&ramp);
        // Output (i, j) samples the source at (64i/63, 71j/63).
        for &(i, j) in &[(0usize, 0usize), (10, 40), (63, 63)] {
            let expected = 64.0 * i as f64 / 63.0 + 71.0 * j as f64 / 63.0;
            assert!((out[i * 64 + j] - expected).abs() < 1e-12);
        }
        assert!((out[0] - 0.0).abs() < 1e-12);
        assert!((out[63 * 64 + 63] - 135.0).abs() < 1e-12);
    }

    #[test]
    fn pack_unpack_constants() {
        let s = ComplexSpectrum::from_vec(vec![Complex64::new(0.75, 0.0); 65 * 72]).unwrap();
        let p = pack(&s).unwrap();
        assert_eq!(p.shape(), [64, 64, 2]);
        for r in 0..64 {
            for c in 0..64 {
                assert!((p.get(r, c, 0) - 0.75).abs() < 1e-15);
                assert_eq!(p.get(r, c, 1), 0.0);
            }
        }
        let p = PackedSpectrum::from_vec([0.25, -0.5].repeat(64 * 64)).unwrap();
        let s = unpack(&p).unwrap();
        assert!(s
            .as_slice()
            .iter()
            .all(|z| (z.re - 0.25).abs() < 1e-15 && (z.im + 0.5).abs() < 1e-15));
        assert_eq!(
            unpack(&PackedSpectrum::zeros()).unwrap(),
            ComplexSpectrum::zeros()
        );
        assert_eq!(
            pack(&ComplexSpectrum::zeros()).unwrap(),
            PackedSpectrum::zeros()
        );
        assert!(PackedSpectrum::from_vec(vec![0.0; 10]).is_err());
        assert!(ComplexSpectrum::from_vec(vec![]).is_err());
    }

    #[test]
    fn resize_adjoint_identity() {
        let r = BilinearResize::new((FREQ_BINS, TIME_STEPS), (PACKED_SIDE, PACKED_SIDE));
        let x: Vec<f64> = (0..FREQ_BINS * TIME_STEPS)
            .map(|i| math::sin(i as f64))
            .collect();
        let y: Vec<f64> = (0..PACKED_SIDE * PACKED_SIDE)
            .map(|i| math::cos(i as f64 * 0.3))
            .collect();
        let lhs: f64 = r.apply(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = r.apply_adjoint(&y).iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn stft_adjoint_identity() {
        let stft = Stft::new();
        let x: Vec<f64> = (0..FRAME_LEN).map(|i| math::sin(i as f64 * 0.11)).collect();
        let bins: Vec<Complex64> = (0..FREQ_BINS * TIME_STEPS)
            .map(|i| Complex64::new(math::cos(i as f64 * 0.7), math::sin(i as f64 * 0.29)))
            .collect();
        let y = ComplexSpectrum::from_vec(bins).unwrap();
        let sx = stft.forward(&x).unwrap();
        let lhs: f64 = sx
            .as_slice()
            .iter()
            .zip(y.as_slice())
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum();
        let mut aty = vec![0.0; FRAME_LEN];
        stft.adjoint(&y, &mut aty);
        let rhs: f64 = aty.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!(
            (lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0),
            "{lhs} vs {rhs}"
        );
    }

    #[test]
    fn cholesky_small() {
        let mut a = vec![4.0, 2.0, 2.0, 3.0];
        cholesky_in_place(&mut a, 2);
        assert!((a[0] - 2.0).abs() < 1e-15);
        assert!((a[2] - 1.0).abs() < 1e-15);
        assert!((a[3] - math::sqrt(2.0)).abs() < 1e-15);
    }
}
