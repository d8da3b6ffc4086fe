//! The U-Net and skip-free autoencoder, and the waveform-to-waveform
//! denoising pipeline that runs them over packed spectra.

use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nn::{Network, NnError, Tensor};
use crate::signal::{resample, SignalError, Waveform, CORPUS_RATE_HZ, MODEL_RATE_HZ};
use crate::spectral::{
    frame_signal, istft, pack, reconstruct, stft, unpack, Frame, LeastSquaresInverse,
    PackedSpectrum, SpectralError, HOP, PACKED_LEN, PACKED_SIDE,
};

/// Trainable parameter count of the default U-Net.
pub const UNET_PARAMS: usize = 492_546;
/// Trainable parameter count of the default autoencoder.
pub const DAE_PARAMS: usize = 443_586;

/// Packed spectra are multiplied by this before entering a network and
/// divided by it on the way out. It equals the window sum, so the network
/// sees spectra on the scale of an unnormalized transform instead of values
/// around 1e-2.
pub const SPECTRAL_GAIN: f64 = 32.0;

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UNetConfig {
    pub input_side: usize,
    pub channels: usize,
    pub ladder: Vec<usize>,
    pub bottleneck: usize,
    pub convs_per_level: usize,
    pub kernel: usize,
    /// Skip concatenations at every decoder level. Off for the autoencoder.
    pub skips: bool,
}

impl Default for UNetConfig {
    fn default() -> Self {
        Self {
            input_side: PACKED_SIDE,
            channels: 2,
            ladder: alloc::vec![8, 16, 32, 64],
            bottleneck: 128,
            convs_per_level: 2,
            kernel: 3,
            skips: true,
        }
    }
}

impl UNetConfig {
    /// Same ladder without skip connections.
    pub fn dae() -> Self {
        Self {
            skips: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let levels = self.ladder.len();
        let ok = self.channels > 0
            && self.bottleneck > 0
            && self.convs_per_level > 0
            && self.kernel % 2 == 1
            && self.ladder.iter().all(|&f| f > 0)
            && self.input_side.is_multiple_of(1 << levels)
            && self.input_side >> levels > 0;
        if ok {
            Ok(())
        } else {
            Err(NnError::Config(format!("invalid architecture {self:?}")))
        }
    }

    pub fn bottleneck_side(&self) -> usize {
        self.input_side >> self.ladder.len()
    }
}

/// Configuration of the skip-free autoencoder; see [`UNetConfig::dae`].
pub type DaeConfig = UNetConfig;

fn conv_block(
    net: &mut Network<f32>,
    prefix: &str,
    filters: usize,
    cfg: &UNetConfig,
    rng: &mut ChaCha8Rng,
) -> usize {
    let mut last = 0;
    for i in 1..=cfg.convs_per_level {
        net.conv(&format!("{prefix}.conv{i}"), filters, cfg.kernel, rng);
        net.batch_norm(&format!("{prefix}.bn{i}"));
        last = net.relu(&format!("{prefix}.relu{i}"));
    }
    last
}

/// Encoder levels `enc1..`, a `bottleneck` block, mirrored decoder levels
/// and a linear 1×1 `head`. Each decoder level upsamples, optionally
/// concatenates the matching encoder output, then runs its conv block.
pub fn build_unet(cfg: &UNetConfig, seed: u64) -> Result<Network<f32>, NnError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::new(cfg.channels);
    let mut skips = Vec::new();
    for (l, &f) in cfg.ladder.iter().enumerate() {
        let prefix = format!("enc{}", l + 1);
        skips.push(conv_block(&mut net, &prefix, f, cfg, &mut rng));
        net.max_pool(&format!("{prefix}.pool"));
    }
    conv_block(&mut net, "bottleneck", cfg.bottleneck, cfg, &mut rng);
    for (l, &f) in cfg.ladder.iter().enumerate().rev() {
        let prefix = format!("dec{}", l + 1);
        net.upsample(&format!("{prefix}.up"));
        if cfg.skips {
            net.concat(&format!("{prefix}.concat"), skips[l]);
        }
        conv_block(&mut net, &prefix, f, cfg, &mut rng);
    }
    net.conv("head", cfg.channels, 1, &mut rng);
    Ok(net)
}

pub fn build_dae(cfg: &DaeConfig, seed: u64) -> Result<Network<f32>, NnError> {
    build_unet(
        &UNetConfig {
            skips: false,
            ..cfg.clone()
        },
        seed,
    )
}

/// Closed-form trainable parameter count of [`build_unet`] for `cfg`.
pub fn parameter_count(cfg: &UNetConfig) -> usize {
    let k2 = cfg.kernel * cfg.kernel;
    let conv = |cin: usize, cout: usize| k2 * cin * cout + cout;
    let block = |cin: usize, cout: usize| {
        let mut total = conv(cin, cout) + 2 * cout;
        total += (cfg.convs_per_level - 1) * (conv(cout, cout) + 2 * cout);
        total
    };
    let mut total = 0;
    let mut cin = cfg.channels;
    for &f in &cfg.ladder {
        total += block(cin, f);
        cin = f;
    }
    total += block(cin, cfg.bottleneck);
    let mut below = cfg.bottleneck;
    for &f in cfg.ladder.iter().rev() {
        let input = if cfg.skips { below + f } else { below };
        total += block(input, f);
        below = f;
    }
    total + below * cfg.channels + cfg.channels
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("recording too short: {samples} samples at {MODEL_RATE_HZ} Hz, need at least {HOP}")]
    TooShort { samples: usize },
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Relative regularization used when inverting predicted spectra.
pub const INFERENCE_RELATIVE_REGULARIZATION: f64 = 3e-2;

/// How a predicted packed spectrum is turned back into frame samples.
#[derive(Debug, Clone)]
pub enum Reconstruction {
    /// Regularized least-squares inverse of packing and STFT.
    LeastSquares(LeastSquaresInverse),
    /// Bilinear resize back to 65×72 followed by the inverse STFT.
    Bilinear,
}

impl Reconstruction {
    pub fn least_squares() -> Self {
        Self::LeastSquares(LeastSquaresInverse::new())
    }

    /// Least squares at [`INFERENCE_RELATIVE_REGULARIZATION`], for network output.
    pub fn for_inference() -> Self {
        Self::LeastSquares(LeastSquaresInverse::with_regularization(
            INFERENCE_RELATIVE_REGULARIZATION,
        ))
    }

    pub fn invert(&self, packed: &PackedSpectrum, pad_len: usize) -> Result<Frame, SpectralError> {
        match self {
            Self::LeastSquares(ls) => ls.invert(packed, pad_len),
            Self::Bilinear => istft(&unpack(packed)?, pad_len),
        }
    }
}

/// Resample to the model rate and cut into frames.
pub fn model_frames(w: &Waveform) -> Result<Vec<Frame>, ModelError> {
    let at_model = resample(w, MODEL_RATE_HZ)?;
    if at_model.len() < HOP {
        return Err(ModelError::TooShort {
            samples: at_model.len(),
        });
    }
    Ok(frame_signal(&at_model)?)
}

/// Packed spectra of `frames` as one `N × 64 × 64 × 2` tensor, scaled by [`SPECTRAL_GAIN`].
pub fn packed_batch(frames: &[Frame]) -> Result<Tensor<f32>, ModelError> {
    let mut data = Vec::with_capacity(frames.len() * PACKED_LEN);
    for f in frames {
        let p = pack(&stft(f)?)?;
        data.extend(p.as_slice().iter().map(|&v| (v * SPECTRAL_GAIN) as f32));
    }
    Ok(Tensor::from_vec(
        &[frames.len(), PACKED_SIDE, PACKED_SIDE, 2],
        data,
    )?)
}

/// Input/target tensors from a noisy recording and its clean source, paired
/// frame by frame.
pub fn training_pair(
    noisy: &Waveform,
    clean: &Waveform,
) -> Result<(Tensor<f32>, Tensor<f32>), ModelError> {
    let a = model_frames(noisy)?;
    let b = model_frames(clean)?;
    let n = a.len().min(b.len());
    Ok((packed_batch(&a[..n])?, packed_batch(&b[..n])?))
}

/// Frames per forward pass during inference.
const INFER_BATCH: usize = 32;

/// Denoise a 4 kHz recording; the result is at 1500 Hz with the same duration.
pub fn denoise_waveform(
    net: &Network<f32>,
    noisy: &Waveform,
    reconstruction: &Reconstruction,
) -> Result<Waveform, ModelError> {
    noisy.require(CORPUS_RATE_HZ)?;
    let frames = model_frames(noisy)?;
    let mut out = Vec::with_capacity(frames.len());
    for chunk in frames.chunks(INFER_BATCH) {
        let pred = net.forward(&packed_batch(chunk)?)?;
        for (i, f) in chunk.iter().enumerate() {
            let values = pred.data()[i * PACKED_LEN..(i + 1) * PACKED_LEN]
                .iter()
                .map(|&v| v as f64 / SPECTRAL_GAIN)
                .collect();
            let packed = PackedSpectrum::from_vec(values)?;
            out.push(reconstruction.invert(&packed, f.pad_len)?);
        }
    }
    Ok(reconstruct(&out)?)
}

/// Pass-through pipeline with no network: pack, then reconstruct.
pub fn pack_round_trip(
    noisy: &Waveform,
    reconstruction: &Reconstruction,
) -> Result<Waveform, ModelError> {
    let frames = model_frames(noisy)?;
    let mut out = Vec::with_capacity(frames.len());
    for f in &frames {
        out.push(reconstruction.invert(&pack(&stft(f)?)?, f.pad_len)?);
    }
    Ok(reconstruct(&out)?)
}
