use num_complex::Complex64;
use pcg_core::spectral::{
    frame_signal, istft, pack, reconstruct, stft, unpack, ComplexSpectrum, Frame, FRAME_LEN,
    FREQ_BINS, PACKED_SIDE, TIME_STEPS,
};
use pcg_core::Waveform;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_frame(rng: &mut impl Rng) -> Frame {
    Frame::new(
        (0..FRAME_LEN)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
        0,
    )
    .unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn shapes_are_fixed() {
    let s = stft(&random_frame(&mut ChaCha8Rng::seed_from_u64(1))).unwrap();
    assert_eq!(s.shape(), (65, 72));
    assert_eq!(pack(&s).unwrap().shape(), [64, 64, 2]);
    assert_eq!(unpack(&pack(&s).unwrap()).unwrap().shape(), (65, 72));
}

// Values from scipy.signal.stft(x, fs=1500, nperseg=64, noverlap=32,
// nfft=128, window="hann", scaling="spectrum").
#[test]
fn matches_scipy_reference() {
    let x: Vec<f64> = (0..FRAME_LEN)
        .map(|n| {
            let n = n as f64;
            (0.3 * n).sin() + 0.5 * (1.7 * n).cos() + 1e-4 * n
        })
        .collect();
    let s = stft(&Frame::new(x, 0).unwrap()).unwrap();
    let cases = [
        (0, 0, 0.11178021472711144, 0.0),
        (0, 36, 0.11524481933226817, 0.0),
        (20, 36, -6.727099114917914e-05, -6.30431014347247e-05),
        (46, 10, 0.0003292404543543952, 0.00017817548037040538),
        (64, 71, -0.0007364918780183426, 0.0),
        (13, 71, -0.002421387761013723, 0.012022609826807903),
        (32, 1, -0.037793223589549604, -0.0579731755618455),
    ];
    for (b, t, re, im) in cases {
        let z = s.get(b, t);
        assert!(
            (z.re - re).abs() < 1e-12 && (z.im - im).abs() < 1e-12,
            "({b},{t}): {z} vs {re}+{im}i"
        );
    }
}

#[test]
fn round_trip_over_random_frames() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let f = random_frame(&mut rng);
        let back = istft(&stft(&f).unwrap(), 0).unwrap();
        assert!(max_abs_diff(&f.samples, &back.samples) < 1e-6);
    }
}

#[test]
fn inverse_is_additive() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (f1, f2) = (random_frame(&mut rng), random_frame(&mut rng));
    let (s1, s2) = (stft(&f1).unwrap(), stft(&f2).unwrap());
    let sum = ComplexSpectrum::from_vec(
        s1.as_slice()
            .iter()
            .zip(s2.as_slice())
            .map(|(a, b)| a + b)
            .collect(),
    )
    .unwrap();
    let back = istft(&sum, 0).unwrap();
    let expected: Vec<f64> = f1
        .samples
        .iter()
        .zip(&f2.samples)
        .map(|(a, b)| a + b)
        .collect();
    assert!(max_abs_diff(&expected, &back.samples) < 1e-6);
}

#[test]
fn pad_len_is_carried_through() {
    let f = Frame::new(vec![0.25; FRAME_LEN], 1250).unwrap();
    assert_eq!(istft(&stft(&f).unwrap(), 1250).unwrap().pad_len, 1250);
}

#[test]
fn pack_preserves_constants_and_zero() {
    let c =
        ComplexSpectrum::from_vec(vec![Complex64::new(0.75, 0.0); FREQ_BINS * TIME_STEPS]).unwrap();
    let p = pack(&c).unwrap();
    for r in 0..PACKED_SIDE {
        for col in 0..PACKED_SIDE {
            assert!((p.get(r, col, 0) - 0.75).abs() < 1e-12);
            assert_eq!(p.get(r, col, 1), 0.0);
        }
    }
    assert!(pack(&ComplexSpectrum::zeros())
        .unwrap()
        .as_slice()
        .iter()
        .all(|&v| v == 0.0));

    let u = unpack(
        &pack(
            &ComplexSpectrum::from_vec(vec![Complex64::new(0.3, -0.2); FREQ_BINS * TIME_STEPS])
                .unwrap(),
        )
        .unwrap(),
    )
    .unwrap();
    assert!(u
        .as_slice()
        .iter()
        .all(|z| (z - Complex64::new(0.3, -0.2)).norm() < 1e-12));
}

// Ramp i+j sampled on the 65×72 grid. Corner-aligned row r maps to source
// row r·64/63 and column c to c·71/63, so the packed value is their sum.
#[test]
fn pack_reproduces_affine_ramp() {
    let bins = (0..FREQ_BINS)
        .flat_map(|i| (0..TIME_STEPS).map(move |j| Complex64::new((i + j) as f64, 0.0)))
        .collect();
    let p = pack(&ComplexSpectrum::from_vec(bins).unwrap()).unwrap();
    for (r, c, v) in [
        (0, 0, 0.0),
        (63, 63, 64.0 + 71.0),
        (10, 20, 10.0 * 64.0 / 63.0 + 20.0 * 71.0 / 63.0),
    ] {
        assert!(
            (p.get(r, c, 0) - v).abs() < 1e-9,
            "({r},{c}) {} vs {v}",
            p.get(r, c, 0)
        );
    }
}

fn smooth_spectrum(rng: &mut impl Rng) -> ComplexSpectrum {
    let mut coef = [[Complex64::new(0.0, 0.0); 4]; 4];
    for row in &mut coef {
        for c in row.iter_mut() {
            *c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    let pi = std::f64::consts::PI;
    let bins = (0..FREQ_BINS)
        .flat_map(|b| {
            (0..TIME_STEPS).map(move |t| {
                let mut z = Complex64::new(0.0, 0.0);
                for (k, row) in coef.iter().enumerate() {
                    for (l, c) in row.iter().enumerate() {
                        let basis = (pi * k as f64 * b as f64 / 64.0).cos()
                            * (pi * l as f64 * t as f64 / 71.0).cos();
                        z += c * basis;
                    }
                }
                z
            })
        })
        .collect();
    ComplexSpectrum::from_vec(bins).unwrap()
}

#[test]
fn resize_round_trip_on_smooth_spectra() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let s = smooth_spectrum(&mut rng);
        let back = unpack(&pack(&s).unwrap()).unwrap();
        let err: f64 = s
            .as_slice()
            .iter()
            .zip(back.as_slice())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(
            err / s.frobenius_norm() <= 5e-2,
            "{}",
            err / s.frobenius_norm()
        );
    }
}

#[test]
fn wrong_shapes_are_rejected() {
    assert!(Frame::new(vec![0.0; 100], 0).is_err());
    assert!(Frame::new(vec![0.0; FRAME_LEN], FRAME_LEN).is_err());
    assert!(ComplexSpectrum::from_vec(vec![Complex64::new(0.0, 0.0); 10]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stft_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (f, g) = (random_frame(&mut rng), random_frame(&mut rng));
        let mix = Frame::new(f.samples.iter().zip(&g.samples).map(|(x, y)| a * x + b * y).collect(), 0).unwrap();
        let (sf, sg, sm) = (stft(&f).unwrap(), stft(&g).unwrap(), stft(&mix).unwrap());
        let scale = sm.frobenius_norm().max(1e-12);
        for ((x, y), z) in sf.as_slice().iter().zip(sg.as_slice()).zip(sm.as_slice()) {
            prop_assert!((a * x + b * y - z).norm() / scale < 1e-9);
        }
    }

    #[test]
    fn round_trip_preserves_energy(seed in any::<u64>()) {
        let f = random_frame(&mut ChaCha8Rng::seed_from_u64(seed));
        let back = istft(&stft(&f).unwrap(), 0).unwrap();
        let e: f64 = f.samples.iter().map(|v| v * v).sum();
        let e2: f64 = back.samples.iter().map(|v| v * v).sum();
        prop_assert!((e - e2).abs() / e < 1e-6);
    }

    #[test]
    fn reconstruct_inverts_framing(samples in prop::collection::vec(-1.0f64..1.0, 1..7000)) {
        let w = Waveform::new(samples, 1500);
        let frames = frame_signal(&w).unwrap();
        prop_assert_eq!(frames.len(), w.len().div_ceil(FRAME_LEN));
        prop_assert_eq!(reconstruct(&frames).unwrap(), w);
    }

    #[test]
    fn lossless_path_is_identity(samples in prop::collection::vec(-1.0f64..1.0, 1..5000)) {
        let w = Waveform::new(samples, 1500);
        let frames: Vec<Frame> = frame_signal(&w)
            .unwrap()
            .iter()
            .map(|f| istft(&stft(f).unwrap(), f.pad_len).unwrap())
            .collect();
        let back = reconstruct(&frames).unwrap();
        prop_assert!(max_abs_diff(&w.samples, &back.samples) < 1e-6);
    }
}
