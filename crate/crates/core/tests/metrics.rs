use pcg_core::metrics::{
    med_abs_err, rmse_paper, rmse_standard, snr_db, EvalPair, EvalReport, MetricError, Metrics,
};
use pcg_core::Waveform;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn summed_absolute_error_hand_values() {
    assert_eq!(rmse_paper(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
    assert_eq!(rmse_paper(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
    assert_eq!(rmse_paper(&[1.0, -1.0], &[-1.0, 1.0]).unwrap(), 4.0);
}

#[test]
fn root_mean_square_hand_values() {
    assert_eq!(rmse_standard(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
    let v = rmse_standard(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
    assert!((v - 0.5f64.sqrt()).abs() < 1e-15);
}

#[test]
fn median_error_odd_and_even() {
    assert_eq!(med_abs_err(&[5.0, 5.0], &[5.0, 5.0]).unwrap(), 0.0);
    assert_eq!(med_abs_err(&[0.0, 1.0, 2.0], &[0.0; 3]).unwrap(), 1.0);
    assert_eq!(med_abs_err(&[0.0, -1.0, 2.0, 3.0], &[0.0; 4]).unwrap(), 1.5);
    assert_eq!(med_abs_err(&[3.0, 0.0, 2.0, 1.0], &[0.0; 4]).unwrap(), 1.5);
}

#[test]
fn snr_hand_values() {
    assert!(snr_db(&[1.0, -1.0], &[0.0, 0.0]).unwrap().abs() < 1e-12);
    let twenty = snr_db(&[1.0, -1.0], &[0.9, -0.9]).unwrap();
    assert!((twenty - 20.0).abs() < 1e-9, "{twenty}");
    let c = [2.0, 4.0, 9.0];
    let mean = 5.0;
    assert!(snr_db(&c, &[mean; 3]).unwrap().abs() < 1e-12);
}

#[test]
fn snr_sentinel_and_errors() {
    assert_eq!(snr_db(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), f64::INFINITY);
    assert_eq!(
        snr_db(&[3.0, 3.0], &[0.0, 1.0]),
        Err(MetricError::ConstantReference)
    );
    for f in [rmse_paper, rmse_standard, med_abs_err, snr_db] {
        assert_eq!(
            f(&[1.0, 2.0], &[1.0]),
            Err(MetricError::LengthMismatch {
                reference: 2,
                estimate: 1
            })
        );
        assert_eq!(f(&[], &[]), Err(MetricError::Empty));
    }
}

fn two_line_rmse(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = (0..a.len()).map(|i| (a[i] - b[i]).powi(2)).sum();
    (s / a.len() as f64).sqrt()
}

fn brute_median_abs(a: &[f64], b: &[f64]) -> f64 {
    // Selects by counting rather than sorting.
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    let rank = |v: f64| d.iter().filter(|&&w| w < v).count();
    let kth = |k: usize| {
        *d.iter().find(|&&v| rank(v) <= k && k < rank(v) + d.iter().filter(|&&w| w == v).count())
            .unwrap()
    };
    let n = d.len();
    if n % 2 == 1 {
        kth(n / 2)
    } else {
        0.5 * (kth(n / 2 - 1) + kth(n / 2))
    }
}

#[test]
fn random_pairs_match_direct_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let n = rng.random_range(1..60);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        assert!((rmse_standard(&a, &b).unwrap() - two_line_rmse(&a, &b)).abs() < 1e-12);
        assert!((med_abs_err(&a, &b).unwrap() - brute_median_abs(&a, &b)).abs() < 1e-12);
        let sad: f64 = (0..n).map(|i| ((a[i] - b[i]) * (a[i] - b[i])).sqrt()).sum();
        assert!((rmse_paper(&a, &b).unwrap() - sad).abs() < 1e-12);
    }
}

#[test]
fn snr_falls_as_error_grows() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c: Vec<f64> = (0..200).map(|i| (i as f64 * 0.1).sin()).collect();
    let e: Vec<f64> = (0..200).map(|_| rng.random_range(-0.1..0.1)).collect();
    let snr = |s: f64| {
        snr_db(
            &c,
            &c.iter().zip(&e).map(|(x, y)| x + s * y).collect::<Vec<_>>(),
        )
        .unwrap()
    };
    let (a, b, d) = (snr(1.0), snr(2.0), snr(4.0));
    assert!(a > b && b > d);
    assert!((a - b - 20.0 * 2f64.log10()).abs() < 1e-9);
}

#[test]
fn pair_trims_small_mismatch_only() {
    let r = Waveform::new(vec![1.0, 2.0, 3.0, 4.0], 1500);
    let e = Waveform::new(vec![1.0, 2.0], 1500);
    let p = EvalPair::new("a", &r, &e).unwrap();
    assert_eq!((p.reference.len(), p.estimate.len(), p.trimmed), (2, 2, 2));
    assert_eq!(p.reference, vec![1.0, 2.0]);
    let none = EvalPair::new("b", &r, &r).unwrap();
    assert_eq!(none.trimmed, 0);
    let short = Waveform::new(vec![1.0], 1500);
    assert_eq!(
        EvalPair::new("c", &r, &short),
        Err(MetricError::LengthMismatch {
            reference: 4,
            estimate: 1
        })
    );
    assert!(matches!(
        EvalPair::new("d", &r, &Waveform::new(vec![0.0; 4], 4000)),
        Err(MetricError::RateMismatch { .. })
    ));
}

#[test]
fn no_op_rows_and_means() {
    let c = Waveform::new((0..50).map(|i| (i as f64).cos()).collect(), 1500);
    let m = EvalPair::new("x", &c, &c).unwrap().metrics().unwrap();
    assert_eq!(
        (m.rmse_paper, m.rmse_standard, m.med_abs_err),
        (0.0, 0.0, 0.0)
    );
    assert_eq!(m.snr_db, f64::INFINITY);

    let mut report = EvalReport::new();
    let one = Metrics {
        rmse_paper: 1.0,
        rmse_standard: 2.0,
        med_abs_err: 3.0,
        snr_db: 4.0,
    };
    report.push("unet", "r1", one);
    assert_eq!(report.mean("unet"), Some(one));
    report.push("noisy", "r1", m);
    report.push(
        "unet",
        "r2",
        Metrics {
            rmse_paper: 3.0,
            rmse_standard: 4.0,
            med_abs_err: 5.0,
            snr_db: 8.0,
        },
    );
    assert_eq!(report.methods, vec!["unet", "noisy"]);
    let means = report.means();
    assert_eq!(means[0].0, "unet");
    assert_eq!(
        means[0].1,
        Metrics {
            rmse_paper: 2.0,
            rmse_standard: 3.0,
            med_abs_err: 4.0,
            snr_db: 6.0
        }
    );
    assert_eq!(report.mean("missing"), None);
}

proptest! {
    #[test]
    fn metrics_are_permutation_covariant(
        pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..40),
        seed in any::<u64>(),
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        prop_assume!(a.iter().any(|&v| v != a[0]));
        let mut idx: Vec<usize> = (0..a.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..idx.len()).rev() {
            idx.swap(i, rng.random_range(0..=i));
        }
        let pa: Vec<f64> = idx.iter().map(|&i| a[i]).collect();
        let pb: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
        let m = Metrics::compute(&a, &b).unwrap();
        let p = Metrics::compute(&pa, &pb).unwrap();
        prop_assert!((m.rmse_paper - p.rmse_paper).abs() < 1e-9);
        prop_assert!((m.rmse_standard - p.rmse_standard).abs() < 1e-12);
        prop_assert_eq!(m.med_abs_err, p.med_abs_err);
        prop_assert!((m.snr_db - p.snr_db).abs() < 1e-9 || m.snr_db == p.snr_db);
    }

    #[test]
    fn quadratic_mean_bounds_arithmetic_mean(
        pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..40),
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let k = a.len() as f64;
        prop_assert!(rmse_standard(&a, &b).unwrap() >= rmse_paper(&a, &b).unwrap() / k - 1e-12);
    }
}
