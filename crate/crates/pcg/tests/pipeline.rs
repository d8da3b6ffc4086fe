use std::path::{Path, PathBuf};

use pcg_core::models::{Reconstruction, INFERENCE_RELATIVE_REGULARIZATION};
use pcg_core::spectral::LeastSquaresInverse;
use pcg_core::synth::Partition;
use pcg_core::wavelet::WaveletConfig;
use pcg_denoise::corpus::{load_clean, write_demo_corpus, DemoCorpus};
use pcg_denoise::manifest::{DatasetManifest, MANIFEST_FILE};
use pcg_denoise::pipeline::{
    denoise_manifest, load_dataset, load_model, make_denoiser, manifest_stats, plot_entry,
    replay_entry, run_eval, run_synth, run_train, write_report, Denoiser, ManifestSource, Method,
    ModelKind, PipelineError, SynthOptions, TrainOptions,
};
use pcg_denoise::wav::read_wav;

fn small_corpus(root: &Path, clean: usize) -> (PathBuf, PathBuf) {
    let cfg = DemoCorpus {
        clean_count: clean,
        clean_seconds: (2.0, 3.0),
        noise_per_category: 1,
        noise_seconds: 4.0,
        seed: 1,
    };
    write_demo_corpus(root, &cfg).unwrap()
}

fn synth_opts(clean: PathBuf, noise: PathBuf, variants: usize, seed: u64) -> SynthOptions {
    SynthOptions {
        clean,
        noise,
        variants,
        seed,
        ..SynthOptions::default()
    }
}

#[test]
fn synth_writes_manifest_and_files() {
    let dir = tempfile::tempdir().unwrap();
    let (clean, noise) = small_corpus(dir.path(), 5);
    let out = dir.path().join("data");
    let m = run_synth(&synth_opts(clean, noise, 3, 4), &out).unwrap();
    assert_eq!(m.entries.len(), 15);
    assert_eq!(m.variants_per_clean, 3);
    assert_eq!(m.noise_sources.values().map(Vec::len).sum::<usize>(), 5);
    let loaded = DatasetManifest::load(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(loaded, m);
    let counts: Vec<usize> = [Partition::Train, Partition::Val, Partition::Test]
        .iter()
        .map(|&p| m.partition(p).count())
        .collect();
    assert_eq!(counts, vec![9, 3, 3]);
    for e in &m.entries {
        assert!(e.id.starts_with(&e.subject));
        assert_eq!(e.recipe.clean_id, e.subject);
        let noisy = read_wav(out.join(&e.noisy)).unwrap();
        let clean = load_clean(&e.clean).unwrap();
        assert_eq!(noisy.sample_rate_hz, 4000);
        assert_eq!(noisy.len(), clean.len());
    }
}

#[test]
fn replayed_entry_matches_written_file() {
    let dir = tempfile::tempdir().unwrap();
    let (clean, noise) = small_corpus(dir.path(), 3);
    let out = dir.path().join("data");
    let m = run_synth(&synth_opts(clean, noise, 2, 8), &out).unwrap();
    for e in &m.entries {
        let replay = replay_entry(&m, e).unwrap();
        let file = read_wav(out.join(&e.noisy)).unwrap();
        let err = replay
            .samples
            .iter()
            .zip(&file.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 2.0 / 65535.0, "{}: {err}", e.id);
    }
}

#[test]
fn synth_is_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let (clean, noise) = small_corpus(dir.path(), 4);
    let a = run_synth(
        &synth_opts(clean.clone(), noise.clone(), 2, 7),
        &dir.path().join("a"),
    )
    .unwrap();
    let b = run_synth(
        &synth_opts(clean.clone(), noise.clone(), 2, 7),
        &dir.path().join("b"),
    )
    .unwrap();
    let c = run_synth(&synth_opts(clean, noise, 2, 8), &dir.path().join("c")).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_ne!(a.to_json(), c.to_json());
    for e in &a.entries {
        let fa = std::fs::read(dir.path().join("a").join(&e.noisy)).unwrap();
        let fb = std::fs::read(dir.path().join("b").join(&e.noisy)).unwrap();
        assert_eq!(fa, fb);
    }
}

#[test]
fn synth_errors_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let (clean, _) = small_corpus(dir.path(), 3);
    let missing = dir.path().join("nowhere");
    let err = run_synth(
        &synth_opts(clean, missing.clone(), 1, 0),
        &dir.path().join("o"),
    )
    .unwrap_err();
    assert!(
        err.to_string().contains(&missing.display().to_string()),
        "{err}"
    );
}

#[test]
fn unknown_noise_directories_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let (clean, noise) = small_corpus(dir.path(), 3);
    std::fs::create_dir(noise.join("birdsong")).unwrap();
    std::fs::copy(
        noise.join("cough").join("cough_00.wav"),
        noise.join("birdsong").join("x.wav"),
    )
    .unwrap();
    let m = run_synth(&synth_opts(clean, noise, 1, 0), &dir.path().join("o")).unwrap();
    assert_eq!(m.noise_sources.len(), 5);
    assert!(m
        .noise_sources
        .values()
        .flatten()
        .all(|p| !p.to_string_lossy().contains("birdsong")));
}

#[test]
fn missing_category_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let (clean, noise) = small_corpus(dir.path(), 3);
    std::fs::remove_dir_all(noise.join("hiss")).unwrap();
    assert!(run_synth(&synth_opts(clean, noise, 1, 0), &dir.path().join("o")).is_err());
}

#[test]
fn missing_noisy_file_names_the_entry() {
    let dir = tempfile::tempdir().unwrap();
    let (clean, noise) = small_corpus(dir.path(), 3);
    let out = dir.path().join("data");
    let m = run_synth(&synth_opts(clean, noise, 1, 0), &out).unwrap();
    let victim = m.partition(Partition::Train).next().unwrap();
    std::fs::remove_file(out.join(&victim.noisy)).unwrap();
    let src = ManifestSource::load(&out.join(MANIFEST_FILE)).unwrap();
    let err = load_dataset(&src, Partition::Train).err().unwrap();
    assert!(matches!(err, PipelineError::Entry { .. }));
    assert!(err.to_string().contains(&victim.id), "{err}");
}

#[test]
fn dataset_frames_are_paired() {
    let dir = tempfile::tempdir().unwrap();
    let (clean, noise) = small_corpus(dir.path(), 3);
    let out = dir.path().join("data");
    run_synth(&synth_opts(clean, noise, 2, 0), &out).unwrap();
    let src = ManifestSource::load(&out.join(MANIFEST_FILE)).unwrap();
    let d = load_dataset(&src, Partition::Train).unwrap();
    assert_eq!(d.recordings, 2);
    // 2 to 3 s at 1500 Hz is at most two frames per recording.
    assert!((2..=4).contains(&d.frames()));
    assert_eq!(d.inputs.shape(), &[d.frames(), 64, 64, 2]);
    assert_eq!(d.inputs.shape(), d.targets.shape());
    assert_ne!(d.inputs.data(), d.targets.data());
}

fn trained(root: &Path, model: ModelKind) -> (PathBuf, PathBuf) {
    let (clean, noise) = small_corpus(root, 5);
    let data = root.join("data");
    run_synth(&synth_opts(clean, noise, 1, 2), &data).unwrap();
    let opts = TrainOptions {
        manifest: data.join(MANIFEST_FILE),
        model,
        max_epochs: 2,
        seed: 5,
        ..TrainOptions::default()
    };
    let models = root.join("models");
    let mut seen = 0;
    let outcome = run_train(&opts, &models, |_| seen += 1).unwrap();
    assert_eq!(seen, 2);
    assert_eq!(outcome.card.history.epochs.len(), 2);
    (data.join(MANIFEST_FILE), outcome.checkpoint)
}

#[test]
fn train_save_load_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, ckpt) = trained(dir.path(), ModelKind::Unet);
    assert_eq!(ckpt.file_name().unwrap(), "unet.pcgu");
    let history = std::fs::read_to_string(ckpt.with_file_name("unet_history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);
    assert!(history.starts_with("epoch,train_mse,val_mse,improved"));

    let (net, card, opt) = load_model(&ckpt).unwrap();
    assert!(opt.is_some());
    assert_eq!(card.model, ModelKind::Unet);
    assert_eq!(card.parameters, net.num_params());
    assert_eq!(card.train.batch_size, 128);

    let recon = Reconstruction::LeastSquares(LeastSquaresInverse::with_regularization(
        INFERENCE_RELATIVE_REGULARIZATION,
    ));
    assert!(make_denoiser(Method::Dae, Some(&ckpt), &recon, WaveletConfig::default()).is_err());
    assert!(make_denoiser(Method::Unet, None, &recon, WaveletConfig::default()).is_err());
    let denoisers = vec![
        make_denoiser(Method::Unet, Some(&ckpt), &recon, WaveletConfig::default()).unwrap(),
        Denoiser::Wavelet(WaveletConfig::default()),
    ];
    let src = ManifestSource::load(&manifest).unwrap();
    let report = run_eval(&src, &denoisers).unwrap();
    assert_eq!(report.methods, vec!["unet", "wt", "noop"]);
    let tests = src.entries(Partition::Test).len();
    assert_eq!(report.rows.len(), 3 * tests);
    let out = dir.path().join("eval");
    let csv = std::fs::read_to_string(write_report(&report, &out).unwrap()).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * tests + 3);
    assert!(csv.lines().last().unwrap().starts_with("noop,MEAN,"));
    assert!(out.join("report.txt").exists());

    let files = denoise_manifest(
        &src,
        Some(Partition::Test),
        &denoisers[0],
        &dir.path().join("den"),
    )
    .unwrap();
    assert_eq!(files.len(), tests);
    for (path, e) in files.iter().zip(src.entries(Partition::Test)) {
        let w = read_wav(path).unwrap();
        let expected =
            (load_clean(&e.clean).unwrap().len() as f64 * 1500.0 / 4000.0).round() as usize;
        assert_eq!(w.sample_rate_hz, 1500);
        assert!(w.len().abs_diff(expected) <= 1);
    }

    let id = &src.entries(Partition::Test)[0].id;
    let plots = plot_entry(&src, id, &denoisers, 0, &dir.path().join("plot")).unwrap();
    assert_eq!(plots.len(), 3);
    let heat = std::fs::read_to_string(&plots[2]).unwrap();
    assert_eq!(heat.lines().count(), 65);
    assert!(heat.lines().all(|l| l.split(',').count() == 72));
    let traces = std::fs::read_to_string(&plots[0]).unwrap();
    assert_eq!(traces.lines().next().unwrap(), "t_s,clean,noisy,unet,wt");
    assert!(plot_entry(&src, "nope", &denoisers, 0, &dir.path().join("plot")).is_err());
    assert!(plot_entry(&src, id, &denoisers, 99, &dir.path().join("plot")).is_err());
}

#[test]
fn dae_checkpoint_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (_, ckpt) = trained(dir.path(), ModelKind::Dae);
    let (net, card, _) = load_model(&ckpt).unwrap();
    assert_eq!(card.model, ModelKind::Dae);
    assert!(net.num_params() < pcg_core::models::UNET_PARAMS);
    let bytes = std::fs::read(&ckpt).unwrap();
    let copy = dir.path().join("copy.pcgu");
    pcg_denoise::pipeline::save_model(&copy, &net, None, &card).unwrap();
    let (again, _, opt) = load_model(&copy).unwrap();
    assert!(opt.is_none());
    for (a, b) in net.params().iter().zip(again.params().iter()) {
        assert_eq!(a.data(), b.data());
    }
    assert!(!bytes.is_empty());
}

#[test]
fn eval_without_test_entries_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (clean, noise) = small_corpus(dir.path(), 3);
    let out = dir.path().join("data");
    let mut m = run_synth(&synth_opts(clean, noise, 1, 0), &out).unwrap();
    m.entries.retain(|e| e.partition != Partition::Test);
    let path = out.join("no_test.json");
    m.save(&path).unwrap();
    let src = ManifestSource::load(&path).unwrap();
    let err = run_eval(&src, &[Denoiser::Noop]).err().unwrap();
    assert!(err.to_string().contains("test partition is empty"), "{err}");
}

#[test]
fn manifest_stats_cover_placements() {
    let dir = tempfile::tempdir().unwrap();
    let (clean, noise) = small_corpus(dir.path(), 4);
    let m = run_synth(&synth_opts(clean, noise, 4, 3), &dir.path().join("d")).unwrap();
    let stats = manifest_stats(&m);
    let placed: usize = m.entries.iter().map(|e| e.recipe.placements.len()).sum();
    assert_eq!(stats.iter().map(|s| s.count).sum::<usize>(), placed);
}

#[test]
fn mixed_partition_manifest_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (clean, noise) = small_corpus(dir.path(), 3);
    let out = dir.path().join("data");
    let mut m = run_synth(&synth_opts(clean, noise, 2, 0), &out).unwrap();
    let p = m.entries[0].partition;
    m.entries[1].partition = if p == Partition::Train {
        Partition::Test
    } else {
        Partition::Train
    };
    let path = out.join("bad.json");
    m.save(&path).unwrap();
    assert!(DatasetManifest::load(&path).is_err());
}
