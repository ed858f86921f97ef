use std::path::Path;

use rand::Rng;
use synthword::batch::{generate_batch, parse_manifest, stats, Execution, BatchError};
use synthword::config::{GenConfig, ImageFormat};
use synthword::pipeline::{generate_sample, Stage};
use synthword::resources::ResourceSet;
use synthword::rng::{stream, Lane};

fn setup() -> (GenConfig, ResourceSet) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    let cfg = GenConfig::load(&path).unwrap();
    let res = ResourceSet::load(&cfg.resources).unwrap();
    (cfg, res)
}

#[test]
fn adjacent_streams_are_uncorrelated() {
    let n = 20_000;
    for lane in [Lane::Text, Lane::Attempt(0), Lane::Attempt(3)] {
        let mut a = stream(7, 41, lane);
        let mut b = stream(7, 42, lane);
        let xs: Vec<f64> = (0..n).map(|_| a.random()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.random()).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
        let (mx, my) = (mean(&xs), mean(&ys));
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let r = cov / (vx * vy).sqrt();
        // Under independence r ~ N(0, 1/n).
        assert!(r.abs() < 4.0 / (n as f64).sqrt(), "{lane:?}: r = {r}");
        assert_ne!(xs[..8], ys[..8]);
    }
}

#[test]
fn labels_never_carry_midground_text() {
    let (mut cfg, res) = setup();
    cfg.compositor.visibility.threshold = 1.0;
    let mut with_mid = 0;
    for i in 0..40 {
        let s = generate_sample(&res, &cfg, i).unwrap();
        assert_eq!(s.label, s.shaped_text);
        if let Some(noise) = &s.midground_text {
            with_mid += 1;
            assert!(s.trace.contains(&Stage::Midground));
            // The noise word is drawn separately; it only matches the label by coincidence.
            if noise != &s.label {
                assert!(!s.label.contains(&format!("{noise}{noise}")));
            }
        }
    }
    assert!(with_mid > 30, "{with_mid}");
}

#[test]
fn threshold_one_never_discards() {
    let (mut cfg, res) = setup();
    let dir = tempfile::tempdir().unwrap();
    cfg.output.dir = dir.path().into();
    cfg.output.count = 40;
    cfg.compositor.visibility.threshold = 1.0;
    let s = generate_batch(&res, &cfg, Execution::Sequential).unwrap();
    assert_eq!((s.discards, s.failed, s.succeeded), (0, 0, 40));
}

#[test]
fn summary_reconciles_with_files() {
    let (mut cfg, res) = setup();
    let dir = tempfile::tempdir().unwrap();
    cfg.output.dir = dir.path().into();
    cfg.output.count = 30;
    cfg.output.format = ImageFormat::Jpg;
    cfg.retry_limit = 1;
    let s = generate_batch(&res, &cfg, Execution::for_workers(3)).unwrap();
    assert_eq!(s.succeeded + s.failed, 30);
    let rows = parse_manifest(&std::fs::read_to_string(dir.path().join("gt.txt")).unwrap()).unwrap();
    assert_eq!(rows.len() as u64, s.succeeded);
    let mut indices = Vec::new();
    for (path, _) in &rows {
        assert!(path.ends_with(".jpg"));
        let img = image::open(dir.path().join(path)).unwrap();
        assert!(img.width() > 0);
        indices.push(path.clone());
    }
    let mut sorted = indices.clone();
    sorted.sort();
    assert_eq!(indices, sorted, "manifest must be in index order");
    let written = std::fs::read_dir(dir.path().join("images")).unwrap().count() as u64;
    assert_eq!(written, s.succeeded, "failed samples must not leave files");
    for f in &s.failures {
        assert!(!rows.iter().any(|(p, _)| p.contains(&format!("{:08}", f.index))));
    }
    let report = stats(&dir.path().join("gt.txt")).unwrap();
    assert_eq!(report.labels, s.succeeded);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["compositor"]["visibility"]["threshold"], 0.5);
}

#[test]
fn zero_count_is_a_config_error() {
    let (mut cfg, res) = setup();
    cfg.output.count = 0;
    let dir = tempfile::tempdir().unwrap();
    cfg.output.dir = dir.path().into();
    assert!(matches!(generate_batch(&res, &cfg, Execution::Sequential), Err(BatchError::Config(_))));
}

#[test]
fn length_balanced_corpus_has_flat_histogram() {
    let (mut cfg, res) = setup();
    cfg.sampler.p_length = 1.0;
    cfg.sampler.max_length = 10;
    let labels: Vec<String> = (0..20_000)
        .map(|i| {
            synthword::text_sampler::sample(&res.lexicon, &cfg.sampler, &mut stream(1, i, Lane::Text)).text
        })
        .collect();
    let r = synthword::batch::stats_from_labels(labels.iter().map(String::as_str));
    assert_eq!(r.length_histogram.len(), 10);
    let expected = 2000.0;
    let chi2: f64 = r.length_histogram.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 9 dof, alpha = 0.01.
    assert!(chi2 < 21.666, "{chi2}");
}
