use hallu_core::detector::embedding::{manifest_path_for, EmbeddingMatrix};
use hallu_core::detector::gmm::{fit_gmm, ComponentCov, CovarianceType, GmmConfig};
use hallu_core::detector::{
    calibrate, fit_detector, hallucination_rate_trace, synthetic_classes, DetectorBundle, DetectorConfig,
    SyntheticSpec, MODEL_FILE, THRESHOLDS_FILE,
};
use hallu_core::regions::gaussian_hdr_threshold;
use hallu_core::{GaussianComponent, HalluError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[test]
fn em_log_likelihood_never_drops() {
    let mut r = ChaCha8Rng::seed_from_u64(100);
    for case in 0..20u64 {
        let dim = r.random_range(1..5);
        let clusters = r.random_range(1..4);
        let centers: Vec<Vec<f64>> = (0..clusters).map(|_| (0..dim).map(|_| r.random_range(-4.0..4.0)).collect()).collect();
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|i| {
                let c = &centers[i % clusters];
                c.iter().map(|m| m + Normal::new(0.0, 1.0).unwrap().sample(&mut r)).collect()
            })
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let covariance = if case % 2 == 0 { CovarianceType::Diagonal } else { CovarianceType::Full };
        let cfg = GmmConfig { components: r.random_range(1..5), covariance, ..GmmConfig::default() };
        let (_, trace) = fit_gmm(&refs, &cfg, case).unwrap();
        assert!(trace.max_decrease() <= 1e-9, "case {case}: drop {}", trace.max_decrease());
    }
}

#[test]
fn one_dimensional_cutoff_matches_gaussian_hdr() {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let law = Normal::new(1.5, 0.7).unwrap();
    let rows: Vec<Vec<f64>> = (0..50_000).map(|_| vec![law.sample(&mut r)]).collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let cfg = GmmConfig { components: 1, ..GmmConfig::default() };
    let (model, _) = fit_gmm(&refs, &cfg, 1).unwrap();
    let comp = &model.components()[0];
    let ComponentCov::Diagonal(var) = &comp.cov else { panic!("expected diagonal") };
    let fitted = GaussianComponent::isotropic(comp.mean.clone(), var[0]).unwrap();
    let (cutoff, count) = calibrate(&model, &rows, 10.0).unwrap();
    assert_eq!(count, rows.len());
    let analytic = gaussian_hdr_threshold(&fitted, 0.9).unwrap();
    assert!((cutoff.exp() / analytic - 1.0).abs() < 0.02, "{} vs {analytic}", cutoff.exp());
}

fn small_spec() -> SyntheticSpec {
    SyntheticSpec { per_class: 300, dim: 8, ..SyntheticSpec::default() }
}

#[test]
fn missing_bundle_piece_is_reported() {
    let data = synthetic_classes(&small_spec(), 1).unwrap();
    let bundle = fit_detector(&data, &DetectorConfig::default(), 1).unwrap();
    for piece in [MODEL_FILE, THRESHOLDS_FILE] {
        let dir = tempfile::tempdir().unwrap();
        bundle.save(dir.path()).unwrap();
        std::fs::remove_file(dir.path().join(piece)).unwrap();
        match DetectorBundle::load(dir.path()) {
            Err(HalluError::MissingArtifact(_)) => {}
            other => panic!("{piece}: expected missing artifact, got {other:?}"),
        }
    }
}

#[test]
fn recalibration_moves_rate() {
    let data = synthetic_classes(&small_spec(), 2).unwrap();
    let mut bundle = fit_detector(&data, &DetectorConfig::default(), 2).unwrap();
    let rows: Vec<&[f64]> = data.rows.iter().map(Vec::as_slice).collect();
    bundle.recalibrate(&data, 50.0).unwrap();
    let rate = bundle.detect(&rows).unwrap().inside_rate();
    assert!((rate - 0.5).abs() < 0.02, "{rate}");
}

#[test]
fn rate_trace_has_one_row_per_checkpoint() {
    let data = synthetic_classes(&small_spec(), 3).unwrap();
    let bundle = fit_detector(&data, &DetectorConfig::default(), 3).unwrap();
    let rows: Vec<&[f64]> = data.rows.iter().map(Vec::as_slice).collect();
    let reports: Vec<_> = rows.chunks(100).map(|c| bundle.detect(c).unwrap()).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    hallucination_rate_trace(&reports, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "checkpoint,samples,hallucination_rate");
    assert_eq!(lines.len(), reports.len() + 1);
    assert!(lines[1].starts_with("0,100,"));
}

#[test]
fn emb1_files_round_trip_with_manifest() {
    let data = synthetic_classes(&small_spec(), 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.emb1");
    data.save(&path).unwrap();
    assert!(manifest_path_for(&path).exists());
    let back = EmbeddingMatrix::load(&path, None).unwrap();
    assert_eq!(back.labels, data.labels);
    assert_eq!(back.classes, data.classes);
    for (a, b) in back.rows.iter().zip(&data.rows) {
        for (x, y) in a.iter().zip(b) {
            assert_eq!(*x, f64::from(*y as f32));
        }
    }
}

#[test]
fn csv_embeddings_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.csv");
    std::fs::write(&path, "label,x0,x1\ncat,1.0,2.0\ndog,3.0,4.0\ncat,5.0,6.0\n").unwrap();
    let m = EmbeddingMatrix::load_any(&path, None).unwrap();
    assert_eq!(m.classes, vec!["cat", "dog"]);
    assert_eq!(m.labels, vec![0, 1, 0]);
    assert_eq!(m.rows[2], vec![5.0, 6.0]);
}
