use geoquant::manifold;
use geoquant::nldr::{avg_reconstruction_distortion, ChartProjector};
use geoquant::synth::{builtin_fixture, sample_embedding, FIXTURES};
use geoquant::{fit, FitConfig};

#[test]
fn arc_codebook_beats_single_chart_pca() {
    let spec = builtin_fixture("arc-3d-k1", 0).unwrap();
    let data = sample_embedding(&spec, 3000, 21).unwrap().points;
    let many = fit(
        &data,
        &FitConfig {
            m_init: Some(8),
            ..Default::default()
        },
    )
    .unwrap()
    .final_codebook;
    assert!(many.len() >= 4, "only {} components survived", many.len());
    let one = fit(
        &data,
        &FitConfig {
            m_init: Some(1),
            ..Default::default()
        },
    )
    .unwrap()
    .final_codebook;
    let d_many = avg_reconstruction_distortion(
        &many,
        &ChartProjector::from_codebook(&many, 1).unwrap(),
        &data,
    )
    .unwrap();
    let d_one = avg_reconstruction_distortion(
        &one,
        &ChartProjector::from_codebook(&one, 1).unwrap(),
        &data,
    )
    .unwrap();
    assert!(d_many < d_one, "{d_many} vs {d_one}");
}

#[test]
fn every_fixture_fits_and_builds_an_atlas() {
    for name in FIXTURES {
        let spec = builtin_fixture(name, 2).unwrap();
        let data = sample_embedding(&spec, 1500, 3).unwrap().points;
        let report = fit(&data, &FitConfig::default()).unwrap();
        assert!(report.iterations <= 200);
        assert!(report.distortion_trace.iter().all(|d| d.is_finite()));
        let atlas = manifold::build_atlas(&report.final_codebook, spec.k(), 0.1).unwrap();
        assert_eq!(atlas.len(), report.final_codebook.len());
    }
}

#[test]
fn fit_is_deterministic_and_thread_independent() {
    let spec = builtin_fixture("clusters-5d-k2", 4).unwrap();
    let data = sample_embedding(&spec, 1200, 5).unwrap().points;
    let cfg = FitConfig {
        m_init: Some(6),
        mu: 0.5,
        ..Default::default()
    };
    let a = fit(&data, &cfg).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let b = pool.install(|| fit(&data, &cfg).unwrap());
    assert_eq!(a.distortion_trace, b.distortion_trace);
    assert_eq!(a.assignments, b.assignments);
}
