use spikecal::calibration::TestKind;
use spikecal::oracle;
use spikecal::sim::{DistSpec, ExperimentConfig, ModelSpec};

fn small() -> ExperimentConfig {
    ExperimentConfig {
        p: 40,
        n: 120,
        model: ModelSpec::Null,
        dist: DistSpec::Gaussian,
        reps: 1,
        level: 0.05,
        seed: 0,
        qq_points: 9,
        histogram_bins: 10,
    }
}

#[test]
fn small_scale_null_moments() {
    let moments = oracle::mc_moments(&small(), 2000, 17).unwrap();
    for m in &moments {
        assert!(m.mean.abs() <= 0.15, "{m:?}");
        assert!((0.7..=1.3).contains(&m.variance), "{m:?}");
    }
    let w = moments.iter().find(|m| m.kind == TestKind::W).unwrap();
    assert!((w.raw_mean / 40.0 - 1.0).abs() < 0.02, "{w:?}");
}

#[test]
fn standard_error_shrinks_with_reps() {
    // spread of replicate means, 400 vs 1600 reps per batch
    let spread = |reps: usize| -> f64 {
        let means: Vec<f64> = (0..8)
            .map(|b| oracle::mc_moments(&small(), reps, 100 + b).unwrap()[1].mean)
            .collect();
        let avg = means.iter().sum::<f64>() / means.len() as f64;
        (means.iter().map(|m| (m - avg).powi(2)).sum::<f64>() / (means.len() - 1) as f64).sqrt()
    };
    let ratio = spread(400) / spread(1600);
    assert!((1.0..4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn too_few_reps_rejected() {
    assert!(oracle::mc_moments(&small(), 100, 1).is_err());
}
