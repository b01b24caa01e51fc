mod common;

use cmfp_core::experiments::{
    elliptical_distance, lobe_ratio_db, run_lobe_study, run_mismatch_study, run_tail_study, run_tracking_study,
    wilson_interval, GridSpec, LobeStudyConfig, MismatchConfig, TailCurve, TailStudyConfig, TrackingConfig,
    Trajectory,
};
use cmfp_core::{
    locate, Band, EllipticalMetric, Error, Estimator, Location, Scenario, ScenarioConfig, Variant,
};

fn narrowband() -> Scenario {
    Scenario::new(&ScenarioConfig::for_band(Band::Narrowband)).unwrap()
}

fn coherent_small() -> Scenario {
    let mut config = ScenarioConfig::for_band(Band::Coherent);
    config.grid = GridSpec {
        range_count: 45,
        depth_count: 45,
        ..GridSpec::coherent()
    };
    Scenario::new(&config).unwrap()
}

fn tail_config(m_values: Vec<usize>, snr_db: Vec<f64>, n_locations: usize, seed: u64) -> TailStudyConfig {
    TailStudyConfig {
        m_values,
        snr_db,
        n_locations,
        n_encoder_draws: 2,
        seed,
        ..TailStudyConfig::for_band(Band::Narrowband)
    }
}

#[test]
fn full_rank_tail_matches_conventional_trial_by_trial() {
    let s = narrowband();
    let study = run_tail_study(&s, &tail_config(vec![37], vec![0.0, 8.0], 15, 3)).unwrap();
    for snr in [0.0, 8.0] {
        let conventional: Vec<_> = study.records_for(Variant::Nmfp, None, snr).collect();
        let compressive: Vec<_> = study.records_for(Variant::Cmfp, Some(37), snr).collect();
        assert_eq!(conventional.len(), 30);
        assert_eq!(compressive.len(), 30);
        for (a, b) in conventional.iter().zip(&compressive) {
            assert_eq!(a.trial, b.trial);
            assert_eq!(a.estimate(), b.estimate());
        }
        assert_eq!(
            study.curve(Variant::Nmfp, None, snr).unwrap().exceedance,
            study.curve(Variant::Cmfp, Some(37), snr).unwrap().exceedance
        );
    }
}

#[test]
fn unit_exceedance_falls_with_projections() {
    let s = narrowband();
    let study = run_tail_study(&s, &tail_config(vec![1, 4, 37], vec![16.0], 60, 11)).unwrap();
    let p = |m| study.curve(Variant::Cmfp, Some(m), 16.0).unwrap().exceedance_at(1.0).unwrap();
    assert!(p(1) > p(4), "{} vs {}", p(1), p(4));
    assert!(p(4) >= p(37));
    let series = study.unit_exceedance_series();
    assert_eq!(series.len(), study.curves.len());
    assert!(series.iter().all(|e| e.lower <= e.exceedance && e.exceedance <= e.upper));
}

#[test]
fn studies_are_reproducible_bit_for_bit() {
    let s = narrowband();
    let config = tail_config(vec![2, 6], vec![4.0], 8, 21);
    let a = run_tail_study(&s, &config).unwrap();
    let b = run_tail_study(&s, &config).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(serde_json::to_string(&a.curves).unwrap(), serde_json::to_string(&b.curves).unwrap());
    let c = run_tail_study(&s, &TailStudyConfig { seed: 22, ..config }).unwrap();
    assert_ne!(a.records, c.records);
}

#[test]
fn tail_curve_counts_strict_exceedance() {
    let errors = [0.0, 0.5, 1.0, 1.5, 3.0];
    let c = TailCurve::from_errors(Variant::Cmfp, Some(2), 0.0, &errors, &[0.0, 1.0, 2.0, 5.0]);
    assert_eq!(c.exceedance, vec![0.8, 0.4, 0.2, 0.0]);
    assert_eq!(c.trials, 5);
    let (lo, hi) = wilson_interval(2, 5);
    assert_eq!((c.lower[1], c.upper[1]), (lo, hi));
    assert!(c.exceedance_at(0.3).is_none());
}

#[test]
fn noiseless_conventional_lobe_ratio_is_frozen() {
    // Frozen from a reference run; guards against silent changes to the
    // replica model or the ratio definition.
    const GOLDEN_DB: f64 = 6.466_422_288_832_62;
    let s = narrowband();
    let (ys, _) = s.observe(Location::new(5540.0, 100.0), None, 0).unwrap();
    let surface = s.surface(Estimator::Normalized, &ys, None).unwrap();
    let center = locate(&surface, s.grid()).unwrap();
    let ratio = lobe_ratio_db(&surface, s.grid(), center, Band::Narrowband.lobe_exclusion()).unwrap();
    assert!((ratio - GOLDEN_DB).abs() < 1e-6, "ratio {ratio}");
}

#[test]
fn lobe_study_full_rank_matches_reference() {
    let s = narrowband();
    let config = LobeStudyConfig {
        m_values: vec![2, 37],
        n_locations: 6,
        n_encoder_draws: 2,
        snr_db: Some(10.0),
        seed: 5,
    };
    let study = run_lobe_study(&s, &config).unwrap();
    assert!((study.row(37).unwrap().median_ratio_db - study.reference().median_ratio_db).abs() < 1e-9);
    assert_eq!(study.rows.len(), 3);
    assert!(study.records.iter().all(|r| r.lobe_ratio_db.is_some_and(|v| v >= 0.0)));
}

#[test]
fn lobe_study_rejects_incoherent_band() {
    let s = Scenario::new(&ScenarioConfig {
        frequencies_hz: vec![141.0, 150.0],
        grid: GridSpec {
            range_count: 10,
            depth_count: 10,
            ..GridSpec::wide()
        },
        ..ScenarioConfig::for_band(Band::Incoherent)
    })
    .unwrap();
    assert!(run_lobe_study(&s, &LobeStudyConfig::for_band(Band::Incoherent)).is_err());
    let config = TailStudyConfig {
        m_values: vec![1],
        ..tail_config(vec![], vec![0.0], 2, 0)
    };
    assert!(matches!(run_tail_study(&s, &config), Err(Error::DegenerateIncoherent)));
}

#[test]
fn matched_speed_error_within_a_cell() {
    let s = coherent_small();
    let config = MismatchConfig {
        replica_speeds: vec![1520.0, 1525.0],
        n_locations: 6,
        n_encoder_draws: 1,
        snr_db: None,
        ..MismatchConfig::default()
    };
    let study = run_mismatch_study(&s, &config).unwrap();
    let diagonal = s.grid().cell_diagonal();
    for variant in [Variant::CohNmfp, Variant::CohCmfp] {
        let rows = study.rows_for(variant);
        let matched = rows.iter().find(|r| r.replica_speed == 1520.0).unwrap();
        assert_eq!(matched.speed_error, 0.0);
        assert!(matched.mean_euclidean_error <= diagonal, "{variant}: {}", matched.mean_euclidean_error);
    }
    assert_eq!(study.truth_speed, 1520.0);
}

#[test]
fn noiseless_full_rank_tracking_stays_within_a_cell() {
    let s = coherent_small();
    let config = TrackingConfig {
        trajectory: Trajectory::parabolic(12),
        m: 37,
        snr_db: None,
        seed: 1,
    };
    let study = run_tracking_study(&s, &config).unwrap();
    let diagonal = s.grid().cell_diagonal();
    assert_eq!(study.points.len(), 12);
    for p in &study.points {
        assert_eq!(p.conventional, p.compressive);
        assert!(p.compressive_error <= diagonal, "point {}: {}", p.index, p.compressive_error);
    }
}

#[test]
fn trajectory_leaving_grid_is_rejected() {
    let s = coherent_small();
    let mut trajectory = Trajectory::parabolic(5);
    trajectory.points.push(Location::new(6000.0, 50.0));
    let config = TrackingConfig {
        trajectory,
        ..TrackingConfig::default()
    };
    assert!(matches!(run_tracking_study(&s, &config), Err(Error::InvalidLocation { .. })));
    let t = Trajectory::parabolic(100);
    assert!(t.validate_within(s.grid()).is_ok());
    assert!(t.points.iter().all(|p| (20.0..=180.0).contains(&p.depth)));
}

#[test]
fn elliptical_metric_scales_axes() {
    let a = Location::new(5000.0, 100.0);
    let m = EllipticalMetric::new(12.0, 3.0);
    assert!((elliptical_distance(a, Location::new(5012.0, 100.0), m) - 1.0).abs() < 1e-15);
    assert!((elliptical_distance(a, Location::new(5000.0, 97.0), m) - 1.0).abs() < 1e-15);
    assert!((elliptical_distance(a, Location::new(5012.0, 103.0), m) - 2f64.sqrt()).abs() < 1e-15);
    assert!(EllipticalMetric::new(0.0, 3.0).validate().is_err());
}

#[test]
fn band_configuration_round_trips() {
    for band in [Band::Narrowband, Band::Incoherent, Band::Coherent] {
        assert_eq!(band.name().parse::<Band>().unwrap(), band);
        let config = ScenarioConfig::for_band(band);
        let json = serde_json::to_string(&config).unwrap();
        assert_eq!(serde_json::from_str::<ScenarioConfig>(&json).unwrap(), config);
    }
    assert_eq!(Band::Coherent.variant(Estimator::Compressive { m: 3 }), Variant::CohCmfp);
    assert_eq!(Band::Narrowband.variant(Estimator::Unnormalized), Variant::Umfp);
}
