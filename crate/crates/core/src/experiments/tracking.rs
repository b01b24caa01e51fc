//! A slowly moving source localized independently at successive positions.

use serde::{Deserialize, Serialize};

use super::{median, record, run_trials, Band, Estimator, Scenario, TrialRecord};
use crate::ambiguity::locate;
use crate::error::{Error, Result};
use crate::seeds::{derive_seed, STREAM_ENCODER, STREAM_NOISE};
use crate::waveguide::{Location, SearchGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory {
    pub points: Vec<Location>,
}

impl Trajectory {
    /// Range linear from 5020 m to 5250 m; depth `40 + 0.002 (r − 5135)²`
    /// clipped to [20, 180] m.
    pub fn parabolic(count: usize) -> Self {
        let points = (0..count)
            .map(|i| {
                let t = if count > 1 { i as f64 / (count - 1) as f64 } else { 0.0 };
                let range = 5020.0 + 230.0 * t;
                let depth = (40.0 + 0.002 * (range - 5135.0).powi(2)).clamp(20.0, 180.0);
                Location::new(range, depth)
            })
            .collect();
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate_within(&self, grid: &SearchGrid) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidParameter("trajectory is empty".into()));
        }
        match self.points.iter().find(|p| !grid.contains(**p)) {
            Some(p) => Err(Error::InvalidLocation {
                range: p.range,
                depth: p.depth,
                reason: "trajectory leaves the search grid",
            }),
            None => Ok(()),
        }
    }
}

impl Default for Trajectory {
    fn default() -> Self {
        Self::parabolic(100)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingConfig {
    #[serde(default)]
    pub trajectory: Trajectory,
    pub m: usize,
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self {
            trajectory: Trajectory::default(),
            m: 2,
            snr_db: Some(16.0),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub index: usize,
    pub truth: Location,
    pub conventional: Location,
    pub compressive: Location,
    pub conventional_error: f64,
    pub compressive_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrackingStudy {
    pub m: usize,
    pub snr_db: Option<f64>,
    pub points: Vec<TrackPoint>,
    pub records: Vec<TrialRecord>,
    /// Median Euclidean error (m) of the normalized conventional estimates.
    pub conventional_median: f64,
    pub compressive_median: f64,
}

/// One set of projections serves the whole track; noise is drawn
/// independently at each position.
pub fn run_tracking_study(scenario: &Scenario, config: &TrackingConfig) -> Result<TrackingStudy> {
    let band = scenario.band();
    if band != Band::Coherent {
        return Err(Error::InvalidParameter("tracking uses the coherent band".into()));
    }
    let grid = scenario.grid();
    config.trajectory.validate_within(grid)?;
    let m = config.m;
    let encoder_seed = derive_seed(config.seed, &[STREAM_ENCODER, m as u64]);
    let encoders = scenario.draw_encoders(m, encoder_seed)?;
    let metric = scenario.metric();
    let conventional = band.variant(Estimator::Normalized);
    let compressive = band.variant(Estimator::Compressive { m });

    let per_point = run_trials(config.trajectory.len(), |i| {
        let truth = config.trajectory.points[i];
        let noise_seed = derive_seed(config.seed, &[STREAM_NOISE, i as u64]);
        let (ys, _) = scenario.observe(truth, config.snr_db, noise_seed)?;
        let a = locate(&scenario.surface(Estimator::Normalized, &ys, None)?, grid)?;
        let b = locate(
            &scenario.surface(Estimator::Compressive { m }, &ys, Some(&encoders))?,
            grid,
        )?;
        let ra = record(i, i, 0, conventional, None, config.snr_db, truth, a, metric, noise_seed, None);
        let rb = record(
            i,
            i,
            0,
            compressive,
            Some(m),
            config.snr_db,
            truth,
            b,
            metric,
            noise_seed,
            Some(encoder_seed),
        );
        let point = TrackPoint {
            index: i,
            truth,
            conventional: a,
            compressive: b,
            conventional_error: ra.euclidean_error,
            compressive_error: rb.euclidean_error,
        };
        Ok((point, [ra, rb]))
    })?;

    let (points, records): (Vec<TrackPoint>, Vec<[TrialRecord; 2]>) = per_point.into_iter().unzip();
    let conventional_median = median(&points.iter().map(|p| p.conventional_error).collect::<Vec<_>>());
    let compressive_median = median(&points.iter().map(|p| p.compressive_error).collect::<Vec<_>>());
    Ok(TrackingStudy {
        m,
        snr_db: config.snr_db,
        points,
        records: records.into_iter().flatten().collect(),
        conventional_median,
        compressive_median,
    })
}
