//! Localization error under a water sound-speed mismatch.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{mean, record, run_trials, Band, Estimator, Scenario, TrialRecord};
use crate::ambiguity::{locate, Variant};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::seeds::{derive_seed, rng_from_seed, STREAM_ENCODER, STREAM_LOCATION, STREAM_NOISE};
use crate::waveguide::Location;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MismatchConfig {
    /// Replica water sound speeds (m/s).
    pub replica_speeds: Vec<f64>,
    pub m: usize,
    pub snr_db: Option<f64>,
    pub n_locations: usize,
    pub n_encoder_draws: usize,
    /// Source locations are drawn inside these bounds, away from the grid
    /// edge so that a stretched range estimate stays on the grid.
    pub truth_range: (f64, f64),
    pub truth_depth: (f64, f64),
    pub seed: u64,
}

impl Default for MismatchConfig {
    fn default() -> Self {
        Self {
            replica_speeds: (0..=10).map(|i| 1520.0 + i as f64).collect(),
            m: 4,
            snr_db: Some(16.0),
            n_locations: 20,
            n_encoder_draws: 2,
            truth_range: (5020.0, 5200.0),
            truth_depth: (20.0, 180.0),
            seed: 0,
        }
    }
}

/// Mean errors of one estimator at one replica speed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MismatchRow {
    pub replica_speed: f64,
    pub speed_error: f64,
    pub variant: Variant,
    pub m: Option<usize>,
    pub trials: usize,
    pub mean_euclidean_error: f64,
    pub mean_range_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MismatchStudy {
    pub truth_speed: f64,
    pub records: Vec<TrialRecord>,
    pub rows: Vec<MismatchRow>,
}

impl MismatchStudy {
    pub fn rows_for(&self, variant: Variant) -> Vec<&MismatchRow> {
        self.rows.iter().filter(|r| r.variant == variant).collect()
    }

    /// Least-squares slope of mean absolute range error against
    /// `|replica speed − truth speed|`, in metres per (m/s).
    pub fn range_slope(&self, variant: Variant) -> f64 {
        let rows = self.rows_for(variant);
        let x: Vec<f64> = rows.iter().map(|r| r.speed_error.abs()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.mean_range_error).collect();
        least_squares_slope(&x, &y)
    }
}

pub(crate) fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Data are synthesized once in the scenario's truth environment; replicas
/// are recomputed per speed. Projections share seeds across speeds so every
/// speed sees the same `Φ` draws.
pub fn run_mismatch_study(scenario: &Scenario, config: &MismatchConfig) -> Result<MismatchStudy> {
    let band = scenario.band();
    if band != Band::Coherent {
        return Err(Error::InvalidParameter("the mismatch study uses the coherent band".into()));
    }
    if config.replica_speeds.is_empty() || config.n_locations == 0 || config.n_encoder_draws == 0 {
        return Err(Error::InvalidParameter("speeds and trial counts must be non-empty".into()));
    }
    let n_elements = scenario.array().len();
    if config.m == 0 || config.m > n_elements {
        return Err(Error::InvalidProjection { m: config.m, n: n_elements });
    }
    let grid = scenario.grid();
    let (r0, r1) = config.truth_range;
    let (d0, d1) = config.truth_depth;
    if !(r0 <= r1 && d0 <= d1 && grid.contains(Location::new(r0, d0)) && grid.contains(Location::new(r1, d1))) {
        return Err(Error::InvalidLocation {
            range: r1,
            depth: d1,
            reason: "truth bounds must lie inside the search grid",
        });
    }

    let seed = config.seed;
    let n_trials = config.n_locations * config.n_encoder_draws;
    let truth_speed = scenario.truth_environment().water_sound_speed;
    let metric = scenario.metric();
    let m = config.m;

    struct Trial {
        truth: Location,
        ys: Vec<Vec<C64>>,
        noise_seed: u64,
        encoder_seed: u64,
    }
    let trials = run_trials(n_trials, |t| {
        let (i, j) = (t / config.n_encoder_draws, t % config.n_encoder_draws);
        let mut rng = rng_from_seed(derive_seed(seed, &[STREAM_LOCATION, i as u64]));
        let truth = Location::new(r0 + (r1 - r0) * rng.random::<f64>(), d0 + (d1 - d0) * rng.random::<f64>());
        let noise_seed = derive_seed(seed, &[STREAM_NOISE, i as u64, j as u64]);
        let (ys, _) = scenario.observe(truth, config.snr_db, noise_seed)?;
        Ok(Trial {
            truth,
            ys,
            noise_seed,
            encoder_seed: derive_seed(seed, &[STREAM_ENCODER, i as u64, j as u64, m as u64]),
        })
    })?;

    let conventional = band.variant(Estimator::Normalized);
    let compressive = band.variant(Estimator::Compressive { m });
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for &speed in &config.replica_speeds {
        let replica = scenario.with_replica_speed(speed)?;
        let per_trial = run_trials(n_trials, |t| {
            let (i, j) = (t / config.n_encoder_draws, t % config.n_encoder_draws);
            let trial = &trials[t];
            let surface = replica.surface(Estimator::Normalized, &trial.ys, None)?;
            let mut a = record(
                t,
                i,
                j,
                conventional,
                None,
                config.snr_db,
                trial.truth,
                locate(&surface, grid)?,
                metric,
                trial.noise_seed,
                None,
            );
            a.replica_speed = Some(speed);
            let encoders = replica.draw_encoders(m, trial.encoder_seed)?;
            let surface = replica.surface(Estimator::Compressive { m }, &trial.ys, Some(&encoders))?;
            let mut b = record(
                t,
                i,
                j,
                compressive,
                Some(m),
                config.snr_db,
                trial.truth,
                locate(&surface, grid)?,
                metric,
                trial.noise_seed,
                Some(trial.encoder_seed),
            );
            b.replica_speed = Some(speed);
            Ok([a, b])
        })?;
        let speed_records: Vec<TrialRecord> = per_trial.into_iter().flatten().collect();
        for (variant, mv) in [(conventional, None), (compressive, Some(m))] {
            let subset: Vec<&TrialRecord> = speed_records.iter().filter(|r| r.variant == variant).collect();
            let euclid: Vec<f64> = subset.iter().map(|r| r.euclidean_error).collect();
            let range: Vec<f64> = subset
                .iter()
                .map(|r| (r.estimated_range - r.true_range).abs())
                .collect();
            rows.push(MismatchRow {
                replica_speed: speed,
                speed_error: speed - truth_speed,
                variant,
                m: mv,
                trials: subset.len(),
                mean_euclidean_error: mean(&euclid),
                mean_range_error: mean(&range),
            });
        }
        records.extend(speed_records);
    }
    Ok(MismatchStudy {
        truth_speed,
        records,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v + 1.0).collect();
        assert!((least_squares_slope(&x, &y) - 2.5).abs() < 1e-12);
    }
}
