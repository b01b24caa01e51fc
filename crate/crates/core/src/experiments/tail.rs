//! Distance tail probabilities `P_M(d) = P(‖r̂ − r₀‖_e > d)`.

use serde::{Deserialize, Serialize};

use super::{record, run_trials, wilson_interval, Band, Estimator, Scenario, TrialRecord};
use crate::ambiguity::{locate, Variant};
use crate::error::{Error, Result};
use crate::seeds::{derive_seed, rng_from_seed, STREAM_ENCODER, STREAM_LOCATION, STREAM_NOISE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailStudyConfig {
    pub m_values: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub n_locations: usize,
    pub n_encoder_draws: usize,
    pub seed: u64,
    /// Thresholds `d` in metric units.
    pub thresholds: Vec<f64>,
    /// Also score the normalized and unnormalized conventional estimators.
    pub baselines: bool,
}

impl TailStudyConfig {
    /// Desk-scale defaults: 100 locations × 5 draws, SNR 0–16 dB.
    pub fn for_band(band: Band) -> Self {
        let m_values = match band {
            Band::Narrowband => vec![1, 2, 4, 6, 10, 20, 37],
            Band::Incoherent => vec![2, 4, 6, 10, 20, 37],
            Band::Coherent => vec![1, 2, 4, 6, 10, 20, 37],
        };
        Self {
            m_values,
            snr_db: vec![0.0, 4.0, 8.0, 12.0, 16.0],
            n_locations: 100,
            n_encoder_draws: 5,
            seed: 0,
            thresholds: default_thresholds(),
            baselines: true,
        }
    }
}

/// `d = 0, 0.25, …, 10`.
pub fn default_thresholds() -> Vec<f64> {
    (0..=40).map(|i| i as f64 * 0.25).collect()
}

/// Empirical tail probability of one estimator at one SNR.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub variant: Variant,
    pub m: Option<usize>,
    pub snr_db: f64,
    pub trials: usize,
    pub thresholds: Vec<f64>,
    /// Fraction of trials with error strictly greater than each threshold.
    pub exceedance: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl TailCurve {
    pub fn from_errors(variant: Variant, m: Option<usize>, snr_db: f64, errors: &[f64], thresholds: &[f64]) -> Self {
        let mut sorted = errors.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mut exceedance = Vec::with_capacity(thresholds.len());
        let mut lower = Vec::with_capacity(thresholds.len());
        let mut upper = Vec::with_capacity(thresholds.len());
        for &d in thresholds {
            let within = sorted.partition_point(|&e| e <= d);
            let over = n - within;
            let (lo, hi) = wilson_interval(over, n);
            exceedance.push(if n == 0 { 0.0 } else { over as f64 / n as f64 });
            lower.push(lo);
            upper.push(hi);
        }
        Self {
            variant,
            m,
            snr_db,
            trials: n,
            thresholds: thresholds.to_vec(),
            exceedance,
            lower,
            upper,
        }
    }

    /// `P(error > d)` computed from the stored thresholds; `d` must be one of them.
    pub fn exceedance_at(&self, d: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .position(|&t| (t - d).abs() < 1e-12)
            .map(|i| self.exceedance[i])
    }
}

/// One point of the `P_M(d = 1)` versus `M` series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceedancePoint {
    pub variant: Variant,
    pub m: Option<usize>,
    pub snr_db: f64,
    pub exceedance: f64,
    pub lower: f64,
    pub upper: f64,
    pub trials: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailStudy {
    pub band: Band,
    pub records: Vec<TrialRecord>,
    pub curves: Vec<TailCurve>,
}

impl TailStudy {
    pub fn curve(&self, variant: Variant, m: Option<usize>, snr_db: f64) -> Option<&TailCurve> {
        self.curves
            .iter()
            .find(|c| c.variant == variant && c.m == m && (c.snr_db - snr_db).abs() < 1e-9)
    }

    /// `P_M(1)` for every curve, sorted by SNR then `M`.
    pub fn unit_exceedance_series(&self) -> Vec<ExceedancePoint> {
        let mut out: Vec<ExceedancePoint> = self
            .curves
            .iter()
            .map(|c| {
                let over = self
                    .records_for(c.variant, c.m, c.snr_db)
                    .filter(|r| r.elliptical_error > 1.0)
                    .count();
                let (lower, upper) = wilson_interval(over, c.trials);
                ExceedancePoint {
                    variant: c.variant,
                    m: c.m,
                    snr_db: c.snr_db,
                    exceedance: if c.trials == 0 { 0.0 } else { over as f64 / c.trials as f64 },
                    lower,
                    upper,
                    trials: c.trials,
                }
            })
            .collect();
        out.sort_by(|a, b| {
            a.snr_db
                .total_cmp(&b.snr_db)
                .then(a.m.unwrap_or(usize::MAX).cmp(&b.m.unwrap_or(usize::MAX)))
                .then(a.variant.tag().cmp(b.variant.tag()))
        });
        out
    }

    /// Compressive curves at fixed `m` across all SNRs.
    pub fn snr_sweep(&self, m: usize) -> Vec<&TailCurve> {
        self.curves.iter().filter(|c| c.m == Some(m)).collect()
    }

    pub fn records_for(&self, variant: Variant, m: Option<usize>, snr_db: f64) -> impl Iterator<Item = &TrialRecord> {
        self.records.iter().filter(move |r| {
            r.variant == variant && r.m == m && r.snr_db.is_some_and(|s| (s - snr_db).abs() < 1e-9)
        })
    }
}

/// Runs `n_locations × n_encoder_draws` trials at every `(M, SNR)`.
///
/// Trial `(i, j)` uses source location `i` and noise seeded by
/// `(i, j, SNR index)`; projections are seeded by `(i, j, M)` and reused
/// across SNRs. Conventional estimators see the same noisy data as the
/// compressive ones.
pub fn run_tail_study(scenario: &Scenario, config: &TailStudyConfig) -> Result<TailStudy> {
    let band = scenario.band();
    if config.n_locations == 0 || config.n_encoder_draws == 0 {
        return Err(Error::InvalidParameter("trial counts must be positive".into()));
    }
    if config.snr_db.is_empty() {
        return Err(Error::InvalidParameter("at least one SNR is required".into()));
    }
    let n_elements = scenario.array().len();
    for &m in &config.m_values {
        if m == 0 || m > n_elements {
            return Err(Error::InvalidProjection { m, n: n_elements });
        }
        if band == Band::Incoherent && m < 2 {
            return Err(Error::DegenerateIncoherent);
        }
    }
    let metric = scenario.metric();
    let seed = config.seed;
    let n_trials = config.n_locations * config.n_encoder_draws;

    let per_trial = run_trials(n_trials, |t| {
        let (i, j) = (t / config.n_encoder_draws, t % config.n_encoder_draws);
        let truth = scenario.random_location(&mut rng_from_seed(derive_seed(seed, &[STREAM_LOCATION, i as u64])));
        let mut observations = Vec::with_capacity(config.snr_db.len());
        for s in 0..config.snr_db.len() {
            let noise_seed = derive_seed(seed, &[STREAM_NOISE, i as u64, j as u64, s as u64]);
            let (ys, _) = scenario.observe(truth, Some(config.snr_db[s]), noise_seed)?;
            observations.push((noise_seed, ys));
        }

        let mut out = Vec::new();
        let grid = scenario.grid();
        if config.baselines {
            for estimator in [Estimator::Normalized, Estimator::Unnormalized] {
                for (s, (noise_seed, ys)) in observations.iter().enumerate() {
                    let surface = scenario.surface(estimator, ys, None)?;
                    out.push(record(
                        t,
                        i,
                        j,
                        band.variant(estimator),
                        None,
                        Some(config.snr_db[s]),
                        truth,
                        locate(&surface, grid)?,
                        metric,
                        *noise_seed,
                        None,
                    ));
                }
            }
        }
        for &m in &config.m_values {
            let encoder_seed = derive_seed(seed, &[STREAM_ENCODER, i as u64, j as u64, m as u64]);
            let encoders = scenario.draw_encoders(m, encoder_seed)?;
            let estimator = Estimator::Compressive { m };
            for (s, (noise_seed, ys)) in observations.iter().enumerate() {
                let surface = scenario.surface(estimator, ys, Some(&encoders))?;
                out.push(record(
                    t,
                    i,
                    j,
                    band.variant(estimator),
                    Some(m),
                    Some(config.snr_db[s]),
                    truth,
                    locate(&surface, grid)?,
                    metric,
                    *noise_seed,
                    Some(encoder_seed),
                ));
            }
        }
        Ok(out)
    })?;
    let records: Vec<TrialRecord> = per_trial.into_iter().flatten().collect();

    let mut keys: Vec<(Variant, Option<usize>)> = Vec::new();
    if config.baselines {
        keys.push((band.variant(Estimator::Normalized), None));
        keys.push((band.variant(Estimator::Unnormalized), None));
    }
    for &m in &config.m_values {
        keys.push((band.variant(Estimator::Compressive { m }), Some(m)));
    }
    let mut curves = Vec::new();
    for &snr in &config.snr_db {
        for &(variant, m) in &keys {
            let errors: Vec<f64> = records
                .iter()
                .filter(|r| r.variant == variant && r.m == m && r.snr_db == Some(snr))
                .map(|r| r.elliptical_error)
                .collect();
            curves.push(TailCurve::from_errors(variant, m, snr, &errors, &config.thresholds));
        }
    }
    Ok(TailStudy { band, records, curves })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_curve_is_nonincreasing_and_bounded() {
        let errors = [0.1, 0.5, 0.5, 2.0, 7.5];
        let c = TailCurve::from_errors(Variant::Cmfp, Some(3), 16.0, &errors, &default_thresholds());
        assert!(c.exceedance.windows(2).all(|w| w[0] >= w[1]));
        assert!(c.exceedance.iter().all(|p| (0.0..=1.0).contains(p)));
        assert_eq!(c.exceedance_at(0.0), Some(1.0));
        assert_eq!(c.exceedance_at(0.5), Some(0.4));
        assert_eq!(c.exceedance_at(1.0), Some(0.4));
        assert_eq!(c.exceedance_at(10.0), Some(0.0));
        assert!(c.lower.iter().zip(&c.exceedance).all(|(lo, p)| lo <= p));
    }
}
