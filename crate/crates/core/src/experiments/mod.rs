//! Monte Carlo localization studies.
//!
//! All studies share [`Scenario`], which owns the physical setup and the
//! replica fields for one band. Every random draw of a trial is derived
//! from the master seed and the trial's coordinates (see [`crate::seeds`]),
//! so estimators that share coordinates see identical data.

mod lobe;
mod mismatch;
mod tail;
mod tracking;

pub use lobe::{lobe_ratio_db, run_lobe_study, LobeRow, LobeStudy, LobeStudyConfig};
pub use mismatch::{run_mismatch_study, MismatchConfig, MismatchRow, MismatchStudy};
pub use tail::{run_tail_study, ExceedancePoint, TailCurve, TailStudy, TailStudyConfig};
pub use tracking::{run_tracking_study, TrackPoint, Trajectory, TrackingConfig, TrackingStudy};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{
    surface_broadband, surface_broadband_compressive, surface_narrowband, surface_narrowband_compressive,
    AmbiguitySurface, Variant,
};
use crate::compression::{compress_field, draw_encoder, Encoder};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::seeds::{derive_seed, rng_from_seed};
use crate::sensing::{sigma_for_snr_with_greens, NoiseModel};
use crate::waveguide::{
    greens_field, greens_vector, solve_modes, Environment, GreensField, Location, ModeSet, ReceiverArray,
    SearchGrid,
};

/// Axis-weighted distance `√((Δrange/e_range)² + (Δdepth/e_depth)²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticalMetric {
    pub range: f64,
    pub depth: f64,
}

impl EllipticalMetric {
    /// Single-frequency and incoherent error metric.
    pub const NARROWBAND: Self = Self::new(36.0, 3.0);
    /// Coherent broadband error metric.
    pub const COHERENT: Self = Self::new(12.0, 3.0);
    /// Main-lobe exclusion ellipse, single frequency.
    pub const NARROWBAND_LOBE: Self = Self::new(180.0, 16.0);
    /// Main-lobe exclusion ellipse, coherent broadband.
    pub const COHERENT_LOBE: Self = Self::new(72.0, 16.0);

    pub const fn new(range: f64, depth: f64) -> Self {
        Self { range, depth }
    }

    pub fn validate(&self) -> Result<()> {
        if self.range > 0.0 && self.depth > 0.0 && self.range.is_finite() && self.depth.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "elliptical metric axes must be positive, got ({}, {})",
                self.range, self.depth
            )))
        }
    }
}

pub fn elliptical_distance(a: Location, b: Location, metric: EllipticalMetric) -> f64 {
    ((a.range - b.range) / metric.range).hypot((a.depth - b.depth) / metric.depth)
}

pub fn euclidean_distance(a: Location, b: Location) -> f64 {
    (a.range - b.range).hypot(a.depth - b.depth)
}

/// Frequency configuration of a study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Narrowband,
    Incoherent,
    Coherent,
}

impl Band {
    pub fn name(self) -> &'static str {
        match self {
            Band::Narrowband => "narrowband",
            Band::Incoherent => "incoherent",
            Band::Coherent => "coherent",
        }
    }

    /// Error metric used to score localizations in this band.
    pub fn metric(self) -> EllipticalMetric {
        match self {
            Band::Coherent => EllipticalMetric::COHERENT,
            _ => EllipticalMetric::NARROWBAND,
        }
    }

    pub fn lobe_exclusion(self) -> EllipticalMetric {
        match self {
            Band::Coherent => EllipticalMetric::COHERENT_LOBE,
            _ => EllipticalMetric::NARROWBAND_LOBE,
        }
    }

    pub fn variant(self, estimator: Estimator) -> Variant {
        use Estimator::*;
        match (self, estimator) {
            (Band::Narrowband, Normalized) => Variant::Nmfp,
            (Band::Narrowband, Unnormalized) => Variant::Umfp,
            (Band::Narrowband, Compressive { .. }) => Variant::Cmfp,
            (Band::Incoherent, Normalized) => Variant::IncNmfp,
            (Band::Incoherent, Unnormalized) => Variant::IncUmfp,
            (Band::Incoherent, Compressive { .. }) => Variant::IncCmfp,
            (Band::Coherent, Normalized) => Variant::CohNmfp,
            (Band::Coherent, Unnormalized) => Variant::CohUmfp,
            (Band::Coherent, Compressive { .. }) => Variant::CohCmfp,
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "narrowband" => Ok(Band::Narrowband),
            "incoherent" => Ok(Band::Incoherent),
            "coherent" => Ok(Band::Coherent),
            other => Err(Error::InvalidParameter(format!("unknown band `{other}`"))),
        }
    }
}

/// Bartlett estimator family member.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Normalized,
    Unnormalized,
    Compressive { m: usize },
}

impl Estimator {
    pub fn m(self) -> Option<usize> {
        match self {
            Estimator::Compressive { m } => Some(m),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySpec {
    pub elements: usize,
    pub top_depth: f64,
    pub bottom_depth: f64,
}

impl Default for ArraySpec {
    fn default() -> Self {
        Self {
            elements: 37,
            top_depth: 10.0,
            bottom_depth: 190.0,
        }
    }
}

impl ArraySpec {
    pub fn build(&self) -> Result<ReceiverArray> {
        ReceiverArray::uniform(self.elements, self.top_depth, self.bottom_depth)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub range_min: f64,
    pub range_max: f64,
    pub range_count: usize,
    pub depth_min: f64,
    pub depth_max: f64,
    pub depth_count: usize,
}

impl GridSpec {
    /// 90×90 over 5000–5810 m range, 10–190 m depth.
    pub fn wide() -> Self {
        Self {
            range_min: 5000.0,
            range_max: 5810.0,
            range_count: 90,
            depth_min: 10.0,
            depth_max: 190.0,
            depth_count: 90,
        }
    }

    /// 90×90 over 5000–5270 m range, 10–190 m depth.
    pub fn coherent() -> Self {
        Self {
            range_max: 5270.0,
            ..Self::wide()
        }
    }

    pub fn for_band(band: Band) -> Self {
        match band {
            Band::Coherent => Self::coherent(),
            _ => Self::wide(),
        }
    }

    pub fn build(&self) -> Result<SearchGrid> {
        SearchGrid::equispaced(
            (self.range_min, self.range_max),
            self.range_count,
            (self.depth_min, self.depth_max),
            self.depth_count,
        )
    }
}

/// `count` frequencies spaced evenly over `[min_hz, max_hz]`.
pub fn frequency_band(min_hz: f64, max_hz: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![min_hz],
        _ => (0..count)
            .map(|i| min_hz + (max_hz - min_hz) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Physical and processing setup shared by every trial of a study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub band: Band,
    /// Environment the data are synthesized in.
    pub environment: Environment,
    /// Environment the replicas are computed in; `None` means matched.
    #[serde(default)]
    pub replica_environment: Option<Environment>,
    #[serde(default)]
    pub array: ArraySpec,
    pub grid: GridSpec,
    pub frequencies_hz: Vec<f64>,
    /// Known source amplitudes `α_k`; unit when absent.
    #[serde(default)]
    pub amplitudes: Option<Vec<C64>>,
}

impl ScenarioConfig {
    /// 150 Hz over the wide grid, 141–160 Hz in 1 Hz steps otherwise.
    pub fn for_band(band: Band) -> Self {
        let frequencies_hz = match band {
            Band::Narrowband => vec![150.0],
            _ => frequency_band(141.0, 160.0, 20),
        };
        Self {
            band,
            environment: Environment::default(),
            replica_environment: None,
            array: ArraySpec::default(),
            grid: GridSpec::for_band(band),
            frequencies_hz,
            amplitudes: None,
        }
    }
}

/// A fully built scenario with its replica fields.
#[derive(Clone, Debug)]
pub struct Scenario {
    band: Band,
    truth_environment: Environment,
    replica_environment: Environment,
    array: ReceiverArray,
    grid: Arc<SearchGrid>,
    frequencies_hz: Vec<f64>,
    amplitudes: Vec<C64>,
    truth_modes: Vec<ModeSet>,
    fields: Vec<GreensField>,
}

impl Scenario {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        Self::with_field_source(config, |_, modes, env, array, grid| greens_field(modes, env, array, grid))
    }

    /// Like [`Scenario::new`], but replica fields come from `field_for`,
    /// called with the frequency index, the replica modes, the replica
    /// environment, the array and the grid. Used to load cached fields.
    pub fn with_field_source<F>(config: &ScenarioConfig, mut field_for: F) -> Result<Self>
    where
        F: FnMut(usize, &ModeSet, &Environment, &ReceiverArray, &Arc<SearchGrid>) -> Result<GreensField>,
    {
        if config.frequencies_hz.is_empty() {
            return Err(Error::InvalidParameter("at least one frequency is required".into()));
        }
        if config.band == Band::Narrowband && config.frequencies_hz.len() != 1 {
            return Err(Error::InvalidParameter(
                "narrowband scenarios take exactly one frequency".into(),
            ));
        }
        let amplitudes = match &config.amplitudes {
            Some(a) if a.len() != config.frequencies_hz.len() => {
                return Err(Error::DimensionMismatch {
                    expected: config.frequencies_hz.len(),
                    found: a.len(),
                })
            }
            Some(a) => a.clone(),
            None => vec![C64::new(1.0, 0.0); config.frequencies_hz.len()],
        };
        let truth = config.environment.clone();
        truth.validate()?;
        let replica = config.replica_environment.clone().unwrap_or_else(|| truth.clone());
        replica.validate()?;
        let array = config.array.build()?;
        array.validate_for(&truth)?;
        let grid = Arc::new(config.grid.build()?);
        grid.validate_for(&truth)?;

        let truth_modes = solve_all(&truth, &config.frequencies_hz)?;
        let replica_modes = if replica == truth {
            truth_modes.clone()
        } else {
            solve_all(&replica, &config.frequencies_hz)?
        };
        let fields = replica_modes
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let field = field_for(k, m, &replica, &array, &grid)?;
                if field.elements() != array.len() || field.len() != grid.len() {
                    return Err(Error::DimensionMismatch {
                        expected: array.len() * grid.len(),
                        found: field.elements() * field.len(),
                    });
                }
                Ok(field)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            band: config.band,
            truth_environment: truth,
            replica_environment: replica,
            array,
            grid,
            frequencies_hz: config.frequencies_hz.clone(),
            amplitudes,
            truth_modes,
            fields,
        })
    }

    /// Same data model, replicas recomputed with a different water sound speed.
    pub fn with_replica_speed(&self, speed: f64) -> Result<Self> {
        let replica = self.truth_environment.with_water_sound_speed(speed);
        replica.validate()?;
        let fields = solve_all(&replica, &self.frequencies_hz)?
            .iter()
            .map(|m| greens_field(m, &replica, &self.array, &self.grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            band: self.band,
            truth_environment: self.truth_environment.clone(),
            replica_environment: replica,
            array: self.array.clone(),
            grid: Arc::clone(&self.grid),
            frequencies_hz: self.frequencies_hz.clone(),
            amplitudes: self.amplitudes.clone(),
            truth_modes: self.truth_modes.clone(),
            fields,
        })
    }

    pub fn band(&self) -> Band {
        self.band
    }

    pub fn grid(&self) -> &Arc<SearchGrid> {
        &self.grid
    }

    pub fn array(&self) -> &ReceiverArray {
        &self.array
    }

    pub fn truth_environment(&self) -> &Environment {
        &self.truth_environment
    }

    pub fn replica_environment(&self) -> &Environment {
        &self.replica_environment
    }

    pub fn frequencies_hz(&self) -> &[f64] {
        &self.frequencies_hz
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn fields(&self) -> &[GreensField] {
        &self.fields
    }

    pub fn truth_modes(&self) -> &[ModeSet] {
        &self.truth_modes
    }

    pub fn metric(&self) -> EllipticalMetric {
        self.band.metric()
    }

    /// Uniform draw over the grid's bounding box.
    pub fn random_location<R: Rng + ?Sized>(&self, rng: &mut R) -> Location {
        let (r0, r1) = self.grid.range_span();
        let (d0, d1) = self.grid.depth_span();
        Location::new(r0 + (r1 - r0) * rng.random::<f64>(), d0 + (d1 - d0) * rng.random::<f64>())
    }

    /// Noise-free `α_k G_k(r₀)` in the truth environment.
    pub fn clean_signal(&self, location: Location) -> Result<Vec<Vec<C64>>> {
        self.truth_modes
            .iter()
            .zip(&self.amplitudes)
            .map(|(m, &a)| {
                let g = greens_vector(m, &self.truth_environment, &self.array, location)?;
                Ok(g.into_iter().map(|z| a * z).collect())
            })
            .collect()
    }

    /// Observations at `location` with noise scaled to `snr_db`, or clean
    /// when `snr_db` is `None`. Returns the data and the noise variance.
    pub fn observe(&self, location: Location, snr_db: Option<f64>, noise_seed: u64) -> Result<(Vec<Vec<C64>>, f64)> {
        let mut ys = self.clean_signal(location)?;
        let variance = match snr_db {
            None => return Ok((ys, 0.0)),
            Some(snr) => {
                let unit = vec![C64::new(1.0, 0.0); ys.len()];
                sigma_for_snr_with_greens(snr, &unit, &ys)?
            }
        };
        let noise = NoiseModel::new(variance)?;
        let mut rng = rng_from_seed(noise_seed);
        for y in &mut ys {
            for z in y.iter_mut() {
                *z += noise.sample(&mut rng);
            }
        }
        Ok((ys, variance))
    }

    /// One M×N projection per frequency, seeded from `seed` and the
    /// frequency index, applied to the replica fields.
    pub fn draw_encoders(&self, m: usize, seed: u64) -> Result<Vec<Encoder>> {
        self.fields
            .iter()
            .enumerate()
            .map(|(k, field)| {
                let phi = draw_encoder(m, self.array.len(), derive_seed(seed, &[k as u64]))?;
                compress_field(&phi, field)
            })
            .collect()
    }

    /// Surface for `estimator`. Compressive estimators need `encoders`.
    pub fn surface(&self, estimator: Estimator, ys: &[Vec<C64>], encoders: Option<&[Encoder]>) -> Result<AmbiguitySurface> {
        match estimator {
            Estimator::Compressive { m } => {
                let encoders = encoders.ok_or_else(|| {
                    Error::InvalidParameter("compressive estimator needs encoders".into())
                })?;
                if encoders.iter().any(|e| e.rows() != m) {
                    return Err(Error::InvalidParameter(format!(
                        "encoders do not have M = {m} rows"
                    )));
                }
                if encoders.len() != ys.len() {
                    return Err(Error::DimensionMismatch {
                        expected: ys.len(),
                        found: encoders.len(),
                    });
                }
                let phi_ys = ys
                    .iter()
                    .zip(encoders)
                    .map(|(y, e)| e.compress(y))
                    .collect::<Result<Vec<_>>>()?;
                match self.band {
                    Band::Narrowband => surface_narrowband_compressive(&phi_ys[0], &encoders[0]),
                    Band::Incoherent => surface_broadband_compressive(&phi_ys, encoders, false, &self.amplitudes),
                    Band::Coherent => surface_broadband_compressive(&phi_ys, encoders, true, &self.amplitudes),
                }
            }
            Estimator::Normalized | Estimator::Unnormalized => {
                let normalized = estimator == Estimator::Normalized;
                match self.band {
                    Band::Narrowband => surface_narrowband(&ys[0], &self.fields[0], normalized),
                    Band::Incoherent => surface_broadband(ys, &self.fields, false, normalized, &self.amplitudes),
                    Band::Coherent => surface_broadband(ys, &self.fields, true, normalized, &self.amplitudes),
                }
            }
        }
    }
}

fn solve_all(env: &Environment, frequencies_hz: &[f64]) -> Result<Vec<ModeSet>> {
    frequencies_hz
        .iter()
        .map(|&f| {
            let modes = solve_modes(env, f)?;
            if modes.is_degenerate() {
                Err(Error::DegenerateModes { frequency_hz: f })
            } else {
                Ok(modes)
            }
        })
        .collect()
}

/// One localization outcome. Flat so it serializes to a CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub location_index: usize,
    pub draw: usize,
    pub variant: Variant,
    pub m: Option<usize>,
    pub snr_db: Option<f64>,
    pub true_range: f64,
    pub true_depth: f64,
    pub estimated_range: f64,
    pub estimated_depth: f64,
    pub elliptical_error: f64,
    pub euclidean_error: f64,
    pub noise_seed: u64,
    pub encoder_seed: Option<u64>,
    /// Replica water sound speed, mismatch study only.
    pub replica_speed: Option<f64>,
    /// Main-lobe to side-lobe ratio, lobe study only.
    pub lobe_ratio_db: Option<f64>,
}

impl TrialRecord {
    pub fn truth(&self) -> Location {
        Location::new(self.true_range, self.true_depth)
    }

    pub fn estimate(&self) -> Location {
        Location::new(self.estimated_range, self.estimated_depth)
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn record(
    trial: usize,
    location_index: usize,
    draw: usize,
    variant: Variant,
    m: Option<usize>,
    snr_db: Option<f64>,
    truth: Location,
    estimate: Location,
    metric: EllipticalMetric,
    noise_seed: u64,
    encoder_seed: Option<u64>,
) -> TrialRecord {
    TrialRecord {
        trial,
        location_index,
        draw,
        variant,
        m,
        snr_db,
        true_range: truth.range,
        true_depth: truth.depth,
        estimated_range: estimate.range,
        estimated_depth: estimate.depth,
        elliptical_error: elliptical_distance(truth, estimate, metric),
        euclidean_error: euclidean_distance(truth, estimate),
        noise_seed,
        encoder_seed,
        replica_speed: None,
        lobe_ratio_db: None,
    }
}

/// Wilson score interval for `successes` out of `n` at 95% confidence.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    const Z: f64 = 1.959_963_984_540_054;
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Runs `job` over `0..n` on the current rayon pool, results in index order.
pub(crate) fn run_trials<T, F>(n: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n).into_par_iter().map(job).collect()
}
