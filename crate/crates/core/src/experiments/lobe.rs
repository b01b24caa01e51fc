//! Main-lobe to side-lobe ratio versus the number of projections.

use serde::{Deserialize, Serialize};

use super::{
    elliptical_distance, median, record, run_trials, Band, EllipticalMetric, Estimator, Scenario, TrialRecord,
};
use crate::ambiguity::{locate, AmbiguitySurface, Variant};
use crate::error::{Error, Result};
use crate::seeds::{derive_seed, rng_from_seed, STREAM_ENCODER, STREAM_LOCATION, STREAM_NOISE};
use crate::waveguide::{Location, SearchGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LobeStudyConfig {
    pub m_values: Vec<usize>,
    pub n_locations: usize,
    pub n_encoder_draws: usize,
    /// `None` synthesizes noise-free data.
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl LobeStudyConfig {
    pub fn for_band(_band: Band) -> Self {
        Self {
            m_values: vec![2, 5, 10, 20, 37],
            n_locations: 100,
            n_encoder_draws: 5,
            snr_db: Some(16.0),
            seed: 0,
        }
    }
}

/// `10 log10(max over the grid / max outside the exclusion ellipse)` of a
/// power surface, which is the same as `20 log10` of the magnitude ratio.
///
/// The ellipse is centred on `center` and contains every grid point within
/// one unit of `exclusion`.
pub fn lobe_ratio_db(
    surface: &AmbiguitySurface,
    grid: &SearchGrid,
    center: Location,
    exclusion: EllipticalMetric,
) -> Result<f64> {
    exclusion.validate()?;
    let values = surface.values();
    let unusable = surface.unusable();
    let mut main = f64::NEG_INFINITY;
    let mut side = f64::NEG_INFINITY;
    for (j, &v) in values.iter().enumerate() {
        if unusable.contains(&j) {
            continue;
        }
        main = main.max(v);
        if elliptical_distance(grid.location(j), center, exclusion) > 1.0 {
            side = side.max(v);
        }
    }
    if side == f64::NEG_INFINITY {
        return Err(Error::EmptyExclusionComplement);
    }
    if main <= 0.0 || side <= 0.0 {
        return Err(Error::NonFinite("lobe ratio of a surface with zero peak"));
    }
    Ok(10.0 * (main / side).log10())
}

/// Median ratio for one estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LobeRow {
    pub variant: Variant,
    pub m: Option<usize>,
    pub trials: usize,
    pub median_ratio_db: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LobeStudy {
    pub band: Band,
    pub records: Vec<TrialRecord>,
    /// Conventional reference first, then one row per `M` in config order.
    pub rows: Vec<LobeRow>,
}

impl LobeStudy {
    pub fn reference(&self) -> &LobeRow {
        &self.rows[0]
    }

    pub fn row(&self, m: usize) -> Option<&LobeRow> {
        self.rows.iter().find(|r| r.m == Some(m))
    }
}

/// For each trial the ellipse is centred on the normalized conventional
/// peak, and the same data and centre are used for every `M`.
pub fn run_lobe_study(scenario: &Scenario, config: &LobeStudyConfig) -> Result<LobeStudy> {
    let band = scenario.band();
    if band == Band::Incoherent {
        return Err(Error::InvalidParameter(
            "the lobe study supports narrowband and coherent bands".into(),
        ));
    }
    if config.n_locations == 0 || config.n_encoder_draws == 0 {
        return Err(Error::InvalidParameter("trial counts must be positive".into()));
    }
    let n_elements = scenario.array().len();
    if let Some(&m) = config.m_values.iter().find(|&&m| m == 0 || m > n_elements) {
        return Err(Error::InvalidProjection { m, n: n_elements });
    }
    let exclusion = band.lobe_exclusion();
    let metric = scenario.metric();
    let grid = scenario.grid();
    let seed = config.seed;
    let n_trials = config.n_locations * config.n_encoder_draws;

    let per_trial = run_trials(n_trials, |t| {
        let (i, j) = (t / config.n_encoder_draws, t % config.n_encoder_draws);
        let truth = scenario.random_location(&mut rng_from_seed(derive_seed(seed, &[STREAM_LOCATION, i as u64])));
        let noise_seed = derive_seed(seed, &[STREAM_NOISE, i as u64, j as u64]);
        let (ys, _) = scenario.observe(truth, config.snr_db, noise_seed)?;

        let conventional = scenario.surface(Estimator::Normalized, &ys, None)?;
        let center = locate(&conventional, grid)?;
        let mut reference = record(
            t,
            i,
            j,
            band.variant(Estimator::Normalized),
            None,
            config.snr_db,
            truth,
            center,
            metric,
            noise_seed,
            None,
        );
        reference.lobe_ratio_db = Some(lobe_ratio_db(&conventional, grid, center, exclusion)?);
        let mut out = vec![reference];

        for &m in &config.m_values {
            let encoder_seed = derive_seed(seed, &[STREAM_ENCODER, i as u64, j as u64, m as u64]);
            let encoders = scenario.draw_encoders(m, encoder_seed)?;
            let estimator = Estimator::Compressive { m };
            let surface = scenario.surface(estimator, &ys, Some(&encoders))?;
            let mut r = record(
                t,
                i,
                j,
                band.variant(estimator),
                Some(m),
                config.snr_db,
                truth,
                locate(&surface, grid)?,
                metric,
                noise_seed,
                Some(encoder_seed),
            );
            r.lobe_ratio_db = Some(lobe_ratio_db(&surface, grid, center, exclusion)?);
            out.push(r);
        }
        Ok(out)
    })?;
    let records: Vec<TrialRecord> = per_trial.into_iter().flatten().collect();

    let row = |variant: Variant, m: Option<usize>| {
        let ratios: Vec<f64> = records
            .iter()
            .filter(|r| r.variant == variant && r.m == m)
            .filter_map(|r| r.lobe_ratio_db)
            .collect();
        LobeRow {
            variant,
            m,
            trials: ratios.len(),
            median_ratio_db: median(&ratios),
        }
    };
    let mut rows = vec![row(band.variant(Estimator::Normalized), None)];
    for &m in &config.m_values {
        rows.push(row(band.variant(Estimator::Compressive { m }), Some(m)));
    }
    Ok(LobeStudy { band, records, rows })
}
