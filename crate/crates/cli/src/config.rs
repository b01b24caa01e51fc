//! Run configuration: a single JSON file whose every block is optional.
//!
//! Missing blocks take the built-in defaults, so `{}` is a valid config.
//! Study blocks are partial objects merged over that study's defaults.

use std::path::{Path, PathBuf};

use cmfp_core::experiments::{
    frequency_band, ArraySpec, GridSpec, LobeStudyConfig, MismatchConfig, TailStudyConfig, TrackingConfig,
};
use cmfp_core::{Band, Environment, Location, ScenarioConfig, C64};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

/// Synthetic source used by `localize` when nothing else is given.
pub const DEFAULT_SOURCE: Location = Location::new(5135.0, 100.0);

/// Estimator family used by `localize`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Normalized,
    Unnormalized,
    Compressive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorBlock {
    pub kind: EstimatorKind,
    /// Rows of each projection; ignored by conventional estimators.
    pub m: usize,
    /// Known source amplitudes, one per frequency; unit when absent.
    pub alphas: Option<Vec<C64>>,
}

impl Default for EstimatorBlock {
    fn default() -> Self {
        Self {
            kind: EstimatorKind::Compressive,
            m: 2,
            alphas: None,
        }
    }
}

/// Either an SNR or an explicit noise variance; neither means noise-free.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseBlock {
    pub snr_db: Option<f64>,
    pub variance: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrequencyBlock {
    /// Explicit list; overrides the band default.
    pub list_hz: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizeBlock {
    /// Synthetic source position and the truth errors are reported against.
    /// With an observation CSV it is optional and only used for scoring.
    pub source: Option<Location>,
    /// CSV of observations (`freq_hz,element,re,im`) used instead of
    /// synthetic data.
    pub observations_csv: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyBlock {
    pub tail: Option<Value>,
    pub lobe: Option<Value>,
    pub mismatch: Option<Value>,
    pub tracking: Option<Value>,
}

/// The file as written by the user.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub band: Option<Band>,
    pub environment: Environment,
    /// Replica environment when it differs from the truth.
    pub replica_environment: Option<Environment>,
    pub array: ArraySpec,
    pub grid: Option<GridSpec>,
    pub frequencies: FrequencyBlock,
    pub estimator: EstimatorBlock,
    pub noise: NoiseBlock,
    pub localize: LocalizeBlock,
    pub study: StudyBlock,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Defaults to `<out>/cache`.
    pub cache_dir: Option<PathBuf>,
}

/// Which command a configuration is being resolved for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Precompute,
    Localize,
    Tail,
    Lobe,
    Mismatch,
    Tracking,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Precompute => "precompute",
            Target::Localize => "localize",
            Target::Tail => "tail",
            Target::Lobe => "lobe",
            Target::Mismatch => "mismatch",
            Target::Tracking => "tracking",
        }
    }

    /// Band used when the config does not name one.
    pub fn default_band(self) -> Band {
        match self {
            Target::Tail | Target::Lobe => Band::Narrowband,
            _ => Band::Coherent,
        }
    }
}

/// A study's parameters with defaults and overrides applied.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum StudyParams {
    Tail(TailStudyConfig),
    Lobe(LobeStudyConfig),
    Mismatch(MismatchConfig),
    Tracking(TrackingConfig),
}

/// Everything a command needs, fully defaulted. This is what `--dry-run`
/// prints.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Resolved {
    pub command: Target,
    pub scenario: ScenarioConfig,
    pub estimator: EstimatorBlock,
    pub noise: NoiseBlock,
    pub localize: Option<LocalizeBlock>,
    pub study: Option<StudyParams>,
    pub seed: u64,
    pub out: PathBuf,
    pub cache_dir: PathBuf,
}

/// Parses `text`, reporting syntax and schema errors as `path:line:column`.
pub fn parse(text: &str, origin: &Path) -> Result<RunConfig, CliError> {
    serde_json::from_str(text).map_err(|e| {
        CliError::Config(format!("{}:{}:{}: {}", origin.display(), e.line(), e.column(), strip_position(&e)))
    })
}

/// serde_json appends " at line L column C"; the prefix already says so.
fn strip_position(e: &serde_json::Error) -> String {
    let s = e.to_string();
    match s.rfind(" at line ") {
        Some(i) => s[..i].to_string(),
        None => s,
    }
}

pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("{}: cannot read config: {e}", p.display())))?;
            parse(&text, p)
        }
    }
}

/// Overlays the keys of `overrides` on the serialized defaults.
fn merge<T: Serialize + DeserializeOwned>(defaults: &T, overrides: Option<&Value>, block: &str) -> Result<T, CliError> {
    let mut base = serde_json::to_value(defaults).expect("defaults serialize");
    if let Some(o) = overrides {
        let Value::Object(o) = o else {
            return Err(CliError::Config(format!("study.{block}: expected an object")));
        };
        let target: &mut Map<String, Value> = base.as_object_mut().expect("study configs are objects");
        for (k, v) in o {
            if !target.contains_key(k) {
                return Err(CliError::Config(format!("study.{block}: unknown field `{k}`")));
            }
            target.insert(k.clone(), v.clone());
        }
    }
    serde_json::from_value(base).map_err(|e| CliError::Config(format!("study.{block}: {e}")))
}

impl RunConfig {
    pub fn resolve(&self, command: Target, seed_override: Option<u64>, out_override: Option<&Path>) -> Result<Resolved, CliError> {
        let band = self.band.unwrap_or(command.default_band());
        let seed = seed_override.unwrap_or(self.seed);
        let out = out_override
            .map(Path::to_path_buf)
            .or_else(|| self.out.clone())
            .unwrap_or_else(|| PathBuf::from("cmfp-out"));
        let cache_dir = self.cache_dir.clone().unwrap_or_else(|| out.join("cache"));

        let frequencies_hz = match (&self.frequencies.list_hz, band) {
            (Some(list), _) => list.clone(),
            (None, Band::Narrowband) => vec![150.0],
            (None, _) => frequency_band(141.0, 160.0, 20),
        };
        if let Some(a) = &self.estimator.alphas {
            if a.len() != frequencies_hz.len() {
                return Err(CliError::Config(format!(
                    "estimator.alphas: {} amplitudes for {} frequencies",
                    a.len(),
                    frequencies_hz.len()
                )));
            }
        }
        if self.noise.snr_db.is_some() && self.noise.variance.is_some() {
            return Err(CliError::Config("noise: give snr_db or variance, not both".into()));
        }
        let scenario = ScenarioConfig {
            band,
            environment: self.environment.clone(),
            replica_environment: self.replica_environment.clone(),
            array: self.array.clone(),
            grid: self.grid.clone().unwrap_or_else(|| GridSpec::for_band(band)),
            frequencies_hz,
            amplitudes: self.estimator.alphas.clone(),
        };

        let study = match command {
            Target::Tail => {
                let mut c: TailStudyConfig = merge(&TailStudyConfig::for_band(band), self.study.tail.as_ref(), "tail")?;
                c.seed = seed;
                Some(StudyParams::Tail(c))
            }
            Target::Lobe => {
                let mut c: LobeStudyConfig = merge(&LobeStudyConfig::for_band(band), self.study.lobe.as_ref(), "lobe")?;
                c.seed = seed;
                Some(StudyParams::Lobe(c))
            }
            Target::Mismatch => {
                let mut c: MismatchConfig = merge(&MismatchConfig::default(), self.study.mismatch.as_ref(), "mismatch")?;
                c.seed = seed;
                Some(StudyParams::Mismatch(c))
            }
            Target::Tracking => {
                let mut c: TrackingConfig = merge(&TrackingConfig::default(), self.study.tracking.as_ref(), "tracking")?;
                c.seed = seed;
                Some(StudyParams::Tracking(c))
            }
            Target::Precompute | Target::Localize => None,
        };
        let localize = (command == Target::Localize).then(|| {
            let mut l = self.localize.clone();
            if l.source.is_none() && l.observations_csv.is_none() {
                l.source = Some(DEFAULT_SOURCE);
            }
            l
        });

        Ok(Resolved {
            command,
            scenario,
            estimator: self.estimator.clone(),
            noise: self.noise.clone(),
            localize,
            study,
            seed,
            out,
            cache_dir,
        })
    }
}
