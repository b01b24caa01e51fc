//! Synthetic array observations `Y_k = α_k G_k(r₀) + Z_k` and SNR bookkeeping.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm_sqr, C64};
use crate::seeds::rng_from_seed;
use crate::waveguide::{greens_vector, solve_modes, Environment, Location, ModeSet, ReceiverArray};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub location: Location,
    /// Complex source amplitude `α_k` per frequency.
    pub amplitudes: Vec<C64>,
}

impl SourceSpec {
    /// Unit amplitude at each of `frequency_count` frequencies.
    pub fn unit(location: Location, frequency_count: usize) -> Self {
        Self {
            location,
            amplitudes: vec![C64::new(1.0, 0.0); frequency_count],
        }
    }
}

/// Circular complex Gaussian noise: real and imaginary parts are
/// independent with variance `σ²/2` each.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    variance: f64,
}

impl NoiseModel {
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance >= 0.0 && variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be finite and non-negative, got {variance}"
            )));
        }
        Ok(Self { variance })
    }

    pub fn noiseless() -> Self {
        Self { variance: 0.0 }
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> C64 {
        let s = (self.variance / 2.0).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(s * re, s * im)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub frequency_hz: f64,
    pub data: Vec<C64>,
    pub noise_variance: f64,
    pub rng_seed: u64,
}

/// Noisy observations from precomputed mode sets, one per frequency.
///
/// A single ChaCha stream seeded with `seed` supplies the noise for all
/// frequencies in order, so the result depends only on the inputs.
pub fn synthesize_with_modes(
    source: &SourceSpec,
    modes: &[ModeSet],
    env: &Environment,
    array: &ReceiverArray,
    noise: NoiseModel,
    seed: u64,
) -> Result<Vec<Observation>> {
    if modes.is_empty() {
        return Err(Error::InvalidParameter("at least one frequency is required".into()));
    }
    if source.amplitudes.len() != modes.len() {
        return Err(Error::DimensionMismatch {
            expected: modes.len(),
            found: source.amplitudes.len(),
        });
    }
    let mut rng = rng_from_seed(seed);
    modes
        .iter()
        .zip(&source.amplitudes)
        .map(|(m, &alpha)| {
            let g = greens_vector(m, env, array, source.location)?;
            let data = g
                .iter()
                .map(|&gn| alpha * gn + noise.sample(&mut rng))
                .collect();
            Ok(Observation {
                frequency_hz: m.frequency_hz(),
                data,
                noise_variance: noise.variance(),
                rng_seed: seed,
            })
        })
        .collect()
}

/// Like [`synthesize_with_modes`], solving the modes first.
pub fn synthesize(
    source: &SourceSpec,
    env: &Environment,
    array: &ReceiverArray,
    frequencies_hz: &[f64],
    noise: NoiseModel,
    seed: u64,
) -> Result<Vec<Observation>> {
    let modes = frequencies_hz
        .iter()
        .map(|&f| solve_modes(env, f))
        .collect::<Result<Vec<_>>>()?;
    synthesize_with_modes(source, &modes, env, array, noise, seed)
}

/// Mean signal power per complex sample, `Σ_k |α_k|² ‖G_k‖² / (K N)`.
pub fn signal_power(amplitudes: &[C64], greens: &[Vec<C64>]) -> Result<f64> {
    if greens.is_empty() || amplitudes.len() != greens.len() {
        return Err(Error::DimensionMismatch {
            expected: greens.len().max(1),
            found: amplitudes.len(),
        });
    }
    let n = greens[0].len();
    let total: f64 = amplitudes
        .iter()
        .zip(greens)
        .map(|(a, g)| a.norm_sqr() * norm_sqr(g))
        .sum();
    Ok(total / (greens.len() * n) as f64)
}

/// `10 log10(Σ|α_k|²‖G_k‖² / (K N σ²))`; with one frequency this is the
/// single-frequency definition.
pub fn snr_db(noise_variance: f64, amplitudes: &[C64], greens: &[Vec<C64>]) -> Result<f64> {
    Ok(10.0 * (signal_power(amplitudes, greens)? / noise_variance).log10())
}

/// Noise variance giving `target_snr_db` for the given signal.
pub fn sigma_for_snr_with_greens(target_snr_db: f64, amplitudes: &[C64], greens: &[Vec<C64>]) -> Result<f64> {
    if !target_snr_db.is_finite() {
        return Err(Error::InvalidParameter("target SNR must be finite".into()));
    }
    let power = signal_power(amplitudes, greens)?;
    if power <= 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(power / 10f64.powf(target_snr_db / 10.0))
}

/// Noise variance giving `target_snr_db` for `source` seen by `array`.
pub fn sigma_for_snr(
    target_snr_db: f64,
    source: &SourceSpec,
    env: &Environment,
    array: &ReceiverArray,
    frequencies_hz: &[f64],
) -> Result<f64> {
    let greens = frequencies_hz
        .iter()
        .map(|&f| greens_vector(&solve_modes(env, f)?, env, array, source.location))
        .collect::<Result<Vec<_>>>()?;
    sigma_for_snr_with_greens(target_snr_db, &source.amplitudes, &greens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_model_rejects_negative_variance() {
        assert!(NoiseModel::new(-1.0).is_err());
        assert!(NoiseModel::new(f64::NAN).is_err());
        assert_eq!(NoiseModel::new(0.0).unwrap(), NoiseModel::noiseless());
    }

    #[test]
    fn zero_signal_has_no_snr_inverse() {
        let g = vec![vec![C64::new(0.0, 0.0); 4]];
        assert!(matches!(
            sigma_for_snr_with_greens(10.0, &[C64::new(1.0, 0.0)], &g),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn amplitude_count_must_match_frequencies() {
        let env = Environment::default();
        let array = ReceiverArray::default();
        let source = SourceSpec::unit(Location::new(5100.0, 50.0), 2);
        assert!(synthesize(&source, &env, &array, &[150.0], NoiseModel::noiseless(), 1).is_err());
    }
}
