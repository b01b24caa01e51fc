//! Oracles shared by the integration tests. Deliberately written without
//! calling into the library's own root finder or characteristic function.

#![allow(dead_code)]

use cmfp_core::Environment;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Pekeris characteristic function written out from the boundary
/// conditions: pressure and normal velocity continuous at z = H.
pub fn pekeris_f(env: &Environment, freq_hz: f64, gamma: f64) -> f64 {
    let omega = 2.0 * std::f64::consts::PI * freq_hz;
    let kw = omega / env.water_sound_speed;
    let kb = omega / env.bottom_sound_speed;
    let delta = (kw * kw - kb * kb - gamma * gamma).max(0.0).sqrt();
    let h = env.depth;
    (env.bottom_density / env.water_density) * (gamma * h).cos() + delta * (gamma * h).sin() / gamma
}

pub fn gamma_max(env: &Environment, freq_hz: f64) -> f64 {
    let omega = 2.0 * std::f64::consts::PI * freq_hz;
    ((omega / env.water_sound_speed).powi(2) - (omega / env.bottom_sound_speed).powi(2)).sqrt()
}

/// Sign changes of the characteristic function on a uniform grid of
/// `points` samples over `(0, γ_max]`.
pub fn dense_scan_count(env: &Environment, freq_hz: f64, points: usize) -> usize {
    let gmax = gamma_max(env, freq_hz);
    let mut prev = pekeris_f(env, freq_hz, gmax / points as f64);
    let mut count = 0;
    for i in 2..=points {
        let v = pekeris_f(env, freq_hz, gmax * i as f64 / points as f64);
        if v != 0.0 && prev != 0.0 && v.signum() != prev.signum() {
            count += 1;
        }
        if v != 0.0 {
            prev = v;
        }
    }
    count
}

/// Plausible shallow-water environments around the default.
pub fn random_environment<R: Rng>(rng: &mut R) -> Environment {
    let water = rng.random_range(1450.0..1550.0);
    let water_density = 1000.0;
    Environment {
        depth: rng.random_range(100.0..300.0),
        water_sound_speed: water,
        bottom_sound_speed: water + rng.random_range(30.0..400.0),
        water_density,
        bottom_density: water_density * rng.random_range(1.1..2.5),
    }
}

/// `|a − b| ≤ tol · max(|a|, |b|)`.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Largest pointwise relative difference between two value slices.
pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let scale = x.abs().max(y.abs());
            if scale == 0.0 {
                0.0
            } else {
                (x - y).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}
