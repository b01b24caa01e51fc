//! Pekeris waveguide: an isovelocity water layer of depth `H` with a
//! pressure-release surface over a faster, denser fluid half-space.
//!
//! Trapped modes are found in terms of the vertical wavenumber `γ` in the
//! water, `γ ∈ (0, γ_max)` with `γ_max² = (ω/c_w)² − (ω/c_b)²`. The water
//! shape is `sin(γ z)` and the bottom decays as `e^{−δ (z − H)}` with
//! `δ² = γ_max² − γ²`. Continuity of pressure and of `ρ⁻¹ ∂p/∂z` at the
//! bottom gives the characteristic function
//!
//! ```text
//! f(γ) = (ρ_b/ρ_w) cos(γ H) + δ sin(γ H) / γ
//! ```
//!
//! whose zeros are simple, one per interval `((m − ½)π/H, mπ/H)`.
//!
//! The Green's function is the far-field modal sum
//! `g(r, z_s, z_r) = Σ_m ψ_m(z_s) ψ_m(z_r) e^{i k_m r} / √(k_m r)`
//! with density-weighted unit-norm mode shapes. The global constant of the
//! exact point-source solution is fixed to 1.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ColumnMatrix, C64};

/// A point in the range/depth plane, in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub range: f64,
    pub depth: f64,
}

impl Location {
    pub const fn new(range: f64, depth: f64) -> Self {
        Self { range, depth }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Environment {
    /// Water depth `H` (m).
    pub depth: f64,
    /// Sound speed in the water column (m/s).
    pub water_sound_speed: f64,
    /// Sound speed in the bottom half-space (m/s).
    pub bottom_sound_speed: f64,
    /// kg/m³
    pub water_density: f64,
    /// kg/m³
    pub bottom_density: f64,
}

impl Default for Environment {
    /// 200 m of 1520 m/s water over a 1700 m/s bottom with density ratio 1.5.
    fn default() -> Self {
        Self {
            depth: 200.0,
            water_sound_speed: 1520.0,
            bottom_sound_speed: 1700.0,
            water_density: 1000.0,
            bottom_density: 1500.0,
        }
    }
}

impl Environment {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidEnvironment(msg));
        let all = [
            self.depth,
            self.water_sound_speed,
            self.bottom_sound_speed,
            self.water_density,
            self.bottom_density,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite".into());
        }
        if self.depth <= 0.0 {
            return bad(format!("depth must be positive, got {}", self.depth));
        }
        if self.water_sound_speed <= 0.0 {
            return bad(format!(
                "water sound speed must be positive, got {}",
                self.water_sound_speed
            ));
        }
        if self.bottom_sound_speed <= self.water_sound_speed {
            return bad(format!(
                "bottom sound speed ({}) must exceed water sound speed ({})",
                self.bottom_sound_speed, self.water_sound_speed
            ));
        }
        if self.water_density <= 0.0 || self.bottom_density <= 0.0 {
            return bad("densities must be positive".into());
        }
        Ok(())
    }

    pub fn with_water_sound_speed(&self, speed: f64) -> Self {
        Self {
            water_sound_speed: speed,
            ..self.clone()
        }
    }

    pub fn density_ratio(&self) -> f64 {
        self.bottom_density / self.water_density
    }

    /// `γ_max = √((ω/c_w)² − (ω/c_b)²)`.
    pub fn cutoff_gamma(&self, omega: f64) -> f64 {
        let kw = omega / self.water_sound_speed;
        let kb = omega / self.bottom_sound_speed;
        (kw * kw - kb * kb).sqrt()
    }
}

/// The characteristic function `f(γ)` at angular frequency `omega`.
pub fn characteristic(env: &Environment, omega: f64, gamma: f64) -> f64 {
    let gmax = env.cutoff_gamma(omega);
    let delta = (gmax * gmax - gamma * gamma).max(0.0).sqrt();
    let h = env.depth;
    let sinc = if gamma == 0.0 { h } else { (gamma * h).sin() / gamma };
    env.density_ratio() * (gamma * h).cos() + delta * sinc
}

/// `df/dγ`, valid for `0 < γ < γ_max`.
pub fn characteristic_derivative(env: &Environment, omega: f64, gamma: f64) -> f64 {
    let gmax = env.cutoff_gamma(omega);
    let delta = (gmax * gmax - gamma * gamma).max(0.0).sqrt();
    let h = env.depth;
    let (s, c) = (gamma * h).sin_cos();
    let sinc = s / gamma;
    let dsinc = (gamma * h * c - s) / (gamma * gamma);
    let ddelta = -gamma / delta;
    -env.density_ratio() * h * s + ddelta * sinc + delta * dsinc
}

/// Dimensionless root residual `|f(γ)| / (|f'(γ)| γ)`: the relative
/// distance in `γ` to the true root, to first order.
pub fn dispersion_residual(env: &Environment, omega: f64, gamma: f64) -> f64 {
    let f = characteristic(env, omega, gamma);
    let df = characteristic_derivative(env, omega, gamma);
    f.abs() / (df.abs() * gamma)
}

/// Trapped modes of a Pekeris waveguide at one frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSet {
    frequency_hz: f64,
    angular_frequency: f64,
    waveguide_depth: f64,
    horizontal_wavenumbers: Vec<f64>,
    vertical_wavenumbers: Vec<f64>,
    decay_rates: Vec<f64>,
    mode_norms: Vec<f64>,
}

impl ModeSet {
    pub fn frequency_hz(&self) -> f64 {
        self.frequency_hz
    }

    pub fn angular_frequency(&self) -> f64 {
        self.angular_frequency
    }

    /// `k_m`, strictly decreasing.
    pub fn horizontal_wavenumbers(&self) -> &[f64] {
        &self.horizontal_wavenumbers
    }

    /// `γ_m`, strictly increasing.
    pub fn vertical_wavenumbers(&self) -> &[f64] {
        &self.vertical_wavenumbers
    }

    /// Bottom decay rates `δ_m`.
    pub fn decay_rates(&self) -> &[f64] {
        &self.decay_rates
    }

    /// `∫ sin²(γ_m z)/ρ(z) dz` over the whole column, before normalization.
    pub fn mode_norms(&self) -> &[f64] {
        &self.mode_norms
    }

    pub fn mode_count(&self) -> usize {
        self.horizontal_wavenumbers.len()
    }

    /// True when the frequency is below the first mode cutoff.
    pub fn is_degenerate(&self) -> bool {
        self.horizontal_wavenumbers.is_empty()
    }

    /// Keeps only the first `count` modes.
    pub fn truncated(&self, count: usize) -> Self {
        let n = count.min(self.mode_count());
        Self {
            horizontal_wavenumbers: self.horizontal_wavenumbers[..n].to_vec(),
            vertical_wavenumbers: self.vertical_wavenumbers[..n].to_vec(),
            decay_rates: self.decay_rates[..n].to_vec(),
            mode_norms: self.mode_norms[..n].to_vec(),
            ..self.clone()
        }
    }

    /// Normalized shape of mode `m` at depth `z`.
    #[inline]
    pub fn mode_shape(&self, m: usize, z: f64) -> f64 {
        let gamma = self.vertical_wavenumbers[m];
        let scale = self.mode_norms[m].sqrt().recip();
        if z <= self.waveguide_depth {
            (gamma * z).sin() * scale
        } else {
            (gamma * self.waveguide_depth).sin()
                * (-self.decay_rates[m] * (z - self.waveguide_depth)).exp()
                * scale
        }
    }

    /// All mode shapes at depth `z`.
    pub fn shapes_at(&self, z: f64) -> Vec<f64> {
        (0..self.mode_count()).map(|m| self.mode_shape(m, z)).collect()
    }

    /// Per-mode far-field factors `e^{i k r} / √(k r)`.
    pub fn range_factors(&self, range: f64) -> Vec<C64> {
        self.horizontal_wavenumbers
            .iter()
            .map(|&k| {
                let kr = k * range;
                C64::from_polar(kr.sqrt().recip(), kr)
            })
            .collect()
    }
}

/// Finds every trapped mode by scanning `f(γ)` for sign changes on
/// `(0, γ_max)` and bisecting each bracket.
///
/// Below the first cutoff the returned set is empty; see
/// [`ModeSet::is_degenerate`].
pub fn solve_modes(env: &Environment, frequency_hz: f64) -> Result<ModeSet> {
    env.validate()?;
    if !(frequency_hz > 0.0 && frequency_hz.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "frequency must be positive and finite, got {frequency_hz}"
        )));
    }
    let omega = 2.0 * PI * frequency_hz;
    let h = env.depth;
    let gmax = env.cutoff_gamma(omega);
    let f = |g: f64| characteristic(env, omega, g);

    // Roots are at least π/(2H) apart; 64 samples per π/H is plenty.
    let samples = ((64.0 * gmax * h / PI).ceil() as usize).max(64);
    let mut gammas = Vec::new();
    let mut lo = 0.0;
    let mut f_lo = f(0.0);
    for i in 1..=samples {
        let g = if i == samples {
            gmax
        } else {
            gmax * i as f64 / samples as f64
        };
        let f_g = f(g);
        if f_g == 0.0 {
            if i < samples {
                gammas.push(g);
                // Step past the exact root so the next bracket starts clean.
                lo = g;
                f_lo = -f_lo;
            }
            continue;
        }
        if f_lo.signum() != f_g.signum() {
            gammas.push(bisect(&f, lo, g, f_lo));
        }
        lo = g;
        f_lo = f_g;
    }

    let kw = omega / env.water_sound_speed;
    let kb = omega / env.bottom_sound_speed;
    let rho_w = env.water_density;
    let rho_b = env.bottom_density;
    let mut horizontal = Vec::with_capacity(gammas.len());
    let mut decay = Vec::with_capacity(gammas.len());
    let mut norms = Vec::with_capacity(gammas.len());
    for &g in &gammas {
        let k = (kw * kw - g * g).sqrt();
        let delta = (k * k - kb * kb).sqrt();
        let water = (h / 2.0 - (2.0 * g * h).sin() / (4.0 * g)) / rho_w;
        let bottom = (g * h).sin().powi(2) / (2.0 * delta * rho_b);
        horizontal.push(k);
        decay.push(delta);
        norms.push(water + bottom);
    }

    Ok(ModeSet {
        frequency_hz,
        angular_frequency: omega,
        waveguide_depth: h,
        horizontal_wavenumbers: horizontal,
        vertical_wavenumbers: gammas,
        decay_rates: decay,
        mode_norms: norms,
    })
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    let mut f_hi = f(hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    // `hi` may sit on the cutoff; prefer the interior endpoint on ties.
    if f_hi.abs() < f_lo.abs() && hi > lo {
        hi
    } else {
        lo
    }
}

/// Candidate source locations: the tensor product of `ranges` and `depths`.
///
/// Flat index `j = i_depth * ranges.len() + i_range`, so a surface reshaped
/// to `depths.len()` rows by `ranges.len()` columns reads like a
/// range/depth image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    ranges: Vec<f64>,
    depths: Vec<f64>,
}

impl SearchGrid {
    pub fn new(ranges: Vec<f64>, depths: Vec<f64>) -> Result<Self> {
        let strictly_ascending = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if ranges.is_empty() || depths.is_empty() {
            return Err(Error::InvalidGrid("grid must have at least one range and depth".into()));
        }
        if ranges.iter().chain(&depths).any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite coordinate".into()));
        }
        if !strictly_ascending(&ranges) || !strictly_ascending(&depths) {
            return Err(Error::InvalidGrid("coordinates must be strictly ascending".into()));
        }
        if ranges[0] <= 0.0 {
            return Err(Error::InvalidGrid("ranges must be positive".into()));
        }
        if depths[0] <= 0.0 {
            return Err(Error::InvalidGrid("depths must be positive".into()));
        }
        Ok(Self { ranges, depths })
    }

    /// `range_count` by `depth_count` equispaced points spanning both
    /// closed intervals.
    pub fn equispaced(
        range_span: (f64, f64),
        range_count: usize,
        depth_span: (f64, f64),
        depth_count: usize,
    ) -> Result<Self> {
        Self::new(
            linspace(range_span.0, range_span.1, range_count),
            linspace(depth_span.0, depth_span.1, depth_count),
        )
    }

    pub fn validate_for(&self, env: &Environment) -> Result<()> {
        if *self.depths.last().unwrap() >= env.depth {
            return Err(Error::InvalidGrid(format!(
                "grid depths must lie inside the water column (0, {})",
                env.depth
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ranges.len() * self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ranges(&self) -> &[f64] {
        &self.ranges
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    pub fn index(&self, i_range: usize, i_depth: usize) -> usize {
        i_depth * self.ranges.len() + i_range
    }

    /// `(i_range, i_depth)` of flat index `j`.
    pub fn split_index(&self, j: usize) -> (usize, usize) {
        (j % self.ranges.len(), j / self.ranges.len())
    }

    pub fn location(&self, j: usize) -> Location {
        let (ir, id) = self.split_index(j);
        Location::new(self.ranges[ir], self.depths[id])
    }

    pub fn locations(&self) -> impl Iterator<Item = Location> + '_ {
        (0..self.len()).map(move |j| self.location(j))
    }

    /// Average spacing; zero on a single-point axis.
    pub fn range_spacing(&self) -> f64 {
        spacing(&self.ranges)
    }

    pub fn depth_spacing(&self) -> f64 {
        spacing(&self.depths)
    }

    /// Diagonal of one grid cell.
    pub fn cell_diagonal(&self) -> f64 {
        self.range_spacing().hypot(self.depth_spacing())
    }

    pub fn range_span(&self) -> (f64, f64) {
        (self.ranges[0], *self.ranges.last().unwrap())
    }

    pub fn depth_span(&self) -> (f64, f64) {
        (self.depths[0], *self.depths.last().unwrap())
    }

    /// True when `loc` lies in the closed bounding box of the grid.
    pub fn contains(&self, loc: Location) -> bool {
        let (r0, r1) = self.range_span();
        let (d0, d1) = self.depth_span();
        (r0..=r1).contains(&loc.range) && (d0..=d1).contains(&loc.depth)
    }

    /// Grid point nearest to `loc`. The axes are searched independently, so
    /// the answer is the nearest point under any axis-weighted Euclidean
    /// distance, elliptical distances included.
    pub fn nearest_index(&self, loc: Location) -> usize {
        let ir = nearest(&self.ranges, loc.range);
        let id = nearest(&self.depths, loc.depth);
        self.index(ir, id)
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

fn spacing(v: &[f64]) -> f64 {
    if v.len() < 2 {
        0.0
    } else {
        (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64
    }
}

fn nearest(v: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (i, &c) in v.iter().enumerate() {
        if (c - x).abs() < (v[best] - x).abs() {
            best = i;
        }
    }
    best
}

/// Vertical line array at zero range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReceiverArray {
    element_depths: Vec<f64>,
    array_range: f64,
}

impl ReceiverArray {
    pub fn new(element_depths: Vec<f64>) -> Result<Self> {
        if element_depths.is_empty() {
            return Err(Error::InvalidArray("array needs at least one element".into()));
        }
        if element_depths.iter().any(|z| !z.is_finite() || *z <= 0.0) {
            return Err(Error::InvalidArray("element depths must be positive".into()));
        }
        if !element_depths.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArray(
                "element depths must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            element_depths,
            array_range: 0.0,
        })
    }

    /// `n` elements evenly spaced from `top` to `bottom` inclusive.
    pub fn uniform(n: usize, top: f64, bottom: f64) -> Result<Self> {
        Self::new(linspace(top, bottom, n))
    }

    pub fn validate_for(&self, env: &Environment) -> Result<()> {
        if *self.element_depths.last().unwrap() >= env.depth {
            return Err(Error::InvalidArray(format!(
                "element depths must lie inside the water column (0, {})",
                env.depth
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.element_depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.element_depths.is_empty()
    }

    pub fn element_depths(&self) -> &[f64] {
        &self.element_depths
    }

    pub fn array_range(&self) -> f64 {
        self.array_range
    }
}

impl Default for ReceiverArray {
    /// 37 elements from 10 m to 190 m.
    fn default() -> Self {
        Self::uniform(37, 10.0, 190.0).expect("default array is valid")
    }
}

#[inline]
fn modal_sum(psi_source: &[f64], psi_receiver: &[f64], factors: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for ((&a, &b), &f) in psi_source.iter().zip(psi_receiver).zip(factors) {
        acc += f * (a * b);
    }
    acc
}

fn check_location(env: &Environment, range: f64, depth: f64) -> Result<()> {
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::InvalidLocation {
            range,
            depth,
            reason: "range must be positive (far-field form is singular at zero range)",
        });
    }
    if !(depth > 0.0 && depth < env.depth) {
        return Err(Error::InvalidLocation {
            range,
            depth,
            reason: "depth must lie strictly inside the water column",
        });
    }
    Ok(())
}

/// Scalar Green's function between two depths at horizontal distance `range`.
/// Symmetric in the two depth arguments.
pub fn modal_green(
    modes: &ModeSet,
    env: &Environment,
    range: f64,
    source_depth: f64,
    receiver_depth: f64,
) -> Result<C64> {
    if modes.is_degenerate() {
        return Err(Error::DegenerateModes {
            frequency_hz: modes.frequency_hz(),
        });
    }
    check_location(env, range, source_depth)?;
    check_location(env, range, receiver_depth)?;
    Ok(modal_sum(
        &modes.shapes_at(source_depth),
        &modes.shapes_at(receiver_depth),
        &modes.range_factors(range),
    ))
}

/// `G_ω(r)`: the Green's function from `location` to every array element.
pub fn greens_vector(
    modes: &ModeSet,
    env: &Environment,
    array: &ReceiverArray,
    location: Location,
) -> Result<Vec<C64>> {
    if modes.is_degenerate() {
        return Err(Error::DegenerateModes {
            frequency_hz: modes.frequency_hz(),
        });
    }
    check_location(env, location.range, location.depth)?;
    let range = location.range - array.array_range();
    let psi_source = modes.shapes_at(location.depth);
    let factors = modes.range_factors(range);
    Ok(array
        .element_depths()
        .iter()
        .map(|&z| modal_sum(&psi_source, &modes.shapes_at(z), &factors))
        .collect())
}

/// Replica matrix at one frequency: column `j` is `G_ω(r_j)` for grid
/// location `j`.
#[derive(Clone, Debug)]
pub struct GreensField {
    frequency_hz: f64,
    matrix: ColumnMatrix,
    norms: Vec<f64>,
    grid: Arc<SearchGrid>,
}

impl GreensField {
    /// Wraps a precomputed N×L matrix.
    pub fn from_matrix(frequency_hz: f64, matrix: ColumnMatrix, grid: Arc<SearchGrid>) -> Result<Self> {
        if matrix.cols() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: matrix.cols(),
            });
        }
        if matrix.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("Green's field"));
        }
        let norms = matrix.column_norms();
        Ok(Self {
            frequency_hz,
            matrix,
            norms,
            grid,
        })
    }

    pub fn frequency_hz(&self) -> f64 {
        self.frequency_hz
    }

    pub fn matrix(&self) -> &ColumnMatrix {
        &self.matrix
    }

    /// Number of array elements `N`.
    pub fn elements(&self) -> usize {
        self.matrix.rows()
    }

    pub fn len(&self) -> usize {
        self.matrix.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, j: usize) -> &[C64] {
        self.matrix.column(j)
    }

    /// `‖G_ω(r_j)‖` for every grid location.
    pub fn column_norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn grid(&self) -> &Arc<SearchGrid> {
        &self.grid
    }
}

/// Evaluates [`greens_vector`] at every grid location.
pub fn greens_field(
    modes: &ModeSet,
    env: &Environment,
    array: &ReceiverArray,
    grid: &Arc<SearchGrid>,
) -> Result<GreensField> {
    if modes.is_degenerate() {
        return Err(Error::DegenerateModes {
            frequency_hz: modes.frequency_hz(),
        });
    }
    grid.validate_for(env)?;
    array.validate_for(env)?;
    for &r in grid.ranges() {
        check_location(env, r, grid.depths()[0])?;
    }

    let n = array.len();
    let psi_receivers: Vec<Vec<f64>> = array
        .element_depths()
        .iter()
        .map(|&z| modes.shapes_at(z))
        .collect();
    let psi_depths: Vec<Vec<f64>> = grid.depths().iter().map(|&z| modes.shapes_at(z)).collect();
    let factors: Vec<Vec<C64>> = grid
        .ranges()
        .iter()
        .map(|&r| modes.range_factors(r - array.array_range()))
        .collect();

    let mut data = vec![C64::new(0.0, 0.0); n * grid.len()];
    data.par_chunks_mut(n).enumerate().for_each(|(j, column)| {
        let (ir, id) = grid.split_index(j);
        for (out, psi_r) in column.iter_mut().zip(&psi_receivers) {
            *out = modal_sum(&psi_depths[id], psi_r, &factors[ir]);
        }
    });
    GreensField::from_matrix(
        modes.frequency_hz(),
        ColumnMatrix::from_column_major(n, grid.len(), data),
        Arc::clone(grid),
    )
}
