//! Ambiguity surfaces over the search grid and the location estimate.
//!
//! Every Bartlett-type objective here comes from the same least-squares
//! fit: for a candidate location the best complex gain is found in closed
//! form ([`closest_point`]) and the remaining misfit is ranked. Normalized
//! variants keep the replica energy in the denominator; unnormalized ones
//! drop it. Compressive variants do the same thing in the M-dimensional
//! space spanned by the projected replicas.

use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compression::Encoder;
use crate::error::{Error, Result};
use crate::linalg::{inner, norm_sqr, ColumnMatrix, C64};
use crate::sensing::Observation;
use crate::waveguide::{GreensField, Location, SearchGrid};

/// Which objective produced a surface.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "nMFP")]
    Nmfp,
    #[serde(rename = "uMFP")]
    Umfp,
    #[serde(rename = "cMFP")]
    Cmfp,
    #[serde(rename = "inc-nMFP")]
    IncNmfp,
    #[serde(rename = "inc-uMFP")]
    IncUmfp,
    #[serde(rename = "inc-cMFP")]
    IncCmfp,
    #[serde(rename = "coh-nMFP")]
    CohNmfp,
    #[serde(rename = "coh-uMFP")]
    CohUmfp,
    #[serde(rename = "coh-cMFP")]
    CohCmfp,
    #[serde(rename = "MVDR")]
    Mvdr,
    #[serde(rename = "cMVDR")]
    Cmvdr,
}

impl Variant {
    pub const ALL: [Variant; 11] = [
        Variant::Nmfp,
        Variant::Umfp,
        Variant::Cmfp,
        Variant::IncNmfp,
        Variant::IncUmfp,
        Variant::IncCmfp,
        Variant::CohNmfp,
        Variant::CohUmfp,
        Variant::CohCmfp,
        Variant::Mvdr,
        Variant::Cmvdr,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::Nmfp => "nMFP",
            Variant::Umfp => "uMFP",
            Variant::Cmfp => "cMFP",
            Variant::IncNmfp => "inc-nMFP",
            Variant::IncUmfp => "inc-uMFP",
            Variant::IncCmfp => "inc-cMFP",
            Variant::CohNmfp => "coh-nMFP",
            Variant::CohUmfp => "coh-uMFP",
            Variant::CohCmfp => "coh-cMFP",
            Variant::Mvdr => "MVDR",
            Variant::Cmvdr => "cMVDR",
        }
    }

    pub fn is_compressive(self) -> bool {
        matches!(
            self,
            Variant::Cmfp | Variant::IncCmfp | Variant::CohCmfp | Variant::Cmvdr
        )
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown variant `{s}`")))
    }
}

/// Best complex gain `β` for `min ‖U − βV‖²` and the residual it leaves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainFit {
    pub beta: C64,
    pub residual: f64,
}

/// Closest point to `u` on the line spanned by `v`:
/// `β = Vᴴ U / ‖V‖²`, residual `‖U‖² − |Vᴴ U|² / ‖V‖²`.
pub fn closest_point(u: &[C64], v: &[C64]) -> Result<GainFit> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len(),
            found: u.len(),
        });
    }
    let vv = norm_sqr(v);
    if vv == 0.0 {
        return Err(Error::ZeroVector);
    }
    let vu = inner(v, u);
    // Rounding can push the difference a hair below zero.
    let residual = (norm_sqr(u) - vu.norm_sqr() / vv).max(0.0);
    Ok(GainFit {
        beta: vu / vv,
        residual,
    })
}

/// Objective value at every grid location plus its maximizer.
#[derive(Clone, Debug, PartialEq)]
pub struct AmbiguitySurface {
    values: Vec<f64>,
    variant: Variant,
    argmax_index: usize,
    argmax_location: Location,
    unusable: Vec<usize>,
}

impl AmbiguitySurface {
    /// Builds a surface, excluding `unusable` indices from the argmax.
    /// Ties go to the lowest flat index.
    pub fn new(values: Vec<f64>, variant: Variant, grid: &SearchGrid, unusable: Vec<usize>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFinite("ambiguity surface"));
        }
        let argmax_index = argmax_excluding(&values, &unusable).ok_or(Error::NoUsableLocation)?;
        Ok(Self {
            argmax_location: grid.location(argmax_index),
            values,
            variant,
            argmax_index,
            unusable,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn argmax_index(&self) -> usize {
        self.argmax_index
    }

    pub fn argmax_location(&self) -> Location {
        self.argmax_location
    }

    /// Indices excluded from the argmax (zero compressed replica norm).
    pub fn unusable(&self) -> &[usize] {
        &self.unusable
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.values[self.argmax_index]
    }

    /// Values on the `20 log10 |h|` scale. Surfaces hold `|h|²`, so this
    /// is `10 log10(value)`.
    pub fn to_db(&self) -> Vec<f64> {
        self.values.iter().map(|v| 10.0 * v.log10()).collect()
    }

    /// Peak value divided by the median value.
    pub fn peak_to_median(&self) -> f64 {
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        self.peak() / median
    }
}

fn argmax_excluding(values: &[f64], excluded: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    let mut skip = excluded.iter().copied().peekable();
    for (j, &v) in values.iter().enumerate() {
        if skip.peek() == Some(&j) {
            skip.next();
            continue;
        }
        match best {
            Some(b) if values[b] >= v => {}
            _ => best = Some(j),
        }
    }
    best
}

/// Grid location of the surface maximum.
pub fn locate(surface: &AmbiguitySurface, grid: &SearchGrid) -> Result<Location> {
    if surface.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: surface.len(),
        });
    }
    Ok(grid.location(surface.argmax_index()))
}

/// `h_j = yᴴ A_j` for every column `j`.
fn correlate(y: &[C64], columns: &ColumnMatrix) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); columns.cols()];
    out.par_iter_mut()
        .enumerate()
        .for_each(|(j, h)| *h = inner(y, columns.column(j)));
    out
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

fn check_nonzero_norms(norms: &[f64]) -> Result<()> {
    match norms.iter().position(|&n| n == 0.0) {
        Some(index) => Err(Error::ZeroNorm { index }),
        None => Ok(()),
    }
}

/// Locations whose compressed replica vanishes at any frequency.
fn unusable_locations(encoders: &[&Encoder]) -> Vec<usize> {
    let len = encoders[0].len();
    let bad: Vec<usize> = (0..len)
        .filter(|&j| encoders.iter().any(|e| e.compressed_norms()[j] == 0.0))
        .collect();
    if !bad.is_empty() {
        warn!(
            "{} grid locations have zero compressed replica norm and are excluded",
            bad.len()
        );
    }
    bad
}

/// Single-frequency Bartlett surface: `|Yᴴ G(r)|² / ‖G(r)‖²` when
/// `normalized`, else `|Yᴴ G(r)|²`.
pub fn surface_narrowband(y: &[C64], field: &GreensField, normalized: bool) -> Result<AmbiguitySurface> {
    check_len(field.elements(), y.len())?;
    let h = correlate(y, field.matrix());
    let values = if normalized {
        check_nonzero_norms(field.column_norms())?;
        h.iter()
            .zip(field.column_norms())
            .map(|(h, n)| h.norm_sqr() / (n * n))
            .collect()
    } else {
        h.iter().map(|h| h.norm_sqr()).collect()
    };
    let variant = if normalized { Variant::Nmfp } else { Variant::Umfp };
    AmbiguitySurface::new(values, variant, field.grid(), Vec::new())
}

/// Compressive single-frequency surface `|(ΦY)ᴴ ΦG(r)|² / ‖ΦG(r)‖²`.
pub fn surface_narrowband_compressive(phi_y: &[C64], encoder: &Encoder) -> Result<AmbiguitySurface> {
    check_len(encoder.rows(), phi_y.len())?;
    let h = correlate(phi_y, encoder.compressed_field());
    let unusable = unusable_locations(&[encoder]);
    let values = h
        .iter()
        .zip(encoder.compressed_norms())
        .map(|(h, &n)| if n == 0.0 { 0.0 } else { h.norm_sqr() / (n * n) })
        .collect();
    AmbiguitySurface::new(values, Variant::Cmfp, encoder.grid(), unusable)
}

fn check_broadband<T>(ys: &[Vec<C64>], per_freq: &[T], alphas: &[C64]) -> Result<()> {
    if ys.is_empty() {
        return Err(Error::InvalidParameter("at least one frequency is required".into()));
    }
    check_len(ys.len(), per_freq.len())?;
    check_len(ys.len(), alphas.len())
}

/// Combines per-frequency correlations `h_k(r)` and replica energies
/// `‖G_k(r)‖²` into an incoherent or coherent objective.
fn combine(
    correlations: &[Vec<C64>],
    energies: Option<&[Vec<f64>]>,
    coherent: bool,
    alphas: &[C64],
) -> Vec<f64> {
    let len = correlations[0].len();
    (0..len)
        .map(|j| {
            if coherent {
                let mut num = C64::new(0.0, 0.0);
                let mut den = 0.0;
                for (k, h) in correlations.iter().enumerate() {
                    num += alphas[k] * h[j];
                    if let Some(e) = energies {
                        den += alphas[k].norm_sqr() * e[k][j];
                    }
                }
                match energies {
                    Some(_) if den == 0.0 => 0.0,
                    Some(_) => num.norm_sqr() / den,
                    None => num.norm_sqr(),
                }
            } else {
                correlations
                    .iter()
                    .enumerate()
                    .map(|(k, h)| match energies {
                        Some(e) if e[k][j] == 0.0 => 0.0,
                        Some(e) => h[j].norm_sqr() / e[k][j],
                        None => h[j].norm_sqr(),
                    })
                    .sum()
            }
        })
        .collect()
}

/// Broadband Bartlett surfaces over K frequencies.
///
/// * incoherent: `Σ_k |h_k|² / ‖G_k‖²` (normalized) or `Σ_k |h_k|²`
/// * coherent: `|Σ_k α_k h_k|² / Σ_k |α_k|² ‖G_k‖²` (normalized) or
///   `|Σ_k α_k h_k|²`
///
/// where `h_k(r) = Y_kᴴ G_k(r)`.
pub fn surface_broadband(
    ys: &[Vec<C64>],
    fields: &[GreensField],
    coherent: bool,
    normalized: bool,
    alphas: &[C64],
) -> Result<AmbiguitySurface> {
    check_broadband(ys, fields, alphas)?;
    for (y, f) in ys.iter().zip(fields) {
        check_len(f.elements(), y.len())?;
        check_len(fields[0].len(), f.len())?;
    }
    let correlations: Vec<Vec<C64>> = ys
        .iter()
        .zip(fields)
        .map(|(y, f)| correlate(y, f.matrix()))
        .collect();
    let energies: Option<Vec<Vec<f64>>> = if normalized {
        for f in fields {
            check_nonzero_norms(f.column_norms())?;
        }
        Some(
            fields
                .iter()
                .map(|f| f.column_norms().iter().map(|n| n * n).collect())
                .collect(),
        )
    } else {
        None
    };
    let values = combine(&correlations, energies.as_deref(), coherent, alphas);
    let variant = match (coherent, normalized) {
        (true, true) => Variant::CohNmfp,
        (true, false) => Variant::CohUmfp,
        (false, true) => Variant::IncNmfp,
        (false, false) => Variant::IncUmfp,
    };
    AmbiguitySurface::new(values, variant, fields[0].grid(), Vec::new())
}

/// Broadband compressive surfaces; `phi_ys[k]` is `Φ_k Y_k`.
///
/// Incoherent combination needs `M ≥ 2`: with one row per frequency each
/// term reduces to `|Φ_k Y_k|²` and the objective is flat.
pub fn surface_broadband_compressive(
    phi_ys: &[Vec<C64>],
    encoders: &[Encoder],
    coherent: bool,
    alphas: &[C64],
) -> Result<AmbiguitySurface> {
    check_broadband(phi_ys, encoders, alphas)?;
    if !coherent && encoders.iter().any(|e| e.rows() < 2) {
        return Err(Error::DegenerateIncoherent);
    }
    for (y, e) in phi_ys.iter().zip(encoders) {
        check_len(e.rows(), y.len())?;
        check_len(encoders[0].len(), e.len())?;
    }
    let correlations: Vec<Vec<C64>> = phi_ys
        .iter()
        .zip(encoders)
        .map(|(y, e)| correlate(y, e.compressed_field()))
        .collect();
    let energies: Vec<Vec<f64>> = encoders
        .iter()
        .map(|e| e.compressed_norms().iter().map(|n| n * n).collect())
        .collect();
    let refs: Vec<&Encoder> = encoders.iter().collect();
    let unusable = unusable_locations(&refs);
    let mut values = combine(&correlations, Some(&energies), coherent, alphas);
    for &j in &unusable {
        values[j] = 0.0;
    }
    let variant = if coherent { Variant::CohCmfp } else { Variant::IncCmfp };
    AmbiguitySurface::new(values, variant, encoders[0].grid(), unusable)
}

/// `K = Σ_l Y_l Y_lᴴ`.
pub fn sample_covariance(snapshots: &[Vec<C64>]) -> Result<DMatrix<C64>> {
    let n = snapshots
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidParameter("at least one snapshot is required".into()))?;
    let mut k = DMatrix::<C64>::zeros(n, n);
    for y in snapshots {
        check_len(n, y.len())?;
        for c in 0..n {
            let yc = y[c].conj();
            for r in 0..n {
                k[(r, c)] += y[r] * yc;
            }
        }
    }
    Ok(k)
}

/// Adds `loading · trace(K)/dim` to the diagonal and returns the inverse
/// Cholesky factor `L⁻¹` (row-major, lower triangular), so that
/// `gᴴ K⁻¹ g = ‖L⁻¹ g‖²`.
fn loaded_inverse_factor(k: &DMatrix<C64>, loading: f64) -> Result<Vec<C64>> {
    let dim = k.nrows();
    if !(loading >= 0.0 && loading.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "diagonal loading must be non-negative, got {loading}"
        )));
    }
    let mean_diag = k.diagonal().iter().map(|z| z.re).sum::<f64>() / dim as f64;
    let mut loaded = k.clone();
    for i in 0..dim {
        loaded[(i, i)] += C64::new(loading * mean_diag, 0.0);
    }
    let chol = loaded.cholesky().ok_or(Error::SingularCovariance)?;
    let l_inv = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(dim, dim))
        .ok_or(Error::SingularCovariance)?;
    if l_inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularCovariance);
    }
    Ok((0..dim)
        .flat_map(|r| (0..dim).map(move |c| (r, c)))
        .map(|(r, c)| l_inv[(r, c)])
        .collect())
}

fn mvdr_values(l_inv: &[C64], columns: &ColumnMatrix) -> Vec<f64> {
    let dim = columns.rows();
    let mut out = vec![0.0; columns.cols()];
    out.par_iter_mut().enumerate().for_each(|(j, v)| {
        let g = columns.column(j);
        let mut energy = 0.0;
        for r in 0..dim {
            let row = &l_inv[r * dim..r * dim + r + 1];
            let w: C64 = row.iter().zip(&g[..=r]).map(|(a, b)| a * b).sum();
            energy += w.norm_sqr();
        }
        *v = if energy > 0.0 { energy.recip() } else { f64::INFINITY };
    });
    out
}

/// MVDR surface from an explicit covariance matrix.
///
/// Standard: `(G(r)ᴴ K⁻¹ G(r))⁻¹`. With an encoder:
/// `((ΦG(r))ᴴ (Φ K Φᴴ)⁻¹ ΦG(r))⁻¹`. The matrix being inverted is first
/// loaded with `loading` times its mean diagonal.
pub fn surface_mvdr_from_covariance(
    k: &DMatrix<C64>,
    field: &GreensField,
    encoder: Option<&Encoder>,
    loading: f64,
) -> Result<AmbiguitySurface> {
    let n = field.elements();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: k.nrows(),
        });
    }
    match encoder {
        None => {
            check_nonzero_norms(field.column_norms())?;
            let l_inv = loaded_inverse_factor(k, loading)?;
            let values = mvdr_values(&l_inv, field.matrix());
            AmbiguitySurface::new(values, Variant::Mvdr, field.grid(), Vec::new())
        }
        Some(enc) => {
            check_len(n, enc.projection().cols())?;
            check_len(field.len(), enc.len())?;
            let phi = enc.projection().matrix();
            let phi = DMatrix::from_fn(phi.rows(), phi.cols(), |r, c| phi.get(r, c));
            let compressed_k = &phi * k * phi.adjoint();
            let l_inv = loaded_inverse_factor(&compressed_k, loading)?;
            let unusable = unusable_locations(&[enc]);
            let mut values = mvdr_values(&l_inv, enc.compressed_field());
            for &j in &unusable {
                values[j] = 0.0;
            }
            AmbiguitySurface::new(values, Variant::Cmvdr, enc.grid(), unusable)
        }
    }
}

/// MVDR surface from snapshots `Y_l` at one frequency.
pub fn surface_mvdr(
    snapshots: &[Observation],
    field: &GreensField,
    encoder: Option<&Encoder>,
    loading: f64,
) -> Result<AmbiguitySurface> {
    let data: Vec<Vec<C64>> = snapshots.iter().map(|o| o.data.clone()).collect();
    let k = sample_covariance(&data)?;
    surface_mvdr_from_covariance(&k, field, encoder, loading)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn closest_point_identity_and_orthogonal() {
        let u = [c(1.0, 2.0), c(-0.5, 0.3)];
        let fit = closest_point(&u, &u).unwrap();
        assert!((fit.beta - c(1.0, 0.0)).norm() < 1e-15);
        assert!(fit.residual.abs() < 1e-15);

        let u = [c(1.0, 1.0), c(0.0, 0.0)];
        let v = [c(0.0, 0.0), c(2.0, -1.0)];
        let fit = closest_point(&u, &v).unwrap();
        assert_eq!(fit.beta, c(0.0, 0.0));
        assert!((fit.residual - 2.0).abs() < 1e-15);
    }

    #[test]
    fn closest_point_rejects_zero_reference() {
        assert!(matches!(
            closest_point(&[c(1.0, 0.0)], &[c(0.0, 0.0)]),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn argmax_ties_go_to_lowest_index() {
        let grid = SearchGrid::new(vec![1.0, 2.0], vec![1.0, 2.0]).unwrap();
        let s = AmbiguitySurface::new(vec![3.0; 4], Variant::Nmfp, &grid, vec![]).unwrap();
        assert_eq!(s.argmax_index(), 0);
        assert_eq!(locate(&s, &grid).unwrap(), Location::new(1.0, 1.0));
        let s = AmbiguitySurface::new(vec![0.0, 5.0, 1.0, 5.0], Variant::Nmfp, &grid, vec![]).unwrap();
        assert_eq!(s.argmax_index(), 1);
    }

    #[test]
    fn unusable_locations_skip_argmax() {
        let grid = SearchGrid::new(vec![1.0, 2.0, 3.0], vec![1.0]).unwrap();
        let s = AmbiguitySurface::new(vec![9.0, 1.0, 2.0], Variant::Cmfp, &grid, vec![0]).unwrap();
        assert_eq!(s.argmax_index(), 2);
        assert!(matches!(
            AmbiguitySurface::new(vec![1.0, 1.0, 1.0], Variant::Cmfp, &grid, vec![0, 1, 2]),
            Err(Error::NoUsableLocation)
        ));
    }

    #[test]
    fn surface_rejects_bad_values() {
        let grid = SearchGrid::new(vec![1.0, 2.0], vec![1.0]).unwrap();
        assert!(AmbiguitySurface::new(vec![1.0, f64::NAN], Variant::Nmfp, &grid, vec![]).is_err());
        assert!(AmbiguitySurface::new(vec![1.0], Variant::Nmfp, &grid, vec![]).is_err());
        let s = AmbiguitySurface::new(vec![1.0, 2.0], Variant::Nmfp, &grid, vec![]).unwrap();
        assert!(locate(&s, &SearchGrid::new(vec![1.0], vec![1.0]).unwrap()).is_err());
    }

    #[test]
    fn variant_tags_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.tag().parse::<Variant>().unwrap(), v);
            assert_eq!(serde_json::to_string(&v).unwrap(), format!("\"{}\"", v.tag()));
        }
        assert!("bogus".parse::<Variant>().is_err());
    }
}
