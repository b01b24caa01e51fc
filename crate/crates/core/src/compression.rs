//! Random orthoprojections and the compressed Green's ensemble.
//!
//! A projection `Φ` is an M×N matrix of complex Gaussians whose rows are
//! orthonormalized and then scaled by `√(N/M)`, so `Φ Φᴴ = (N/M) I_M` and
//! `E‖Φ F‖² = ‖F‖²`. Row `m` of `Φ G` is the field obtained by
//! backpropagating test vector `m` over the whole grid; those M fields are
//! all that is needed to localize any later observation.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{max_off_diagonal, norm, orthonormalize_rows, ColumnMatrix, RowMatrix, C64};
use crate::seeds::rng_from_seed;
use crate::waveguide::{GreensField, SearchGrid};

/// `Φ`, M×N with orthogonal rows of squared norm N/M.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    matrix: RowMatrix,
    seed: u64,
}

impl Projection {
    /// Wraps an explicit matrix without checking orthogonality.
    pub fn from_matrix(matrix: RowMatrix, seed: u64) -> Result<Self> {
        if matrix.rows() == 0 || matrix.rows() > matrix.cols() {
            return Err(Error::InvalidProjection {
                m: matrix.rows(),
                n: matrix.cols(),
            });
        }
        Ok(Self { matrix, seed })
    }

    /// Compressed dimension `M`.
    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    /// Array dimension `N`.
    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &RowMatrix {
        &self.matrix
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `Φ Φᴴ`, row-major M×M.
    pub fn gram(&self) -> Vec<C64> {
        self.matrix.gram()
    }
}

/// Draws a random orthoprojection.
pub fn draw_encoder(m: usize, n: usize, seed: u64) -> Result<Projection> {
    if m == 0 || m > n {
        return Err(Error::InvalidProjection { m, n });
    }
    let mut rng = rng_from_seed(seed);
    let scale = (n as f64 / m as f64).sqrt();
    loop {
        let data: Vec<C64> = (0..m * n)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let mut matrix = RowMatrix::from_row_major(m, n, data);
        // A rank-deficient Gaussian draw has probability zero; redraw if it happens.
        if !orthonormalize_rows(&mut matrix) {
            continue;
        }
        if max_off_diagonal(&matrix.gram(), m) > 1e-12 && !orthonormalize_rows(&mut matrix) {
            continue;
        }
        let data = matrix.as_slice().iter().map(|z| z * scale).collect();
        return Ok(Projection {
            matrix: RowMatrix::from_row_major(m, n, data),
            seed,
        });
    }
}

/// `Φ Y`.
pub fn compress_observation(projection: &Projection, y: &[C64]) -> Result<Vec<C64>> {
    if y.len() != projection.cols() {
        return Err(Error::DimensionMismatch {
            expected: projection.cols(),
            found: y.len(),
        });
    }
    Ok(projection.matrix.mul_vec(y))
}

/// A projection together with the compressed replica field `Φ G` (M×L).
#[derive(Clone, Debug)]
pub struct Encoder {
    frequency_hz: f64,
    projection: Projection,
    compressed: ColumnMatrix,
    compressed_norms: Vec<f64>,
    grid: Arc<SearchGrid>,
}

impl Encoder {
    /// Rebuilds an encoder from a stored compressed field.
    pub fn from_parts(
        frequency_hz: f64,
        projection: Projection,
        compressed: ColumnMatrix,
        grid: Arc<SearchGrid>,
    ) -> Result<Self> {
        if compressed.rows() != projection.rows() {
            return Err(Error::DimensionMismatch {
                expected: projection.rows(),
                found: compressed.rows(),
            });
        }
        if compressed.cols() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: compressed.cols(),
            });
        }
        let compressed_norms = compressed.column_norms();
        Ok(Self {
            frequency_hz,
            projection,
            compressed,
            compressed_norms,
            grid,
        })
    }

    pub fn frequency_hz(&self) -> f64 {
        self.frequency_hz
    }

    pub fn projection(&self) -> &Projection {
        &self.projection
    }

    /// Compressed dimension `M`.
    pub fn rows(&self) -> usize {
        self.projection.rows()
    }

    pub fn compressed_field(&self) -> &ColumnMatrix {
        &self.compressed
    }

    pub fn column(&self, j: usize) -> &[C64] {
        self.compressed.column(j)
    }

    /// `‖Φ G_ω(r_j)‖` per grid location.
    pub fn compressed_norms(&self) -> &[f64] {
        &self.compressed_norms
    }

    pub fn grid(&self) -> &Arc<SearchGrid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.compressed.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn compress(&self, y: &[C64]) -> Result<Vec<C64>> {
        compress_observation(&self.projection, y)
    }
}

/// Applies `Φ` to every column of `field`.
pub fn compress_field(projection: &Projection, field: &GreensField) -> Result<Encoder> {
    if projection.cols() != field.elements() {
        return Err(Error::DimensionMismatch {
            expected: projection.cols(),
            found: field.elements(),
        });
    }
    let m = projection.rows();
    let mut data = vec![C64::new(0.0, 0.0); m * field.len()];
    data.par_chunks_mut(m).enumerate().for_each(|(j, out)| {
        projection.matrix.mul_vec_into(field.column(j), out);
    });
    let compressed = ColumnMatrix::from_column_major(m, field.len(), data);
    let compressed_norms = compressed.columns().map(norm).collect();
    Ok(Encoder {
        frequency_hz: field.frequency_hz(),
        projection: projection.clone(),
        compressed,
        compressed_norms,
        grid: Arc::clone(field.grid()),
    })
}
