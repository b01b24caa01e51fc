//! Small dense complex linear algebra used throughout the crate.
//!
//! Matrices here are tiny in one dimension (the array size N, or the
//! compressed size M) and long in the other (the grid size L), so the
//! storage is chosen so that the short vectors are contiguous.

use num_complex::Complex64;

pub type C64 = Complex64;

/// `aᴴ b`.
#[inline]
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    C64::new(re, im)
}

/// `Σ a_i b_i` without conjugation.
#[inline]
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re - x.im * y.im;
        im += x.re * y.im + x.im * y.re;
    }
    C64::new(re, im)
}

#[inline]
pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

#[inline]
pub fn norm(a: &[C64]) -> f64 {
    norm_sqr(a).sqrt()
}

/// Dense complex matrix in column-major order; column `j` is contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ColumnMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Wraps column-major data. Panics if the length is not `rows * cols`.
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "column-major buffer has wrong length");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [C64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> std::slice::ChunksExact<'_, C64> {
        self.data.chunks_exact(self.rows.max(1))
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[col * self.rows + row]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column_norms(&self) -> Vec<f64> {
        self.columns().map(norm).collect()
    }
}

/// Dense complex matrix in row-major order; row `i` is contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct RowMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl RowMatrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major buffer has wrong length");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [C64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.cols + col]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `A x` into a caller-provided buffer.
    #[inline]
    pub fn mul_vec_into(&self, x: &[C64], out: &mut [C64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }

    /// `A Aᴴ`, row-major.
    pub fn gram(&self) -> Vec<C64> {
        let m = self.rows;
        let mut g = vec![C64::new(0.0, 0.0); m * m];
        for i in 0..m {
            for j in 0..m {
                // (A Aᴴ)_ij = Σ_n A_in conj(A_jn) = rowⱼᴴ rowᵢ
                g[i * m + j] = inner(self.row(j), self.row(i));
            }
        }
        g
    }
}

/// Orthonormalizes the rows of `a` in place with classical Gram-Schmidt
/// applied twice per row. Returns `false` if a row collapsed to zero.
pub fn orthonormalize_rows(a: &mut RowMatrix) -> bool {
    let (m, n) = (a.rows(), a.cols());
    let mut scratch = vec![C64::new(0.0, 0.0); n];
    for i in 0..m {
        for _pass in 0..2 {
            scratch.copy_from_slice(a.row(i));
            for j in 0..i {
                let q = a.row(j);
                let c = inner(q, &scratch);
                for (s, qj) in scratch.iter_mut().zip(q) {
                    *s -= c * qj;
                }
            }
            a.row_mut(i).copy_from_slice(&scratch);
        }
        let nrm = norm(a.row(i));
        if nrm == 0.0 || !nrm.is_finite() {
            return false;
        }
        for z in a.row_mut(i) {
            *z /= nrm;
        }
    }
    true
}

/// Largest off-diagonal magnitude of a square row-major matrix.
pub fn max_off_diagonal(g: &[C64], dim: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            if i != j {
                worst = worst.max(g[i * dim + j].norm());
            }
        }
    }
    worst
}
