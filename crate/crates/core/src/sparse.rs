//! Compressed-row sparse matrices and a Jacobi-preconditioned conjugate
//! gradient solver for symmetric positive definite systems.

use std::io::Write;

use crate::{Error, Result};

/// Sparse matrix in compressed-row form.
///
/// Column indices are strictly increasing within each row. Duplicate
/// entries are merged on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        for &(row, col, _) in entries {
            if row >= nrows || col >= ncols {
                return Err(Error::IndexOutOfRange { row, col, nrows, ncols });
            }
        }

        // counting sort by row, then sort each row by column
        let mut counts = vec![0usize; nrows + 1];
        for &(row, _, _) in entries {
            counts[row + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut staged = vec![(0usize, 0.0f64); entries.len()];
        for &(row, col, v) in entries {
            staged[next[row]] = (col, v);
            next[row] += 1;
        }

        let mut row_offsets = Vec::with_capacity(nrows + 1);
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        row_offsets.push(0);
        for i in 0..nrows {
            let row = &mut staged[counts[i]..counts[i + 1]];
            row.sort_by_key(|&(c, _)| c);
            let mut last = usize::MAX;
            for &(c, v) in row.iter() {
                if c == last {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_indices.push(c);
                    values.push(v);
                    last = c;
                }
            }
            row_offsets.push(col_indices.len());
        }

        Ok(Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access to stored values; the sparsity pattern is fixed.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// A matrix with the same pattern and the given values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.nnz() {
            return Err(Error::DimensionMismatch {
                expected: self.nnz(),
                found: values.len(),
            });
        }
        Ok(Self { values, ..self.clone() })
    }

    /// Position of entry `(row, col)` in the value array, if stored.
    pub fn slot(&self, row: usize, col: usize) -> Option<usize> {
        let start = self.row_offsets[row];
        let end = self.row_offsets[row + 1];
        self.col_indices[start..end].binary_search(&col).ok().map(|k| start + k)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.slot(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Iterates over stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            (self.row_offsets[i]..self.row_offsets[i + 1]).map(move |k| (i, self.col_indices[k], self.values[k]))
        })
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                found: x.len(),
            });
        }
        if y.len() != self.nrows {
            return Err(Error::DimensionMismatch {
                expected: self.nrows,
                found: y.len(),
            });
        }
        for (i, yi) in y.iter_mut().enumerate() {
            let range = self.row_offsets[i]..self.row_offsets[i + 1];
            *yi = self.col_indices[range.clone()]
                .iter()
                .zip(&self.values[range])
                .map(|(&j, &v)| v * x[j])
                .sum();
        }
        Ok(())
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.nrows {
            return Err(Error::DimensionMismatch {
                expected: self.nrows,
                found: x.len(),
            });
        }
        let ay = self.spmv(y)?;
        Ok(dot(x, &ay))
    }

    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        self.bilinear(x, x)
    }

    pub fn transpose(&self) -> Self {
        let entries: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &entries).expect("transposed indices are in range")
    }

    /// Entrywise sum of two matrices of equal shape.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.nrows * self.ncols,
                found: other.nrows * other.ncols,
            });
        }
        let entries: Vec<_> = self.triplets().chain(other.triplets()).collect();
        Self::from_triplets(self.nrows, self.ncols, &entries)
    }

    /// `A = Aᵀ` entrywise within `rel_tol` relative to the largest magnitude.
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.triplets()
            .all(|(i, j, v)| (v - self.get(j, i)).abs() <= rel_tol * scale)
    }

    /// Coordinate text export, 1-based indices.
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(out, "{} {} {:e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Euclidean norm of the final (true) residual `b − A x`.
    pub residual_norm: f64,
    /// Normwise backward error `‖b − Ax‖_∞ / (‖A‖_∞ ‖x‖_∞ + ‖b‖_∞)`.
    pub backward_error: f64,
    pub converged: bool,
}

/// Backward error at which a solve is as accurate as the arithmetic allows.
///
/// A relative residual of `tol` may be unattainable for badly conditioned
/// systems (fine 1-d meshes); callers may accept such solves instead.
pub const ROUNDOFF_BACKWARD_ERROR: f64 = 1e-13;

/// Default relative tolerance of [`solve_spd`].
pub const DEFAULT_TOL: f64 = 1e-12;

/// Solves `A x = b` for SPD `A` with Jacobi-preconditioned CG from `x = 0`.
///
/// Non-convergence is reported through `SolveStats::converged`, not as an error.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveStats)> {
    solve_spd_from(a, b, None, tol, max_iter)
}

/// As [`solve_spd`], optionally starting from an initial guess.
pub fn solve_spd_from(
    a: &CsrMatrix,
    b: &[f64],
    guess: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let inv_diag = a
        .diagonal()
        .into_iter()
        .enumerate()
        .map(|(index, value)| {
            if value > 0.0 && value.is_finite() {
                Ok(1.0 / value)
            } else {
                Err(Error::NotPositiveDefinite { index, value })
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let b_norm = norm2(b);
    let mut x = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        Some(g) => {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: g.len(),
            })
        }
        None => vec![0.0; n],
    };
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                residual_norm: 0.0,
                backward_error: 0.0,
                converged: true,
            },
        ));
    }
    let target = tol * b_norm;

    // Recursive residuals drift from b − Ax; on apparent convergence the
    // true residual is recomputed and the iteration restarted from it.
    const MAX_REPLACEMENTS: usize = 4;
    let a_inf = a
        .row_offsets()
        .windows(2)
        .map(|w| a.values()[w[0]..w[1]].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let b_inf = max_abs(b);
    let mut iterations = 0;
    let mut residual_norm;
    let mut backward_error;
    let mut replacements = 0;
    loop {
        let mut r = a.spmv(&x)?;
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        residual_norm = norm2(&r);
        backward_error = max_abs(&r) / (a_inf * max_abs(&x) + b_inf);
        // below ~10 ε further restarts only churn rounding noise
        let stalled = backward_error <= 10.0 * f64::EPSILON && replacements > 0;
        if residual_norm <= target || iterations >= max_iter || replacements > MAX_REPLACEMENTS || stalled {
            break;
        }
        replacements += 1;
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz = dot(&r, &z);
        while iterations < max_iter && rz != 0.0 {
            a.spmv_into(&p, &mut ap)?;
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                return Err(Error::NotPositiveDefinite {
                    index: iterations,
                    value: pap,
                });
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            if norm2(&r) <= target {
                break;
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }

    Ok((
        x,
        SolveStats {
            iterations,
            residual_norm,
            backward_error,
            converged: residual_norm <= target,
        },
    ))
}
