//! Lower-triangular Cholesky factor with jitter escalation and row-append
//! extension.
//!
//! The factor is stored row by row (row `i` holds `i + 1` entries), which makes
//! appending a new conditioning item an `O(n²)` operation: solve for the new
//! off-diagonal row against the existing factor and take the square root of
//! the Schur complement.

use crate::error::{Error, Result};

/// Smallest jitter, relative to the matrix scale, added to every diagonal.
pub const JITTER_START: f64 = 1e-10;
/// Largest relative jitter tried before giving up.
pub const JITTER_MAX: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    rows: Vec<Vec<f64>>,
    jitter: f64,
    scale: f64,
}

impl CholeskyFactor {
    /// Empty factor that starts without jitter.
    pub fn empty(scale: f64) -> Self {
        Self::empty_with_jitter(scale, 0.0)
    }

    /// Empty factor with the given relative jitter.
    pub fn empty_with_jitter(scale: f64, relative: f64) -> Self {
        let scale = sanitize_scale(scale);
        CholeskyFactor {
            rows: Vec::new(),
            jitter: relative.max(0.0) * scale,
            scale,
        }
    }

    /// Factorizes the symmetric matrix `a` (only the lower triangle is read).
    ///
    /// A jitter-free factorization is accepted only if every squared pivot is
    /// at least `JITTER_START * scale`; otherwise the jitter escalates ×10
    /// from `JITTER_START * scale` up to `JITTER_MAX * scale`.
    pub fn factor(a: &[Vec<f64>], scale: f64) -> Result<Self> {
        Self::factor_from(a, scale, 0.0)
    }

    /// As [`factor`](Self::factor), starting the ladder at relative jitter
    /// `start`.
    pub fn factor_from(a: &[Vec<f64>], scale: f64, start: f64) -> Result<Self> {
        let scale = sanitize_scale(scale);
        let mut rel = start.max(0.0);
        loop {
            let jitter = rel * scale;
            if let Some(rows) = try_factor(a, jitter, min_pivot(jitter, scale)) {
                return Ok(CholeskyFactor {
                    rows,
                    jitter,
                    scale,
                });
            }
            rel = next_relative_jitter(rel).ok_or(Error::NotPositiveDefinite { jitter })?;
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Absolute jitter currently added to the diagonal.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Jitter relative to the matrix scale.
    pub fn relative_jitter(&self) -> f64 {
        self.jitter / self.scale
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.rows[i][i]
    }

    /// Appends one item with covariance `cross` against the existing items and
    /// prior variance `diag`. Returns the new factor row.
    ///
    /// Fails without modifying the factor when the Schur complement is not
    /// positive at the current jitter.
    pub fn extend(&mut self, cross: &[f64], diag: f64) -> Result<&[f64]> {
        Error::check_dim(self.len(), cross.len())?;
        let mut row = self.forward_solve(cross);
        let schur = diag + self.jitter - dot(&row, &row);
        if !(schur > min_pivot(self.jitter, self.scale)) || !schur.is_finite() {
            return Err(Error::NotPositiveDefinite {
                jitter: self.jitter,
            });
        }
        row.push(schur.sqrt());
        self.rows.push(row);
        Ok(self.rows.last().map(Vec::as_slice).unwrap_or(&[]))
    }

    /// Solves `L x = b`.
    pub fn forward_solve(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.len());
        let mut x = Vec::with_capacity(b.len());
        for (i, row) in self.rows.iter().enumerate() {
            let s = b[i] - dot(&row[..i], &x);
            x.push(s / row[i]);
        }
        x
    }

    /// Solves `Lᵀ x = b`.
    pub fn backward_solve(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.len());
        let mut x = b.to_vec();
        for i in (0..self.len()).rev() {
            let row = &self.rows[i];
            x[i] /= row[i];
            let xi = x[i];
            for (xk, lik) in x[..i].iter_mut().zip(&row[..i]) {
                *xk -= lik * xi;
            }
        }
        x
    }

    /// Solves `L Lᵀ x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward_solve(&self.forward_solve(b))
    }

    /// `ln det(L Lᵀ)`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.rows.iter().enumerate().map(|(i, r)| r[i].ln()).sum::<f64>()
    }

    /// Computes `L z`.
    pub fn mul_vec(&self, z: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| dot(row, &z[..row.len()]))
            .collect()
    }
}

fn sanitize_scale(scale: f64) -> f64 {
    if scale.is_finite() && scale > 0.0 {
        scale
    } else {
        1.0
    }
}

/// Next rung of the jitter ladder `0, 1e-10, 1e-9, …, 1e-4`, or `None` once
/// the top has been tried.
pub fn next_relative_jitter(rel: f64) -> Option<f64> {
    if rel < JITTER_START {
        Some(JITTER_START)
    } else if rel >= JITTER_MAX * (1.0 - 1e-9) {
        None
    } else {
        Some((rel * 10.0).min(JITTER_MAX))
    }
}

/// Squared pivots must exceed this; without jitter, tiny pivots are rejected
/// so that near-singular matrices go through the jitter ladder.
fn min_pivot(jitter: f64, scale: f64) -> f64 {
    if jitter > 0.0 {
        0.0
    } else {
        JITTER_START * scale * (1.0 - 1e-9)
    }
}

fn try_factor(a: &[Vec<f64>], jitter: f64, min_pivot: f64) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(i + 1);
        for j in 0..i {
            let s = a[i][j] - dot(&row[..j], &rows[j][..j]);
            row.push(s / rows[j][j]);
        }
        let d = a[i][i] + jitter - dot(&row, &row);
        if !(d > min_pivot) || !d.is_finite() {
            return None;
        }
        row.push(d.sqrt());
        rows.push(row);
    }
    Some(rows)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
