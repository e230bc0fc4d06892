//! Dense and banded linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest absolute entry.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Solves `a * x = b` by LU with partial pivoting.
///
/// Fails if any pivot falls below `rel_pivot_tol * max|a|`.
pub fn lu_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, rel_pivot_tol: f64) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            context: "lu_solve (square matrix)",
            expected: a.nrows(),
            actual: a.ncols(),
        });
    }
    if b.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch {
            context: "lu_solve right-hand side",
            expected: a.nrows(),
            actual: b.nrows(),
        });
    }
    let threshold = rel_pivot_tol * max_abs(a);
    let lu = a.clone().lu();
    let u = lu.u();
    for (column, pivot) in u.diagonal().iter().enumerate() {
        if !(pivot.abs() > threshold) {
            return Err(Error::Singular {
                column,
                pivot: *pivot,
                threshold,
            });
        }
    }
    lu.solve(b).ok_or(Error::Singular {
        column: 0,
        pivot: 0.0,
        threshold,
    })
}

/// Singular values, descending.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// `σ_max / σ_min`; infinite when the smallest singular value is zero.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => f64::NAN,
    }
}

/// Square matrix with `lower` sub- and `upper` super-diagonals.
///
/// Storage keeps room for the fill-in that partial pivoting creates, so the
/// factorization can run in place.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    // row-major, each row holds columns [r - lower, r + lower + upper]
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        let width = 2 * lower + upper + 1;
        Self {
            n,
            lower,
            upper,
            data: vec![0.0; n * width],
        }
    }

    fn width(&self) -> usize {
        2 * self.lower + self.upper + 1
    }

    fn slot(&self, row: usize, col: usize) -> Option<usize> {
        let first = row as isize - self.lower as isize;
        let offset = col as isize - first;
        (offset >= 0 && (offset as usize) < self.width()).then(|| row * self.width() + offset as usize)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.slot(row, col).map_or(0.0, |s| self.data[s])
    }

    /// Sets an entry inside the declared band.
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let in_band = col + self.lower >= row && col <= row + self.upper;
        assert!(in_band, "entry ({row}, {col}) outside band");
        let s = self.slot(row, col).expect("band slot");
        self.data[s] = value;
    }

    /// Solves `self * x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(mut self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.n;
        let mut rhs = b.clone();
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let threshold = 1e-300f64.max(1e-15 * scale);
        for k in 0..n {
            let last_row = (k + self.lower).min(n - 1);
            let mut pivot_row = k;
            let mut pivot_val = self.get(k, k).abs();
            for r in k + 1..=last_row {
                let v = self.get(r, k).abs();
                if v > pivot_val {
                    pivot_row = r;
                    pivot_val = v;
                }
            }
            if !(pivot_val > threshold) {
                return Err(Error::Singular {
                    column: k,
                    pivot: pivot_val,
                    threshold,
                });
            }
            let last_col = (k + self.lower + self.upper).min(n - 1);
            if pivot_row != k {
                for c in k..=last_col {
                    let a = self.get(k, c);
                    let b = self.get(pivot_row, c);
                    self.put(k, c, b);
                    self.put(pivot_row, c, a);
                }
                rhs.swap_rows(k, pivot_row);
            }
            let pivot = self.get(k, k);
            for r in k + 1..=last_row {
                let factor = self.get(r, k) / pivot;
                if factor == 0.0 {
                    continue;
                }
                for c in k..=last_col {
                    let v = self.get(r, c) - factor * self.get(k, c);
                    self.put(r, c, v);
                }
                rhs[r] -= factor * rhs[k];
            }
        }
        let mut x = DVector::zeros(n);
        for k in (0..n).rev() {
            let last_col = (k + self.lower + self.upper).min(n - 1);
            let mut acc = rhs[k];
            for c in k + 1..=last_col {
                acc -= self.get(k, c) * x[c];
            }
            x[k] = acc / self.get(k, k);
        }
        Ok(x)
    }

    fn put(&mut self, row: usize, col: usize, value: f64) {
        match self.slot(row, col) {
            Some(s) => self.data[s] = value,
            None => debug_assert!(value == 0.0, "fill outside storage at ({row}, {col})"),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |r, c| self.get(r, c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lu_identity_and_guard() {
        let eye = DMatrix::<f64>::identity(3, 3);
        let b = DMatrix::from_fn(3, 2, |r, c| (r * 2 + c) as f64);
        assert_eq!(lu_solve(&eye, &b, 1e-14).unwrap(), b);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(lu_solve(&singular, &b.rows(0, 2).into_owned(), 1e-14), Err(Error::Singular { .. })));
    }

    #[test]
    fn condition_examples() {
        assert!((condition_number(&DMatrix::identity(4, 4)) - 1.0).abs() < 1e-15);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-3]));
        assert!((condition_number(&d) - 1e3).abs() < 1e-9);
        assert!(condition_number(&DMatrix::zeros(2, 2)).is_infinite());
    }

    #[test]
    fn banded_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, lo, up) in &[(1, 0, 0), (6, 1, 1), (20, 2, 2), (15, 3, 1), (9, 0, 2)] {
            let mut band = BandedMatrix::zeros(n, lo, up);
            for r in 0..n {
                for c in r.saturating_sub(lo)..=(r + up).min(n - 1) {
                    // weak diagonal forces real pivoting
                    band.set(r, c, rng.random_range(-1.0..1.0));
                }
            }
            let dense = band.to_dense();
            let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let x = band.solve(&b).unwrap();
            let resid = (&dense * &x - &b).norm();
            assert!(resid < 1e-10 * (1.0 + x.norm()), "n={n} residual {resid}");
        }
    }
}
