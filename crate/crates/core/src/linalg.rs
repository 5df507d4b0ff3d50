//! Dense Cholesky factorization for the small symmetric positive-definite
//! systems that kriging produces.

use nalgebra::{DMatrix, DVector};

/// Failure to factor: the first non-positive (or non-finite) pivot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotFailure {
    pub row: usize,
    pub pivot: f64,
}

/// Lower-triangular factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    /// Factors `a`, reading only its lower triangle.
    pub fn factor(a: &DMatrix<f64>) -> Result<Self, PivotFailure> {
        assert!(a.is_square(), "Cholesky needs a square matrix");
        let n = a.nrows();
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(PivotFailure { row: j, pivot: d });
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    pub fn factor_matrix(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Smallest diagonal entry of `L`.
    pub fn min_pivot(&self) -> f64 {
        self.l.diagonal().min()
    }

    /// Solves `A x = b` by forward then backward substitution.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let l = &self.l;
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[(k, i)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn known_factor() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 12.0, -16.0, 12.0, 37.0, -43.0, -16.0, -43.0, 98.0]);
        let c = Cholesky::factor(&a).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 6.0, 1.0, 0.0, -8.0, 5.0, 3.0]);
        assert_abs_diff_eq!(c.factor_matrix(), &expected, epsilon = 1e-12);
        assert_eq!(c.min_pivot(), 1.0);
    }

    #[test]
    fn reports_failing_pivot() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = Cholesky::factor(&a).unwrap_err();
        assert_eq!(err.row, 1);
        assert_abs_diff_eq!(err.pivot, -3.0, epsilon = 1e-15);
    }

    #[test]
    fn empty_system() {
        let c = Cholesky::factor(&DMatrix::zeros(0, 0)).unwrap();
        assert_eq!(c.solve(&DVector::zeros(0)).len(), 0);
    }

    proptest! {
        #[test]
        fn solves_spd_systems(
            n in 1usize..12,
            entries in proptest::collection::vec(-1.0f64..1.0, 144),
            rhs in proptest::collection::vec(-5.0f64..5.0, 12),
        ) {
            let b = DMatrix::from_fn(n, n, |i, j| entries[i * 12 + j]);
            let a = &b * b.transpose() + DMatrix::identity(n, n) * 0.5;
            let c = Cholesky::factor(&a).unwrap();
            let l = c.factor_matrix();
            prop_assert!((l * l.transpose() - &a).amax() < 1e-12);
            let rhs = DVector::from_row_slice(&rhs[..n]);
            let x = c.solve(&rhs);
            prop_assert!((&a * x - rhs).amax() < 1e-10);
        }
    }
}
