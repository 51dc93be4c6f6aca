//! Small dense linear-algebra helpers bridging `ndarray` storage and `nalgebra` factorizations.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;

/// Condition-number cap beyond which a metric is treated as degenerate.
pub const CONDITION_CAP: f64 = 1e12;

pub(crate) fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn from_na(a: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), a.ncols()), |(i, j)| a[(i, j)])
}

/// Ratio of extreme singular values; infinite for a singular matrix.
pub fn condition_estimate(a: &Array2<f64>) -> f64 {
    let sv = to_na(a).singular_values();
    let max = sv.iter().fold(0.0f64, |m, v| m.max(*v));
    let min = sv.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse and condition estimate, or `None` when the estimate exceeds `cap`.
pub fn inverse_with_condition(a: &Array2<f64>, cap: f64) -> (Option<Array2<f64>>, f64) {
    let cond = condition_estimate(a);
    if !(cond <= cap) {
        return (None, cond);
    }
    (to_na(a).try_inverse().map(|inv| from_na(&inv)), cond)
}

pub fn determinant(a: &Array2<f64>) -> f64 {
    to_na(a).determinant()
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = to_na(a).symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Minimal-norm least-squares solution together with the numerical rank.
pub struct LeastSquares {
    pub solution: Vec<f64>,
    pub rank: usize,
}

pub fn least_squares(design: &DMatrix<f64>, rhs: &[f64]) -> LeastSquares {
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, v| m.max(*v));
    let cutoff = smax * 1e-10;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let b = DVector::from_column_slice(rhs);
    let solution = if smax == 0.0 {
        vec![0.0; design.ncols()]
    } else {
        svd.solve(&b, cutoff).map(|s| s.iter().copied().collect()).unwrap_or_else(|_| vec![0.0; design.ncols()])
    };
    LeastSquares { solution, rank }
}
