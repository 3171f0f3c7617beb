//! Small helpers for dense symmetric matrices.

use ndarray::Array2;

/// Largest absolute difference |a_ij - a_ji|.
pub fn max_asymmetry(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    worst
}

/// (A + A^T) / 2.
pub fn symmetrized(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| 0.5 * (a[[i, j]] + a[[j, i]]))
}

pub fn clamp_in_place(a: &mut Array2<f64>, lo: f64, hi: f64) {
    a.mapv_inplace(|v| v.clamp(lo, hi));
}

/// Squared Frobenius norm.
pub fn frobenius_sq(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

pub fn mean(a: &Array2<f64>) -> f64 {
    a.mean().unwrap_or(0.0)
}

/// Mean and (population) standard deviation of a sample.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    (m, var.sqrt())
}
