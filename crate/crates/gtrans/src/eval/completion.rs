//! Low-rank completion of a partially observed adjacency matrix.
//!
//! Observed entries are inverse-propensity rescaled, the rescaled matrix is
//! truncated to its leading eigenspace, and the reconstruction is clamped to
//! [0, 1]. Used by the cross-validation path to fill in held-out folds.

use crate::error::{Error, Result};
use crate::eval::linkpred::MaskMatrix;
use crate::graphon::AdjMatrix;
use crate::matrix;
use ndarray::Array2;

/// Complete a masked adjacency matrix at the given rank.
///
/// `rank: None` picks the rank by the largest gap among the ten leading
/// eigenvalue magnitudes.
pub fn matrix_complete(
    a_masked: &AdjMatrix,
    mask: &MaskMatrix,
    rank: Option<usize>,
) -> Result<Array2<f64>> {
    let n = a_masked.n();
    if mask.n() != n {
        return Err(Error::DimensionMismatch {
            context: "matrix completion",
            left: format!("{n}x{n}"),
            right: format!("{0}x{0}", mask.n()),
        });
    }
    if let Some(r) = rank {
        if r == 0 || r >= n {
            return Err(Error::InvalidRank { rank: r, n });
        }
    }
    let total_pairs = n * (n - 1) / 2;
    let observed = mask.observed_count();
    if observed == 0 {
        return Err(Error::EmptyInput("observed entries"));
    }
    let q = observed as f64 / total_pairs as f64;

    let scaled = a_masked.values().mapv(|v| v / q);
    let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| scaled[[i, j]]);
    let eig = dm.symmetric_eigen();

    // order by eigenvalue magnitude
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .abs()
            .partial_cmp(&eig.eigenvalues[a].abs())
            .unwrap()
    });

    let r = match rank {
        Some(r) => r,
        None => {
            let top = order.len().min(10);
            let mags: Vec<f64> = order[..top]
                .iter()
                .map(|&k| eig.eigenvalues[k].abs())
                .collect();
            let mut best_gap = f64::NEG_INFINITY;
            let mut best_r = 1;
            for k in 0..mags.len().saturating_sub(1) {
                let gap = mags[k] - mags[k + 1];
                if gap > best_gap {
                    best_gap = gap;
                    best_r = k + 1;
                }
            }
            best_r
        }
    };

    let mut recon = nalgebra::DMatrix::<f64>::zeros(n, n);
    for &k in order.iter().take(r) {
        let lambda = eig.eigenvalues[k];
        let v = eig.eigenvectors.column(k);
        for i in 0..n {
            let li = lambda * v[i];
            for j in 0..n {
                recon[(i, j)] += li * v[j];
            }
        }
    }
    let mut out = Array2::from_shape_fn((n, n), |(i, j)| recon[(i, j)]);
    out = matrix::symmetrized(&out);
    matrix::clamp_in_place(&mut out, 0.0, 1.0);
    Ok(out)
}
