//! Neighborhood smoothing for symmetric matrices, plus the USVT baseline.
//!
//! The smoother works identically for binary adjacency matrices and
//! real-valued symmetric inputs (transferred estimators, residuals): nodes
//! with similar connection profiles are pooled via the row-dissimilarity
//!
//! ```text
//! delta_{ii'}^2 = max_{k != i,i'} |<row_i(X) - row_i'(X), row_k(X)>| / n
//! ```
//!
//! and each entry is the two-sided average over the resulting neighborhoods.

use crate::error::{Error, Result};
use crate::graphon::{AdjMatrix, ProbMatrix};
use crate::matrix;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Inputs are expected symmetric; differences at this scale are treated as
/// floating-point noise and symmetrized away.
const INPUT_SYMMETRY_TOL: f64 = 1e-8;

/// Configuration of the neighborhood smoother.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmootherConfig {
    /// C0 in the quantile level h = min(1, C0 sqrt(log n / n)).
    pub quantile_constant: f64,
    /// Apply a final (Y + Y^T)/2 pass.
    pub symmetrize: bool,
    /// Clamp the output entrywise when present.
    pub clamp_range: Option<(f64, f64)>,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self::for_probabilities()
    }
}

impl SmootherConfig {
    /// Smoothing of probability-like inputs: output clamped to [0, 1].
    pub fn for_probabilities() -> Self {
        Self {
            quantile_constant: 1.0,
            symmetrize: true,
            clamp_range: Some((0.0, 1.0)),
        }
    }

    /// Smoothing of residual inputs (range [-1, 1]): no clamping.
    pub fn for_residuals() -> Self {
        Self {
            quantile_constant: 1.0,
            symmetrize: true,
            clamp_range: None,
        }
    }

    /// Quantile level for a given node count, clipped to (0, 1].
    pub fn quantile_level(&self, n: usize) -> f64 {
        (self.quantile_constant * ((n as f64).ln() / n as f64).sqrt()).min(1.0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.quantile_constant > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "quantile constant must be positive, got {}",
                self.quantile_constant
            )));
        }
        if let Some((lo, hi)) = self.clamp_range {
            if lo > hi {
                return Err(Error::InvalidConfig(format!(
                    "clamp range ({lo}, {hi}) is empty"
                )));
            }
        }
        Ok(())
    }
}

/// Per-node neighborhoods derived from the dissimilarity matrix.
#[derive(Clone, Debug)]
pub struct NeighborhoodStructure {
    /// Symmetric dissimilarity matrix with zero diagonal.
    pub delta: Array2<f64>,
    /// Quantile level used for the per-node threshold.
    pub h: f64,
    /// N_i = { i' != i : delta_{ii'} <= q_i(h) }; never empty.
    pub neighborhoods: Vec<Vec<usize>>,
}

fn check_square_symmetric(x: &Array2<f64>, context: &'static str) -> Result<()> {
    if x.nrows() != x.ncols() {
        return Err(Error::DimensionMismatch {
            context,
            left: x.nrows().to_string(),
            right: x.ncols().to_string(),
        });
    }
    let dev = matrix::max_asymmetry(x);
    if dev > INPUT_SYMMETRY_TOL {
        return Err(Error::NotSymmetric {
            max_dev: dev,
            tol: INPUT_SYMMETRY_TOL,
        });
    }
    Ok(())
}

/// Row-profile dissimilarity matrix.
///
/// Binary and real-valued inputs use the identical formula. Needs n >= 3: the
/// max over k excludes both endpoints.
pub fn ns_dissimilarity(x: &Array2<f64>) -> Result<Array2<f64>> {
    check_square_symmetric(x, "dissimilarity input")?;
    let n = x.nrows();
    if n < 3 {
        return Err(Error::TooFewNodes {
            context: "neighborhood smoothing",
            n,
            min: 3,
        });
    }
    // <row_i - row_i', row_k> = (X X)_ik - (X X)_i'k for symmetric X.
    let s = x.dot(x);
    let inv_n = 1.0 / n as f64;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let si = s.row(i);
            let mut row = vec![0.0; n];
            for ip in (i + 1)..n {
                let sip = s.row(ip);
                let mut best = 0.0f64;
                for k in 0..n {
                    if k == i || k == ip {
                        continue;
                    }
                    let d = (si[k] - sip[k]).abs();
                    if d > best {
                        best = d;
                    }
                }
                row[ip] = (best * inv_n).sqrt();
            }
            row
        })
        .collect();
    let mut delta = Array2::zeros((n, n));
    for i in 0..n {
        for ip in (i + 1)..n {
            delta[[i, ip]] = rows[i][ip];
            delta[[ip, i]] = rows[i][ip];
        }
    }
    Ok(delta)
}

/// Build neighborhoods from a matrix via the per-node nearest-rank quantile.
///
/// Ties at the threshold all enter the neighborhood, which keeps the
/// construction deterministic and permutation-equivariant.
pub fn neighborhood_structure(
    x: &Array2<f64>,
    cfg: &SmootherConfig,
) -> Result<NeighborhoodStructure> {
    cfg.validate()?;
    let delta = ns_dissimilarity(x)?;
    let n = delta.nrows();
    let h = cfg.quantile_level(n);
    let neighborhoods: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| delta[[i, j]]).collect();
            others.sort_by(|a, b| a.partial_cmp(b).unwrap());
            // Nearest-rank (inclusive) index, at least one element.
            let rank = ((h * (n - 1) as f64).ceil() as usize).clamp(1, n - 1);
            let q = others[rank - 1];
            (0..n).filter(|&j| j != i && delta[[i, j]] <= q).collect()
        })
        .collect();
    Ok(NeighborhoodStructure {
        delta,
        h,
        neighborhoods,
    })
}

/// Neighborhood-smoothing estimate of a symmetric matrix.
///
/// Output entry (i, j) is the two-sided average
/// (mean_{i' in N_i} X_{i'j} + mean_{j' in N_j} X_{ij'}) / 2.
pub fn ns_estimate(x: &Array2<f64>, cfg: &SmootherConfig) -> Result<Array2<f64>> {
    let structure = neighborhood_structure(x, cfg)?;
    Ok(smooth_with(x, &structure, cfg))
}

/// Smooth `x` using a precomputed neighborhood structure.
///
/// Useful when several matrices are smoothed with neighborhoods from one
/// reference matrix, and for inspecting the structure itself.
pub fn smooth_with(
    x: &Array2<f64>,
    structure: &NeighborhoodStructure,
    cfg: &SmootherConfig,
) -> Array2<f64> {
    let n = x.nrows();
    // R_ij = mean_{i' in N_i} X_{i'j}
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ni = &structure.neighborhoods[i];
            let mut acc = vec![0.0; n];
            for &ip in ni {
                let row = x.row(ip);
                for (a, &v) in acc.iter_mut().zip(row.iter()) {
                    *a += v;
                }
            }
            let inv = 1.0 / ni.len() as f64;
            for a in &mut acc {
                *a *= inv;
            }
            acc
        })
        .collect();
    // Two-sided average; for symmetric X the column side is R^T.
    let mut y = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            y[[i, j]] = 0.5 * (rows[i][j] + rows[j][i]);
        }
    }
    if cfg.symmetrize {
        y = matrix::symmetrized(&y);
    }
    if let Some((lo, hi)) = cfg.clamp_range {
        matrix::clamp_in_place(&mut y, lo, hi);
    }
    y
}

/// Universal singular value thresholding estimate of a probability matrix.
///
/// Spectral components of the adjacency with singular value above
/// (2 + eta) sqrt(n) are kept; the reconstruction is clamped to [0, 1].
pub fn usvt_estimate(a: &AdjMatrix, eta: f64) -> ProbMatrix {
    let n = a.n();
    let vals = a.values();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| vals[[i, j]]);
    let eig = m.symmetric_eigen();
    let threshold = (2.0 + eta) * (n as f64).sqrt();

    let mut recon = nalgebra::DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let lambda = eig.eigenvalues[k];
        if lambda.abs() > threshold {
            let v = eig.eigenvectors.column(k);
            // recon += lambda v v^T
            for i in 0..n {
                let li = lambda * v[i];
                for j in 0..n {
                    recon[(i, j)] += li * v[j];
                }
            }
        }
    }

    let mut out = Array2::from_shape_fn((n, n), |(i, j)| recon[(i, j)]);
    out = matrix::symmetrized(&out);
    matrix::clamp_in_place(&mut out, 0.0, 1.0);
    ProbMatrix::new(out).expect("clamped symmetric matrix is a valid probability matrix")
}
