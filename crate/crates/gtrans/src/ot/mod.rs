//! Gromov-Wasserstein coupling solvers.
//!
//! Two routes to a coupling between symmetric similarity matrices C (n_s x
//! n_s) and D (n_t x n_t) under the squared loss L(x, y) = (x - y)^2:
//!
//! - exact GW: Frank-Wolfe with an exact network-simplex linear-OT inner
//!   solver and closed-form line search;
//! - entropic GW: mirror descent, re-solving a Sinkhorn problem on the
//!   linearized cost each outer iteration.
//!
//! Both report the raw quadratic objective
//! sum_{ijkl} (C_ik - D_jl)^2 pi_ij pi_kl; its square root is the GW distance
//! used by the transfer pipeline's gate.

mod gw;
mod simplex;
mod sinkhorn;

pub use gw::{gw_gradient, gw_objective, solve, solve_egw, solve_gw};
pub use simplex::exact_linear_ot;
pub use sinkhorn::sinkhorn;

use crate::error::{Error, Result};
use ndarray::{Array1, Array2};

/// Row and column marginals of a coupling; each a probability vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Marginals {
    mu: Array1<f64>,
    nu: Array1<f64>,
}

impl Marginals {
    pub fn new(mu: Array1<f64>, nu: Array1<f64>) -> Result<Self> {
        for (name, w) in [("mu", &mu), ("nu", &nu)] {
            if w.is_empty() {
                return Err(Error::InvalidMarginals(format!("{name} is empty")));
            }
            if w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                return Err(Error::InvalidMarginals(format!(
                    "{name} has a negative or non-finite entry"
                )));
            }
            let s = w.sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidMarginals(format!(
                    "{name} sums to {s}, expected 1"
                )));
            }
        }
        Ok(Self { mu, nu })
    }

    /// Uniform marginals 1/n_s and 1/n_t.
    pub fn uniform(n_s: usize, n_t: usize) -> Result<Self> {
        if n_s == 0 || n_t == 0 {
            return Err(Error::InvalidMarginals("empty marginal".into()));
        }
        Ok(Self {
            mu: Array1::from_elem(n_s, 1.0 / n_s as f64),
            nu: Array1::from_elem(n_t, 1.0 / n_t as f64),
        })
    }

    pub fn mu(&self) -> &Array1<f64> {
        &self.mu
    }

    pub fn nu(&self) -> &Array1<f64> {
        &self.nu
    }

    pub fn n_source(&self) -> usize {
        self.mu.len()
    }

    pub fn n_target(&self) -> usize {
        self.nu.len()
    }

    /// Independent coupling mu nu^T.
    pub fn product(&self) -> Array2<f64> {
        let (m, n) = (self.mu.len(), self.nu.len());
        Array2::from_shape_fn((m, n), |(i, j)| self.mu[i] * self.nu[j])
    }

    /// L-infinity violation of the marginal constraints by `pi`.
    pub fn violation(&self, pi: &Array2<f64>) -> f64 {
        let mut worst = 0.0f64;
        for (i, &m) in self.mu.iter().enumerate() {
            worst = worst.max((pi.row(i).sum() - m).abs());
        }
        for (j, &n) in self.nu.iter().enumerate() {
            worst = worst.max((pi.column(j).sum() - n).abs());
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    ExactGw,
    EntropicGw,
}

/// Options for [`solve`], [`solve_gw`] and [`solve_egw`].
#[derive(Clone, Debug)]
pub struct GwSolverOptions {
    pub kind: SolverKind,
    /// Entropic penalty (entropic solver only).
    pub epsilon: f64,
    /// Outer (Frank-Wolfe / mirror descent) iteration cap.
    pub max_outer: usize,
    /// Inner Sinkhorn iteration cap.
    pub max_sinkhorn: usize,
    /// Relative objective change at which the outer loop stops.
    pub tol_objective: f64,
    /// Acceptable L-infinity marginal violation of the returned coupling.
    pub tol_marginal: f64,
    /// Sinkhorn marginal tolerance.
    pub sinkhorn_tol: f64,
    /// Initial coupling; product measure when absent.
    pub init: Option<Array2<f64>>,
}

impl GwSolverOptions {
    pub fn exact() -> Self {
        Self {
            kind: SolverKind::ExactGw,
            epsilon: 0.01,
            max_outer: 200,
            max_sinkhorn: 10_000,
            tol_objective: 1e-8,
            tol_marginal: 1e-12,
            sinkhorn_tol: 1e-9,
            init: None,
        }
    }

    pub fn entropic(epsilon: f64) -> Self {
        // The inner Sinkhorn tolerance matches the marginal guarantee of the
        // returned coupling; near-degenerate duals at small epsilon converge
        // only sublinearly below this scale.
        Self {
            kind: SolverKind::EntropicGw,
            epsilon,
            tol_marginal: 1e-7,
            sinkhorn_tol: 1e-7,
            ..Self::exact()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.kind == SolverKind::EntropicGw && !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "entropic solver requires epsilon > 0, got {}",
                self.epsilon
            )));
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidConfig("max_outer must be positive".into()));
        }
        Ok(())
    }
}

/// A transport plan with solver diagnostics.
#[derive(Clone, Debug)]
pub struct Coupling {
    /// n_s x n_t nonnegative plan with prescribed marginals.
    pub pi: Array2<f64>,
    /// Raw quadratic GW objective at `pi`.
    pub objective: f64,
    /// Quadratic objective plus the epsilon-weighted KL penalty (entropic
    /// solver only).
    pub entropic_objective: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl Coupling {
    /// GW distance: square root of the quadratic objective.
    pub fn distance(&self) -> f64 {
        self.objective.max(0.0).sqrt()
    }
}

/// Scale a coupling so every column sums to one.
///
/// A zero column means no source node was matched to that target node; the
/// caller decides how to recover (the transfer pipeline substitutes a uniform
/// column and records a warning).
pub fn column_normalize(pi: &Array2<f64>) -> Result<Array2<f64>> {
    let (m, n) = pi.dim();
    let mut out = pi.clone();
    for j in 0..n {
        let s = out.column(j).sum();
        if s <= 0.0 {
            return Err(Error::DegenerateColumn(j));
        }
        for i in 0..m {
            out[[i, j]] /= s;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn marginals_validate() {
        assert!(Marginals::uniform(3, 5).is_ok());
        assert!(Marginals::new(array![0.5, 0.6], array![1.0]).is_err());
        assert!(Marginals::new(array![-0.1, 1.1], array![1.0]).is_err());
    }

    #[test]
    fn column_normalize_product_measure() {
        let m = Marginals::uniform(4, 3).unwrap();
        let pi = m.product();
        let t = column_normalize(&pi).unwrap();
        for v in t.iter() {
            assert!((v - 0.25).abs() <= 1e-12);
        }
        for j in 0..3 {
            assert!((t.column(j).sum() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn column_normalize_scaled_permutation() {
        let pi = array![[0.0, 0.5, 0.0], [0.5, 0.0, 0.0], [0.0, 0.0, 0.5]] / 1.5;
        let t = column_normalize(&pi).unwrap();
        let expected = array![[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        for (a, b) in t.iter().zip(expected.iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn column_normalize_rejects_zero_column() {
        let pi = array![[0.5, 0.0], [0.5, 0.0]];
        assert!(matches!(
            column_normalize(&pi),
            Err(Error::DegenerateColumn(1))
        ));
    }
}
