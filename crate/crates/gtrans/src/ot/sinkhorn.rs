//! Log-domain Sinkhorn scaling for entropic linear optimal transport.

use crate::error::{Error, Result};
use crate::ot::Marginals;
use ndarray::{Array1, Array2};

/// Residual ceiling under which a stalled run still yields a usable plan.
const STALL_CEILING: f64 = 1e-4;
/// Window (iterations) over which progress is measured.
const STALL_WINDOW: usize = 250;

pub(crate) enum SinkhornOutcome {
    Converged { iterations: usize },
    /// Residual decay flattened out above the tolerance; the plan is still
    /// feasible to within `residual`. Near-degenerate duals (ties in the
    /// cost) decay only sublinearly, so waiting longer is pointless.
    Stalled { iterations: usize, residual: f64 },
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.collect();
    let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Entropic OT plan for a linear cost.
///
/// Scaling iterations on the kernel K = exp(-cost / eps), carried out
/// entirely in the log domain; errors unless the L-infinity marginal
/// violation of the returned plan drops below `tol` within `max_iter`
/// iterations.
pub fn sinkhorn(
    cost: &Array2<f64>,
    m: &Marginals,
    eps: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Array2<f64>> {
    let mut f = Array1::zeros(m.n_source());
    let mut g = Array1::zeros(m.n_target());
    let (pi, outcome) = sinkhorn_core(cost, m, eps, tol, max_iter, &mut f, &mut g)?;
    match outcome {
        SinkhornOutcome::Converged { .. } => Ok(pi),
        SinkhornOutcome::Stalled {
            iterations,
            residual,
        } => Err(Error::NoConvergence {
            what: "sinkhorn",
            iterations,
            residual,
        }),
    }
}

/// Sinkhorn with caller-owned dual potentials (for warm starts across the
/// mirror-descent iterations of the entropic GW solver) and an explicit
/// stalled outcome. Errors only when the residual is too large to be usable.
pub(crate) fn sinkhorn_core(
    cost: &Array2<f64>,
    m: &Marginals,
    eps: f64,
    tol: f64,
    max_iter: usize,
    f: &mut Array1<f64>,
    g: &mut Array1<f64>,
) -> Result<(Array2<f64>, SinkhornOutcome)> {
    let (nr, nc) = cost.dim();
    if nr != m.n_source() || nc != m.n_target() {
        return Err(Error::DimensionMismatch {
            context: "sinkhorn cost",
            left: format!("{nr}x{nc}"),
            right: format!("{}x{}", m.n_source(), m.n_target()),
        });
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "sinkhorn requires eps > 0, got {eps}"
        )));
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(
            "sinkhorn cost has non-finite entries".into(),
        ));
    }
    if m.mu().iter().chain(m.nu().iter()).any(|&w| w <= 0.0) {
        return Err(Error::InvalidMarginals(
            "sinkhorn requires strictly positive marginals".into(),
        ));
    }

    let log_mu: Vec<f64> = m.mu().iter().map(|w| w.ln()).collect();
    let log_nu: Vec<f64> = m.nu().iter().map(|w| w.ln()).collect();

    let build_plan = |f: &Array1<f64>, g: &Array1<f64>| {
        Array2::from_shape_fn((nr, nc), |(i, j)| ((f[i] + g[j] - cost[[i, j]]) / eps).exp())
    };

    let mut residual = f64::INFINITY;
    let mut window_start_residual = f64::INFINITY;
    for it in 1..=max_iter {
        for i in 0..nr {
            let lse = log_sum_exp((0..nc).map(|j| (g[j] - cost[[i, j]]) / eps));
            f[i] = eps * (log_mu[i] - lse);
        }
        for j in 0..nc {
            let lse = log_sum_exp((0..nr).map(|i| (f[i] - cost[[i, j]]) / eps));
            g[j] = eps * (log_nu[j] - lse);
        }
        // Column marginals are exact after the g-update; the row violation
        // measures convergence.
        residual = 0.0;
        for i in 0..nr {
            let row_sum: f64 = (0..nc)
                .map(|j| ((f[i] + g[j] - cost[[i, j]]) / eps).exp())
                .sum();
            residual = residual.max((row_sum - m.mu()[i]).abs());
        }
        if residual < tol {
            return Ok((build_plan(f, g), SinkhornOutcome::Converged { iterations: it }));
        }
        if it % STALL_WINDOW == 0 {
            if residual <= STALL_CEILING && residual > 0.98 * window_start_residual {
                return Ok((
                    build_plan(f, g),
                    SinkhornOutcome::Stalled {
                        iterations: it,
                        residual,
                    },
                ));
            }
            window_start_residual = residual;
        }
    }
    if residual <= STALL_CEILING {
        return Ok((
            build_plan(f, g),
            SinkhornOutcome::Stalled {
                iterations: max_iter,
                residual,
            },
        ));
    }
    Err(Error::NoConvergence {
        what: "sinkhorn",
        iterations: max_iter,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn zero_cost_gives_product_measure() {
        let m = Marginals::uniform(3, 4).unwrap();
        let pi = sinkhorn(&Array2::zeros((3, 4)), &m, 0.5, 1e-12, 1000).unwrap();
        let expected = m.product();
        for (a, b) in pi.iter().zip(expected.iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn symmetric_cost_symmetric_plan() {
        let cost = array![[0.0, 1.0], [1.0, 0.0]];
        let m = Marginals::uniform(2, 2).unwrap();
        let pi = sinkhorn(&cost, &m, 0.2, 1e-10, 5000).unwrap();
        assert!((pi[[0, 1]] - pi[[1, 0]]).abs() <= 1e-10);
        assert!((pi[[0, 0]] - pi[[1, 1]]).abs() <= 1e-10);
    }

    #[test]
    fn random_cost_reproduces_marginals() {
        let mut rng = stream_rng(3, &[14]);
        let cost = Array2::from_shape_fn((5, 4), |_| rng.random::<f64>());
        let m = Marginals::uniform(5, 4).unwrap();
        let pi = sinkhorn(&cost, &m, 0.1, 1e-9, 10_000).unwrap();
        assert!(m.violation(&pi) <= 1e-9);
        assert!(pi.iter().all(|&v| v >= 0.0));
        assert!((pi.sum() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn tiny_iteration_budget_errors() {
        let mut rng = stream_rng(4, &[15]);
        let cost = Array2::from_shape_fn((6, 5), |_| rng.random::<f64>());
        let m = Marginals::uniform(6, 5).unwrap();
        let err = sinkhorn(&cost, &m, 0.01, 1e-12, 1).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { what: "sinkhorn", .. }));
    }
}
