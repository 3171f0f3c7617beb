//! Gromov-Wasserstein solvers under the squared loss.
//!
//! The quadratic objective F(pi) = sum_{ijkl} (C_ik - D_jl)^2 pi_ij pi_kl is
//! handled through its linearization
//!
//! ```text
//! G(pi)_ij = sum_{kl} (C_ik - D_jl)^2 pi_kl
//!          = (C.C) r 1^T + 1 ((D.D) c)^T - 2 C pi D^T
//! ```
//!
//! (r, c the row/column sums of pi), which never materializes the four-index
//! tensor. F(pi) = <G(pi), pi> and the gradient of F is 2 G(pi).

use crate::error::{Error, Result};
use crate::matrix;
use crate::ot::sinkhorn::{sinkhorn_core, SinkhornOutcome};
use crate::ot::{exact_linear_ot, Coupling, GwSolverOptions, Marginals, SolverKind};
use ndarray::{Array1, Array2, Axis};

/// Linearized objective; precomputes the squared cost matrices once.
struct Quad<'a> {
    c: &'a Array2<f64>,
    d: &'a Array2<f64>,
    c_sq: Array2<f64>,
    d_sq: Array2<f64>,
}

impl<'a> Quad<'a> {
    fn new(c: &'a Array2<f64>, d: &'a Array2<f64>) -> Self {
        Self {
            c,
            d,
            c_sq: c.mapv(|x| x * x),
            d_sq: d.mapv(|x| x * x),
        }
    }

    /// G(pi); linear in pi, valid for any (not necessarily feasible) matrix.
    fn apply(&self, pi: &Array2<f64>) -> Array2<f64> {
        let r: Array1<f64> = pi.sum_axis(Axis(1));
        let col: Array1<f64> = pi.sum_axis(Axis(0));
        let a = self.c_sq.dot(&r);
        let b = self.d_sq.dot(&col);
        let cross = self.c.dot(pi).dot(&self.d.t());
        let (m, n) = pi.dim();
        Array2::from_shape_fn((m, n), |(i, j)| a[i] + b[j] - 2.0 * cross[[i, j]])
    }

    fn objective(&self, pi: &Array2<f64>) -> f64 {
        (&self.apply(pi) * pi).sum()
    }
}

fn validate_inputs(c: &Array2<f64>, d: &Array2<f64>, m: &Marginals) -> Result<()> {
    for (name, x, expect) in [
        ("source cost", c, m.n_source()),
        ("target cost", d, m.n_target()),
    ] {
        if x.nrows() != x.ncols() || x.nrows() != expect {
            return Err(Error::DimensionMismatch {
                context: "gw solver",
                left: format!("{name} {}x{}", x.nrows(), x.ncols()),
                right: format!("{expect}x{expect}"),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "{name} has non-finite entries"
            )));
        }
        let dev = matrix::max_asymmetry(x);
        if dev > 1e-8 {
            return Err(Error::NotSymmetric {
                max_dev: dev,
                tol: 1e-8,
            });
        }
    }
    Ok(())
}

fn initial_plan(m: &Marginals, opts: &GwSolverOptions) -> Result<Array2<f64>> {
    match &opts.init {
        None => Ok(m.product()),
        Some(pi) => {
            if pi.dim() != (m.n_source(), m.n_target()) {
                return Err(Error::DimensionMismatch {
                    context: "initial coupling",
                    left: format!("{}x{}", pi.nrows(), pi.ncols()),
                    right: format!("{}x{}", m.n_source(), m.n_target()),
                });
            }
            let viol = m.violation(pi);
            if viol > 1e-9 || pi.iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "initial coupling infeasible (marginal violation {viol:e})"
                )));
            }
            Ok(pi.clone())
        }
    }
}

/// Linearization of the GW objective at `pi`.
///
/// Entry (i, j) is sum_{kl} (C_ik - D_jl)^2 pi_kl. The gradient of the
/// quadratic objective is twice this matrix.
pub fn gw_gradient(
    c: &Array2<f64>,
    d: &Array2<f64>,
    pi: &Array2<f64>,
) -> Result<Array2<f64>> {
    if pi.nrows() != c.nrows() || pi.ncols() != d.nrows() {
        return Err(Error::DimensionMismatch {
            context: "gw gradient",
            left: format!("{}x{}", pi.nrows(), pi.ncols()),
            right: format!("{}x{}", c.nrows(), d.nrows()),
        });
    }
    if c.nrows() != c.ncols() || d.nrows() != d.ncols() {
        return Err(Error::DimensionMismatch {
            context: "gw gradient cost",
            left: format!("{}x{}", c.nrows(), c.ncols()),
            right: format!("{}x{}", d.nrows(), d.ncols()),
        });
    }
    Ok(Quad::new(c, d).apply(pi))
}

/// Raw quadratic GW objective at a coupling.
pub fn gw_objective(c: &Array2<f64>, d: &Array2<f64>, pi: &Array2<f64>) -> Result<f64> {
    Ok((&gw_gradient(c, d, pi)? * pi).sum())
}

/// Dispatch on the configured solver kind.
pub fn solve(
    c: &Array2<f64>,
    d: &Array2<f64>,
    m: &Marginals,
    opts: &GwSolverOptions,
) -> Result<Coupling> {
    match opts.kind {
        SolverKind::ExactGw => solve_gw(c, d, m, opts),
        SolverKind::EntropicGw => solve_egw(c, d, m, opts),
    }
}

/// Exact-GW Frank-Wolfe: linearize, solve the linear OT subproblem exactly,
/// and take the closed-form optimal step along the segment.
pub fn solve_gw(
    c: &Array2<f64>,
    d: &Array2<f64>,
    m: &Marginals,
    opts: &GwSolverOptions,
) -> Result<Coupling> {
    opts.validate()?;
    validate_inputs(c, d, m)?;
    let quad = Quad::new(c, d);
    let mut pi = initial_plan(m, opts)?;
    let mut obj = quad.objective(&pi);
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=opts.max_outer {
        iterations = it;
        let g = quad.apply(&pi);
        let target = exact_linear_ot(&(2.0 * &g), m)?;
        let delta = &target - &pi;

        // F(pi + t delta) = F(pi) + t b + t^2 a
        let b = 2.0 * (&g * &delta).sum();
        let a = (&quad.apply(&delta) * &delta).sum();
        let t = if a > 0.0 {
            (-b / (2.0 * a)).clamp(0.0, 1.0)
        } else if a + b <= 0.0 {
            1.0
        } else {
            0.0
        };

        let new_obj = obj + t * b + t * t * a;
        debug_assert!(
            new_obj <= obj + 1e-9 * obj.abs().max(1.0),
            "objective increased: {obj} -> {new_obj}"
        );
        pi.scaled_add(t, &delta);

        let rel = (obj - new_obj) / obj.abs().max(1e-16);
        obj = new_obj;
        if rel < opts.tol_objective {
            converged = true;
            break;
        }
    }

    let objective = quad.objective(&pi).max(0.0);
    debug_assert!(m.violation(&pi) <= opts.tol_marginal.max(1e-12));
    Ok(Coupling {
        pi,
        objective,
        entropic_objective: None,
        converged,
        iterations,
    })
}

/// Entropic-GW mirror descent: each outer iteration solves a Sinkhorn
/// problem on the doubled linearized cost, warm-starting the potentials.
pub fn solve_egw(
    c: &Array2<f64>,
    d: &Array2<f64>,
    m: &Marginals,
    opts: &GwSolverOptions,
) -> Result<Coupling> {
    opts.validate()?;
    if !(opts.epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "entropic gw requires epsilon > 0, got {}",
            opts.epsilon
        )));
    }
    validate_inputs(c, d, m)?;
    let quad = Quad::new(c, d);
    let mut pi = initial_plan(m, opts)?;
    let mut obj = quad.objective(&pi);
    let mut f = Array1::zeros(m.n_source());
    let mut g_pot = Array1::zeros(m.n_target());
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=opts.max_outer {
        iterations = it;
        let cost = 2.0 * &quad.apply(&pi);
        // Transient inner stalls (near-degenerate duals) are tolerated: the
        // plan keeps improving across outer iterations, and the marginal
        // guarantee is enforced on the final coupling below.
        let (new_pi, outcome) = sinkhorn_core(
            &cost,
            m,
            opts.epsilon,
            opts.sinkhorn_tol,
            opts.max_sinkhorn,
            &mut f,
            &mut g_pot,
        )
        .map_err(|e| e.at_stage("entropic gw"))?;
        if let SinkhornOutcome::Stalled {
            iterations: inner,
            residual,
        } = outcome
        {
            log::debug!(
                "entropic gw outer {it}: inner sinkhorn stalled after {inner} iterations \
                 (residual {residual:e})"
            );
        }
        pi = new_pi;
        let new_obj = quad.objective(&pi);
        let rel = (new_obj - obj).abs() / obj.abs().max(1e-16);
        obj = new_obj;
        if rel < opts.tol_objective {
            converged = true;
            break;
        }
    }

    let violation = m.violation(&pi);
    if violation > opts.tol_marginal {
        return Err(Error::NoConvergence {
            what: "entropic gw marginals",
            iterations,
            residual: violation,
        }
        .at_stage("entropic gw"));
    }

    let objective = obj.max(0.0);
    let kl = kl_to_product(&pi, m);
    Ok(Coupling {
        pi,
        objective,
        entropic_objective: Some(objective + opts.epsilon * kl),
        converged,
        iterations,
    })
}

/// KL(pi | mu x nu), with 0 log 0 = 0.
fn kl_to_product(pi: &Array2<f64>, m: &Marginals) -> f64 {
    let mut kl = 0.0;
    for ((i, j), &p) in pi.indexed_iter() {
        if p > 0.0 {
            kl += p * (p / (m.mu()[i] * m.nu()[j])).ln();
        }
    }
    kl
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::column_normalize;
    use crate::rng::stream_rng;
    use ndarray::array;
    use rand::Rng;

    /// Four-index brute force of the linearization.
    fn brute_gradient(c: &Array2<f64>, d: &Array2<f64>, pi: &Array2<f64>) -> Array2<f64> {
        let (m, n) = pi.dim();
        Array2::from_shape_fn((m, n), |(i, j)| {
            let mut acc = 0.0;
            for k in 0..m {
                for l in 0..n {
                    let diff = c[[i, k]] - d[[j, l]];
                    acc += diff * diff * pi[[k, l]];
                }
            }
            acc
        })
    }

    fn random_symmetric(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = stream_rng(seed, &[31]);
        let mut x = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.random();
                x[[i, j]] = v;
                x[[j, i]] = v;
            }
        }
        x
    }

    #[test]
    fn gradient_zero_matrices() {
        let c = Array2::zeros((3, 3));
        let d = Array2::zeros((4, 4));
        let m = Marginals::uniform(3, 4).unwrap();
        let g = gw_gradient(&c, &d, &m.product()).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_two_by_two_matches_brute_force() {
        let c = array![[0.0, 1.0], [1.0, 0.0]];
        let m = Marginals::uniform(2, 2).unwrap();
        let pi = m.product();
        let g = gw_gradient(&c, &c, &pi).unwrap();
        let brute = brute_gradient(&c, &c, &pi);
        for (a, b) in g.iter().zip(brute.iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn gradient_random_matches_brute_force() {
        let c = random_symmetric(5, 1);
        let d = random_symmetric(4, 2);
        let mut rng = stream_rng(3, &[32]);
        let mut pi = Array2::from_shape_fn((5, 4), |_| rng.random::<f64>());
        pi /= pi.sum();
        let g = gw_gradient(&c, &d, &pi).unwrap();
        let brute = brute_gradient(&c, &d, &pi);
        for (a, b) in g.iter().zip(brute.iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn self_distance_is_zero() {
        // For C with distinct row sums the first Frank-Wolfe direction is the
        // normalized identity, which attains objective exactly 0.
        for seed in 0..3u64 {
            let c = random_symmetric(8, 40 + seed);
            let m = Marginals::uniform(8, 8).unwrap();
            let sol = solve_gw(&c, &c, &m, &GwSolverOptions::exact()).unwrap();
            assert!(sol.objective <= 1e-8, "seed {seed}: {}", sol.objective);
            assert!(sol.converged);
        }
    }

    #[test]
    fn permuted_pair_recovers_permutation() {
        let c = array![[0.0, 0.9, 0.2], [0.9, 0.3, 0.6], [0.2, 0.6, 0.8]];
        let perm = [2usize, 0, 1];
        let d = Array2::from_shape_fn((3, 3), |(i, j)| c[[perm[i], perm[j]]]);
        let m = Marginals::uniform(3, 3).unwrap();

        // oracle: best of the six permutation couplings
        let mut oracle = f64::INFINITY;
        let perms = [
            [0usize, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        for p in perms {
            let mut obj = 0.0;
            for i in 0..3 {
                for k in 0..3 {
                    let diff = c[[i, k]] - d[[p[i], p[k]]];
                    obj += diff * diff / 9.0;
                }
            }
            oracle = oracle.min(obj);
        }
        assert!(oracle <= 1e-15);

        let sol = solve_gw(&c, &d, &m, &GwSolverOptions::exact()).unwrap();
        assert!(sol.objective <= 1e-8, "objective {}", sol.objective);
        // the plan is a scaled permutation: column-normalizing gives 0/1
        let t = column_normalize(&sol.pi).unwrap();
        for j in 0..3 {
            let mx = (0..3).map(|i| t[[i, j]]).fold(0.0, f64::max);
            assert!(mx > 1.0 - 1e-6, "column {j} not concentrated: {mx}");
        }
    }

    #[test]
    fn objective_not_above_product_measure() {
        let c = random_symmetric(7, 9);
        let d = random_symmetric(5, 10);
        let m = Marginals::uniform(7, 5).unwrap();
        let start = gw_objective(&c, &d, &m.product()).unwrap();
        let sol = solve_gw(&c, &d, &m, &GwSolverOptions::exact()).unwrap();
        assert!(sol.objective <= start + 1e-12);
        assert!(m.violation(&sol.pi) <= 1e-12);
    }

    #[test]
    fn gw_symmetry_in_arguments() {
        for seed in 0..10u64 {
            let c = random_symmetric(5, 100 + seed);
            let d = random_symmetric(4, 200 + seed);
            let fwd = solve_gw(&c, &d, &Marginals::uniform(5, 4).unwrap(), &GwSolverOptions::exact())
                .unwrap();
            let bwd = solve_gw(&d, &c, &Marginals::uniform(4, 5).unwrap(), &GwSolverOptions::exact())
                .unwrap();
            let denom = fwd.objective.max(bwd.objective).max(1e-12);
            assert!(
                (fwd.objective - bwd.objective).abs() / denom <= 0.05,
                "seed {seed}: {} vs {}",
                fwd.objective,
                bwd.objective
            );
        }
    }

    #[test]
    fn egw_large_epsilon_approaches_product() {
        let c = random_symmetric(6, 5);
        let d = random_symmetric(5, 6);
        let m = Marginals::uniform(6, 5).unwrap();
        let sol = solve_egw(&c, &d, &m, &GwSolverOptions::entropic(1e3)).unwrap();
        let prod = m.product();
        let worst = sol
            .pi
            .iter()
            .zip(prod.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "max deviation {worst}");
    }

    #[test]
    fn egw_quadratic_close_to_exact_on_permuted_pair() {
        let c = array![[0.05, 0.9, 0.2], [0.9, 0.35, 0.6], [0.2, 0.6, 0.85]];
        let perm = [2usize, 0, 1];
        let d = Array2::from_shape_fn((3, 3), |(i, j)| c[[perm[i], perm[j]]]);
        let m = Marginals::uniform(3, 3).unwrap();
        let exact = solve_gw(&c, &d, &m, &GwSolverOptions::exact()).unwrap();
        let ent = solve_egw(&c, &d, &m, &GwSolverOptions::entropic(0.01)).unwrap();
        assert!(
            (ent.objective - exact.objective).abs() <= 0.05,
            "egw quad {} vs exact {}",
            ent.objective,
            exact.objective
        );
        assert!(ent.entropic_objective.unwrap() >= ent.objective);
        assert!(m.violation(&ent.pi) <= 1e-7);
    }

    #[test]
    fn egw_stability_under_cost_perturbation() {
        // Fixed 30x30 / 20x20 instance at eps = 0.05; entrywise perturbations
        // of size eta move the solution continuously: the deviation grows
        // with eta and is small for small eta.
        let c = random_symmetric(30, 77);
        let d = random_symmetric(20, 78);
        let m = Marginals::uniform(30, 20).unwrap();
        let opts = GwSolverOptions::entropic(0.05);
        let base = solve_egw(&c, &d, &m, &opts).unwrap();

        let mut devs = Vec::new();
        for &eta in &[1e-3, 1e-2] {
            let mut rng = stream_rng(5, &[33]);
            let noise_c = {
                let mut x = Array2::zeros((30, 30));
                for i in 0..30 {
                    for j in i..30 {
                        let v: f64 = rng.random::<f64>() * 2.0 - 1.0;
                        x[[i, j]] = v;
                        x[[j, i]] = v;
                    }
                }
                x
            };
            let noise_d = {
                let mut x = Array2::zeros((20, 20));
                for i in 0..20 {
                    for j in i..20 {
                        let v: f64 = rng.random::<f64>() * 2.0 - 1.0;
                        x[[i, j]] = v;
                        x[[j, i]] = v;
                    }
                }
                x
            };
            let cp = &c + &(eta * &noise_c);
            let dp = &d + &(eta * &noise_d);
            let sol = solve_egw(&cp, &dp, &m, &opts).unwrap();
            let dev = matrix::frobenius_sq(&(&sol.pi - &base.pi)).sqrt();
            devs.push(dev);
        }
        assert!(
            devs[0] <= devs[1] + 1e-12,
            "deviation not nondecreasing: {devs:?}"
        );
        let pi_norm = matrix::frobenius_sq(&base.pi).sqrt();
        assert!(
            devs[0] <= 0.1 * pi_norm,
            "eta = 1e-3 deviation too large: {} vs plan norm {pi_norm}",
            devs[0]
        );
    }
}
