//! The end-to-end transfer estimator: initial smoothing, alignment,
//! projection, re-smoothing, distance gate, and debiasing.

use crate::error::{Error, Result};
use crate::graphon::AdjMatrix;
use crate::matrix;
use crate::ot::{self, Coupling, GwSolverOptions, Marginals, SolverKind};
use crate::smoothing::{self, SmootherConfig};
use ndarray::Array2;

/// Pipeline variant. The ablated variants exist for the component study;
/// `Full` is the estimator proper.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// All steps.
    Full,
    /// Never debias, whatever the domain distance.
    NonDebias,
    /// Raw adjacency inputs and no re-smoothing of the projected estimate.
    NonSmooth,
    /// Raw adjacency inputs to the solver; re-smoothing kept.
    Adj,
}

impl Variant {
    fn smooth_initial(self) -> bool {
        !matches!(self, Variant::NonSmooth | Variant::Adj)
    }

    fn smooth_transferred(self) -> bool {
        !matches!(self, Variant::NonSmooth)
    }

    fn allow_debias(self) -> bool {
        !matches!(self, Variant::NonDebias)
    }
}

/// Configuration of the transfer pipeline.
#[derive(Clone, Debug)]
pub struct TransferConfig {
    pub solver: GwSolverOptions,
    /// Domain-distance threshold for the debiasing gate.
    pub delta: f64,
    /// Quantile configuration shared by every smoothing step.
    pub smoother: SmootherConfig,
    /// Clamp the final estimate to [0, 1].
    pub clamp_final: bool,
    pub variant: Variant,
}

impl TransferConfig {
    /// Exact-GW defaults (delta = 0.15).
    pub fn default_gw() -> Self {
        Self {
            solver: GwSolverOptions::exact(),
            delta: 0.15,
            smoother: SmootherConfig::for_probabilities(),
            clamp_final: true,
            variant: Variant::Full,
        }
    }

    /// Entropic defaults (epsilon = 0.01, delta = 0.18).
    pub fn default_egw() -> Self {
        Self {
            solver: GwSolverOptions::entropic(0.01),
            delta: 0.18,
            ..Self::default_gw()
        }
    }

    pub fn for_kind(kind: SolverKind) -> Self {
        match kind {
            SolverKind::ExactGw => Self::default_gw(),
            SolverKind::EntropicGw => Self::default_egw(),
        }
    }
}

/// Every intermediate of the pipeline, kept for inspection and export.
#[derive(Clone, Debug)]
pub struct TransferResult {
    pub p_s_ini: Array2<f64>,
    pub p_t_ini: Array2<f64>,
    pub coupling: Coupling,
    /// Column-normalized alignment matrix.
    pub pi_tilde: Array2<f64>,
    /// Domain distance: square root of the quadratic GW objective.
    pub d: f64,
    pub p_trans: Array2<f64>,
    pub p_trans2: Array2<f64>,
    pub debiased: bool,
    pub residual: Option<Array2<f64>>,
    pub p_res: Option<Array2<f64>>,
    pub p_final: Array2<f64>,
    pub warnings: Vec<String>,
}

/// Project the source estimate into the target node space:
/// `pi_tilde^T p_s pi_tilde`.
///
/// With unit column sums every output entry is a convex combination of
/// source entries, hence stays in [0, 1].
pub fn project_source(pi_tilde: &Array2<f64>, p_s: &Array2<f64>) -> Result<Array2<f64>> {
    let (n_s, _n_t) = pi_tilde.dim();
    if p_s.nrows() != n_s || p_s.ncols() != n_s {
        return Err(Error::DimensionMismatch {
            context: "projection",
            left: format!("{}x{}", p_s.nrows(), p_s.ncols()),
            right: format!("{n_s}x{n_s}"),
        });
    }
    for j in 0..pi_tilde.ncols() {
        let s = pi_tilde.column(j).sum();
        if (s - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidConfig(format!(
                "alignment column {j} sums to {s}, expected 1"
            )));
        }
    }
    Ok(pi_tilde.t().dot(p_s).dot(pi_tilde))
}

/// Debiasing step: smooth the residual and add it back.
pub fn debias(
    p_t_ini: &Array2<f64>,
    p_trans2: &Array2<f64>,
    smoother: &SmootherConfig,
    clamp_final: bool,
) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>)> {
    if p_t_ini.dim() != p_trans2.dim() {
        return Err(Error::DimensionMismatch {
            context: "debias",
            left: format!("{}x{}", p_t_ini.nrows(), p_t_ini.ncols()),
            right: format!("{}x{}", p_trans2.nrows(), p_trans2.ncols()),
        });
    }
    let residual = p_t_ini - p_trans2;
    let res_cfg = SmootherConfig {
        clamp_range: None,
        ..smoother.clone()
    };
    let p_res = smoothing::ns_estimate(&residual, &res_cfg)?;
    let mut p_final = p_trans2 + &p_res;
    if clamp_final {
        matrix::clamp_in_place(&mut p_final, 0.0, 1.0);
    }
    Ok((residual, p_res, p_final))
}

/// Run the pipeline on binary adjacency matrices.
pub fn gtrans(a_s: &AdjMatrix, a_t: &AdjMatrix, cfg: &TransferConfig) -> Result<TransferResult> {
    gtrans_matrices(a_s.values(), a_t.values(), cfg)
}

/// Step-1 source estimate under the configured variant.
///
/// Split out so campaigns that pair one source with many masked targets can
/// smooth the source once.
pub fn prepare_source(source: &Array2<f64>, cfg: &TransferConfig) -> Result<Array2<f64>> {
    if source.nrows() < 3 {
        return Err(Error::TooFewNodes {
            context: "source graph",
            n: source.nrows(),
            min: 3,
        });
    }
    if cfg.variant.smooth_initial() {
        let prob_cfg = SmootherConfig {
            clamp_range: Some((0.0, 1.0)),
            ..cfg.smoother.clone()
        };
        smoothing::ns_estimate(source, &prob_cfg).map_err(|e| e.at_stage("initial estimation"))
    } else {
        Ok(source.clone())
    }
}

/// Run the pipeline on real-valued symmetric inputs.
///
/// The smoother and the solver are both defined for real entries, which is
/// what the cross-validation path needs: its target is a completed (hence
/// real-valued) adjacency matrix.
pub fn gtrans_matrices(
    source: &Array2<f64>,
    target: &Array2<f64>,
    cfg: &TransferConfig,
) -> Result<TransferResult> {
    let p_s_ini = prepare_source(source, cfg)?;
    gtrans_prepared(&p_s_ini, target, cfg)
}

/// Run the pipeline given an already-prepared source initial estimate.
pub fn gtrans_prepared(
    p_s_ini: &Array2<f64>,
    target: &Array2<f64>,
    cfg: &TransferConfig,
) -> Result<TransferResult> {
    let n_s = p_s_ini.nrows();
    let n_t = target.nrows();
    for (ctx, n) in [("source graph", n_s), ("target graph", n_t)] {
        if n < 3 {
            return Err(Error::TooFewNodes {
                context: ctx,
                n,
                min: 3,
            });
        }
    }
    let mut warnings = Vec::new();
    if n_s <= n_t {
        let msg = format!(
            "source ({n_s} nodes) is not larger than target ({n_t} nodes); transfer gains are unlikely"
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let prob_cfg = SmootherConfig {
        clamp_range: Some((0.0, 1.0)),
        ..cfg.smoother.clone()
    };

    // Step 1 (target side): initial estimation.
    let p_s_ini = p_s_ini.clone();
    let p_t_ini = if cfg.variant.smooth_initial() {
        smoothing::ns_estimate(target, &prob_cfg).map_err(|e| e.at_stage("initial estimation"))?
    } else {
        target.clone()
    };

    // Step 2: alignment, normalization, projection, re-smoothing.
    let marginals = Marginals::uniform(n_s, n_t).map_err(|e| e.at_stage("alignment"))?;
    let coupling = ot::solve(&p_s_ini, &p_t_ini, &marginals, &cfg.solver)
        .map_err(|e| e.at_stage("alignment"))?;
    let d = coupling.distance();

    let mut pi_tilde = coupling.pi.clone();
    for j in 0..n_t {
        let s = pi_tilde.column(j).sum();
        if s <= 0.0 {
            // An isolated target node that no source mass reached; fall back
            // to a uniform alignment for that column rather than aborting a
            // whole simulation batch.
            let msg = format!("coupling column {j} has zero mass; substituted uniform alignment");
            log::warn!("{msg}");
            warnings.push(msg);
            for i in 0..n_s {
                pi_tilde[[i, j]] = 1.0 / n_s as f64;
            }
        } else {
            for i in 0..n_s {
                pi_tilde[[i, j]] /= s;
            }
        }
    }

    let p_trans =
        project_source(&pi_tilde, &p_s_ini).map_err(|e| e.at_stage("projection"))?;
    let p_trans2 = if cfg.variant.smooth_transferred() {
        smoothing::ns_estimate(&matrix::symmetrized(&p_trans), &prob_cfg)
            .map_err(|e| e.at_stage("re-smoothing"))?
    } else {
        p_trans.clone()
    };

    // Step 3: debias when the domains are far apart.
    let debiased = cfg.variant.allow_debias() && d > cfg.delta;
    let (residual, p_res, p_final) = if debiased {
        let (r, pr, pf) = debias(&p_t_ini, &p_trans2, &cfg.smoother, cfg.clamp_final)
            .map_err(|e| e.at_stage("debias"))?;
        (Some(r), Some(pr), pf)
    } else {
        let mut pf = p_trans2.clone();
        if cfg.clamp_final {
            matrix::clamp_in_place(&mut pf, 0.0, 1.0);
        }
        (None, None, pf)
    };

    Ok(TransferResult {
        p_s_ini,
        p_t_ini,
        coupling,
        pi_tilde,
        d,
        p_trans,
        p_trans2,
        debiased,
        residual,
        p_res,
        p_final,
        warnings,
    })
}
