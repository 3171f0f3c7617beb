//! Estimation metric, simulation campaigns, link prediction, matrix
//! completion, and cross-validated threshold selection.

mod completion;
mod cv;
mod linkpred;
mod scenario;

pub use completion::matrix_complete;
pub use cv::{cv_select_delta, CvConfig, CvOutcome};
pub use linkpred::{
    link_auc, mask_edges, roc_auc, roc_curve, run_linkpred, LinkPredConfig, LinkPredResults,
    MaskMatrix,
};
pub use scenario::{
    run_scenario, CellSummary, Method, RepRecord, Scenario, ScenarioKind, ScenarioResults,
};

use crate::error::{Error, Result};
use ndarray::Array2;

/// Mean squared error ||P - P_hat||_F^2 / n^2, diagonal included.
pub fn mse(p_hat: &Array2<f64>, p: &Array2<f64>) -> Result<f64> {
    if p_hat.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            context: "mse",
            left: format!("{}x{}", p_hat.nrows(), p_hat.ncols()),
            right: format!("{}x{}", p.nrows(), p.ncols()),
        });
    }
    let n = p.nrows();
    let diff = p_hat - p;
    Ok(crate::matrix::frobenius_sq(&diff) / (n * n) as f64)
}
