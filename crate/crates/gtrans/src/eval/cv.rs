//! Threshold selection by network cross-validation over edge folds.
//!
//! The target's unordered pairs are partitioned into K folds. Per fold, the
//! held-out entries are masked, the masked adjacency is completed, the
//! transfer pipeline runs on the completed target, and every candidate gate
//! threshold is scored by squared error of its output against the held-out
//! binary entries. Only the gate depends on the candidate, so each fold runs
//! the expensive pipeline once and evaluates both branches.

use crate::error::{Error, Result};
use crate::eval::completion::matrix_complete;
use crate::eval::linkpred::MaskMatrix;
use crate::graphon::AdjMatrix;
use crate::ot::GwSolverOptions;
use crate::transfer::{self, TransferConfig, Variant};
use ndarray::Array2;
use rand::Rng;

#[derive(Clone, Debug)]
pub struct CvConfig {
    /// Candidate gate thresholds; ties resolve to the smallest.
    pub candidates: Vec<f64>,
    pub folds: usize,
    /// Completion rank; None picks the largest spectral gap.
    pub completion_rank: Option<usize>,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            candidates: (10..=50).map(|k| k as f64 / 100.0).collect(),
            folds: 5,
            completion_rank: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CvOutcome {
    pub delta_hat: f64,
    /// folds x candidates held-out losses; NaN rows mark voided folds.
    pub fold_losses: Array2<f64>,
    /// Domain distance measured in each fold.
    pub fold_distances: Vec<f64>,
}

pub fn cv_select_delta<R: Rng>(
    a_s: &AdjMatrix,
    a_t: &AdjMatrix,
    cfg: &CvConfig,
    solver: &GwSolverOptions,
    rng: &mut R,
) -> Result<(f64, CvOutcome)> {
    if cfg.candidates.is_empty() {
        return Err(Error::InvalidConfig("empty candidate set".into()));
    }
    if cfg.folds < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 folds, got {}",
            cfg.folds
        )));
    }
    let n = a_t.n();
    let total_pairs = n * (n - 1) / 2;
    if cfg.folds > total_pairs {
        return Err(Error::InvalidConfig(format!(
            "{} folds exceed the {} upper-triangle pairs",
            cfg.folds, total_pairs
        )));
    }

    let mut candidates = cfg.candidates.clone();
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // random partition of the unordered pairs
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    for i in (1..pairs.len()).rev() {
        let j = rng.random_range(0..=i);
        pairs.swap(i, j);
    }

    let base = TransferConfig {
        solver: solver.clone(),
        delta: f64::INFINITY, // gate applied per candidate below
        smoother: crate::smoothing::SmootherConfig::for_probabilities(),
        clamp_final: true,
        variant: Variant::Full,
    };
    let p_s_ini = transfer::prepare_source(a_s.values(), &base)?;

    let l = candidates.len();
    let mut fold_losses = Array2::from_elem((cfg.folds, l), f64::NAN);
    let mut fold_distances = vec![f64::NAN; cfg.folds];

    let fold_size = pairs.len().div_ceil(cfg.folds);
    for (k, fold) in pairs.chunks(fold_size).enumerate() {
        match score_fold(&p_s_ini, a_t, fold, &base, cfg, &candidates) {
            Ok((losses, d)) => {
                for (c, &v) in losses.iter().enumerate() {
                    fold_losses[[k, c]] = v;
                }
                fold_distances[k] = d;
            }
            Err(e) => {
                // a failed fold voids only itself
                log::warn!("cv fold {k} failed: {e}");
            }
        }
    }

    let mut best_idx: Option<usize> = None;
    let mut best_loss = f64::INFINITY;
    for (c, &delta) in candidates.iter().enumerate() {
        let vals: Vec<f64> = (0..cfg.folds)
            .map(|k| fold_losses[[k, c]])
            .filter(|v| v.is_finite())
            .collect();
        if vals.is_empty() {
            continue;
        }
        let avg = vals.iter().sum::<f64>() / vals.len() as f64;
        if avg < best_loss {
            best_loss = avg;
            best_idx = Some(c);
        }
        let _ = delta;
    }
    let Some(best_idx) = best_idx else {
        return Err(Error::InvalidConfig(
            "every cross-validation fold failed".into(),
        ));
    };
    let delta_hat = candidates[best_idx];
    Ok((
        delta_hat,
        CvOutcome {
            delta_hat,
            fold_losses,
            fold_distances,
        },
    ))
}

fn score_fold(
    p_s_ini: &Array2<f64>,
    a_t: &AdjMatrix,
    fold: &[(usize, usize)],
    base: &TransferConfig,
    cfg: &CvConfig,
    candidates: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let n = a_t.n();
    let mask = MaskMatrix::from_hidden_pairs(n, fold);
    let masked = AdjMatrix::new(a_t.values() * mask.matrix())
        .expect("masking preserves adjacency validity");
    let completed = matrix_complete(&masked, &mask, cfg.completion_rank)?;

    // one pipeline run; the gate only selects between the two branches
    let res = transfer::gtrans_prepared(p_s_ini, &completed, base)?;
    let no_debias = &res.p_final;
    let (_, _, with_debias) = transfer::debias(
        &res.p_t_ini,
        &res.p_trans2,
        &base.smoother,
        base.clamp_final,
    )?;

    let held_loss = |est: &Array2<f64>| -> f64 {
        fold.iter()
            .map(|&(i, j)| {
                let diff = est[[i, j]] - a_t.values()[[i, j]];
                diff * diff
            })
            .sum::<f64>()
            / fold.len() as f64
    };
    let loss_plain = held_loss(no_debias);
    let loss_debias = held_loss(&with_debias);

    let losses = candidates
        .iter()
        .map(|&delta| if res.d > delta { loss_debias } else { loss_plain })
        .collect();
    Ok((losses, res.d))
}
