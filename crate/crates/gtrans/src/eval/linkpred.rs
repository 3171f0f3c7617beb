//! Masking-based link prediction and AUC scoring.
//!
//! A symmetric Bernoulli mask hides a fraction of the target's entries; the
//! estimators run on the masked adjacency (hidden entries treated as zeros)
//! and are scored on the hidden entries against the original adjacency.

use crate::error::{Error, Result};
use crate::eval::scenario::Method;
use crate::graphon::AdjMatrix;
use crate::matrix;
use crate::rng::stream_rng;
use crate::smoothing::{self, SmootherConfig};
use crate::transfer::{self, TransferConfig};
use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Symmetric binary mask; 1 = observed, 0 = held out. The diagonal is never
/// masked.
#[derive(Clone, Debug)]
pub struct MaskMatrix {
    m: Array2<f64>,
    p: f64,
}

impl MaskMatrix {
    /// Fully-observed mask.
    pub fn full(n: usize) -> Self {
        Self {
            m: Array2::ones((n, n)),
            p: 0.0,
        }
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.m
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn test_ratio(&self) -> f64 {
        self.p
    }

    /// Held-out unordered pairs (i < j).
    pub fn masked_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.m[[i, j]] == 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Observed unordered pairs (i < j).
    pub fn observed_count(&self) -> usize {
        let n = self.n();
        n * (n - 1) / 2 - self.masked_pairs().len()
    }

    /// Build a mask that hides exactly the given pairs.
    pub fn from_hidden_pairs(n: usize, hidden: &[(usize, usize)]) -> Self {
        let mut m = Array2::ones((n, n));
        for &(i, j) in hidden {
            m[[i, j]] = 0.0;
            m[[j, i]] = 0.0;
        }
        for i in 0..n {
            m[[i, i]] = 1.0;
        }
        let total = n * (n - 1) / 2;
        Self {
            m,
            p: hidden.len() as f64 / total.max(1) as f64,
        }
    }
}

/// Hide each unordered pair independently with probability `p`.
///
/// Returns the masked adjacency (entrywise product) and the mask.
pub fn mask_edges<R: Rng>(
    a: &AdjMatrix,
    p: f64,
    rng: &mut R,
) -> Result<(AdjMatrix, MaskMatrix)> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::InvalidTestRatio(p));
    }
    let n = a.n();
    let mut m = Array2::ones((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                m[[i, j]] = 0.0;
                m[[j, i]] = 0.0;
            }
        }
    }
    let masked = AdjMatrix::new(a.values() * &m).expect("mask preserves adjacency validity");
    Ok((masked, MaskMatrix { m, p }))
}

fn masked_scores_labels(
    p_hat: &Array2<f64>,
    a_true: &AdjMatrix,
    mask: &MaskMatrix,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let n = a_true.n();
    if p_hat.dim() != (n, n) || mask.n() != n {
        return Err(Error::DimensionMismatch {
            context: "link auc",
            left: format!("{}x{}", p_hat.nrows(), p_hat.ncols()),
            right: format!("{n}x{n}"),
        });
    }
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (i, j) in mask.masked_pairs() {
        scores.push(p_hat[[i, j]]);
        labels.push(a_true.values()[[i, j]] != 0.0);
    }
    if !labels.iter().any(|&l| l) {
        return Err(Error::UndefinedAuc("positive entries"));
    }
    if !labels.iter().any(|&l| !l) {
        return Err(Error::UndefinedAuc("negative entries"));
    }
    Ok((scores, labels))
}

/// AUC over the held-out entries, by the rank statistic with half credit for
/// ties (equivalent to integrating the ROC curve over all thresholds).
pub fn link_auc(p_hat: &Array2<f64>, a_true: &AdjMatrix, mask: &MaskMatrix) -> Result<f64> {
    let (scores, labels) = masked_scores_labels(p_hat, a_true, mask)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    // average ranks within tie groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0; // mean of ranks i+1..=j
        for &idx in &order[i..j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    Ok((rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

/// ROC curve over the held-out entries: (false positive rate, true positive
/// rate) at strict thresholds `score > t`, swept over all distinct scores,
/// with the (0,0) and (1,1) endpoints included.
pub fn roc_curve(
    p_hat: &Array2<f64>,
    a_true: &AdjMatrix,
    mask: &MaskMatrix,
) -> Result<Vec<(f64, f64)>> {
    let (scores, labels) = masked_scores_labels(p_hat, a_true, mask)?;
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            j += 1;
        }
        points.push((fp / n_neg, tp / n_pos));
        i = j;
    }
    Ok(points)
}

/// Trapezoidal area under an ROC curve.
pub fn roc_auc(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// One masking campaign: repeated masks on one target, all methods scored.
#[derive(Clone, Debug)]
pub struct LinkPredConfig {
    pub test_ratio: f64,
    pub repetitions: u64,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Gate threshold override (per-solver default when absent).
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
}

impl Default for LinkPredConfig {
    fn default() -> Self {
        Self {
            test_ratio: 0.1,
            repetitions: 50,
            seed: 0,
            methods: vec![Method::GtransGw, Method::GtransEgw, Method::Ns],
            delta: None,
            epsilon: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LinkPredRecord {
    pub method: Method,
    pub rep: u64,
    pub auc: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LinkPredSummary {
    pub method: Method,
    pub mean: f64,
    pub std: f64,
    pub reps: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct LinkPredResults {
    pub records: Vec<LinkPredRecord>,
    pub summaries: Vec<LinkPredSummary>,
}

impl LinkPredResults {
    pub fn mean_auc(&self, method: Method) -> Option<f64> {
        self.summaries
            .iter()
            .find(|s| s.method == method)
            .map(|s| s.mean)
    }

    pub fn to_csv(&self, label: &str) -> String {
        let mut out = String::from("dataset,method,rep,auc\n");
        for r in &self.records {
            out.push_str(&format!(
                "{label},{},{},{:.16e}\n",
                r.method.name(),
                r.rep,
                r.auc
            ));
        }
        out
    }
}

/// Run the masking protocol: per repetition draw a mask, estimate the target
/// probability matrix from the masked adjacency with every method, and score
/// AUC on the hidden entries.
pub fn run_linkpred(
    a_s: &AdjMatrix,
    a_t: &AdjMatrix,
    cfg: &LinkPredConfig,
) -> Result<LinkPredResults> {
    if !(0.0 < cfg.test_ratio && cfg.test_ratio < 1.0) {
        return Err(Error::InvalidTestRatio(cfg.test_ratio));
    }
    if cfg.repetitions == 0 || cfg.methods.is_empty() {
        return Err(Error::InvalidConfig(
            "link prediction needs at least one repetition and one method".into(),
        ));
    }

    // The source estimate does not depend on the mask; smooth it once per
    // distinct transfer configuration.
    let mut prepared: Vec<(Method, Option<Array2<f64>>, Option<TransferConfig>)> = Vec::new();
    for &method in &cfg.methods {
        let tc = method.transfer_config(cfg.delta, cfg.epsilon);
        let src = match &tc {
            Some(tc) => Some(transfer::prepare_source(a_s.values(), tc)?),
            None => None,
        };
        prepared.push((method, src, tc));
    }

    let records: Result<Vec<Vec<LinkPredRecord>>> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(cfg.seed, &[900, rep]);
            let (masked, mask) = mask_edges(a_t, cfg.test_ratio, &mut rng)?;
            let mut recs = Vec::new();
            for (method, src, tc) in &prepared {
                let p_hat = match (src, tc) {
                    (Some(p_s_ini), Some(tc)) => {
                        transfer::gtrans_prepared(p_s_ini, masked.values(), tc)?.p_final
                    }
                    _ => match method {
                        Method::Ns => smoothing::ns_estimate(
                            masked.values(),
                            &SmootherConfig::for_probabilities(),
                        )?,
                        Method::Usvt => smoothing::usvt_estimate(&masked, 0.01)
                            .into_values(),
                        _ => unreachable!("transfer methods carry a config"),
                    },
                };
                let auc = link_auc(&p_hat, a_t, &mask)?;
                recs.push(LinkPredRecord {
                    method: *method,
                    rep,
                    auc,
                });
            }
            Ok(recs)
        })
        .collect();
    let records: Vec<LinkPredRecord> = records?.into_iter().flatten().collect();

    let mut summaries = Vec::new();
    for &method in &cfg.methods {
        let aucs: Vec<f64> = records
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.auc)
            .collect();
        let (mean, std) = matrix::mean_std(&aucs);
        summaries.push(LinkPredSummary {
            method,
            mean,
            std,
            reps: aucs.len(),
        });
    }
    Ok(LinkPredResults { records, summaries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphon::ProbMatrix;

    fn path_graph(n: usize) -> AdjMatrix {
        let mut a = Array2::zeros((n, n));
        for i in 0..n - 1 {
            a[[i, i + 1]] = 1.0;
            a[[i + 1, i]] = 1.0;
        }
        AdjMatrix::new(a).unwrap()
    }

    #[test]
    fn mask_ratio_extremes() {
        let a = path_graph(20);
        let mut rng = stream_rng(0, &[80]);
        let (masked, mask) = mask_edges(&a, 1e-9, &mut rng).unwrap();
        assert_eq!(mask.masked_pairs().len(), 0);
        assert_eq!(masked.values(), a.values());

        assert!(mask_edges(&a, 0.0, &mut rng).is_err());
        assert!(mask_edges(&a, 1.0, &mut rng).is_err());
    }

    #[test]
    fn mask_counts_are_consistent() {
        // ~10% of the upper triangle masked, and counts add up exactly.
        let p = ProbMatrix::new(Array2::from_elem((34, 34), 0.3)).unwrap();
        let mut rng = stream_rng(5, &[81]);
        let a = AdjMatrix::sample(&p, &mut rng);
        let (masked, mask) = mask_edges(&a, 0.1, &mut rng).unwrap();
        let total = 34 * 33 / 2;
        let hidden = mask.masked_pairs().len();
        assert_eq!(mask.observed_count() + hidden, total);
        let frac = hidden as f64 / total as f64;
        assert!((frac - 0.1).abs() < 0.05, "masked fraction {frac}");
        // masked entries are zeroed in the observed adjacency
        for (i, j) in mask.masked_pairs() {
            assert_eq!(masked.values()[[i, j]], 0.0);
        }
    }

    #[test]
    fn perfect_scores_give_auc_one_and_constants_half() {
        let a = path_graph(12);
        let mut rng = stream_rng(3, &[82]);
        let (_, mask) = mask_edges(&a, 0.3, &mut rng).unwrap();
        // guard: this seed must hide at least one edge and one non-edge
        let hidden = mask.masked_pairs();
        assert!(hidden.iter().any(|&(i, j)| a.values()[[i, j]] == 1.0));
        assert!(hidden.iter().any(|&(i, j)| a.values()[[i, j]] == 0.0));

        let auc = link_auc(a.values(), &a, &mask).unwrap();
        assert_eq!(auc, 1.0);

        let constant = Array2::from_elem((12, 12), 0.4);
        let auc = link_auc(&constant, &a, &mask).unwrap();
        assert!((auc - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let p = ProbMatrix::new(Array2::from_elem((20, 20), 0.4)).unwrap();
        let mut rng = stream_rng(7, &[83]);
        let a = AdjMatrix::sample(&p, &mut rng);
        let (_, mask) = mask_edges(&a, 0.2, &mut rng).unwrap();
        let scores = Array2::from_shape_fn((20, 20), |_| rng.random::<f64>());
        let base = link_auc(&scores, &a, &mask).unwrap();
        let squashed = scores.mapv(|v| 1.0 / (1.0 + (-3.0 * v).exp()));
        let transformed = link_auc(&squashed, &a, &mask).unwrap();
        assert!((base - transformed).abs() <= 1e-12);
    }

    #[test]
    fn rank_auc_matches_roc_integration() {
        let p = ProbMatrix::new(Array2::from_elem((25, 25), 0.35)).unwrap();
        let mut rng = stream_rng(9, &[84]);
        let a = AdjMatrix::sample(&p, &mut rng);
        let (_, mask) = mask_edges(&a, 0.25, &mut rng).unwrap();
        // scores with deliberate ties
        let scores = Array2::from_shape_fn((25, 25), |(i, j)| ((i * 7 + j * 3) % 5) as f64 / 4.0);
        let rank = link_auc(&scores, &a, &mask).unwrap();
        let curve = roc_curve(&scores, &a, &mask).unwrap();
        assert!((rank - roc_auc(&curve)).abs() <= 1e-9);
        assert_eq!(curve.first(), Some(&(0.0, 0.0)));
        assert_eq!(curve.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn degenerate_mask_is_rejected() {
        let a = path_graph(6);
        // hide only a non-edge: no positives among hidden entries
        let mask = MaskMatrix::from_hidden_pairs(6, &[(0, 5)]);
        assert!(matches!(
            link_auc(a.values(), &a, &mask),
            Err(Error::UndefinedAuc("positive entries"))
        ));
    }
}
