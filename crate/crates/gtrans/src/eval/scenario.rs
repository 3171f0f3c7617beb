//! Seeded simulation campaigns over (source size, density shift) grids.

use crate::error::{Error, Result};
use crate::eval::mse;
use crate::graphon::{perturb, sample_latents, AdjMatrix, GraphonSpec, Perturbation, ProbMatrix};
use crate::matrix;
use crate::ot::SolverKind;
use crate::rng::stream_rng;
use crate::smoothing::{self, SmootherConfig};
use crate::transfer::{self, TransferConfig, Variant};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Estimators compared by the campaigns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "gtrans-gw")]
    GtransGw,
    #[serde(rename = "gtrans-egw")]
    GtransEgw,
    #[serde(rename = "ns")]
    Ns,
    #[serde(rename = "usvt")]
    Usvt,
    #[serde(rename = "gtrans-gw-nondebias")]
    GtransGwNonDebias,
    #[serde(rename = "gtrans-gw-nonsmooth")]
    GtransGwNonSmooth,
    #[serde(rename = "gtrans-gw-adj")]
    GtransGwAdj,
    #[serde(rename = "gtrans-egw-nondebias")]
    GtransEgwNonDebias,
    #[serde(rename = "gtrans-egw-nonsmooth")]
    GtransEgwNonSmooth,
    #[serde(rename = "gtrans-egw-adj")]
    GtransEgwAdj,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::GtransGw => "gtrans-gw",
            Method::GtransEgw => "gtrans-egw",
            Method::Ns => "ns",
            Method::Usvt => "usvt",
            Method::GtransGwNonDebias => "gtrans-gw-nondebias",
            Method::GtransGwNonSmooth => "gtrans-gw-nonsmooth",
            Method::GtransGwAdj => "gtrans-gw-adj",
            Method::GtransEgwNonDebias => "gtrans-egw-nondebias",
            Method::GtransEgwNonSmooth => "gtrans-egw-nonsmooth",
            Method::GtransEgwAdj => "gtrans-egw-adj",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidConfig(format!("unknown method '{s}'")))
    }

    /// Transfer configuration for the method, or None for the target-only
    /// baselines.
    pub fn transfer_config(&self, delta: Option<f64>, epsilon: Option<f64>) -> Option<TransferConfig> {
        let (kind, variant) = match self {
            Method::Ns | Method::Usvt => return None,
            Method::GtransGw => (SolverKind::ExactGw, Variant::Full),
            Method::GtransEgw => (SolverKind::EntropicGw, Variant::Full),
            Method::GtransGwNonDebias => (SolverKind::ExactGw, Variant::NonDebias),
            Method::GtransGwNonSmooth => (SolverKind::ExactGw, Variant::NonSmooth),
            Method::GtransGwAdj => (SolverKind::ExactGw, Variant::Adj),
            Method::GtransEgwNonDebias => (SolverKind::EntropicGw, Variant::NonDebias),
            Method::GtransEgwNonSmooth => (SolverKind::EntropicGw, Variant::NonSmooth),
            Method::GtransEgwAdj => (SolverKind::EntropicGw, Variant::Adj),
        };
        let mut cfg = TransferConfig::for_kind(kind);
        cfg.variant = variant;
        if let Some(d) = delta {
            cfg.delta = d;
        }
        if let Some(e) = epsilon {
            cfg.solver.epsilon = e;
        }
        Some(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Vary the source size; the target gets the configured perturbation.
    SourceSizeSweep,
    /// Different source and target graphons.
    CrossGraphon,
    /// Perturb the source by U(0, lambda) over a lambda grid.
    DensityShift,
    /// Component study: compare the ablated pipeline variants.
    Ablation,
}

/// A simulation campaign. JSON schema version 1; unknown keys are rejected.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub kind: ScenarioKind,
    pub source_graphon: u32,
    pub target_graphon: u32,
    /// Grid of source sizes (one cell per entry).
    pub n_s: Vec<usize>,
    pub n_t: usize,
    pub reps: usize,
    /// Density-shift grid; required for (and exclusive to) the density-shift
    /// kind.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambdas: Vec<f64>,
    /// Target-side perturbation for the other kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
    pub methods: Vec<Method>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.schema != 1 {
            return Err(Error::InvalidConfig(format!(
                "unsupported scenario schema {}; this build understands schema 1",
                self.schema
            )));
        }
        GraphonSpec::new(self.source_graphon)?;
        GraphonSpec::new(self.target_graphon)?;
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be at least 1".into()));
        }
        if self.n_s.is_empty() {
            return Err(Error::InvalidConfig("n_s grid is empty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("methods list is empty".into()));
        }
        match self.kind {
            ScenarioKind::DensityShift => {
                if self.lambdas.is_empty() {
                    return Err(Error::InvalidConfig(
                        "density-shift scenarios need a lambdas grid".into(),
                    ));
                }
                if self.perturbation.is_some() {
                    return Err(Error::InvalidConfig(
                        "density-shift scenarios use the lambdas grid, not perturbation".into(),
                    ));
                }
            }
            _ => {
                if !self.lambdas.is_empty() {
                    return Err(Error::InvalidConfig(
                        "lambdas grid is only valid for density-shift scenarios".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Grid cells: (n_s, optional lambda).
    fn cells(&self) -> Vec<(usize, Option<f64>)> {
        match self.kind {
            ScenarioKind::DensityShift => self
                .n_s
                .iter()
                .flat_map(|&ns| self.lambdas.iter().map(move |&l| (ns, Some(l))))
                .collect(),
            _ => self.n_s.iter().map(|&ns| (ns, None)).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RepRecord {
    pub n_s: usize,
    pub lambda: Option<f64>,
    pub method: Method,
    pub rep: usize,
    pub mse: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CellSummary {
    pub n_s: usize,
    pub lambda: Option<f64>,
    pub method: Method,
    pub mean: f64,
    pub std: f64,
    pub reps: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioResults {
    pub scenario: Scenario,
    pub records: Vec<RepRecord>,
    pub summaries: Vec<CellSummary>,
}

impl ScenarioResults {
    pub fn mean_mse(&self, n_s: usize, lambda: Option<f64>, method: Method) -> Option<f64> {
        self.summaries
            .iter()
            .find(|s| s.n_s == n_s && s.lambda == lambda && s.method == method)
            .map(|s| s.mean)
    }

    /// Long-format table, one row per replicate.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "kind,source_graphon,target_graphon,n_s,n_t,lambda,method,rep,mse\n",
        );
        let kind = serde_json::to_value(self.scenario.kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        for r in &self.records {
            out.push_str(&format!(
                "{kind},{},{},{},{},{},{},{},{:.16e}\n",
                self.scenario.source_graphon,
                self.scenario.target_graphon,
                r.n_s,
                self.scenario.n_t,
                r.lambda.map(|l| l.to_string()).unwrap_or_default(),
                r.method.name(),
                r.rep,
                r.mse
            ));
        }
        out
    }
}

/// One replicate: sample the pair of graphs and score every method.
fn run_replicate(
    s: &Scenario,
    cell_idx: usize,
    n_s: usize,
    lambda: Option<f64>,
    rep: usize,
) -> Result<Vec<RepRecord>> {
    let source_spec = GraphonSpec::new(s.source_graphon)?;
    let target_spec = GraphonSpec::new(s.target_graphon)?;
    let tags = |slot: u64| [cell_idx as u64, rep as u64, slot];

    let u_s = sample_latents(n_s, false, &mut stream_rng(s.seed, &tags(0)))?;
    let u_t = sample_latents(s.n_t, false, &mut stream_rng(s.seed, &tags(1)))?;
    let mut p_s = ProbMatrix::from_graphon(source_spec, &u_s);
    let mut p_t = ProbMatrix::from_graphon(target_spec, &u_t);

    if let Some(l) = lambda {
        if l != 0.0 {
            let shift = Perturbation::DensityShift {
                lambda: l,
                seed: None,
            };
            p_s = perturb(&p_s, &shift, &mut stream_rng(s.seed, &tags(2)))?;
        }
    } else if let Some(pert) = &s.perturbation {
        let mut tag = tags(2).to_vec();
        if let Some(extra) = pert.seed() {
            tag.push(extra);
        }
        p_t = perturb(&p_t, pert, &mut stream_rng(s.seed, &tag))?;
    }

    let a_s = AdjMatrix::sample(&p_s, &mut stream_rng(s.seed, &tags(3)));
    let a_t = AdjMatrix::sample(&p_t, &mut stream_rng(s.seed, &tags(4)));

    let mut records = Vec::with_capacity(s.methods.len());
    for &method in &s.methods {
        let p_hat = match method.transfer_config(s.delta, s.epsilon) {
            Some(cfg) => transfer::gtrans(&a_s, &a_t, &cfg)?.p_final,
            None => match method {
                Method::Ns => {
                    smoothing::ns_estimate(a_t.values(), &SmootherConfig::for_probabilities())?
                }
                Method::Usvt => smoothing::usvt_estimate(&a_t, 0.01).into_values(),
                _ => unreachable!(),
            },
        };
        records.push(RepRecord {
            n_s,
            lambda,
            method,
            rep,
            mse: mse(&p_hat, p_t.values())?,
        });
    }
    Ok(records)
}

/// Run every (cell, replicate) of the campaign.
///
/// Each replicate draws its randomness from a stream derived from
/// (scenario seed, cell index, replicate index), so the result table is
/// identical regardless of scheduling; replicates run in parallel on the
/// current rayon pool.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioResults> {
    s.validate()?;
    let cells = s.cells();
    let jobs: Vec<(usize, usize, Option<f64>, usize)> = cells
        .iter()
        .enumerate()
        .flat_map(|(ci, &(ns, lambda))| (0..s.reps).map(move |rep| (ci, ns, lambda, rep)))
        .collect();

    let nested: Result<Vec<Vec<RepRecord>>> = jobs
        .par_iter()
        .map(|&(ci, ns, lambda, rep)| run_replicate(s, ci, ns, lambda, rep))
        .collect();
    let records: Vec<RepRecord> = nested?.into_iter().flatten().collect();

    let mut summaries = Vec::new();
    for &(ns, lambda) in &cells {
        for &method in &s.methods {
            let vals: Vec<f64> = records
                .iter()
                .filter(|r| r.n_s == ns && r.lambda == lambda && r.method == method)
                .map(|r| r.mse)
                .collect();
            let (mean, std) = matrix::mean_std(&vals);
            summaries.push(CellSummary {
                n_s: ns,
                lambda,
                method,
                mean,
                std,
                reps: vals.len(),
            });
        }
    }
    Ok(ScenarioResults {
        scenario: s.clone(),
        records,
        summaries,
    })
}
