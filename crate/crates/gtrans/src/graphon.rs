//! Closed-form graphon functions, latent sampling, probability matrices,
//! Bernoulli adjacency sampling, and the perturbation schemes used by the
//! simulation experiments.

use crate::error::{Error, Result};
use crate::matrix;
use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Floor for denominators of formulas with isolated singular points (7, 8, 10).
/// The convention value at such points does not matter for any matrix-level
/// metric: the points have measure zero in [0,1]^2.
const DENOM_FLOOR: f64 = 1e-12;

/// One of the ten closed-form symmetric graphon functions f: [0,1]^2 -> [0,1].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GraphonSpec {
    id: u32,
}

impl GraphonSpec {
    pub fn new(id: u32) -> Result<Self> {
        if (1..=10).contains(&id) {
            Ok(Self { id })
        } else {
            Err(Error::UnknownGraphon(id))
        }
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn all() -> impl Iterator<Item = GraphonSpec> {
        (1..=10).map(|id| GraphonSpec { id })
    }

    pub fn description(&self) -> &'static str {
        match self.id {
            1 => "exp(-x^0.7 - y^0.7)",
            2 => "exp(-max(x,y)^0.75)",
            3 => "exp(-0.5 (min(x,y) + sqrt(x) + sqrt(y)))",
            4 => "1 / (1 + exp(-(max(x,y)^2 + min(x,y)^4)))",
            5 => "|x - y|",
            6 => "x y / 2",
            7 => "(x^2 + y^2)/3 cos(1/(x^2 + y^2)) + 0.15",
            8 => "(x + y)/3 cos(1/(x + y)) + 0.15",
            9 => "sin(10 pi (x + y - 5)) / 5 + 0.5",
            10 => "min(exp(sin(6/((1-x)^2 + y^2))), exp(sin(6/(x^2 + (1-y)^2)))) / 4",
            _ => unreachable!(),
        }
    }

    /// Evaluate the graphon, clamped to [0, 1].
    ///
    /// Callers must supply x, y in [0, 1]. Formulas 7, 8 and 10 have isolated
    /// singular denominators; these are floored at 1e-12 before division.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let v = match self.id {
            1 => (-x.powf(0.7) - y.powf(0.7)).exp(),
            2 => (-x.max(y).powf(0.75)).exp(),
            3 => (-0.5 * (x.min(y) + x.sqrt() + y.sqrt())).exp(),
            4 => 1.0 / (1.0 + (-(x.max(y).powi(2) + x.min(y).powi(4))).exp()),
            5 => (x - y).abs(),
            6 => x * y / 2.0,
            7 => {
                let s = (x * x + y * y).max(DENOM_FLOOR);
                (x * x + y * y) / 3.0 * (1.0 / s).cos() + 0.15
            }
            8 => {
                let s = (x + y).max(DENOM_FLOOR);
                (x + y) / 3.0 * (1.0 / s).cos() + 0.15
            }
            9 => (10.0 * std::f64::consts::PI * (x + y - 5.0)).sin() / 5.0 + 0.5,
            10 => {
                let a = ((1.0 - x).powi(2) + y * y).max(DENOM_FLOOR);
                let b = (x * x + (1.0 - y).powi(2)).max(DENOM_FLOOR);
                ((6.0 / a).sin().exp()).min((6.0 / b).sin().exp()) / 4.0
            }
            _ => unreachable!(),
        };
        v.clamp(0.0, 1.0)
    }
}

/// Latent node positions in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct LatentPositions {
    values: Vec<f64>,
    sorted: bool,
}

impl LatentPositions {
    /// Wrap explicit positions; all entries must lie in [0, 1].
    pub fn new(values: Vec<f64>, sorted: bool) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("latent positions"));
        }
        for (i, &v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::EntryOutOfRange {
                    value: v,
                    row: i,
                    col: 0,
                    expected: "[0, 1]",
                });
            }
        }
        if sorted && values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidConfig(
                "latent positions flagged sorted but are not nondecreasing".into(),
            ));
        }
        Ok(Self { values, sorted })
    }

    /// Deterministic midpoint grid (i + 1/2)/n, used for visualization tables.
    pub fn grid(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput("latent positions"));
        }
        let values = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        Ok(Self {
            values,
            sorted: true,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_sorted(&self) -> bool {
        self.sorted
    }
}

/// Draw n i.i.d. Uniform[0,1] latent positions, sorted ascending on request.
pub fn sample_latents<R: Rng>(n: usize, sorted: bool, rng: &mut R) -> Result<LatentPositions> {
    if n == 0 {
        return Err(Error::EmptyInput("latent positions"));
    }
    let mut values: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    if sorted {
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    Ok(LatentPositions { values, sorted })
}

/// Symmetric matrix of edge probabilities with entries in [0, 1].
///
/// The diagonal is populated like any other entry so that matrix-level
/// operations (smoothing, projection, the MSE metric) need no special-casing;
/// adjacency sampling ignores it.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbMatrix {
    values: Array2<f64>,
}

impl ProbMatrix {
    /// Validate and wrap a symmetric [0,1]-valued matrix.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::DimensionMismatch {
                context: "probability matrix",
                left: values.nrows().to_string(),
                right: values.ncols().to_string(),
            });
        }
        if values.nrows() == 0 {
            return Err(Error::EmptyInput("probability matrix"));
        }
        let dev = matrix::max_asymmetry(&values);
        if dev > 1e-12 {
            return Err(Error::NotSymmetric {
                max_dev: dev,
                tol: 1e-12,
            });
        }
        for ((i, j), &v) in values.indexed_iter() {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::EntryOutOfRange {
                    value: v,
                    row: i,
                    col: j,
                    expected: "[0, 1]",
                });
            }
        }
        Ok(Self { values })
    }

    /// P_ij = f(u_i, u_j), diagonal included.
    pub fn from_graphon(spec: GraphonSpec, u: &LatentPositions) -> Self {
        let n = u.len();
        let vals = u.values();
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                // Evaluate once per unordered pair; the formulas are symmetric.
                let v = spec.eval(vals[i], vals[j]);
                m[[i, j]] = v;
                m[[j, i]] = v;
            }
        }
        Self { values: m }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }
}

/// Symmetric binary adjacency matrix with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjMatrix {
    values: Array2<f64>,
}

impl AdjMatrix {
    /// Validate and wrap a hollow symmetric 0/1 matrix.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::DimensionMismatch {
                context: "adjacency matrix",
                left: values.nrows().to_string(),
                right: values.ncols().to_string(),
            });
        }
        if values.nrows() == 0 {
            return Err(Error::EmptyInput("adjacency matrix"));
        }
        for ((i, j), &v) in values.indexed_iter() {
            if v != 0.0 && v != 1.0 {
                return Err(Error::EntryOutOfRange {
                    value: v,
                    row: i,
                    col: j,
                    expected: "{0, 1}",
                });
            }
            if i == j && v != 0.0 {
                return Err(Error::EntryOutOfRange {
                    value: v,
                    row: i,
                    col: j,
                    expected: "zero diagonal",
                });
            }
        }
        if matrix::max_asymmetry(&values) > 0.0 {
            return Err(Error::NotSymmetric {
                max_dev: matrix::max_asymmetry(&values),
                tol: 0.0,
            });
        }
        Ok(Self { values })
    }

    /// Independent Bernoulli draws A_ij ~ Ber(P_ij) for i < j, mirrored.
    pub fn sample<R: Rng>(p: &ProbMatrix, rng: &mut R) -> Self {
        let n = p.n();
        let pv = p.values();
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < pv[[i, j]] {
                    a[[i, j]] = 1.0;
                    a[[j, i]] = 1.0;
                }
            }
        }
        Self { values: a }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn edge_count(&self) -> usize {
        (self.values.sum() / 2.0).round() as usize
    }

    /// Undirected edges (i, j) with i < j.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.values[[i, j]] != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Entrywise perturbation scheme applied to a probability matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Perturbation {
    /// Adds one i.i.d. U(lo, hi) draw per unordered pair, mirrored.
    UniformNoise {
        lo: f64,
        hi: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// Adds U(0, lambda) draws when lambda > 0, U(lambda, 0) when lambda < 0.
    DensityShift {
        lambda: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

impl Perturbation {
    pub fn seed(&self) -> Option<u64> {
        match self {
            Perturbation::UniformNoise { seed, .. } => *seed,
            Perturbation::DensityShift { seed, .. } => *seed,
        }
    }

    fn bounds(&self) -> Result<(f64, f64)> {
        match *self {
            Perturbation::UniformNoise { lo, hi, .. } => {
                if lo > hi {
                    Err(Error::InvalidBounds { lo, hi })
                } else {
                    Ok((lo, hi))
                }
            }
            Perturbation::DensityShift { lambda, .. } => {
                if lambda.abs() > 1.0 {
                    Err(Error::InvalidShift(lambda))
                } else if lambda >= 0.0 {
                    Ok((0.0, lambda))
                } else {
                    Ok((lambda, 0.0))
                }
            }
        }
    }
}

/// Perturb a probability matrix entrywise and re-clamp to [0, 1].
pub fn perturb<R: Rng>(p: &ProbMatrix, spec: &Perturbation, rng: &mut R) -> Result<ProbMatrix> {
    let (lo, hi) = spec.bounds()?;
    let n = p.n();
    let mut out = p.values().clone();
    for i in 0..n {
        for j in i..n {
            let xi = if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            };
            let v = (out[[i, j]] + xi).clamp(0.0, 1.0);
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    ProbMatrix::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_unknown_id() {
        assert!(matches!(
            GraphonSpec::new(0),
            Err(Error::UnknownGraphon(0))
        ));
        assert!(matches!(
            GraphonSpec::new(11),
            Err(Error::UnknownGraphon(11))
        ));
    }

    #[test]
    fn pointwise_examples() {
        let g6 = GraphonSpec::new(6).unwrap();
        assert_abs_diff_eq!(g6.eval(1.0, 1.0), 0.5, epsilon = 1e-15);

        let g5 = GraphonSpec::new(5).unwrap();
        assert_abs_diff_eq!(g5.eval(0.3, 0.3), 0.0, epsilon = 1e-15);

        // Independent scalar evaluation of formula 9 at (0.25, 0.25).
        let direct = (10.0 * std::f64::consts::PI * (0.25 + 0.25 - 5.0)).sin() / 5.0 + 0.5;
        let g9 = GraphonSpec::new(9).unwrap();
        assert_abs_diff_eq!(g9.eval(0.25, 0.25), direct, epsilon = 1e-12);
        assert_abs_diff_eq!(g9.eval(0.25, 0.25), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn singular_points_are_finite_and_in_range() {
        for id in [7, 8, 10] {
            let g = GraphonSpec::new(id).unwrap();
            for &(x, y) in &[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
                let v = g.eval(x, y);
                assert!(v.is_finite() && (0.0..=1.0).contains(&v), "id {id} at ({x},{y}): {v}");
            }
        }
    }

    #[test]
    fn symmetry_and_range_on_grid() {
        // 101 x 101 grid over the unit square for all ten formulas.
        for spec in GraphonSpec::all() {
            for i in 0..=100 {
                for j in 0..=100 {
                    let (x, y) = (i as f64 / 100.0, j as f64 / 100.0);
                    let v = spec.eval(x, y);
                    let w = spec.eval(y, x);
                    assert!((v - w).abs() <= 1e-12, "id {} asym at ({x},{y})", spec.id());
                    assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }

    #[test]
    fn grid_average_matches_reported_density() {
        // Average connecting probability over a dense grid: graphon 6 ~ 0.125,
        // graphon 2 ~ 0.5.
        let u = LatentPositions::grid(500).unwrap();
        let p6 = ProbMatrix::from_graphon(GraphonSpec::new(6).unwrap(), &u);
        let p2 = ProbMatrix::from_graphon(GraphonSpec::new(2).unwrap(), &u);
        assert!((matrix::mean(p6.values()) - 0.125).abs() < 0.02);
        assert!((matrix::mean(p2.values()) - 0.5).abs() < 0.02);
    }

    #[test]
    fn prob_matrix_examples() {
        let g6 = GraphonSpec::new(6).unwrap();
        let u = LatentPositions::new(vec![0.0, 1.0], false).unwrap();
        let p = ProbMatrix::from_graphon(g6, &u);
        assert_eq!(p.values()[[0, 0]], 0.0);
        assert_eq!(p.values()[[0, 1]], 0.0);
        assert_eq!(p.values()[[1, 0]], 0.0);
        assert_eq!(p.values()[[1, 1]], 0.5);

        let g5 = GraphonSpec::new(5).unwrap();
        let u = LatentPositions::new(vec![0.0, 0.5, 1.0], false).unwrap();
        let p = ProbMatrix::from_graphon(g5, &u);
        assert_abs_diff_eq!(p.values()[[0, 1]], 0.5);
        assert_abs_diff_eq!(p.values()[[0, 2]], 1.0);
        assert_abs_diff_eq!(p.values()[[1, 2]], 0.5);
        for i in 0..3 {
            assert_eq!(p.values()[[i, i]], 0.0);
        }
    }

    #[test]
    fn sorted_grid_is_monotone_for_graphon_2() {
        // f(x, y) = exp(-max(x,y)^0.75) is nonincreasing in max(x, y), so each
        // row of the sorted-grid matrix is nonincreasing past the diagonal.
        let u = LatentPositions::grid(500).unwrap();
        let p = ProbMatrix::from_graphon(GraphonSpec::new(2).unwrap(), &u);
        let v = p.values();
        for i in 0..500 {
            for j in (i + 1)..500 {
                assert!(v[[i, j]] <= v[[i, j - 1]] + 1e-15);
            }
        }
    }

    #[test]
    fn sample_latents_basics() {
        let mut rng = stream_rng(1, &[]);
        let one = sample_latents(1, false, &mut rng).unwrap();
        assert!((0.0..=1.0).contains(&one.values()[0]));

        let big = sample_latents(1000, false, &mut rng).unwrap();
        let mean = big.values().iter().sum::<f64>() / 1000.0;
        assert!((mean - 0.5).abs() < 0.03, "mean {mean}");

        let sorted = sample_latents(5, true, &mut rng).unwrap();
        assert!(sorted.values().windows(2).all(|w| w[0] <= w[1]));

        assert!(matches!(
            sample_latents(0, false, &mut rng),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn adjacency_sampling_extremes() {
        let zeros = ProbMatrix::new(Array2::zeros((5, 5))).unwrap();
        let mut rng = stream_rng(2, &[]);
        let a = AdjMatrix::sample(&zeros, &mut rng);
        assert_eq!(a.edge_count(), 0);

        let ones = ProbMatrix::new(Array2::ones((6, 6))).unwrap();
        let a = AdjMatrix::sample(&ones, &mut rng);
        assert_eq!(a.edge_count(), 6 * 5 / 2);
    }

    #[test]
    fn adjacency_density_concentrates() {
        // P = 1/2 everywhere, n = 200: edge density within 0.5 +/- 0.02 per seed.
        let p = ProbMatrix::new(Array2::from_elem((200, 200), 0.5)).unwrap();
        for seed in 0..10 {
            let mut rng = stream_rng(seed, &[7]);
            let a = AdjMatrix::sample(&p, &mut rng);
            let density = a.edge_count() as f64 / (200.0 * 199.0 / 2.0);
            assert!((density - 0.5).abs() < 0.02, "seed {seed}: {density}");
        }
    }

    #[test]
    fn perturb_identity_and_saturation() {
        let u = LatentPositions::grid(20).unwrap();
        let p = ProbMatrix::from_graphon(GraphonSpec::new(6).unwrap(), &u);

        let mut rng = stream_rng(3, &[]);
        let same = perturb(
            &p,
            &Perturbation::DensityShift {
                lambda: 0.0,
                seed: None,
            },
            &mut rng,
        )
        .unwrap();
        assert_eq!(same, p);

        let nine = ProbMatrix::new(Array2::from_elem((4, 4), 0.9)).unwrap();
        let shifted = perturb(
            &nine,
            &Perturbation::UniformNoise {
                lo: 0.2,
                hi: 0.2,
                seed: None,
            },
            &mut rng,
        )
        .unwrap();
        assert!(shifted.values().iter().all(|&v| v == 1.0));

        assert!(matches!(
            perturb(
                &nine,
                &Perturbation::DensityShift {
                    lambda: 1.5,
                    seed: None
                },
                &mut rng
            ),
            Err(Error::InvalidShift(_))
        ));
        assert!(matches!(
            perturb(
                &nine,
                &Perturbation::UniformNoise {
                    lo: 0.5,
                    hi: 0.1,
                    seed: None
                },
                &mut rng
            ),
            Err(Error::InvalidBounds { .. })
        ));
    }

    #[test]
    fn density_shift_mean_increase_matches_integral() {
        // Expected clamped shift, per entry p with xi ~ U(0, l):
        //   E[min(1, p + xi) - p] = l/2 - max(0, p + l - 1)^2 / (2 l).
        let lambda = 0.5;
        let g6 = GraphonSpec::new(6).unwrap();
        let mut lat_rng = stream_rng(11, &[0]);
        let u = sample_latents(50, false, &mut lat_rng).unwrap();
        let p = ProbMatrix::from_graphon(g6, &u);

        let expected: f64 = {
            let vals = p.values();
            let mut acc = 0.0;
            for &pv in vals.iter() {
                let overshoot = (pv + lambda - 1.0).max(0.0);
                acc += lambda / 2.0 - overshoot * overshoot / (2.0 * lambda);
            }
            acc / (vals.len() as f64)
        };

        let mut increases = Vec::new();
        for seed in 0..20 {
            let mut rng = stream_rng(seed, &[42]);
            let q = perturb(
                &p,
                &Perturbation::DensityShift {
                    lambda,
                    seed: None,
                },
                &mut rng,
            )
            .unwrap();
            increases.push(matrix::mean(q.values()) - matrix::mean(p.values()));
        }
        let mean_inc = increases.iter().sum::<f64>() / increases.len() as f64;
        assert!(
            (mean_inc - expected).abs() < 0.01,
            "measured {mean_inc}, integral {expected}"
        );
    }
}
