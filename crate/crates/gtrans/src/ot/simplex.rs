//! Exact linear optimal transport via the transportation network simplex.
//!
//! The bipartite structure keeps everything dense and simple: the basis is a
//! spanning tree over row-nodes and column-nodes, pivots follow Dantzig's
//! rule with lowest-index tie-breaking, and the final flows are re-solved on
//! the optimal tree by leaf elimination so the marginals are exact to
//! floating-point accuracy rather than accumulated pivot arithmetic.

use crate::error::{Error, Result};
use crate::ot::Marginals;
use ndarray::Array2;
use std::collections::VecDeque;

pub fn exact_linear_ot(cost: &Array2<f64>, m: &Marginals) -> Result<Array2<f64>> {
    let (nr, nc) = cost.dim();
    if nr != m.n_source() || nc != m.n_target() {
        return Err(Error::DimensionMismatch {
            context: "linear ot cost",
            left: format!("{nr}x{nc}"),
            right: format!("{}x{}", m.n_source(), m.n_target()),
        });
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(
            "linear ot cost has non-finite entries".into(),
        ));
    }
    let (mu_sum, nu_sum) = (m.mu().sum(), m.nu().sum());
    if (mu_sum - nu_sum).abs() > 1e-12 {
        return Err(Error::InfeasibleMarginals { mu_sum, nu_sum });
    }

    let mut state = State::northwest(m);
    state.optimize(cost)?;
    Ok(state.exact_flows(m))
}

struct State {
    nr: usize,
    nc: usize,
    flow: Array2<f64>,
    basic: Vec<bool>,
    /// Basic columns incident to each row.
    row_adj: Vec<Vec<usize>>,
    /// Basic rows incident to each column.
    col_adj: Vec<Vec<usize>>,
}

impl State {
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nc + j
    }

    fn add_basic(&mut self, i: usize, j: usize, f: f64) {
        let id = self.idx(i, j);
        debug_assert!(!self.basic[id]);
        self.basic[id] = true;
        self.row_adj[i].push(j);
        self.col_adj[j].push(i);
        self.flow[[i, j]] = f;
    }

    fn remove_basic(&mut self, i: usize, j: usize) {
        let id = self.idx(i, j);
        debug_assert!(self.basic[id]);
        self.basic[id] = false;
        self.row_adj[i].retain(|&c| c != j);
        self.col_adj[j].retain(|&r| r != i);
        self.flow[[i, j]] = 0.0;
    }

    /// Northwest-corner starting basis: exactly nr + nc - 1 basic cells
    /// forming a staircase spanning tree, zero-flow cells included on ties.
    fn northwest(m: &Marginals) -> Self {
        let (nr, nc) = (m.n_source(), m.n_target());
        let mut st = State {
            nr,
            nc,
            flow: Array2::zeros((nr, nc)),
            basic: vec![false; nr * nc],
            row_adj: vec![Vec::new(); nr],
            col_adj: vec![Vec::new(); nc],
        };
        let mut s: Vec<f64> = m.mu().to_vec();
        let mut d: Vec<f64> = m.nu().to_vec();
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let (si, dj) = (s[i], d[j]);
            let f = si.min(dj).max(0.0);
            st.add_basic(i, j, f);
            s[i] -= f;
            d[j] -= f;
            if i == nr - 1 && j == nc - 1 {
                break;
            }
            // Exhausted supply moves down, exhausted demand moves right;
            // ties move down so each step consumes exactly one index.
            if i < nr - 1 && (si <= dj || j == nc - 1) {
                i += 1;
            } else {
                j += 1;
            }
        }
        st
    }

    /// Dual potentials from u_0 = 0 over the basis tree.
    fn potentials(&self, cost: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
        let mut u = vec![f64::NAN; self.nr];
        let mut v = vec![f64::NAN; self.nc];
        u[0] = 0.0;
        let mut stack: Vec<(bool, usize)> = vec![(true, 0)];
        while let Some((is_row, idx)) = stack.pop() {
            if is_row {
                for &j in &self.row_adj[idx] {
                    if v[j].is_nan() {
                        v[j] = cost[[idx, j]] - u[idx];
                        stack.push((false, j));
                    }
                }
            } else {
                for &i in &self.col_adj[idx] {
                    if u[i].is_nan() {
                        u[i] = cost[[i, idx]] - v[idx];
                        stack.push((true, i));
                    }
                }
            }
        }
        (u, v)
    }

    /// Unique tree path from row i0 to column j0, as a sequence of basic
    /// cells. BFS order is deterministic.
    fn find_path(&self, i0: usize, j0: usize) -> Vec<(usize, usize)> {
        let n_nodes = self.nr + self.nc;
        let target = self.nr + j0;
        let mut parent: Vec<Option<(usize, (usize, usize))>> = vec![None; n_nodes];
        let mut visited = vec![false; n_nodes];
        visited[i0] = true;
        let mut queue = VecDeque::from([i0]);
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            if node < self.nr {
                for &j in &self.row_adj[node] {
                    let nj = self.nr + j;
                    if !visited[nj] {
                        visited[nj] = true;
                        parent[nj] = Some((node, (node, j)));
                        queue.push_back(nj);
                    }
                }
            } else {
                let j = node - self.nr;
                for &i in &self.col_adj[j] {
                    if !visited[i] {
                        visited[i] = true;
                        parent[i] = Some((node, (i, j)));
                        queue.push_back(i);
                    }
                }
            }
        }
        let mut cells = Vec::new();
        let mut cur = target;
        while cur != i0 {
            let (prev, cell) = parent[cur].expect("basis tree is connected");
            cells.push(cell);
            cur = prev;
        }
        cells.reverse();
        cells
    }

    fn optimize(&mut self, cost: &Array2<f64>) -> Result<()> {
        let scale = cost.iter().fold(0.0f64, |a, &c| a.max(c.abs())).max(1.0);
        let enter_tol = 1e-12 * scale;
        let cap = 2000 + 200 * (self.nr + self.nc) + self.nr * self.nc;
        let mut worst_reduced = 0.0;
        for _ in 0..cap {
            let (u, v) = self.potentials(cost);

            // Entering arc: most negative reduced cost, first (lowest-index)
            // cell on ties.
            let mut best = -enter_tol;
            let mut enter: Option<(usize, usize)> = None;
            for i in 0..self.nr {
                for j in 0..self.nc {
                    if !self.basic[self.idx(i, j)] {
                        let r = cost[[i, j]] - u[i] - v[j];
                        if r < best {
                            best = r;
                            enter = Some((i, j));
                        }
                    }
                }
            }
            let Some((i0, j0)) = enter else {
                return Ok(());
            };
            worst_reduced = best;

            // The entering cell closes a unique cycle; flow alternates signs
            // around it, with even-indexed path cells losing flow.
            let path = self.find_path(i0, j0);
            let mut theta = f64::INFINITY;
            let mut leave = (usize::MAX, usize::MAX);
            for (k, &(i, j)) in path.iter().enumerate() {
                if k % 2 == 0 {
                    let f = self.flow[[i, j]];
                    if f < theta || (f == theta && (i, j) < leave) {
                        theta = f;
                        leave = (i, j);
                    }
                }
            }
            let theta = theta.max(0.0);
            self.flow[[i0, j0]] = theta;
            for (k, &(i, j)) in path.iter().enumerate() {
                if k % 2 == 0 {
                    self.flow[[i, j]] -= theta;
                } else {
                    self.flow[[i, j]] += theta;
                }
            }
            self.remove_basic(leave.0, leave.1);
            // add_basic would reset the flow; set membership manually.
            let id = self.idx(i0, j0);
            self.basic[id] = true;
            self.row_adj[i0].push(j0);
            self.col_adj[j0].push(i0);
        }
        Err(Error::NoConvergence {
            what: "network simplex",
            iterations: cap,
            residual: worst_reduced.abs(),
        })
    }

    /// Re-solve the flows on the final basis tree by leaf elimination so the
    /// marginals hold to machine precision.
    fn exact_flows(&self, m: &Marginals) -> Array2<f64> {
        let (nr, nc) = (self.nr, self.nc);
        let n_nodes = nr + nc;
        let cells: Vec<(usize, usize)> = (0..nr)
            .flat_map(|i| self.row_adj[i].iter().map(move |&j| (i, j)))
            .collect();
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
        for (ci, &(i, j)) in cells.iter().enumerate() {
            incident[i].push(ci);
            incident[nr + j].push(ci);
        }
        let mut degree: Vec<usize> = incident.iter().map(Vec::len).collect();
        let mut remaining: Vec<f64> = m.mu().iter().chain(m.nu().iter()).cloned().collect();
        let mut consumed = vec![false; cells.len()];
        let mut flow = Array2::zeros((nr, nc));

        let mut leaves: VecDeque<usize> =
            (0..n_nodes).filter(|&v| degree[v] == 1).collect();
        let mut done = 0;
        while let Some(node) = leaves.pop_front() {
            if degree[node] == 0 {
                continue;
            }
            let Some(&ci) = incident[node].iter().find(|&&ci| !consumed[ci]) else {
                continue;
            };
            let (i, j) = cells[ci];
            let f = remaining[node].max(0.0);
            flow[[i, j]] = f;
            consumed[ci] = true;
            done += 1;
            let other = if node == i { nr + j } else { i };
            remaining[node] = 0.0;
            remaining[other] -= f;
            degree[node] -= 1;
            degree[other] -= 1;
            if degree[other] == 1 {
                leaves.push_back(other);
            }
        }
        debug_assert_eq!(done, cells.len());
        flow
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use ndarray::{array, Array1};
    use rand::Rng;

    /// Minimum objective over every vertex of the transportation polytope:
    /// each vertex is the flow on a spanning tree of the complete bipartite
    /// graph, so enumerate all (nr*nc choose nr+nc-1) supports.
    fn enumerate_vertices_optimum(cost: &Array2<f64>, m: &Marginals) -> f64 {
        let (nr, nc) = cost.dim();
        let n_edges = nr * nc;
        let k = nr + nc - 1;
        let mut comb: Vec<usize> = (0..k).collect();
        let mut best = f64::INFINITY;
        loop {
            if let Some(obj) = tree_vertex_cost(cost, m, &comb) {
                best = best.min(obj);
            }
            // next lexicographic combination
            let mut pos = k;
            for idx in (0..k).rev() {
                if comb[idx] < n_edges - (k - idx) {
                    pos = idx;
                    break;
                }
            }
            if pos == k {
                break;
            }
            comb[pos] += 1;
            for idx in (pos + 1)..k {
                comb[idx] = comb[idx - 1] + 1;
            }
        }
        best
    }

    fn tree_vertex_cost(cost: &Array2<f64>, m: &Marginals, comb: &[usize]) -> Option<f64> {
        let (nr, nc) = cost.dim();
        let n_nodes = nr + nc;
        // union-find acyclicity check
        let mut parent: Vec<usize> = (0..n_nodes).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &e in comb {
            let (i, j) = (e / nc, e % nc);
            let (a, b) = (find(&mut parent, i), find(&mut parent, nr + j));
            if a == b {
                return None;
            }
            parent[a] = b;
        }
        // acyclic with n_nodes - 1 edges => spanning tree; solve by leaves
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
        for (ci, &e) in comb.iter().enumerate() {
            incident[e / nc].push(ci);
            incident[nr + e % nc].push(ci);
        }
        let mut degree: Vec<usize> = incident.iter().map(Vec::len).collect();
        let mut remaining: Vec<f64> = m.mu().iter().chain(m.nu().iter()).cloned().collect();
        let mut consumed = vec![false; comb.len()];
        let mut queue: VecDeque<usize> = (0..n_nodes).filter(|&v| degree[v] == 1).collect();
        let mut total = 0.0;
        while let Some(node) = queue.pop_front() {
            if degree[node] == 0 {
                continue;
            }
            let Some(&ci) = incident[node].iter().find(|&&ci| !consumed[ci]) else {
                continue;
            };
            let e = comb[ci];
            let (i, j) = (e / nc, e % nc);
            let f = remaining[node];
            if f < -1e-9 {
                return None;
            }
            total += cost[[i, j]] * f.max(0.0);
            consumed[ci] = true;
            let other = if node == i { nr + j } else { i };
            remaining[node] = 0.0;
            remaining[other] -= f;
            degree[node] -= 1;
            degree[other] -= 1;
            if degree[other] == 1 {
                queue.push_back(other);
            }
        }
        if remaining.iter().any(|&r| r.abs() > 1e-9) {
            return None;
        }
        Some(total)
    }

    #[test]
    fn zero_cost_returns_feasible_plan() {
        let m = Marginals::uniform(4, 6).unwrap();
        let pi = exact_linear_ot(&Array2::zeros((4, 6)), &m).unwrap();
        assert!(m.violation(&pi) <= 1e-12);
        assert!(pi.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn two_by_two_assignment() {
        let cost = array![[0.0, 1.0], [1.0, 0.0]];
        let m = Marginals::uniform(2, 2).unwrap();
        let pi = exact_linear_ot(&cost, &m).unwrap();
        assert!((pi[[0, 0]] - 0.5).abs() <= 1e-15);
        assert!((pi[[1, 1]] - 0.5).abs() <= 1e-15);
        assert!(pi[[0, 1]].abs() <= 1e-15);
        let obj: f64 = (&cost * &pi).sum();
        assert!(obj.abs() <= 1e-15);
    }

    #[test]
    fn random_instances_match_vertex_enumeration() {
        for seed in 0..4u64 {
            let mut rng = stream_rng(seed, &[21]);
            let cost = Array2::from_shape_fn((6, 5), |_| rng.random::<f64>());
            // non-uniform but normalized marginals
            let mut mu = Array1::from_shape_fn(6, |_| 0.2 + rng.random::<f64>());
            let mut nu = Array1::from_shape_fn(5, |_| 0.2 + rng.random::<f64>());
            mu /= mu.sum();
            nu /= nu.sum();
            let m = Marginals::new(mu, nu).unwrap();

            let pi = exact_linear_ot(&cost, &m).unwrap();
            let obj: f64 = (&cost * &pi).sum();
            let oracle = enumerate_vertices_optimum(&cost, &m);
            assert!(
                (obj - oracle).abs() <= 1e-10,
                "seed {seed}: simplex {obj} vs enumeration {oracle}"
            );
            assert!(m.violation(&pi) <= 1e-12);
            assert!(pi.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let mut rng = stream_rng(11, &[22]);
        let cost = Array2::from_shape_fn((8, 7), |_| rng.random::<f64>());
        let m = Marginals::uniform(8, 7).unwrap();
        let a = exact_linear_ot(&cost, &m).unwrap();
        let b = exact_linear_ot(&cost, &m).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn larger_instance_marginals_exact() {
        let mut rng = stream_rng(13, &[23]);
        let cost = Array2::from_shape_fn((120, 30), |_| rng.random::<f64>());
        let m = Marginals::uniform(120, 30).unwrap();
        let pi = exact_linear_ot(&cost, &m).unwrap();
        assert!(m.violation(&pi) <= 1e-12);
    }
}
