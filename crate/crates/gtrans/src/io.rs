//! Dense matrix CSV and undirected edge-list files.
//!
//! Matrices are comma-separated, one row per line, no header, floats printed
//! with 17 significant digits so round trips are exact. Edge lists hold two
//! whitespace-separated 0-based node ids per line, undirected, deduplicated.

use crate::error::{Error, Result};
use crate::graphon::AdjMatrix;
use crate::ot::Coupling;
use ndarray::Array2;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// 17 significant digits; enough to reconstruct any f64 exactly.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_matrix_csv(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_float(m[[i, j]])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for tok in line.split(',') {
            let v: f64 = tok.trim().parse().map_err(|_| Error::MalformedCsv {
                line: lineno + 1,
                reason: format!("'{}' is not a number", tok.trim()),
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::MalformedCsv {
                    line: lineno + 1,
                    reason: format!(
                        "row has {} columns, expected {}",
                        row.len(),
                        first.len()
                    ),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("matrix csv"));
    }
    let (nr, nc) = (rows.len(), rows[0].len());
    Ok(Array2::from_shape_fn((nr, nc), |(i, j)| rows[i][j]))
}

/// An edge list plus what was cleaned up while reading it.
#[derive(Debug)]
pub struct EdgeListLoad {
    pub adj: AdjMatrix,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

/// Load an undirected edge list.
///
/// The node count is max id + 1 unless given. Self-loops are dropped with a
/// warning; duplicate edges (either orientation) are deduplicated.
pub fn read_edge_list(path: &Path, nodes: Option<usize>) -> Result<EdgeListLoad> {
    let reader = BufReader::new(File::open(path)?);
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut self_loops = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(Error::MalformedEdgeList {
                line: lineno + 1,
                reason: format!("expected two node ids, found {}", toks.len()),
            });
        }
        let parse = |tok: &str| -> Result<usize> {
            tok.parse().map_err(|_| Error::MalformedEdgeList {
                line: lineno + 1,
                reason: format!("'{tok}' is not a nonnegative integer"),
            })
        };
        let (u, v) = (parse(toks[0])?, parse(toks[1])?);
        if let Some(n) = nodes {
            if u >= n || v >= n {
                return Err(Error::MalformedEdgeList {
                    line: lineno + 1,
                    reason: format!("node id {} out of range for {n} nodes", u.max(v)),
                });
            }
        }
        if u == v {
            self_loops += 1;
            log::warn!("dropping self-loop at line {}", lineno + 1);
            continue;
        }
        edges.push((u.min(v), u.max(v)));
    }
    if edges.is_empty() {
        return Err(Error::EmptyInput("edge list"));
    }
    let n = nodes.unwrap_or_else(|| edges.iter().map(|&(u, v)| u.max(v)).max().unwrap() + 1);
    let mut m = Array2::zeros((n, n));
    let mut duplicates = 0usize;
    for (u, v) in edges {
        if m[[u, v]] != 0.0 {
            duplicates += 1;
        } else {
            m[[u, v]] = 1.0;
            m[[v, u]] = 1.0;
        }
    }
    Ok(EdgeListLoad {
        adj: AdjMatrix::new(m).expect("constructed matrix is a valid adjacency"),
        self_loops_dropped: self_loops,
        duplicates_dropped: duplicates,
    })
}

pub fn write_edge_list(path: &Path, a: &AdjMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (i, j) in a.edges() {
        writeln!(w, "{i} {j}")?;
    }
    w.flush()?;
    Ok(())
}

/// Coupling export: dense CSV plus a JSON sidecar with the solver
/// diagnostics.
pub fn write_coupling(
    csv_path: &Path,
    json_path: &Path,
    coupling: &Coupling,
    epsilon: Option<f64>,
) -> Result<()> {
    write_matrix_csv(csv_path, &coupling.pi)?;
    let sidecar = serde_json::json!({
        "objective": coupling.objective,
        "distance": coupling.distance(),
        "entropic_objective": coupling.entropic_objective,
        "iterations": coupling.iterations,
        "converged": coupling.converged,
        "epsilon": epsilon,
    });
    let mut w = BufWriter::new(File::create(json_path)?);
    serde_json::to_writer_pretty(&mut w, &sidecar)
        .map_err(|e| Error::InvalidConfig(format!("sidecar serialization failed: {e}")))?;
    w.flush()?;
    Ok(())
}
