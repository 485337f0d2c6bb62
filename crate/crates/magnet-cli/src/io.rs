//! File formats shared by every subcommand: dense matrices as plain CSV
//! (row-major, optional header, no quoting), layouts as JSON, edge lists as
//! three-column CSV, reports as pretty JSON with sorted keys.

use std::fs;
use std::path::Path;

use magnet_core::blockmat::BlockSymMatrix;
use magnet_core::graph::Graph;
use magnet_core::AttributeLayout;
use nalgebra::DMatrix;

use crate::CliError;

fn input_err(path: &Path, detail: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {detail}", path.display()))
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| input_err(path, e))
}

/// Dense matrix CSV. A single leading header line is tolerated and skipped;
/// every other line must be a comma-separated row of numbers, all the same
/// width.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let text = read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => {
                if let Some(first) = rows.first() {
                    if row.len() != first.len() {
                        return Err(input_err(
                            path,
                            format!(
                                "line {}: expected {} fields, got {}",
                                idx + 1,
                                first.len(),
                                row.len()
                            ),
                        ));
                    }
                }
                rows.push(row);
            }
            Err(e) if rows.is_empty() && idx == 0 => {
                // optional header line
                let _ = e;
            }
            Err(e) => return Err(input_err(path, format!("line {}: {e}", idx + 1))),
        }
    }
    if rows.is_empty() {
        return Err(input_err(path, "no numeric rows"));
    }
    let (nr, nc) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<(), CliError> {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&m[(i, j)].to_string());
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| input_err(path, e))
}

/// Observation mask parallel to a data matrix: strictly 0 or 1 per entry.
pub fn read_mask(path: &Path) -> Result<DMatrix<bool>, CliError> {
    let m = read_matrix(path)?;
    let mut out = DMatrix::from_element(m.nrows(), m.ncols(), false);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[(i, j)] = match m[(i, j)] {
                v if v == 0.0 => false,
                v if v == 1.0 => true,
                v => {
                    return Err(input_err(
                        path,
                        format!("mask entry ({i},{j}) is {v}; expected 0 or 1"),
                    ))
                }
            };
        }
    }
    Ok(out)
}

#[derive(serde::Deserialize)]
struct LayoutFile {
    attr_counts: Vec<usize>,
}

/// Layout JSON: `{"attr_counts": [k_1, ..., k_p]}`.
pub fn read_layout(path: &Path) -> Result<AttributeLayout, CliError> {
    let text = read_to_string(path)?;
    let parsed: LayoutFile =
        serde_json::from_str(&text).map_err(|e| input_err(path, e))?;
    AttributeLayout::new(parsed.attr_counts).map_err(CliError::Core)
}

pub fn read_block_matrix(
    matrix_path: &Path,
    layout_path: &Path,
) -> Result<BlockSymMatrix, CliError> {
    let layout = read_layout(layout_path)?;
    let dense = read_matrix(matrix_path)?;
    BlockSymMatrix::from_dense(layout, dense).map_err(CliError::Core)
}

/// Edge list CSV: `node_a,node_b,frobenius_norm`, smallest index first,
/// rows sorted. The norm is of the corresponding block of `omega`.
pub fn write_edges(path: &Path, omega: &BlockSymMatrix) -> Result<(), CliError> {
    let graph = Graph::from_precision_support(omega);
    let mut out = String::from("node_a,node_b,frobenius_norm\n");
    for (a, b) in graph.edges() {
        let norm = omega.block_norm(a, b).map_err(CliError::Core)?;
        out.push_str(&format!("{a},{b},{norm}\n"));
    }
    fs::write(path, out).map_err(|e| input_err(path, e))
}

/// Reads an edge list back into a graph; only the first two columns matter.
pub fn read_edges(path: &Path, node_count: usize) -> Result<Graph, CliError> {
    let text = read_to_string(path)?;
    let mut graph = Graph::new(node_count);
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(input_err(path, format!("line {}: expected at least 2 fields", idx + 1)));
        }
        let pair: Result<(usize, usize), _> = fields[0]
            .parse::<usize>()
            .and_then(|a| fields[1].parse::<usize>().map(|b| (a, b)));
        match pair {
            Ok((a, b)) => graph.add_edge(a, b).map_err(CliError::Core)?,
            Err(e) if idx == 0 && graph.edge_count() == 0 => {
                // optional header line
                let _ = e;
            }
            Err(e) => return Err(input_err(path, format!("line {}: {e}", idx + 1))),
        }
    }
    Ok(graph)
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| input_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| input_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| input_err(path, e))
}
