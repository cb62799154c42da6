//! Deterministic bipartite spectral co-clustering.
//!
//! The rectangular similarity matrix is normalized to
//! A = D1^{-1/2} S D2^{-1/2}; rows embed through the left singular vectors
//! and columns through the right ones (trivial first triplet discarded), the
//! two point sets are stacked, and the shared deterministic k-means assigns
//! both sides at once.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{AnalysisConfig, FunctionId, RectSimilarityMatrix};
use crate::spectral::{fix_sign, kmeans_deterministic};

/// Which side of the interface a label sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Row,
    Col,
}

/// A simultaneous clustering of rows and columns. Clusters may mix sides;
/// single-side clusters are permitted and left for the caller to flag.
#[derive(Debug, Clone, PartialEq)]
pub struct CoPartition {
    row_labels: Vec<FunctionId>,
    col_labels: Vec<FunctionId>,
    row_assignment: Vec<usize>,
    col_assignment: Vec<usize>,
    k: usize,
    /// All-zero rows/columns dropped before clustering.
    pub dropped_rows: Vec<FunctionId>,
    pub dropped_cols: Vec<FunctionId>,
}

impl CoPartition {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row_labels(&self) -> &[FunctionId] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[FunctionId] {
        &self.col_labels
    }

    pub fn side_of(&self, label: &FunctionId) -> Option<Side> {
        if self.row_labels.contains(label) {
            Some(Side::Row)
        } else if self.col_labels.contains(label) {
            Some(Side::Col)
        } else {
            None
        }
    }

    /// Per cluster: (row-side members, column-side members).
    pub fn clusters(&self) -> Vec<(BTreeSet<FunctionId>, BTreeSet<FunctionId>)> {
        let mut out = vec![(BTreeSet::new(), BTreeSet::new()); self.k];
        for (label, &c) in self.row_labels.iter().zip(&self.row_assignment) {
            out[c].0.insert(label.clone());
        }
        for (label, &c) in self.col_labels.iter().zip(&self.col_assignment) {
            out[c].1.insert(label.clone());
        }
        out
    }
}

struct Normalized {
    matrix: DMatrix<f64>,
    row_idx: Vec<usize>,
    col_idx: Vec<usize>,
    dropped_rows: Vec<FunctionId>,
    dropped_cols: Vec<FunctionId>,
    inv_sqrt_row: DVector<f64>,
    inv_sqrt_col: DVector<f64>,
}

fn normalize(s: &RectSimilarityMatrix, tolerance: f64) -> Result<Normalized> {
    let e = s.entries();
    let mut row_idx = Vec::new();
    let mut dropped_rows = Vec::new();
    for i in 0..e.nrows() {
        if e.row(i).sum() > tolerance {
            row_idx.push(i);
        } else {
            dropped_rows.push(s.row_labels()[i].clone());
        }
    }
    let mut col_idx = Vec::new();
    let mut dropped_cols = Vec::new();
    for j in 0..e.ncols() {
        if e.column(j).sum() > tolerance {
            col_idx.push(j);
        } else {
            dropped_cols.push(s.col_labels()[j].clone());
        }
    }
    if row_idx.is_empty() || col_idx.is_empty() {
        return Err(Error::Analysis("no signal: matrix is all zero".into()));
    }
    let sub = DMatrix::from_fn(row_idx.len(), col_idx.len(), |i, j| {
        e[(row_idx[i], col_idx[j])]
    });
    let inv_sqrt_row =
        DVector::from_iterator(row_idx.len(), (0..row_idx.len()).map(|i| 1.0 / sub.row(i).sum().sqrt()));
    let inv_sqrt_col = DVector::from_iterator(
        col_idx.len(),
        (0..col_idx.len()).map(|j| 1.0 / sub.column(j).sum().sqrt()),
    );
    let matrix = DMatrix::from_fn(row_idx.len(), col_idx.len(), |i, j| {
        sub[(i, j)] * inv_sqrt_row[i] * inv_sqrt_col[j]
    });
    Ok(Normalized {
        matrix,
        row_idx,
        col_idx,
        dropped_rows,
        dropped_cols,
        inv_sqrt_row,
        inv_sqrt_col,
    })
}

/// Singular triplets sorted by descending singular value, signs fixed.
pub struct SvdTriplets {
    pub singular_values: Vec<f64>,
    /// Left singular vectors as columns.
    pub u: DMatrix<f64>,
    /// Right singular vectors as columns.
    pub v: DMatrix<f64>,
}

pub fn svd_triplets(a: &DMatrix<f64>) -> Result<SvdTriplets> {
    let svd = a
        .clone()
        .try_svd(true, true, 1e-12, 10_000)
        .ok_or_else(|| Error::Numeric("SVD failed to converge".into()))?;
    let u_raw = svd.u.expect("requested U");
    let vt_raw = svd.v_t.expect("requested V^T");
    let p = svd.singular_values.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| {
        svd.singular_values[y]
            .partial_cmp(&svd.singular_values[x])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.cmp(&y))
    });
    let mut singular_values = Vec::with_capacity(p);
    let mut u = DMatrix::zeros(u_raw.nrows(), p);
    let mut v = DMatrix::zeros(vt_raw.ncols(), p);
    for (out, &src) in order.iter().enumerate() {
        singular_values.push(svd.singular_values[src]);
        let mut uc = u_raw.column(src).clone_owned();
        let mut vc = vt_raw.row(src).transpose();
        // One sign convention for the pair: fix u, mirror the flip onto v.
        let before = uc.clone();
        fix_sign(&mut uc);
        if (uc.clone() - before).norm() > 0.0 {
            vc = -vc;
        }
        u.set_column(out, &uc);
        v.set_column(out, &vc);
    }
    // Residual check per triplet.
    for (i, &sigma) in singular_values.iter().enumerate() {
        let residual = (a * v.column(i) - sigma * u.column(i)).norm();
        if residual > 1e-7 {
            return Err(Error::Numeric(format!(
                "singular triplet {i} residual {residual:.3e} exceeds 1e-7"
            )));
        }
    }
    Ok(SvdTriplets {
        singular_values,
        u,
        v,
    })
}

/// Singular values (descending) of the degree-normalized matrix, for the
/// model-selection heuristic.
pub fn normalized_singular_values(
    s: &RectSimilarityMatrix,
    tolerance: f64,
) -> Result<Vec<f64>> {
    let normalized = normalize(s, tolerance)?;
    Ok(svd_triplets(&normalized.matrix)?.singular_values)
}

/// Singular-gap model selection, the rectangular mirror of the eigengap
/// heuristic: gap(k) = σ_k - σ_{k+1} for k in [2, n_min - 1], descending gap
/// order, ties to smaller k, near-zero gaps skipped, truncated to `q_max`.
pub fn singular_gap_guesses(
    singular_values: &[f64],
    q_max: usize,
    n_min: usize,
    tolerance: f64,
) -> Result<Vec<usize>> {
    if n_min < 3 {
        return Err(Error::Analysis(
            "target too small for model selection".into(),
        ));
    }
    if singular_values.len() < n_min {
        return Err(Error::Argument(format!(
            "need {n_min} singular values, got {}",
            singular_values.len()
        )));
    }
    let mut candidates: Vec<(usize, f64)> = (2..n_min)
        .map(|k| (k, singular_values[k - 1] - singular_values[k]))
        .filter(|&(_, gap)| gap > tolerance)
        .collect();
    candidates.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    Ok(candidates.into_iter().take(q_max).map(|(k, _)| k).collect())
}

/// Co-clusters the rows and columns of `s` into `k` clusters.
pub fn cocluster_partition(
    s: &RectSimilarityMatrix,
    k: usize,
    config: &AnalysisConfig,
) -> Result<CoPartition> {
    let normalized = normalize(s, config.eig_tolerance)?;
    let rows = normalized.row_idx.len();
    let cols = normalized.col_idx.len();
    let n_min = rows.min(cols);
    if k < 2 || k > n_min {
        return Err(Error::Argument(format!(
            "cluster count {k} out of range [2, {n_min}]"
        )));
    }
    let svd = svd_triplets(&normalized.matrix)?;
    let sigma1 = svd.singular_values[0];
    if svd.singular_values[1] <= config.eig_tolerance * sigma1.max(1.0) {
        return Err(Error::Analysis(
            "insufficient structure: similarity matrix has rank < 2".into(),
        ));
    }

    // l singular vectors including the discarded trivial first.
    let l = ((k as f64).log2().ceil() as usize) + 1;
    let dims = l - 1;
    let mut points = DMatrix::zeros(rows + cols, dims);
    for d in 0..dims {
        for i in 0..rows {
            points[(i, d)] = normalized.inv_sqrt_row[i] * svd.u[(i, d + 1)];
        }
        for j in 0..cols {
            points[(rows + j, d)] = normalized.inv_sqrt_col[j] * svd.v[(j, d + 1)];
        }
    }
    let assignment = kmeans_deterministic(&points, k, config.seed, config.kmeans_max_iter)?;

    let row_labels: Vec<FunctionId> = normalized
        .row_idx
        .iter()
        .map(|&i| s.row_labels()[i].clone())
        .collect();
    let col_labels: Vec<FunctionId> = normalized
        .col_idx
        .iter()
        .map(|&j| s.col_labels()[j].clone())
        .collect();
    Ok(CoPartition {
        row_labels,
        col_labels,
        row_assignment: assignment[..rows].to_vec(),
        col_assignment: assignment[rows..].to_vec(),
        k,
        dropped_rows: normalized.dropped_rows,
        dropped_cols: normalized.dropped_cols,
    })
}
