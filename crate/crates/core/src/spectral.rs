//! Deterministic normalized-cut spectral clustering with eigengap model
//! selection.
//!
//! The pipeline is the symmetric-normalized realization of the normalized-cut
//! objective: embed with the k smallest eigenvectors of
//! L = I - D^{-1/2} S D^{-1/2}, row-normalize, then run a deterministic
//! k-means. Every tie in the pipeline has a fixed break so identical inputs
//! give identical partitions.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{AnalysisConfig, FunctionId, SimilarityMatrix};

/// Eigenvalues ascending, with eigenvector column i paired to eigenvalue i.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

/// A hard clustering of labels into `k` non-empty clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<FunctionId>,
    assignment: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<FunctionId>, assignment: Vec<usize>, k: usize) -> Result<Self> {
        if labels.len() != assignment.len() {
            return Err(Error::Argument("labels/assignment length mismatch".into()));
        }
        let mut seen = vec![false; k];
        for &c in &assignment {
            if c >= k {
                return Err(Error::Argument("cluster index out of range".into()));
            }
            seen[c] = true;
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::Argument("empty cluster".into()));
        }
        Ok(Partition {
            labels,
            assignment,
            k,
        })
    }

    pub fn labels(&self) -> &[FunctionId] {
        &self.labels
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Member sets per cluster, cluster index order.
    pub fn clusters(&self) -> Vec<BTreeSet<FunctionId>> {
        let mut out = vec![BTreeSet::new(); self.k];
        for (label, &c) in self.labels.iter().zip(&self.assignment) {
            out[c].insert(label.clone());
        }
        out
    }
}

/// Symmetric normalized Laplacian over the non-isolated labels of `s`.
///
/// Zero-degree labels carry no affinity signal; they are removed here and
/// reported so callers can append them as singletons.
pub fn normalized_laplacian(
    s: &SimilarityMatrix,
    tolerance: f64,
) -> Result<(DMatrix<f64>, Vec<FunctionId>, Vec<FunctionId>)> {
    let n = s.dim();
    let entries = s.entries();
    let mut kept_idx = Vec::new();
    let mut kept = Vec::new();
    let mut isolated = Vec::new();
    for i in 0..n {
        let degree: f64 = entries.row(i).sum();
        if degree <= tolerance {
            isolated.push(s.labels()[i].clone());
        } else {
            kept_idx.push(i);
            kept.push(s.labels()[i].clone());
        }
    }
    if kept.is_empty() {
        return Err(Error::Analysis("no signal: all labels isolated".into()));
    }
    let m = kept_idx.len();
    let sub = DMatrix::from_fn(m, m, |i, j| entries[(kept_idx[i], kept_idx[j])]);
    let inv_sqrt_deg: DVector<f64> =
        DVector::from_iterator(m, (0..m).map(|i| 1.0 / sub.row(i).sum().sqrt()));
    let laplacian = DMatrix::from_fn(m, m, |i, j| {
        let norm = sub[(i, j)] * inv_sqrt_deg[i] * inv_sqrt_deg[j];
        if i == j {
            1.0 - norm
        } else {
            -norm
        }
    });
    Ok((laplacian, kept, isolated))
}

/// The `m` smallest eigenpairs of a symmetric matrix, eigenvalues ascending.
///
/// Each eigenvector's sign is fixed so its largest-magnitude component is
/// positive (first such component on ties), removing the ±1 ambiguity.
pub fn eig_smallest(l: &DMatrix<f64>, m: usize) -> Result<SpectrumResult> {
    let n = l.nrows();
    if m == 0 || m > n {
        return Err(Error::Argument(format!(
            "requested {m} eigenpairs of a {n}x{n} matrix"
        )));
    }
    let sym = nalgebra::SymmetricEigen::new(l.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        sym.eigenvalues[a]
            .partial_cmp(&sym.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut eigenvalues = Vec::with_capacity(m);
    let mut eigenvectors = DMatrix::zeros(n, m);
    for (out_col, &src_col) in order.iter().take(m).enumerate() {
        eigenvalues.push(sym.eigenvalues[src_col]);
        let mut v = sym.eigenvectors.column(src_col).clone_owned();
        fix_sign(&mut v);
        eigenvectors.set_column(out_col, &v);
    }
    // Residual check on what we return.
    for (i, &lambda) in eigenvalues.iter().enumerate() {
        let v = eigenvectors.column(i);
        let residual = (l * v - lambda * v).norm();
        if residual > 1e-7 {
            return Err(Error::Numeric(format!(
                "eigenpair {i} residual {residual:.3e} exceeds 1e-7"
            )));
        }
    }
    Ok(SpectrumResult {
        eigenvalues,
        eigenvectors,
    })
}

pub(crate) fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        *v = -v.clone();
    }
}

/// Eigengap model selection: candidate cluster counts k in [2, n-1], scored
/// by gap(k) = λ_{k+1} - λ_k, returned by descending gap (ties to smaller k)
/// and truncated to `q_max`. Gaps at or below `tolerance` carry no selection
/// signal and are skipped, so fewer than `q_max` guesses may come back.
pub fn spectral_gap_guesses(
    eigenvalues: &[f64],
    q_max: usize,
    n: usize,
    tolerance: f64,
) -> Result<Vec<usize>> {
    if n < 3 {
        return Err(Error::Analysis(
            "target too small for model selection".into(),
        ));
    }
    if eigenvalues.len() < n {
        return Err(Error::Argument(format!(
            "need {n} eigenvalues, got {}",
            eigenvalues.len()
        )));
    }
    let mut candidates: Vec<(usize, f64)> = (2..n)
        .map(|k| (k, eigenvalues[k] - eigenvalues[k - 1]))
        .filter(|&(_, gap)| gap > tolerance)
        .collect();
    candidates.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    Ok(candidates.into_iter().take(q_max).map(|(k, _)| k).collect())
}

/// Normalized-cut partition of the similarity graph into `k` clusters.
/// Isolated labels come back as singleton clusters appended after the k
/// spectral clusters.
pub fn ncut_partition(
    s: &SimilarityMatrix,
    k: usize,
    config: &AnalysisConfig,
) -> Result<Partition> {
    let (laplacian, kept, isolated) = normalized_laplacian(s, config.eig_tolerance)?;
    let n = kept.len();
    if k < 2 || k > n.saturating_sub(1) {
        return Err(Error::Argument(format!(
            "cluster count {k} out of range [2, {}]",
            n.saturating_sub(1)
        )));
    }
    let spectrum = eig_smallest(&laplacian, k)?;
    let mut points = spectrum.eigenvectors;
    for i in 0..n {
        let norm = points.row(i).norm();
        if norm > config.eig_tolerance {
            let scaled = points.row(i) / norm;
            points.set_row(i, &scaled);
        }
    }
    let assignment = kmeans_deterministic(&points, k, config.seed, config.kmeans_max_iter)?;

    let mut labels = kept;
    let mut full_assignment = assignment;
    for (offset, label) in isolated.into_iter().enumerate() {
        labels.push(label);
        full_assignment.push(k + offset);
    }
    let total_k = full_assignment.iter().copied().max().unwrap_or(0) + 1;
    Partition::new(labels, full_assignment, total_k)
}

/// Deterministic Lloyd k-means over the rows of `points`.
///
/// Centers start from a farthest-first traversal seeded at the point with
/// lexicographically smallest coordinates (ties by index). Assignment ties go
/// to the lowest center index; an empty cluster is repaired by moving the
/// point farthest from its current center.
pub fn kmeans_deterministic(
    points: &DMatrix<f64>,
    k: usize,
    _seed: u64,
    max_iter: usize,
) -> Result<Vec<usize>> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::Argument(format!("k = {k} with {n} points")));
    }

    let row = |i: usize| points.row(i);
    let dist2 = |i: usize, c: &DVector<f64>| -> f64 {
        let mut acc = 0.0;
        for (j, &cv) in c.iter().enumerate() {
            let d = points[(i, j)] - cv;
            acc += d * d;
        }
        acc
    };

    // Farthest-first seeding.
    let mut start = 0;
    for i in 1..n {
        if lex_less(&row(i).transpose(), &row(start).transpose()) {
            start = i;
        }
    }
    let mut centers: Vec<DVector<f64>> = vec![row(start).transpose()];
    let mut chosen = vec![start];
    while centers.len() < k {
        let mut best = None;
        for i in 0..n {
            if chosen.contains(&i) {
                continue;
            }
            let nearest = centers
                .iter()
                .map(|c| dist2(i, c))
                .fold(f64::INFINITY, f64::min);
            let better = match best {
                None => true,
                Some((_, d)) => nearest > d,
            };
            if better {
                best = Some((i, nearest));
            }
        }
        let (idx, _) = best.expect("k <= n leaves a point to choose");
        centers.push(row(idx).transpose());
        chosen.push(idx);
    }

    let mut assignment: Vec<usize> = vec![0; n];
    for _ in 0..max_iter {
        // Assign: nearest center, ties to the lowest index.
        let mut next = vec![0usize; n];
        for (i, slot) in next.iter_mut().enumerate() {
            let mut best_c = 0;
            let mut best_d = dist2(i, &centers[0]);
            for (c, center) in centers.iter().enumerate().skip(1) {
                let d = dist2(i, center);
                if d < best_d {
                    best_d = d;
                    best_c = c;
                }
            }
            *slot = best_c;
        }

        // Repair empty clusters with the globally worst-fitting point.
        loop {
            let mut counts = vec![0usize; k];
            for &c in &next {
                counts[c] += 1;
            }
            let Some(empty) = counts.iter().position(|&c| c == 0) else {
                break;
            };
            let mut worst = None;
            for i in 0..n {
                if counts[next[i]] <= 1 {
                    continue;
                }
                let d = dist2(i, &centers[next[i]]);
                let better = match worst {
                    None => true,
                    Some((_, wd)) => d > wd,
                };
                if better {
                    worst = Some((i, d));
                }
            }
            let (idx, _) = worst.expect("some cluster has more than one point");
            next[idx] = empty;
        }

        let stable = next == assignment;
        assignment = next;

        // Update centers as cluster means.
        let dims = points.ncols();
        let mut sums = vec![DVector::zeros(dims); k];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            sums[c] += row(i).transpose();
            counts[c] += 1;
        }
        for c in 0..k {
            centers[c] = &sums[c] / counts[c] as f64;
        }

        if stable {
            break;
        }
    }
    Ok(assignment)
}

fn lex_less(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}
