//! Core domain model: functions, files, call edges, and change history.
//!
//! Everything here is immutable after construction and safe to share across
//! analysis tasks. Identity is opaque: the engine never parses function ids,
//! it only compares them. The recommended id form is `path#qualified_name`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque, stable identifier of a function.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FunctionId(pub String);

impl FunctionId {
    pub fn new(id: impl Into<String>) -> Self {
        FunctionId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Repository-relative path with forward slashes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FilePath(pub String);

impl FilePath {
    pub fn new(path: impl Into<String>) -> Self {
        FilePath(path.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FilePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A function known to the facts database.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionRef {
    pub id: FunctionId,
    pub file: FilePath,
    pub qualified_name: String,
    /// Inclusive 1-based line span, when the producer knows it.
    pub span: Option<(u32, u32)>,
}

/// A single violation found while validating a [`FactsDb`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateFunctionId(FunctionId),
    DanglingEdge { from: FunctionId, to: FunctionId },
    SelfEdge(FunctionId),
    UnknownFile { function: FunctionId, file: FilePath },
    InvalidSpan(FunctionId),
    EmptyPath,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateFunctionId(id) => write!(f, "duplicate function id {id}"),
            Violation::DanglingEdge { from, to } => {
                write!(f, "call edge references unknown function: {from} -> {to}")
            }
            Violation::SelfEdge(id) => write!(f, "self edge on {id}"),
            Violation::UnknownFile { function, file } => {
                write!(f, "function {function} references unknown file {file}")
            }
            Violation::InvalidSpan(id) => write!(f, "span of {id} has start_line > end_line"),
            Violation::EmptyPath => write!(f, "empty file path"),
        }
    }
}

/// Immutable snapshot of functions, files, and function-level call edges.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FactsDb {
    functions: BTreeMap<FunctionId, FunctionRef>,
    files: BTreeSet<FilePath>,
    calls: BTreeSet<(FunctionId, FunctionId)>,
}

impl FactsDb {
    /// Builds a database and rejects it unless every invariant holds.
    pub fn new(
        functions: Vec<FunctionRef>,
        calls: Vec<(FunctionId, FunctionId)>,
    ) -> Result<Self> {
        let db = Self::new_unchecked(functions, calls)?;
        let report = db.validate();
        if report.is_empty() {
            Ok(db)
        } else {
            let lines: Vec<String> = report.iter().map(|v| v.to_string()).collect();
            Err(Error::Validation(lines.join("; ")))
        }
    }

    /// Builds a database without running full validation. Duplicate ids are
    /// still rejected since the map representation cannot hold them.
    fn new_unchecked(
        functions: Vec<FunctionRef>,
        calls: Vec<(FunctionId, FunctionId)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut files = BTreeSet::new();
        for fun in functions {
            files.insert(fun.file.clone());
            if let Some(prev) = map.insert(fun.id.clone(), fun) {
                return Err(Error::Validation(
                    Violation::DuplicateFunctionId(prev.id).to_string(),
                ));
            }
        }
        Ok(FactsDb {
            functions: map,
            files,
            calls: calls.into_iter().collect(),
        })
    }

    /// Checks every invariant and returns one entry per violation.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (id, fun) in &self.functions {
            if fun.file.as_str().is_empty() {
                out.push(Violation::EmptyPath);
            }
            if !self.files.contains(&fun.file) {
                out.push(Violation::UnknownFile {
                    function: id.clone(),
                    file: fun.file.clone(),
                });
            }
            if let Some((start, end)) = fun.span {
                if start > end {
                    out.push(Violation::InvalidSpan(id.clone()));
                }
            }
        }
        for (from, to) in &self.calls {
            if from == to {
                out.push(Violation::SelfEdge(from.clone()));
                continue;
            }
            if !self.functions.contains_key(from) || !self.functions.contains_key(to) {
                out.push(Violation::DanglingEdge {
                    from: from.clone(),
                    to: to.clone(),
                });
            }
        }
        out
    }

    pub fn functions(&self) -> impl Iterator<Item = &FunctionRef> {
        self.functions.values()
    }

    pub fn function(&self, id: &FunctionId) -> Option<&FunctionRef> {
        self.functions.get(id)
    }

    pub fn contains_function(&self, id: &FunctionId) -> bool {
        self.functions.contains_key(id)
    }

    pub fn files(&self) -> impl Iterator<Item = &FilePath> {
        self.files.iter()
    }

    pub fn contains_file(&self, path: &FilePath) -> bool {
        self.files.contains(path)
    }

    pub fn calls(&self) -> impl Iterator<Item = &(FunctionId, FunctionId)> {
        self.calls.iter()
    }

    pub fn file_of(&self, id: &FunctionId) -> Option<&FilePath> {
        self.functions.get(id).map(|f| &f.file)
    }

    /// Functions of one file, in ascending id order.
    pub fn functions_in_file<'a>(&'a self, path: &'a FilePath) -> Vec<&'a FunctionRef> {
        self.functions
            .values()
            .filter(move |f| &f.file == path)
            .collect()
    }

    /// Direct callers of `callee`, in ascending id order.
    pub fn callers_of(&self, callee: &FunctionId) -> Vec<&FunctionId> {
        self.calls
            .iter()
            .filter(|(_, to)| to == callee)
            .map(|(from, _)| from)
            .collect()
    }
}

/// Opaque commit identifier (typically a hash).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommitId(pub String);

impl CommitId {
    pub fn new(id: impl Into<String>) -> Self {
        CommitId(id.into())
    }
}

impl fmt::Display for CommitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One commit and what it touched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub id: CommitId,
    /// Seconds since epoch, UTC.
    pub timestamp: i64,
    pub touched_functions: BTreeSet<FunctionId>,
    pub touched_files: BTreeSet<FilePath>,
}

/// Commits ordered by timestamp ascending, ties broken by id, so the order
/// is total and deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChangeHistory {
    commits: Vec<CommitRecord>,
}

impl ChangeHistory {
    pub fn new(mut commits: Vec<CommitRecord>) -> Result<Self> {
        commits.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));
        let mut seen = BTreeSet::new();
        for c in &commits {
            if !seen.insert(c.id.clone()) {
                return Err(Error::Validation(format!("duplicate commit id {}", c.id)));
            }
        }
        Ok(ChangeHistory { commits })
    }

    pub fn commits(&self) -> &[CommitRecord] {
        &self.commits
    }

    pub fn len(&self) -> usize {
        self.commits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commits.is_empty()
    }
}

/// Dense square similarity matrix over target functions.
///
/// Symmetric, entries in [0, 1], zero diagonal. The zero diagonal keeps the
/// affinity-graph degree definition clean for normalized cuts.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    labels: Vec<FunctionId>,
    entries: DMatrix<f64>,
}

impl SimilarityMatrix {
    pub fn new(labels: Vec<FunctionId>, entries: DMatrix<f64>) -> Result<Self> {
        let n = labels.len();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::Validation(format!(
                "matrix shape {}x{} does not match {} labels",
                entries.nrows(),
                entries.ncols(),
                n
            )));
        }
        for i in 0..n {
            if entries[(i, i)] != 0.0 {
                return Err(Error::Validation(format!(
                    "nonzero diagonal at {}",
                    labels[i]
                )));
            }
            for j in 0..n {
                let v = entries[(i, j)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Validation(format!(
                        "entry ({}, {}) = {v} outside [0, 1]",
                        labels[i], labels[j]
                    )));
                }
                if entries[(i, j)] != entries[(j, i)] {
                    return Err(Error::Validation(format!(
                        "asymmetric entries at ({}, {})",
                        labels[i], labels[j]
                    )));
                }
            }
        }
        Ok(SimilarityMatrix { labels, entries })
    }

    pub fn labels(&self) -> &[FunctionId] {
        &self.labels
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }
}

/// Dense rectangular similarity matrix: target functions by client functions.
#[derive(Debug, Clone, PartialEq)]
pub struct RectSimilarityMatrix {
    row_labels: Vec<FunctionId>,
    col_labels: Vec<FunctionId>,
    entries: DMatrix<f64>,
}

impl RectSimilarityMatrix {
    pub fn new(
        row_labels: Vec<FunctionId>,
        col_labels: Vec<FunctionId>,
        entries: DMatrix<f64>,
    ) -> Result<Self> {
        if entries.nrows() != row_labels.len() || entries.ncols() != col_labels.len() {
            return Err(Error::Validation("matrix shape does not match labels".into()));
        }
        let rows: BTreeSet<_> = row_labels.iter().collect();
        for c in &col_labels {
            if rows.contains(c) {
                return Err(Error::Validation(format!(
                    "label {c} appears on both sides"
                )));
            }
        }
        for v in entries.iter() {
            if !(0.0..=1.0).contains(v) {
                return Err(Error::Validation(format!("entry {v} outside [0, 1]")));
            }
        }
        Ok(RectSimilarityMatrix {
            row_labels,
            col_labels,
            entries,
        })
    }

    pub fn row_labels(&self) -> &[FunctionId] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[FunctionId] {
        &self.col_labels
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

/// How the dependent set d(t) of a target function is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependencyMode {
    /// Files with a function that calls t directly.
    Direct,
    /// Files with a call path to t whose intermediate functions all lie in
    /// the target file.
    TransitiveWithinTarget,
    /// Files with a function sharing at least one commit with t.
    CoChange,
    /// Union of the other three modes.
    Union,
}

impl fmt::Display for DependencyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DependencyMode::Direct => "direct",
            DependencyMode::TransitiveWithinTarget => "transitive",
            DependencyMode::CoChange => "cochange",
            DependencyMode::Union => "union",
        };
        f.write_str(s)
    }
}

/// Tuning knobs for an analysis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub dependency_mode: DependencyMode,
    pub q_max: usize,
    pub min_cluster_size: usize,
    pub seed: u64,
    pub eig_tolerance: f64,
    pub kmeans_max_iter: usize,
    pub since: Option<i64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            dependency_mode: DependencyMode::TransitiveWithinTarget,
            q_max: 3,
            min_cluster_size: 2,
            seed: 0,
            eig_tolerance: 1e-9,
            kmeans_max_iter: 300,
            since: None,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q_max < 1 {
            return Err(Error::Config("q_max must be >= 1".into()));
        }
        if self.min_cluster_size < 2 {
            return Err(Error::Config("min_cluster_size must be >= 2".into()));
        }
        Ok(())
    }
}

/// Which pipeline produced a recommendation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommendationKind {
    Split,
    Redraw,
}

/// One ranked refactoring recommendation.
#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub kind: RecommendationKind,
    pub target_members: BTreeSet<FunctionId>,
    /// Empty for splitting.
    pub client_members: BTreeSet<FunctionId>,
    pub multiplicity: usize,
    pub avg_change_freq: f64,
    /// The cluster-count guesses that produced this member set.
    pub source_params: Vec<usize>,
}

impl Recommendation {
    /// All members, target side first, each side in ascending id order.
    pub fn members(&self) -> Vec<&FunctionId> {
        self.target_members
            .iter()
            .chain(self.client_members.iter())
            .collect()
    }

    /// Sorted id sequence over both sides, the ranking tie-break key.
    pub fn sorted_member_ids(&self) -> Vec<&FunctionId> {
        let mut all: Vec<&FunctionId> = self
            .target_members
            .iter()
            .chain(self.client_members.iter())
            .collect();
        all.sort();
        all
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fun(id: &str, file: &str) -> FunctionRef {
        FunctionRef {
            id: FunctionId::new(id),
            file: FilePath::new(file),
            qualified_name: id.rsplit('#').next().unwrap_or(id).to_string(),
            span: None,
        }
    }

    #[test]
    fn well_formed_db_validates_clean() {
        let db = FactsDb::new(
            vec![fun("a.x#f", "a.x"), fun("a.x#g", "a.x"), fun("b.x#h", "b.x")],
            vec![
                (FunctionId::new("b.x#h"), FunctionId::new("a.x#f")),
                (FunctionId::new("a.x#g"), FunctionId::new("a.x#f")),
            ],
        )
        .unwrap();
        assert!(db.validate().is_empty());
        assert_eq!(db.functions().count(), 3);
    }

    #[test]
    fn dangling_edge_is_reported() {
        let db = FactsDb::new_unchecked(
            vec![fun("a.x#f", "a.x")],
            vec![(FunctionId::new("ghost"), FunctionId::new("a.x#f"))],
        )
        .unwrap();
        let report = db.validate();
        assert_eq!(report.len(), 1);
        assert!(matches!(report[0], Violation::DanglingEdge { .. }));
    }

    #[test]
    fn self_edge_is_reported() {
        let db = FactsDb::new_unchecked(
            vec![fun("a.x#f", "a.x")],
            vec![(FunctionId::new("a.x#f"), FunctionId::new("a.x#f"))],
        )
        .unwrap();
        let report = db.validate();
        assert_eq!(report.len(), 1);
        assert!(matches!(report[0], Violation::SelfEdge(_)));
    }

    #[test]
    fn duplicate_function_id_rejected() {
        let err = FactsDb::new(vec![fun("a.x#f", "a.x"), fun("a.x#f", "a.x")], vec![]);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn history_sorts_by_timestamp_then_id() {
        let c = |id: &str, ts: i64| CommitRecord {
            id: CommitId::new(id),
            timestamp: ts,
            touched_functions: BTreeSet::new(),
            touched_files: BTreeSet::new(),
        };
        let h = ChangeHistory::new(vec![c("b", 5), c("a", 5), c("z", 1)]).unwrap();
        let ids: Vec<&str> = h.commits().iter().map(|c| c.id.0.as_str()).collect();
        assert_eq!(ids, ["z", "a", "b"]);
    }

    #[test]
    fn duplicate_commit_id_rejected() {
        let c = |id: &str, ts: i64| CommitRecord {
            id: CommitId::new(id),
            timestamp: ts,
            touched_functions: BTreeSet::new(),
            touched_files: BTreeSet::new(),
        };
        assert!(ChangeHistory::new(vec![c("a", 1), c("a", 2)]).is_err());
    }

    #[test]
    fn similarity_matrix_rejects_asymmetry_and_range() {
        let labels = vec![FunctionId::new("a"), FunctionId::new("b")];
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 0.3, 0.4, 0.0]);
        assert!(SimilarityMatrix::new(labels.clone(), asym).is_err());
        let out_of_range = DMatrix::from_row_slice(2, 2, &[0.0, 1.5, 1.5, 0.0]);
        assert!(SimilarityMatrix::new(labels.clone(), out_of_range).is_err());
        let diag = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        assert!(SimilarityMatrix::new(labels.clone(), diag).is_err());
        let ok = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        assert!(SimilarityMatrix::new(labels, ok).is_ok());
    }

    #[test]
    fn rect_matrix_rejects_shared_labels() {
        let err = RectSimilarityMatrix::new(
            vec![FunctionId::new("a")],
            vec![FunctionId::new("a")],
            DMatrix::from_element(1, 1, 0.5),
        );
        assert!(err.is_err());
    }
}
