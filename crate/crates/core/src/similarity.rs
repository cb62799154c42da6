//! Dependent sets, co-change sets, and the two Jaccard similarity matrices.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{
    AnalysisConfig, ChangeHistory, CommitId, DependencyMode, FactsDb, FilePath, FunctionId,
    RectSimilarityMatrix, SimilarityMatrix,
};

/// The files that use one target function, under a given dependency mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependentSet {
    pub function: FunctionId,
    pub mode: DependencyMode,
    pub members: BTreeSet<FilePath>,
}

/// The commits in which one function changed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoChangeSet {
    pub function: FunctionId,
    pub members: BTreeSet<CommitId>,
}

/// Jaccard index |a ∩ b| / |a ∪ b|. Two empty sets score 0: functions that
/// were never used share no evidence of common responsibility.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Computes d(t) for one target function.
pub fn dependent_set(
    db: &FactsDb,
    history: Option<&ChangeHistory>,
    target_file: &FilePath,
    t: &FunctionId,
    mode: DependencyMode,
) -> Result<DependentSet> {
    match db.file_of(t) {
        Some(file) if file == target_file => {}
        _ => {
            return Err(Error::Argument(format!(
                "{t} is not a function of {target_file}"
            )))
        }
    }
    let needs_history = matches!(mode, DependencyMode::CoChange | DependencyMode::Union);
    if needs_history && history.is_none() {
        return Err(Error::Config(format!(
            "dependency mode {mode} requires a change history"
        )));
    }

    let mut members = BTreeSet::new();
    match mode {
        DependencyMode::Direct => collect_direct(db, target_file, t, &mut members),
        DependencyMode::TransitiveWithinTarget => {
            collect_transitive(db, target_file, t, &mut members)
        }
        DependencyMode::CoChange => {
            collect_cochange(db, history.unwrap(), target_file, t, &mut members)
        }
        DependencyMode::Union => {
            collect_direct(db, target_file, t, &mut members);
            collect_transitive(db, target_file, t, &mut members);
            collect_cochange(db, history.unwrap(), target_file, t, &mut members);
        }
    }
    Ok(DependentSet {
        function: t.clone(),
        mode,
        members,
    })
}

fn collect_direct(
    db: &FactsDb,
    target_file: &FilePath,
    t: &FunctionId,
    out: &mut BTreeSet<FilePath>,
) {
    for caller in db.callers_of(t) {
        if let Some(file) = db.file_of(caller) {
            if file != target_file {
                out.insert(file.clone());
            }
        }
    }
}

/// Reverse reachability from `t`, expanding only through functions inside the
/// target file. Callers outside the target contribute their file and stop.
fn collect_transitive(
    db: &FactsDb,
    target_file: &FilePath,
    t: &FunctionId,
    out: &mut BTreeSet<FilePath>,
) {
    let mut visited: BTreeSet<FunctionId> = BTreeSet::new();
    let mut queue = VecDeque::new();
    visited.insert(t.clone());
    queue.push_back(t.clone());
    while let Some(current) = queue.pop_front() {
        for caller in db.callers_of(&current) {
            let Some(file) = db.file_of(caller) else {
                continue;
            };
            if file == target_file {
                if visited.insert(caller.clone()) {
                    queue.push_back(caller.clone());
                }
            } else {
                out.insert(file.clone());
            }
        }
    }
}

fn collect_cochange(
    db: &FactsDb,
    history: &ChangeHistory,
    target_file: &FilePath,
    t: &FunctionId,
    out: &mut BTreeSet<FilePath>,
) {
    for commit in history.commits() {
        if !commit.touched_functions.contains(t) {
            continue;
        }
        for f in &commit.touched_functions {
            if let Some(file) = db.file_of(f) {
                if file != target_file {
                    out.insert(file.clone());
                }
            }
        }
    }
}

/// Builds the square similarity matrix S over the target file's functions:
/// entry (i, j) is the Jaccard index of d(t_i) and d(t_j), zero diagonal.
pub fn split_similarity(
    db: &FactsDb,
    history: Option<&ChangeHistory>,
    target_file: &FilePath,
    config: &AnalysisConfig,
) -> Result<SimilarityMatrix> {
    let mut targets: Vec<FunctionId> = db
        .functions_in_file(target_file)
        .iter()
        .map(|f| f.id.clone())
        .collect();
    targets.sort();
    if targets.len() < 2 {
        return Err(Error::Analysis(format!(
            "target too small: {target_file} has {} function(s)",
            targets.len()
        )));
    }
    let sets: Vec<BTreeSet<FilePath>> = targets
        .iter()
        .map(|t| dependent_set(db, history, target_file, t, config.dependency_mode))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .map(|d| d.members)
        .collect();

    let n = targets.len();
    let mut entries = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let s = jaccard(&sets[i], &sets[j]);
            entries[(i, j)] = s;
            entries[(j, i)] = s;
        }
    }
    SimilarityMatrix::new(targets, entries)
}

/// Computes c(f): the commits in which `f` changed, optionally restricted to
/// commits at or after `since`.
pub fn cochange_set(history: &ChangeHistory, f: &FunctionId, since: Option<i64>) -> CoChangeSet {
    let members = history
        .commits()
        .iter()
        .filter(|c| since.is_none_or(|s| c.timestamp >= s))
        .filter(|c| c.touched_functions.contains(f))
        .map(|c| c.id.clone())
        .collect();
    CoChangeSet {
        function: f.clone(),
        members,
    }
}

/// Builds the rectangular similarity matrix for interface redrawing.
///
/// Rows are target functions with a non-empty commit set. Columns are
/// functions of dependent files with a non-empty commit set that share at
/// least one commit with some target function; this keeps every column
/// non-zero by construction.
pub fn redraw_similarity(
    db: &FactsDb,
    history: &ChangeHistory,
    target_file: &FilePath,
    config: &AnalysisConfig,
) -> Result<RectSimilarityMatrix> {
    let mut targets: Vec<FunctionId> = db
        .functions_in_file(target_file)
        .iter()
        .map(|f| f.id.clone())
        .collect();
    targets.sort();
    if targets.len() < 2 {
        return Err(Error::Analysis(format!(
            "target too small: {target_file} has {} function(s)",
            targets.len()
        )));
    }

    let target_sets: BTreeMap<FunctionId, BTreeSet<CommitId>> = targets
        .iter()
        .map(|t| (t.clone(), cochange_set(history, t, config.since).members))
        .filter(|(_, s)| !s.is_empty())
        .collect();
    let target_commits: BTreeSet<&CommitId> = target_sets.values().flatten().collect();

    // Dependent files of the target under the configured mode.
    let mut dependent_files: BTreeSet<FilePath> = BTreeSet::new();
    for t in &targets {
        let ds = dependent_set(db, Some(history), target_file, t, config.dependency_mode)?;
        dependent_files.extend(ds.members);
    }

    let mut col_labels = Vec::new();
    let mut col_sets = Vec::new();
    for fun in db.functions() {
        if fun.file == *target_file || !dependent_files.contains(&fun.file) {
            continue;
        }
        let set = cochange_set(history, &fun.id, config.since).members;
        if set.is_empty() || !set.iter().any(|c| target_commits.contains(c)) {
            continue;
        }
        col_labels.push(fun.id.clone());
        col_sets.push(set);
    }

    let row_labels: Vec<FunctionId> = target_sets.keys().cloned().collect();
    if row_labels.len() < 2 || col_labels.len() < 2 {
        return Err(Error::Analysis(format!(
            "insufficient history: {} eligible target function(s), {} eligible client function(s)",
            row_labels.len(),
            col_labels.len()
        )));
    }

    let mut entries = DMatrix::zeros(row_labels.len(), col_labels.len());
    for (i, t) in row_labels.iter().enumerate() {
        let ts = &target_sets[t];
        for (j, cs) in col_sets.iter().enumerate() {
            entries[(i, j)] = jaccard(ts, cs);
        }
    }
    RectSimilarityMatrix::new(row_labels, col_labels, entries)
}
