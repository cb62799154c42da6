//! Ensemble loops, recommendation ranking, and the large-active file
//! detector.

use std::collections::{BTreeMap, BTreeSet};

use crate::cocluster::{cocluster_partition, normalized_singular_values, singular_gap_guesses};
use crate::error::{Error, Result};
use crate::model::{
    AnalysisConfig, ChangeHistory, FactsDb, FilePath, FunctionId, Recommendation,
    RecommendationKind,
};
use crate::similarity::{cochange_set, redraw_similarity, split_similarity};
use crate::spectral::{eig_smallest, ncut_partition, normalized_laplacian, spectral_gap_guesses};

/// The ranked output of one ensemble analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedReport {
    pub target_file: FilePath,
    pub kind: RecommendationKind,
    pub recommendations: Vec<Recommendation>,
    pub config: AnalysisConfig,
    pub diagnostics: Vec<String>,
}

/// Interface splitting: cluster the target file's functions by shared
/// dependents under every guessed cluster count, then rank the aggregated
/// multiset of clusters.
pub fn ensemble_split(
    db: &FactsDb,
    history: Option<&ChangeHistory>,
    target_file: &FilePath,
    config: &AnalysisConfig,
) -> Result<RankedReport> {
    config.validate()?;
    let similarity = split_similarity(db, history, target_file, config)?;
    let (laplacian, kept, isolated) = normalized_laplacian(&similarity, config.eig_tolerance)?;
    if kept.len() < 3 {
        return Err(Error::Analysis(
            "target too small for model selection".into(),
        ));
    }
    let spectrum = eig_smallest(&laplacian, kept.len())?;
    let guesses =
        spectral_gap_guesses(&spectrum.eigenvalues, config.q_max, kept.len(), config.eig_tolerance)?;

    let full_set: BTreeSet<FunctionId> = similarity.labels().iter().cloned().collect();
    let mut diagnostics = Vec::new();
    for label in &isolated {
        diagnostics.push(format!("isolated function: {label}"));
    }

    let mut raw: Vec<(BTreeSet<FunctionId>, BTreeSet<FunctionId>, usize)> = Vec::new();
    for &k in &guesses {
        let partition = ncut_partition(&similarity, k, config)?;
        for cluster in partition.clusters() {
            if cluster.len() < config.min_cluster_size || cluster == full_set {
                continue;
            }
            raw.push((cluster, BTreeSet::new(), k));
        }
    }
    let recommendations =
        rank_recommendations(RecommendationKind::Split, raw, history, config.since);
    if recommendations.is_empty() {
        diagnostics.push("no recommendations survived filtering".into());
    }
    Ok(RankedReport {
        target_file: target_file.clone(),
        kind: RecommendationKind::Split,
        recommendations,
        config: config.clone(),
        diagnostics,
    })
}

/// Interface redrawing: co-cluster target and client functions by shared
/// commits under every guessed cluster count, then rank the aggregated
/// multiset of co-clusters.
pub fn ensemble_redraw(
    db: &FactsDb,
    history: &ChangeHistory,
    target_file: &FilePath,
    config: &AnalysisConfig,
) -> Result<RankedReport> {
    config.validate()?;
    let similarity = redraw_similarity(db, history, target_file, config)?;
    let sigma = normalized_singular_values(&similarity, config.eig_tolerance)?;
    let n_min = similarity
        .row_labels()
        .len()
        .min(similarity.col_labels().len());
    let guesses = singular_gap_guesses(&sigma, config.q_max, n_min, config.eig_tolerance)?;

    let full_target: BTreeSet<FunctionId> = similarity.row_labels().iter().cloned().collect();
    let mut diagnostics = Vec::new();
    let mut raw: Vec<(BTreeSet<FunctionId>, BTreeSet<FunctionId>, usize)> = Vec::new();
    for &k in &guesses {
        let partition = cocluster_partition(&similarity, k, config)?;
        for label in partition
            .dropped_rows
            .iter()
            .chain(partition.dropped_cols.iter())
        {
            let note = format!("dropped all-zero label: {label}");
            if !diagnostics.contains(&note) {
                diagnostics.push(note);
            }
        }
        for (targets, clients) in partition.clusters() {
            if targets.len() + clients.len() < config.min_cluster_size {
                continue;
            }
            if clients.is_empty() && targets == full_target {
                continue;
            }
            if targets.is_empty() || clients.is_empty() {
                let members: Vec<String> = targets
                    .iter()
                    .chain(clients.iter())
                    .map(|f| f.to_string())
                    .collect();
                diagnostics.push(format!(
                    "single-side co-cluster (k={k}): {}",
                    members.join(", ")
                ));
            }
            raw.push((targets, clients, k));
        }
    }
    let recommendations =
        rank_recommendations(RecommendationKind::Redraw, raw, Some(history), config.since);
    if recommendations.is_empty() {
        diagnostics.push("no recommendations survived filtering".into());
    }
    Ok(RankedReport {
        target_file: target_file.clone(),
        kind: RecommendationKind::Redraw,
        recommendations,
        config: config.clone(),
        diagnostics,
    })
}

/// Mean commit count over the member functions; functions unknown to the
/// history count zero, an empty member set scores zero.
pub fn avg_change_frequency(
    members: &BTreeSet<FunctionId>,
    history: Option<&ChangeHistory>,
    since: Option<i64>,
) -> f64 {
    if members.is_empty() {
        return 0.0;
    }
    let Some(history) = history else {
        return 0.0;
    };
    let total: usize = members
        .iter()
        .map(|f| cochange_set(history, f, since).members.len())
        .sum();
    total as f64 / members.len() as f64
}

/// Collapses identical member sets into one recommendation (multiplicity =
/// occurrence count) and sorts by multiplicity descending, then average
/// change frequency descending, then lexicographically smallest sorted
/// member-id sequence.
pub fn rank_recommendations(
    kind: RecommendationKind,
    raw: Vec<(BTreeSet<FunctionId>, BTreeSet<FunctionId>, usize)>,
    history: Option<&ChangeHistory>,
    since: Option<i64>,
) -> Vec<Recommendation> {
    let mut grouped: BTreeMap<(BTreeSet<FunctionId>, BTreeSet<FunctionId>), Vec<usize>> =
        BTreeMap::new();
    for (targets, clients, theta) in raw {
        grouped.entry((targets, clients)).or_default().push(theta);
    }
    let mut out: Vec<Recommendation> = grouped
        .into_iter()
        .map(|((target_members, client_members), mut source_params)| {
            source_params.sort_unstable();
            let all: BTreeSet<FunctionId> = target_members
                .union(&client_members)
                .cloned()
                .collect();
            Recommendation {
                kind,
                multiplicity: source_params.len(),
                avg_change_freq: avg_change_frequency(&all, history, since),
                target_members,
                client_members,
                source_params,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.multiplicity
            .cmp(&a.multiplicity)
            .then_with(|| {
                b.avg_change_freq
                    .partial_cmp(&a.avg_change_freq)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .then_with(|| a.sorted_member_ids().cmp(&b.sorted_member_ids()))
    });
    out
}

/// Fan-in and change-count statistics of one file, with 1-based dense ranks
/// (rank 1 is the highest value).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileActivityStats {
    pub file: FilePath,
    pub fanin_files: usize,
    pub commit_count: usize,
    pub fanin_rank: usize,
    pub change_rank: usize,
}

/// Per-file fan-in (distinct other files with a direct caller into the file)
/// and commit counts, with dense descending ranks across the database.
pub fn file_activity_stats(db: &FactsDb, history: &ChangeHistory) -> Vec<FileActivityStats> {
    let mut fanin: BTreeMap<FilePath, BTreeSet<FilePath>> = BTreeMap::new();
    for file in db.files() {
        fanin.entry(file.clone()).or_default();
    }
    for (caller, callee) in db.calls() {
        let (Some(from), Some(to)) = (db.file_of(caller), db.file_of(callee)) else {
            continue;
        };
        if from != to {
            fanin.entry(to.clone()).or_default().insert(from.clone());
        }
    }
    let mut commit_counts: BTreeMap<FilePath, usize> = BTreeMap::new();
    for file in db.files() {
        let count = history
            .commits()
            .iter()
            .filter(|c| c.touched_files.contains(file))
            .count();
        commit_counts.insert(file.clone(), count);
    }

    let files: Vec<FilePath> = db.files().cloned().collect();
    let fanin_values: Vec<usize> = files.iter().map(|f| fanin[f].len()).collect();
    let commit_values: Vec<usize> = files.iter().map(|f| commit_counts[f]).collect();
    let fanin_ranks = dense_ranks_desc(&fanin_values);
    let change_ranks = dense_ranks_desc(&commit_values);

    files
        .into_iter()
        .enumerate()
        .map(|(i, file)| FileActivityStats {
            file,
            fanin_files: fanin_values[i],
            commit_count: commit_values[i],
            fanin_rank: fanin_ranks[i],
            change_rank: change_ranks[i],
        })
        .collect()
}

fn dense_ranks_desc(values: &[usize]) -> Vec<usize> {
    let mut distinct: Vec<usize> = values.to_vec();
    distinct.sort_unstable_by(|a, b| b.cmp(a));
    distinct.dedup();
    values
        .iter()
        .map(|v| distinct.iter().position(|d| d == v).unwrap() + 1)
        .collect()
}

/// Large-active candidates: score is the worse of the two ranks, so a file
/// must be extreme on both fan-in and change count to lead the list.
pub fn detect_large_active(stats: &[FileActivityStats], top_n: usize) -> Vec<FileActivityStats> {
    let mut ordered: Vec<FileActivityStats> = stats.to_vec();
    ordered.sort_by(|a, b| {
        let score_a = a.fanin_rank.max(a.change_rank);
        let score_b = b.fanin_rank.max(b.change_rank);
        score_a
            .cmp(&score_b)
            .then_with(|| a.fanin_rank.cmp(&b.fanin_rank))
            .then_with(|| a.file.cmp(&b.file))
    });
    ordered.truncate(top_n);
    ordered
}
