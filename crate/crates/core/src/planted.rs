//! Synthetic ground-truth generator and cluster-recovery scoring.
//!
//! The generator plants the idealized responsibility structure the analyses
//! are meant to recover: each responsibility owns a block of target
//! functions, a disjoint set of client files that call every function of the
//! block, and commits that touch exactly that block (plus optional noise).

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    ChangeHistory, CommitId, CommitRecord, FactsDb, FilePath, FunctionId, FunctionRef,
    Recommendation,
};

/// Parameters of a planted fixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedSpec {
    pub n_responsibilities: usize,
    pub funcs_per_responsibility: usize,
    pub clients_per_responsibility: usize,
    pub commits_per_responsibility: usize,
    /// Probability, per planted call edge and per planted commit touch, of
    /// adding one uniformly random cross-responsibility extra.
    pub noise_rate: f64,
    pub seed: u64,
}

impl PlantedSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_responsibilities < 1
            || self.funcs_per_responsibility < 1
            || self.clients_per_responsibility < 1
            || self.commits_per_responsibility < 1
        {
            return Err(Error::Argument("all planted counts must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(Error::Argument("noise_rate must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// A generated fixture with its ground truth.
#[derive(Debug, Clone)]
pub struct PlantedData {
    pub facts: FactsDb,
    pub history: ChangeHistory,
    pub target_file: FilePath,
    /// Target functions per responsibility.
    pub split_truth: Vec<BTreeSet<FunctionId>>,
    /// (target functions, client functions) per responsibility.
    pub redraw_truth: Vec<(BTreeSet<FunctionId>, BTreeSet<FunctionId>)>,
}

pub fn generate_planted(spec: &PlantedSpec) -> Result<PlantedData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let target_file = FilePath::new("target.src");

    let target_fun = |r: usize, i: usize| FunctionId::new(format!("target.src#r{r}_f{i}"));
    let client_file = |r: usize, j: usize| FilePath::new(format!("client_r{r}_{j}.src"));
    let client_fun =
        |r: usize, j: usize| FunctionId::new(format!("client_r{r}_{j}.src#caller"));

    let mut functions = Vec::new();
    let mut calls = Vec::new();
    let mut split_truth = Vec::new();
    let mut redraw_truth = Vec::new();

    for r in 0..spec.n_responsibilities {
        let mut block = BTreeSet::new();
        for i in 0..spec.funcs_per_responsibility {
            let id = target_fun(r, i);
            functions.push(FunctionRef {
                id: id.clone(),
                file: target_file.clone(),
                qualified_name: format!("r{r}_f{i}"),
                span: None,
            });
            block.insert(id);
        }
        let mut clients = BTreeSet::new();
        for j in 0..spec.clients_per_responsibility {
            let id = client_fun(r, j);
            functions.push(FunctionRef {
                id: id.clone(),
                file: client_file(r, j),
                qualified_name: "caller".into(),
                span: None,
            });
            clients.insert(id);
        }
        split_truth.push(block.clone());
        redraw_truth.push((block, clients));
    }

    // Call edges: every client calls every function of its responsibility.
    for r in 0..spec.n_responsibilities {
        for j in 0..spec.clients_per_responsibility {
            for i in 0..spec.funcs_per_responsibility {
                calls.push((client_fun(r, j), target_fun(r, i)));
                if spec.n_responsibilities > 1 && rng.gen_bool(spec.noise_rate) {
                    let (nr, ni) = random_other_function(&mut rng, spec, r);
                    calls.push((client_fun(r, j), target_fun(nr, ni)));
                }
            }
        }
    }
    calls.sort();
    calls.dedup();
    let facts = FactsDb::new(functions, calls)?;

    // Commits: each touches one responsibility's target and client functions.
    let mut commits = Vec::new();
    for r in 0..spec.n_responsibilities {
        for m in 0..spec.commits_per_responsibility {
            let mut touched_functions: BTreeSet<FunctionId> = BTreeSet::new();
            let mut touched_files: BTreeSet<FilePath> = BTreeSet::new();
            touched_files.insert(target_file.clone());
            for i in 0..spec.funcs_per_responsibility {
                touched_functions.insert(target_fun(r, i));
            }
            for j in 0..spec.clients_per_responsibility {
                touched_functions.insert(client_fun(r, j));
                touched_files.insert(client_file(r, j));
            }
            if spec.n_responsibilities > 1 {
                let planted = touched_functions.len();
                for _ in 0..planted {
                    if rng.gen_bool(spec.noise_rate) {
                        let or = random_other_responsibility(&mut rng, spec, r);
                        if rng.gen_bool(0.5) {
                            let i = rng.gen_range(0..spec.funcs_per_responsibility);
                            touched_functions.insert(target_fun(or, i));
                        } else {
                            let j = rng.gen_range(0..spec.clients_per_responsibility);
                            touched_functions.insert(client_fun(or, j));
                            touched_files.insert(client_file(or, j));
                        }
                    }
                }
            }
            commits.push(CommitRecord {
                id: CommitId::new(format!("c{r:02}_{m:03}")),
                timestamp: 1_000_000 + (r * spec.commits_per_responsibility + m) as i64 * 3600,
                touched_functions,
                touched_files,
            });
        }
    }
    let history = ChangeHistory::new(commits)?;

    Ok(PlantedData {
        facts,
        history,
        target_file,
        split_truth,
        redraw_truth,
    })
}

fn random_other_responsibility(rng: &mut ChaCha8Rng, spec: &PlantedSpec, r: usize) -> usize {
    let pick = rng.gen_range(0..spec.n_responsibilities - 1);
    if pick >= r {
        pick + 1
    } else {
        pick
    }
}

fn random_other_function(
    rng: &mut ChaCha8Rng,
    spec: &PlantedSpec,
    r: usize,
) -> (usize, usize) {
    let or = random_other_responsibility(rng, spec, r);
    (or, rng.gen_range(0..spec.funcs_per_responsibility))
}

/// Adjusted Rand index of two partitions over the same label universe, via
/// the pair-counting contingency formula. 1.0 for identical partitions
/// (including the degenerate single-cluster case), 0.0 expected for chance.
pub fn adjusted_rand_index(
    a: &BTreeMap<FunctionId, usize>,
    b: &BTreeMap<FunctionId, usize>,
) -> Result<f64> {
    if a.len() != b.len() || !a.keys().eq(b.keys()) {
        return Err(Error::Argument("partitions cover different labels".into()));
    }
    let n = a.len();
    if n == 0 {
        return Err(Error::Argument("empty partitions".into()));
    }
    let mut contingency: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut row_sums: BTreeMap<usize, usize> = BTreeMap::new();
    let mut col_sums: BTreeMap<usize, usize> = BTreeMap::new();
    for (label, &ca) in a {
        let cb = b[label];
        *contingency.entry((ca, cb)).or_default() += 1;
        *row_sums.entry(ca).or_default() += 1;
        *col_sums.entry(cb).or_default() += 1;
    }
    let choose2 = |x: usize| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_nij: f64 = contingency.values().map(|&v| choose2(v)).sum();
    let sum_ai: f64 = row_sums.values().map(|&v| choose2(v)).sum();
    let sum_bj: f64 = col_sums.values().map(|&v| choose2(v)).sum();
    let total = choose2(n);
    let expected = sum_ai * sum_bj / total;
    let max_index = (sum_ai + sum_bj) / 2.0;
    if (max_index - expected).abs() < 1e-15 {
        // Both partitions degenerate the same way.
        return Ok(1.0);
    }
    Ok((sum_nij - expected) / (max_index - expected))
}

/// How well a ranked recommendation list recovers planted groups.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub best_match_ari: f64,
    /// Per planted group: does its exact member set appear among the
    /// recommendations?
    pub exact_recovery: Vec<bool>,
}

/// Scores recommendations against planted ground-truth groups. The label
/// universe is the union of the truth groups; the top `truth.len()`
/// recommendations are read as a partition (first assignment wins, uncovered
/// labels become singletons).
pub fn recovery_report(
    recommendations: &[Recommendation],
    truth: &[BTreeSet<FunctionId>],
) -> Result<RecoveryReport> {
    let universe: BTreeSet<FunctionId> = truth.iter().flatten().cloned().collect();
    let mut truth_assignment: BTreeMap<FunctionId, usize> = BTreeMap::new();
    for (g, group) in truth.iter().enumerate() {
        for id in group {
            truth_assignment.insert(id.clone(), g);
        }
    }

    let rec_sets: Vec<BTreeSet<FunctionId>> = recommendations
        .iter()
        .map(|r| {
            r.target_members
                .union(&r.client_members)
                .cloned()
                .collect()
        })
        .collect();
    let exact_recovery: Vec<bool> = truth
        .iter()
        .map(|group| rec_sets.contains(group))
        .collect();

    if recommendations.is_empty() {
        return Ok(RecoveryReport {
            best_match_ari: 0.0,
            exact_recovery,
        });
    }

    let mut rec_assignment: BTreeMap<FunctionId, usize> = BTreeMap::new();
    let mut next_cluster = 0;
    for set in rec_sets.iter().take(truth.len()) {
        for id in set {
            if universe.contains(id) {
                rec_assignment.entry(id.clone()).or_insert(next_cluster);
            }
        }
        next_cluster += 1;
    }
    for id in &universe {
        if !rec_assignment.contains_key(id) {
            rec_assignment.insert(id.clone(), next_cluster);
            next_cluster += 1;
        }
    }
    let ari = adjusted_rand_index(&truth_assignment, &rec_assignment)?;
    Ok(RecoveryReport {
        best_match_ari: ari,
        exact_recovery,
    })
}
