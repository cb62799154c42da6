//! Randomized invariant checks over the data model, the similarity
//! construction, and log attribution.

use std::collections::BTreeSet;

use proptest::prelude::*;

use decomp::ingest::{
    self, attribute_hunks_to_functions, ChangeDocument, DiffHunk, FactsCall,
    FactsDocument, FactsFunction, FunctionSpan, SpanTable,
};
use decomp::model::{
    AnalysisConfig, ChangeHistory, CommitId, CommitRecord, DependencyMode, FactsDb, FilePath,
    FunctionId,
};
use decomp::similarity::{dependent_set, jaccard, split_similarity};
use decomp::spectral::ncut_partition;

fn small_set() -> impl Strategy<Value = BTreeSet<u8>> {
    proptest::collection::btree_set(0u8..30, 0..12)
}

proptest! {
    #[test]
    fn jaccard_is_symmetric_and_bounded(a in small_set(), b in small_set()) {
        let ab = jaccard(&a, &b);
        prop_assert_eq!(ab, jaccard(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
        if !a.is_empty() {
            prop_assert_eq!(jaccard(&a, &a), 1.0);
        }
        if a.is_disjoint(&b) {
            prop_assert_eq!(ab, 0.0);
        }
    }
}

fn commit_records() -> impl Strategy<Value = Vec<CommitRecord>> {
    proptest::collection::vec((0u32..1000, -100i64..100), 1..8).prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(i, (_, ts))| CommitRecord {
                id: CommitId::new(format!("c{i:03}")),
                timestamp: ts,
                touched_functions: BTreeSet::new(),
                touched_files: BTreeSet::new(),
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn change_history_order_is_permutation_invariant(
        records in commit_records(),
        shuffle_seed in 0usize..100,
    ) {
        let reference = ChangeHistory::new(records.clone()).unwrap();
        let mut permuted = records;
        // A deterministic pseudo-shuffle is enough to exercise reordering.
        let pivot = shuffle_seed % permuted.len().max(1);
        permuted.rotate_left(pivot);
        permuted.reverse();
        let reshuffled = ChangeHistory::new(permuted).unwrap();
        prop_assert_eq!(reference.commits(), reshuffled.commits());
    }
}

/// A random but always-valid facts layout: one target file with `n_targets`
/// functions, client files with one caller each, plus intra-target calls.
#[derive(Debug, Clone)]
struct Layout {
    n_targets: usize,
    client_calls: Vec<Vec<bool>>,
    intra_calls: Vec<(usize, usize)>,
}

fn layout() -> impl Strategy<Value = Layout> {
    (2usize..5).prop_flat_map(|n_targets| {
        (
            Just(n_targets),
            proptest::collection::vec(
                proptest::collection::vec(any::<bool>(), n_targets),
                0..6,
            ),
            proptest::collection::vec((0..n_targets, 0..n_targets), 0..6),
        )
            .prop_map(|(n_targets, client_calls, raw_intra)| Layout {
                n_targets,
                client_calls,
                intra_calls: raw_intra
                    .into_iter()
                    .filter(|(a, b)| a != b)
                    .collect(),
            })
    })
}

fn build_facts(layout: &Layout) -> FactsDb {
    let mut functions = Vec::new();
    let mut calls = Vec::new();
    for i in 0..layout.n_targets {
        functions.push(FactsFunction {
            id: format!("t.src#f{i}"),
            file: "t.src".into(),
            name: format!("f{i}"),
            start_line: None,
            end_line: None,
        });
    }
    for (c, targets) in layout.client_calls.iter().enumerate() {
        functions.push(FactsFunction {
            id: format!("client_{c}.src#main"),
            file: format!("client_{c}.src"),
            name: "main".into(),
            start_line: None,
            end_line: None,
        });
        for (i, &used) in targets.iter().enumerate() {
            if used {
                calls.push(FactsCall {
                    caller: format!("client_{c}.src#main"),
                    callee: format!("t.src#f{i}"),
                });
            }
        }
    }
    for &(a, b) in &layout.intra_calls {
        calls.push(FactsCall {
            caller: format!("t.src#f{a}"),
            callee: format!("t.src#f{b}"),
        });
    }
    calls.sort_by(|a, b| (&a.caller, &a.callee).cmp(&(&b.caller, &b.callee)));
    calls.dedup_by(|a, b| a.caller == b.caller && a.callee == b.callee);
    ingest::facts_from_document(FactsDocument { functions, calls }).unwrap()
}

proptest! {
    #[test]
    fn split_similarity_is_a_valid_affinity(layout in layout()) {
        let db = build_facts(&layout);
        let target = FilePath::new("t.src");
        let config = AnalysisConfig::default();
        let s = split_similarity(&db, None, &target, &config).unwrap();
        let e = s.entries();
        for i in 0..s.dim() {
            prop_assert_eq!(e[(i, i)], 0.0);
            for j in 0..s.dim() {
                prop_assert_eq!(e[(i, j)], e[(j, i)]);
                prop_assert!((0.0..=1.0).contains(&e[(i, j)]));
            }
        }
    }

    #[test]
    fn union_mode_contains_the_other_modes(layout in layout()) {
        let db = build_facts(&layout);
        let target = FilePath::new("t.src");
        let history = ChangeHistory::new(vec![CommitRecord {
            id: CommitId::new("c0"),
            timestamp: 0,
            touched_functions: [FunctionId::new("t.src#f0")].into_iter().collect(),
            touched_files: BTreeSet::new(),
        }])
        .unwrap();
        for i in 0..layout.n_targets {
            let t = FunctionId::new(format!("t.src#f{i}"));
            let get = |mode| {
                dependent_set(&db, Some(&history), &target, &t, mode)
                    .unwrap()
                    .members
            };
            let union = get(DependencyMode::Union);
            prop_assert!(get(DependencyMode::Direct).is_subset(&union));
            prop_assert!(get(DependencyMode::TransitiveWithinTarget).is_subset(&union));
            prop_assert!(get(DependencyMode::CoChange).is_subset(&union));
        }
    }

    #[test]
    fn ncut_partition_is_deterministic(layout in layout()) {
        let db = build_facts(&layout);
        let target = FilePath::new("t.src");
        let config = AnalysisConfig::default();
        let Ok(s) = split_similarity(&db, None, &target, &config) else {
            return Ok(());
        };
        if s.dim() < 3 {
            return Ok(());
        }
        let first = ncut_partition(&s, 2, &config);
        let second = ncut_partition(&s, 2, &config);
        match (first, second) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "determinism across error paths"),
        }
    }
}

fn facts_json(db: &FactsDb) -> String {
    serde_json::to_string(&ingest::facts_to_document(db)).unwrap()
}

proptest! {
    #[test]
    fn facts_round_trip(layout in layout()) {
        let db = build_facts(&layout);
        let doc = ingest::facts_to_document(&db);
        let back = ingest::facts_from_document(doc).unwrap();
        prop_assert_eq!(facts_json(&db), facts_json(&back));
    }

    #[test]
    fn changes_round_trip(records in commit_records()) {
        let history = ChangeHistory::new(records).unwrap();
        let doc = ingest::changes_to_document(&history);
        let json = serde_json::to_string(&doc).unwrap();
        let back = ingest::load_changes(json.as_bytes()).unwrap();
        prop_assert_eq!(history.commits(), back.commits());
        let again: ChangeDocument = ingest::changes_to_document(&back);
        prop_assert_eq!(json, serde_json::to_string(&again).unwrap());
    }
}

fn hunks() -> impl Strategy<Value = Vec<DiffHunk>> {
    proptest::collection::vec((1u32..60, 0u32..8), 1..10).prop_map(|raw| {
        raw.into_iter()
            .map(|(start, count)| DiffHunk {
                file: FilePath::new("a.x"),
                new_start: start,
                new_count: count,
            })
            .collect()
    })
}

fn span_fixture() -> (SpanTable, CommitId) {
    let commit = CommitId::new("c0");
    let mut table = SpanTable::default();
    table
        .insert(
            commit.clone(),
            FilePath::new("a.x"),
            vec![
                FunctionSpan {
                    id: FunctionId::new("a.x#f1"),
                    start: 5,
                    end: 20,
                },
                FunctionSpan {
                    id: FunctionId::new("a.x#f2"),
                    start: 25,
                    end: 40,
                },
            ],
        )
        .unwrap();
    (table, commit)
}

proptest! {
    #[test]
    fn attribution_is_order_independent_and_monotone(hunks in hunks()) {
        let (table, commit) = span_fixture();
        let (forward, _) = attribute_hunks_to_functions(&hunks, &table, &commit);
        let mut reversed = hunks.clone();
        reversed.reverse();
        let (backward, _) = attribute_hunks_to_functions(&reversed, &table, &commit);
        prop_assert_eq!(&forward, &backward);

        // Each prefix touches a subset of what the full list touches.
        for cut in 0..hunks.len() {
            let (prefix, _) = attribute_hunks_to_functions(&hunks[..cut], &table, &commit);
            prop_assert!(prefix.is_subset(&forward));
        }
    }

    #[test]
    fn mined_commits_survive_render_and_reparse(
        hunks in hunks(),
        timestamp in 0i64..2_000_000_000,
    ) {
        let commit = ingest::ParsedCommit {
            id: CommitId::new("feedbeef"),
            timestamp,
            hunks,
        };
        let rendered = ingest::render_log(std::slice::from_ref(&commit));
        let parsed = ingest::parse_git_log_stream(rendered.as_bytes()).unwrap();
        prop_assert_eq!(parsed, vec![commit]);
    }
}
