//! Loading dependency facts and change history from documents and raw
//! version-control streams, including attribution of diff hunks to
//! functions.
//!
//! The engine never shells out to a version-control executable; it consumes
//! streams and documents so every test stays hermetic.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ChangeHistory, CommitId, CommitRecord, FactsDb, FilePath, FunctionId, FunctionRef,
};

// ---------------------------------------------------------------------------
// Facts document

#[derive(Debug, Serialize, Deserialize)]
pub struct FactsDocument {
    pub functions: Vec<FactsFunction>,
    #[serde(default)]
    pub calls: Vec<FactsCall>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FactsFunction {
    pub id: String,
    pub file: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_line: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_line: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FactsCall {
    pub caller: String,
    pub callee: String,
}

/// Parses a facts document and returns a fully validated database.
pub fn load_facts<R: Read>(reader: R) -> Result<FactsDb> {
    let doc: FactsDocument = serde_json::from_reader(reader)
        .map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
    facts_from_document(doc)
}

pub fn facts_from_document(doc: FactsDocument) -> Result<FactsDb> {
    let mut functions = Vec::with_capacity(doc.functions.len());
    for f in doc.functions {
        let span = match (f.start_line, f.end_line) {
            (Some(s), Some(e)) => Some((s, e)),
            (None, None) => None,
            _ => {
                return Err(Error::Validation(format!(
                    "function {} has a partial span",
                    f.id
                )))
            }
        };
        functions.push(FunctionRef {
            id: FunctionId::new(f.id),
            file: FilePath::new(f.file),
            qualified_name: f.name,
            span,
        });
    }
    let calls = doc
        .calls
        .into_iter()
        .map(|c| (FunctionId::new(c.caller), FunctionId::new(c.callee)))
        .collect();
    FactsDb::new(functions, calls)
}

pub fn facts_to_document(db: &FactsDb) -> FactsDocument {
    FactsDocument {
        functions: db
            .functions()
            .map(|f| FactsFunction {
                id: f.id.0.clone(),
                file: f.file.0.clone(),
                name: f.qualified_name.clone(),
                start_line: f.span.map(|(s, _)| s),
                end_line: f.span.map(|(_, e)| e),
            })
            .collect(),
        calls: db
            .calls()
            .map(|(a, b)| FactsCall {
                caller: a.0.clone(),
                callee: b.0.clone(),
            })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Change document

#[derive(Debug, Serialize, Deserialize)]
pub struct ChangeDocument {
    pub commits: Vec<ChangeCommit>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChangeCommit {
    pub id: String,
    pub timestamp: i64,
    #[serde(default)]
    pub touched_functions: Vec<String>,
    #[serde(default)]
    pub touched_files: Vec<String>,
}

pub fn load_changes<R: Read>(reader: R) -> Result<ChangeHistory> {
    let doc: ChangeDocument = serde_json::from_reader(reader)
        .map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
    let commits = doc
        .commits
        .into_iter()
        .map(|c| CommitRecord {
            id: CommitId::new(c.id),
            timestamp: c.timestamp,
            touched_functions: c.touched_functions.into_iter().map(FunctionId::new).collect(),
            touched_files: c.touched_files.into_iter().map(FilePath::new).collect(),
        })
        .collect();
    ChangeHistory::new(commits)
}

pub fn changes_to_document(history: &ChangeHistory) -> ChangeDocument {
    ChangeDocument {
        commits: history
            .commits()
            .iter()
            .map(|c| ChangeCommit {
                id: c.id.0.clone(),
                timestamp: c.timestamp,
                touched_functions: c.touched_functions.iter().map(|f| f.0.clone()).collect(),
                touched_files: c.touched_files.iter().map(|f| f.0.clone()).collect(),
            })
            .collect(),
    }
}

/// Function ids mentioned by a history but unknown to a facts database.
pub fn reconcile(history: &ChangeHistory, db: &FactsDb) -> BTreeSet<FunctionId> {
    history
        .commits()
        .iter()
        .flat_map(|c| c.touched_functions.iter())
        .filter(|f| !db.contains_function(f))
        .cloned()
        .collect()
}

// ---------------------------------------------------------------------------
// Span document

/// Per (commit, file): the function spans covering the file's post-image at
/// that commit. Spans are kept non-overlapping and sorted by start line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpanTable {
    entries: BTreeMap<(CommitId, FilePath), Vec<FunctionSpan>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSpan {
    pub id: FunctionId,
    pub start: u32,
    pub end: u32,
}

impl SpanTable {
    pub fn insert(
        &mut self,
        commit: CommitId,
        file: FilePath,
        mut spans: Vec<FunctionSpan>,
    ) -> Result<()> {
        spans.sort_by_key(|s| s.start);
        for pair in spans.windows(2) {
            if pair[1].start <= pair[0].end {
                return Err(Error::Validation(format!(
                    "overlapping spans {} and {} in {file}",
                    pair[0].id, pair[1].id
                )));
            }
        }
        for s in &spans {
            if s.start > s.end {
                return Err(Error::Validation(format!("span of {} is inverted", s.id)));
            }
        }
        self.entries.insert((commit, file), spans);
        Ok(())
    }

    pub fn get(&self, commit: &CommitId, file: &FilePath) -> Option<&[FunctionSpan]> {
        self.entries
            .get(&(commit.clone(), file.clone()))
            .map(|v| v.as_slice())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SpanDocument {
    pub spans: Vec<SpanEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SpanEntry {
    pub commit: String,
    pub file: String,
    pub functions: Vec<SpanFunction>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SpanFunction {
    pub id: String,
    pub start: u32,
    pub end: u32,
}

pub fn load_spans<R: Read>(reader: R) -> Result<SpanTable> {
    let doc: SpanDocument = serde_json::from_reader(reader)
        .map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
    let mut table = SpanTable::default();
    for entry in doc.spans {
        let spans = entry
            .functions
            .into_iter()
            .map(|f| FunctionSpan {
                id: FunctionId::new(f.id),
                start: f.start,
                end: f.end,
            })
            .collect();
        table.insert(CommitId::new(entry.commit), FilePath::new(entry.file), spans)?;
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Raw log parsing

/// One hunk of a unified diff, new-file side only. `new_count` 0 marks a pure
/// deletion at position `new_start`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffHunk {
    pub file: FilePath,
    pub new_start: u32,
    pub new_count: u32,
}

/// One commit parsed from a raw log stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedCommit {
    pub id: CommitId,
    pub timestamp: i64,
    pub hunks: Vec<DiffHunk>,
}

/// Parses the raw log format: per commit a header line
/// `commit <id> <unix-timestamp>` followed by unified-diff output with zero
/// context lines. Binary files are skipped.
pub fn parse_git_log_stream<R: Read>(reader: R) -> Result<Vec<ParsedCommit>> {
    let reader = BufReader::new(reader);
    let mut commits: Vec<ParsedCommit> = Vec::new();
    let mut current: Option<ParsedCommit> = None;
    let mut current_file: Option<FilePath> = None;
    let mut old_path: Option<FilePath> = None;
    let mut binary = false;
    let mut pending_content: u32 = 0;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;

        if pending_content > 0 {
            if line.starts_with('\\') {
                continue; // "\ No newline at end of file"
            }
            pending_content -= 1;
            continue;
        }

        if let Some(rest) = line.strip_prefix("commit ") {
            let mut parts = rest.split_whitespace();
            let id = parts.next().ok_or_else(|| Error::Parse {
                line: line_no,
                message: "commit header missing id".into(),
            })?;
            let ts: i64 = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: "commit header missing unix timestamp".into(),
                })?;
            if let Some(done) = current.take() {
                commits.push(done);
            }
            current = Some(ParsedCommit {
                id: CommitId::new(id),
                timestamp: ts,
                hunks: Vec::new(),
            });
            current_file = None;
            old_path = None;
            binary = false;
            continue;
        }

        if current.is_none() {
            if line.trim().is_empty() {
                continue;
            }
            return Err(Error::Parse {
                line: line_no,
                message: "expected 'commit <id> <unix-timestamp>' header".into(),
            });
        }

        if let Some(rest) = line.strip_prefix("--- ") {
            old_path = strip_diff_path(rest, "a/");
            continue;
        }
        if let Some(rest) = line.strip_prefix("+++ ") {
            current_file = strip_diff_path(rest, "b/").or_else(|| old_path.clone());
            binary = false;
            continue;
        }
        if line.starts_with("@@") {
            if binary {
                continue;
            }
            let file = current_file.clone().ok_or_else(|| Error::Parse {
                line: line_no,
                message: "hunk header before any file header".into(),
            })?;
            let (old_count, new_start, new_count) =
                parse_hunk_header(&line).ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!("malformed hunk header: {line}"),
                })?;
            // new_start 0 only appears for a fully emptied file; clamp so
            // the deletion still attributes to the surrounding function.
            let hunk = DiffHunk {
                file,
                new_start: new_start.max(1),
                new_count,
            };
            current
                .as_mut()
                .expect("checked above")
                .hunks
                .push(hunk);
            pending_content = old_count + new_count;
            continue;
        }
        if line.starts_with("Binary files") {
            binary = true;
            continue;
        }
        if line.trim().is_empty()
            || line.starts_with("diff ")
            || line.starts_with("index ")
            || line.starts_with("old mode")
            || line.starts_with("new mode")
            || line.starts_with("new file mode")
            || line.starts_with("deleted file mode")
            || line.starts_with("similarity index")
            || line.starts_with("dissimilarity index")
            || line.starts_with("rename ")
            || line.starts_with("copy ")
        {
            continue;
        }
        return Err(Error::Parse {
            line: line_no,
            message: format!("unrecognized line: {line}"),
        });
    }
    if let Some(done) = current.take() {
        commits.push(done);
    }
    Ok(commits)
}

fn strip_diff_path(raw: &str, prefix: &str) -> Option<FilePath> {
    let raw = raw.trim_end();
    if raw == "/dev/null" {
        return None;
    }
    let path = raw.strip_prefix(prefix).unwrap_or(raw);
    Some(FilePath::new(path))
}

/// Parses `@@ -<s>[,<c>] +<s>[,<c>] @@ ...`; counts default to 1.
fn parse_hunk_header(line: &str) -> Option<(u32, u32, u32)> {
    let rest = line.strip_prefix("@@ -")?;
    let (old_part, rest) = rest.split_once(" +")?;
    let (new_part, _) = rest.split_once(" @@")?;
    let (_, old_count) = parse_range(old_part)?;
    let (new_start, new_count) = parse_range(new_part)?;
    Some((old_count, new_start, new_count))
}

fn parse_range(s: &str) -> Option<(u32, u32)> {
    match s.split_once(',') {
        Some((start, count)) => Some((start.parse().ok()?, count.parse().ok()?)),
        None => Some((s.parse().ok()?, 1)),
    }
}

/// Renders parsed commits back into the raw log format. Used by fixture
/// generation; `parse_git_log_stream` of the output reproduces the input
/// structure.
pub fn render_log(commits: &[ParsedCommit]) -> String {
    let mut out = String::new();
    for commit in commits {
        out.push_str(&format!("commit {} {}\n", commit.id, commit.timestamp));
        for hunk in &commit.hunks {
            out.push_str(&format!("--- a/{}\n", hunk.file));
            out.push_str(&format!("+++ b/{}\n", hunk.file));
            out.push_str(&format!("@@ -1,0 +{},{} @@\n", hunk.new_start, hunk.new_count));
            for _ in 0..hunk.new_count {
                out.push_str("+x\n");
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Attribution

/// Attributes hunks to functions through the span table.
///
/// A function is touched when its span intersects the hunk's new range
/// `[new_start, new_start + max(new_count, 1) - 1]`; a pure deletion thus
/// counts as touching the function surrounding the deletion point. Files with
/// no span entry for the commit fall back to file-level attribution and are
/// returned as flagged.
pub fn attribute_hunks_to_functions(
    hunks: &[DiffHunk],
    spans: &SpanTable,
    commit: &CommitId,
) -> (BTreeSet<FunctionId>, BTreeSet<FilePath>) {
    let mut touched = BTreeSet::new();
    let mut fallback_files = BTreeSet::new();
    for hunk in hunks {
        let Some(file_spans) = spans.get(commit, &hunk.file) else {
            fallback_files.insert(hunk.file.clone());
            continue;
        };
        let lo = hunk.new_start;
        let hi = hunk.new_start + hunk.new_count.max(1) - 1;
        for span in file_spans {
            if span.start <= hi && lo <= span.end {
                touched.insert(span.id.clone());
            }
        }
    }
    (touched, fallback_files)
}

/// A change history assembled from raw commits, plus the files that fell back
/// to file-level attribution per commit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeBuild {
    pub history: ChangeHistory,
    pub fallbacks: Vec<(CommitId, FilePath)>,
}

pub fn build_change_history(commits: &[ParsedCommit], spans: &SpanTable) -> Result<ChangeBuild> {
    let mut records = Vec::with_capacity(commits.len());
    let mut fallbacks = Vec::new();
    for commit in commits {
        let (touched_functions, fallback_files) =
            attribute_hunks_to_functions(&commit.hunks, spans, &commit.id);
        for f in &fallback_files {
            fallbacks.push((commit.id.clone(), f.clone()));
        }
        let touched_files = commit.hunks.iter().map(|h| h.file.clone()).collect();
        records.push(CommitRecord {
            id: commit.id.clone(),
            timestamp: commit.timestamp,
            touched_functions,
            touched_files,
        });
    }
    Ok(ChangeBuild {
        history: ChangeHistory::new(records)?,
        fallbacks,
    })
}
