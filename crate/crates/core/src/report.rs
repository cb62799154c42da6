//! Report documents: stable, byte-reproducible JSON and plain-text tables.
//!
//! Field order is fixed by struct order, member lists are sorted, and every
//! real number is formatted with exactly six fractional digits, so emitting
//! the same analysis twice yields byte-identical documents.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{AnalysisConfig, FactsDb, RecommendationKind};
use crate::recommend::{FileActivityStats, RankedReport};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        ToolInfo {
            name: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub dependency_mode: String,
    pub q_max: usize,
    pub min_cluster_size: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub since: Option<i64>,
}

impl From<&AnalysisConfig> for ConfigEcho {
    fn from(c: &AnalysisConfig) -> Self {
        ConfigEcho {
            dependency_mode: c.dependency_mode.to_string(),
            q_max: c.q_max,
            min_cluster_size: c.min_cluster_size,
            seed: c.seed,
            since: c.since,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MemberGroup {
    pub file: String,
    pub functions: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RecommendationEntry {
    pub rank: usize,
    pub kind: String,
    pub multiplicity: usize,
    /// Fixed six-decimal rendering keeps documents byte-stable.
    pub avg_change_freq: String,
    pub source_params: Vec<usize>,
    pub members: Vec<MemberGroup>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool: ToolInfo,
    pub config: ConfigEcho,
    pub target: String,
    pub kind: String,
    pub recommendations: Vec<RecommendationEntry>,
    pub diagnostics: Vec<String>,
}

fn kind_str(kind: RecommendationKind) -> &'static str {
    match kind {
        RecommendationKind::Split => "split",
        RecommendationKind::Redraw => "redraw",
    }
}

/// Groups a recommendation's members by file, files and functions sorted
/// lexicographically. Members whose file is unknown to the facts database
/// fall into an empty-path group; that never happens for engine output.
fn member_groups(
    db: &FactsDb,
    members: impl Iterator<Item = crate::model::FunctionId>,
) -> Vec<MemberGroup> {
    let mut by_file: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for id in members {
        let file = db
            .file_of(&id)
            .map(|f| f.as_str().to_string())
            .unwrap_or_default();
        by_file.entry(file).or_default().push(id.0);
    }
    by_file
        .into_iter()
        .map(|(file, mut functions)| {
            functions.sort();
            MemberGroup { file, functions }
        })
        .collect()
}

pub fn build_report(db: &FactsDb, report: &RankedReport, top: Option<usize>) -> ReportDocument {
    let limit = top.unwrap_or(usize::MAX);
    let recommendations = report
        .recommendations
        .iter()
        .take(limit)
        .enumerate()
        .map(|(i, rec)| RecommendationEntry {
            rank: i + 1,
            kind: kind_str(rec.kind).to_string(),
            multiplicity: rec.multiplicity,
            avg_change_freq: format!("{:.6}", rec.avg_change_freq),
            source_params: rec.source_params.clone(),
            members: member_groups(
                db,
                rec.target_members
                    .iter()
                    .chain(rec.client_members.iter())
                    .cloned(),
            ),
        })
        .collect();
    ReportDocument {
        tool: ToolInfo::default(),
        config: ConfigEcho::from(&report.config),
        target: report.target_file.as_str().to_string(),
        kind: kind_str(report.kind).to_string(),
        recommendations,
        diagnostics: report.diagnostics.clone(),
    }
}

pub fn render_json(doc: &impl Serialize) -> String {
    let mut out = serde_json::to_string_pretty(doc).expect("report serialization is infallible");
    out.push('\n');
    out
}

pub fn render_table(doc: &ReportDocument) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{} analysis of {} ({} recommendation(s))\n",
        doc.kind,
        doc.target,
        doc.recommendations.len()
    ));
    for rec in &doc.recommendations {
        out.push_str(&format!(
            "#{:<3} multiplicity={} avg_change_freq={} params={:?}\n",
            rec.rank, rec.multiplicity, rec.avg_change_freq, rec.source_params
        ));
        for group in &rec.members {
            for function in &group.functions {
                out.push_str(&format!("      {}  >  {}\n", group.file, function));
            }
        }
    }
    if !doc.diagnostics.is_empty() {
        out.push_str("diagnostics:\n");
        for d in &doc.diagnostics {
            out.push_str(&format!("  - {d}\n"));
        }
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub rank: usize,
    pub file: String,
    pub fanin_files: usize,
    pub commit_count: usize,
    pub fanin_rank: usize,
    pub change_rank: usize,
    pub score: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DetectDocument {
    pub tool: ToolInfo,
    pub candidates: Vec<CandidateEntry>,
}

pub fn build_detect_report(candidates: &[FileActivityStats]) -> DetectDocument {
    DetectDocument {
        tool: ToolInfo::default(),
        candidates: candidates
            .iter()
            .enumerate()
            .map(|(i, s)| CandidateEntry {
                rank: i + 1,
                file: s.file.as_str().to_string(),
                fanin_files: s.fanin_files,
                commit_count: s.commit_count,
                fanin_rank: s.fanin_rank,
                change_rank: s.change_rank,
                score: s.fanin_rank.max(s.change_rank),
            })
            .collect(),
    }
}

pub fn render_detect_table(doc: &DetectDocument) -> String {
    let mut out = String::new();
    out.push_str("rank  score  fanin(rank)  commits(rank)  file\n");
    for c in &doc.candidates {
        out.push_str(&format!(
            "{:<5} {:<6} {:<12} {:<14} {}\n",
            c.rank,
            c.score,
            format!("{}({})", c.fanin_files, c.fanin_rank),
            format!("{}({})", c.commit_count, c.change_rank),
            c.file
        ));
    }
    out
}

/// Row of an evaluation sweep.
#[derive(Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub noise: String,
    pub seed: u64,
    pub split_ari: String,
    pub redraw_ari: String,
}

pub fn render_sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str("noise     seed    split_ari  redraw_ari\n");
    for r in rows {
        out.push_str(&format!(
            "{:<9} {:<7} {:<10} {}\n",
            r.noise, r.seed, r.split_ari, r.redraw_ari
        ));
    }
    out
}
