//! Refactoring recommendations for large, frequently changing source files.
//!
//! The engine mines function-level dependencies and version history, groups
//! the functions of a target file by shared dependents and shared commits,
//! and emits ranked recommendations: which functions to extract into a new
//! file (splitting), and which cross-boundary groups of target and client
//! functions to relocate onto one side of the interface (redrawing).

pub mod cocluster;
pub mod error;
pub mod ingest;
pub mod model;
pub mod planted;
pub mod recommend;
pub mod report;
pub mod similarity;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{
    AnalysisConfig, ChangeHistory, CommitId, CommitRecord, DependencyMode, FactsDb, FilePath,
    FunctionId, FunctionRef, Recommendation, RecommendationKind, RectSimilarityMatrix,
    SimilarityMatrix,
};
