//! Data model and pure pipeline stages for knowledge-ablation experiments on
//! constrained commonsense generation.

pub mod ablation;
pub mod commongen;
pub mod coverage;
pub mod dataset;
pub mod error;
pub mod evalstats;
pub mod fixtures;
pub mod model;
pub mod percent;
pub mod prompting;
pub mod validate;

pub use ablation::{
    apply_decisions, apply_filter, relation_counts, relation_distribution, suggest_removals,
    BundleKind, FilterPlan, RelationDistribution, RemovalReason, RemovalSuggestion,
};
pub use commongen::{import_commongen, parse_commongen, ImportOutcome, SkipReason, Skipped};
pub use coverage::{check_coverage, stem, tokenize, CoverageResult, StemRule, STEM_RULES};
pub use dataset::{decode_record, encode_record, load_dataset, save_dataset};
pub use error::{AblationError, DatasetError, ModelError, PromptError, StatsError};
pub use evalstats::{
    build_matrix, emit_report, select_improved, summarize, CorpusReport, EvalMatrix,
    RelationAccounting, SummaryRates, REPORT_FILES,
};
pub use model::*;
pub use percent::{largest_remainder, Percent};
pub use prompting::{
    build_prompt, parse_relations, parse_relations_with, render_knowledge, PromptTemplate,
};
pub use validate::{validate_complete, validate_record, Violation, ViolationCode};
