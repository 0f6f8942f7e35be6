//! CommonGen concept-set ingestion.
//!
//! Accepted line shapes:
//! - plain concepts, whitespace separated: `dog pull race`
//! - `#`-separated concepts, which may contain spaces: `ice cream#cone#lick`
//! - either of the above followed by a tab and a reference sentence
//! - a JSON object with `concept_set` (`"a#b#c"` or an array) or `concepts`
//!
//! Reference sentences are ignored.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{DatasetError, ModelError};
use crate::model::{Concept, ConceptSet, MAX_CONCEPTS, MIN_CONCEPTS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SkipReason {
    SizeOutOfRange,
    DuplicateConcept,
    InvalidConcept,
    Unparseable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Skipped {
    pub line: usize,
    pub reason: SkipReason,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct ImportOutcome {
    pub sets: Vec<ConceptSet>,
    pub skipped: Vec<Skipped>,
}

pub fn import_commongen(path: &Path) -> Result<ImportOutcome, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_commongen(&text))
}

pub fn parse_commongen(text: &str) -> ImportOutcome {
    let mut outcome = ImportOutcome::default();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw = match split_line(line) {
            Ok(raw) => raw,
            Err(detail) => {
                outcome.skipped.push(Skipped {
                    line: line_no,
                    reason: SkipReason::Unparseable,
                    detail,
                });
                continue;
            }
        };
        match build_set(&raw) {
            Ok(mut set) => {
                // Repeated sets keep distinct, still position-independent ids.
                let n = seen.entry(set.id.clone()).or_insert(0);
                if *n > 0 {
                    set.id = format!("{}-{}", set.id, n);
                }
                *n += 1;
                outcome.sets.push(set);
            }
            Err(err) => {
                let reason = match err {
                    ModelError::ConceptSetSize(_) => SkipReason::SizeOutOfRange,
                    ModelError::DuplicateConcept(_) => SkipReason::DuplicateConcept,
                    _ => SkipReason::InvalidConcept,
                };
                outcome.skipped.push(Skipped {
                    line: line_no,
                    reason,
                    detail: err.to_string(),
                });
            }
        }
    }
    outcome
}

fn split_line(line: &str) -> Result<Vec<String>, String> {
    let trimmed = line.trim();
    if trimmed.starts_with('{') {
        return split_json(trimmed);
    }
    let concepts = trimmed.split('\t').next().unwrap_or_default();
    let parts: Vec<String> = if concepts.contains('#') {
        concepts.split('#').map(str::to_string).collect()
    } else {
        concepts.split_whitespace().map(str::to_string).collect()
    };
    Ok(parts.into_iter().filter(|p| !p.trim().is_empty()).collect())
}

fn split_json(line: &str) -> Result<Vec<String>, String> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let field = value
        .get("concept_set")
        .or_else(|| value.get("concepts"))
        .ok_or_else(|| "no concept_set or concepts field".to_string())?;
    match field {
        serde_json::Value::String(s) => Ok(s.split('#').map(str::to_string).collect()),
        serde_json::Value::Array(items) => items
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| format!("non-string concept {v}"))
            })
            .collect(),
        other => Err(format!("unexpected concept field {other}")),
    }
}

fn build_set(raw: &[String]) -> Result<ConceptSet, ModelError> {
    if !(MIN_CONCEPTS..=MAX_CONCEPTS).contains(&raw.len()) {
        return Err(ModelError::ConceptSetSize(raw.len()));
    }
    let concepts = raw
        .iter()
        .map(|r| Concept::normalized(r))
        .collect::<Result<Vec<_>, _>>()?;
    ConceptSet::new(concepts)
}
