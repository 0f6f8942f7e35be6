use std::fmt;
use std::str::FromStr;

use kitgi_core::{
    ConceptSet, CoverageResult, GenerationCondition, KnowledgeBundle, RemovalSuggestion, Timestamp,
};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    FilterRelations,
    LabelSentence,
}

impl Stage {
    pub const ALL: [Stage; 2] = [Stage::FilterRelations, Stage::LabelSentence];

    pub fn token(self) -> &'static str {
        match self {
            Stage::FilterRelations => "FilterRelations",
            Stage::LabelSentence => "LabelSentence",
        }
    }
}

impl FromStr for Stage {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.token() == s)
            .ok_or_else(|| ServiceError::UnknownStage(s.to_string()))
    }
}

/// `filter-<record>` or `label-<none|full|filtered>-<record>`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskId {
    Filter(String),
    Label(GenerationCondition, String),
}

impl TaskId {
    pub fn stage(&self) -> Stage {
        match self {
            TaskId::Filter(_) => Stage::FilterRelations,
            TaskId::Label(..) => Stage::LabelSentence,
        }
    }

    pub fn record_id(&self) -> &str {
        match self {
            TaskId::Filter(r) | TaskId::Label(_, r) => r,
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskId::Filter(r) => write!(f, "filter-{r}"),
            TaskId::Label(c, r) => write!(f, "label-{}-{r}", c.short()),
        }
    }
}

impl FromStr for TaskId {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || ServiceError::UnknownTask(s.to_string());
        if let Some(record) = s.strip_prefix("filter-") {
            return Ok(TaskId::Filter(record.to_string()));
        }
        let rest = s.strip_prefix("label-").ok_or_else(unknown)?;
        let (condition, record) = rest.split_once('-').ok_or_else(unknown)?;
        let condition = GenerationCondition::ALL
            .into_iter()
            .find(|c| c.short() == condition)
            .ok_or_else(unknown)?;
        Ok(TaskId::Label(condition, record.to_string()))
    }
}

impl Serialize for TaskId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TaskId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum TaskPayload {
    Filter {
        concept_set: ConceptSet,
        knowledge: KnowledgeBundle,
        suggestions: Vec<RemovalSuggestion>,
    },
    Label {
        concept_set: ConceptSet,
        condition: GenerationCondition,
        sentence: String,
        coverage_auto: CoverageResult,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Task {
    pub task_id: TaskId,
    pub record_id: String,
    pub stage: Stage,
    pub payload: TaskPayload,
    pub lease_expiry: Timestamp,
    pub assignee: String,
}
