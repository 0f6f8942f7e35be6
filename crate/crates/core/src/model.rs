//! Domain types shared by every stage of the pipeline.
//!
//! Values are plain data. Deserialization never rejects a record on semantic
//! grounds so that [`crate::validate`] can report every broken invariant;
//! the checked constructors (`Concept::new`, `ConceptSet::new`) are what the
//! pipeline itself uses.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, TimeZone, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::ModelError;

pub const MIN_CONCEPTS: usize = 3;
pub const MAX_CONCEPTS: usize = 5;
pub const MAX_RELATIONS_PER_CONCEPT: usize = 5;
pub const MAX_RANK: u8 = 4;
pub const DEFAULT_LANG: &str = "en";

/// A lemma the generated sentence has to mention.
///
/// Multiword terms are stored underscore-joined (`ice_cream`). On the wire a
/// concept is a bare string; non-English concepts carry an `@lang` suffix.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Concept {
    surface: String,
    lang: String,
}

impl Concept {
    /// Checked constructor for an English concept.
    pub fn new(surface: impl Into<String>) -> Result<Self, ModelError> {
        Self::with_lang(surface, DEFAULT_LANG)
    }

    pub fn with_lang(
        surface: impl Into<String>,
        lang: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let concept = Concept {
            surface: surface.into(),
            lang: lang.into(),
        };
        match concept.defect() {
            Some(reason) => Err(ModelError::InvalidConcept {
                surface: concept.surface,
                reason,
            }),
            None => Ok(concept),
        }
    }

    /// Lowercases, trims and underscore-joins internal whitespace before checking.
    pub fn normalized(raw: &str) -> Result<Self, ModelError> {
        let joined = raw.split_whitespace().collect::<Vec<_>>().join("_");
        Self::new(joined.to_lowercase())
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    /// Surface with underscores rendered as spaces, the form used in prompts.
    pub fn spaced(&self) -> String {
        self.surface.replace('_', " ")
    }

    /// Returns the first violated invariant, if any.
    pub fn defect(&self) -> Option<&'static str> {
        if self.surface.is_empty() {
            Some("empty surface")
        } else if self.surface.chars().any(char::is_whitespace) {
            Some("contains whitespace")
        } else if self.surface.chars().any(char::is_uppercase) {
            Some("not lowercase")
        } else if self.surface.contains('@') {
            Some("contains '@'")
        } else if self.lang.is_empty() || !self.lang.chars().all(|c| c.is_ascii_lowercase()) {
            Some("bad language tag")
        } else {
            None
        }
    }

    fn from_wire(raw: &str) -> Self {
        match raw.rsplit_once('@') {
            Some((surface, lang)) => Concept {
                surface: surface.to_string(),
                lang: lang.to_string(),
            },
            None => Concept {
                surface: raw.to_string(),
                lang: DEFAULT_LANG.to_string(),
            },
        }
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lang == DEFAULT_LANG {
            f.write_str(&self.surface)
        } else {
            write!(f, "{}@{}", self.surface, self.lang)
        }
    }
}

impl Serialize for Concept {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Concept {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Ok(Concept::from_wire(&raw))
    }
}

/// One generation task: 3 to 5 distinct concepts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptSet {
    pub id: String,
    pub concepts: Vec<Concept>,
}

impl ConceptSet {
    pub fn new(concepts: Vec<Concept>) -> Result<Self, ModelError> {
        if !(MIN_CONCEPTS..=MAX_CONCEPTS).contains(&concepts.len()) {
            return Err(ModelError::ConceptSetSize(concepts.len()));
        }
        for (i, c) in concepts.iter().enumerate() {
            if concepts[..i].contains(c) {
                return Err(ModelError::DuplicateConcept(c.to_string()));
            }
        }
        Ok(ConceptSet {
            id: Self::derive_id(&concepts),
            concepts,
        })
    }

    /// Convenience for tests and fixtures: `ConceptSet::from_words(&["dog", "pull", "race"])`.
    pub fn from_words(words: &[&str]) -> Result<Self, ModelError> {
        let concepts = words
            .iter()
            .map(|w| Concept::new(*w))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(concepts)
    }

    /// Stable id: hash of the sorted concept surfaces, so re-imports are idempotent.
    pub fn derive_id(concepts: &[Concept]) -> String {
        let mut keys: Vec<String> = concepts.iter().map(ToString::to_string).collect();
        keys.sort();
        let digest = Sha256::digest(keys.join(" ").as_bytes());
        format!("cs-{}", &hex::encode(digest)[..12])
    }

    pub fn contains(&self, concept: &Concept) -> bool {
        self.concepts.contains(concept)
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Concept> {
        self.concepts.iter()
    }
}

macro_rules! relation_types {
    ($($variant:ident),* $(,)?) => {
        /// ConceptNet edge label. Unlisted labels are kept verbatim in `Other`.
        #[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum RelationType {
            $($variant,)*
            Other(String),
        }

        impl RelationType {
            pub const KNOWN: &'static [RelationType] = &[$(RelationType::$variant),*];

            pub fn label(&self) -> &str {
                match self {
                    $(RelationType::$variant => stringify!($variant),)*
                    RelationType::Other(tag) => tag,
                }
            }

            /// Never fails: unknown labels become `Other`.
            pub fn parse(label: &str) -> RelationType {
                match label {
                    $(stringify!($variant) => RelationType::$variant,)*
                    other => RelationType::Other(other.to_string()),
                }
            }
        }
    };
}

relation_types!(
    RelatedTo,
    AtLocation,
    IsA,
    Synonym,
    UsedFor,
    CapableOf,
    PartOf,
    HasA,
    Antonym,
    Causes,
    HasProperty,
    HasContext,
    DerivedFrom,
    FormOf,
    SimilarTo,
    DistinctFrom,
    EtymologicallyRelatedTo,
    HasSubevent,
    HasPrerequisite,
    MotivatedByGoal,
    Desires,
    ReceivesAction,
    MadeOf,
    MannerOf,
    LocatedNear,
    CausesDesire,
);

impl RelationType {
    /// Relations whose direction carries no meaning in ConceptNet.
    pub fn is_symmetric(&self) -> bool {
        matches!(
            self,
            RelationType::RelatedTo
                | RelationType::Synonym
                | RelationType::Antonym
                | RelationType::SimilarTo
                | RelationType::DistinctFrom
                | RelationType::EtymologicallyRelatedTo
                | RelationType::LocatedNear
        )
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for RelationType {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(RelationType::parse(s))
    }
}

impl Serialize for RelationType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for RelationType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Ok(RelationType::parse(&raw))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(pub String);

impl RelationId {
    pub fn derive(head: &Concept, rel: &RelationType, tail: &str) -> Self {
        RelationId(format!("{head}/{rel}/{tail}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RelationId {
    fn from(s: &str) -> Self {
        RelationId(s.to_string())
    }
}

/// A typed knowledge-graph edge attached to one concept.
///
/// `weight` is `None` when the relation was recovered from prompt text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub id: RelationId,
    pub head: Concept,
    pub rel: RelationType,
    pub tail: String,
    pub weight: Option<f64>,
    pub rank: u8,
}

impl Relation {
    pub fn new(
        head: Concept,
        rel: RelationType,
        tail: impl Into<String>,
        weight: Option<f64>,
        rank: u8,
    ) -> Self {
        let tail = tail.into();
        Relation {
            id: RelationId::derive(&head, &rel, &tail),
            head,
            rel,
            tail,
            weight,
            rank,
        }
    }
}

/// Per-concept relation lists, in concept-set order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KnowledgeBundle(IndexMap<Concept, Vec<Relation>>);

impl KnowledgeBundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, concept: Concept, relations: Vec<Relation>) {
        self.0.insert(concept, relations);
    }

    pub fn get(&self, concept: &Concept) -> Option<&[Relation]> {
        self.0.get(concept).map(Vec::as_slice)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.0.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Concept, &[Relation])> {
        self.0.iter().map(|(c, r)| (c, r.as_slice()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&Concept, &mut Vec<Relation>)> {
        self.0.iter_mut()
    }

    /// All relations, concept by concept.
    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.0.values().flatten()
    }

    pub fn relation(&self, id: &RelationId) -> Option<&Relation> {
        self.relations().find(|r| &r.id == id)
    }

    pub fn contains_id(&self, id: &RelationId) -> bool {
        self.relation(id).is_some()
    }

    /// Number of relations (not concepts).
    pub fn len(&self) -> usize {
        self.0.values().map(Vec::len).sum()
    }

    pub fn concept_count(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Copy with ranks rewritten to 0..n per concept.
    pub fn renumbered(&self) -> Self {
        let mut out = self.clone();
        for (_, relations) in out.iter_mut() {
            for (i, r) in relations.iter_mut().enumerate() {
                r.rank = i as u8;
            }
        }
        out
    }

    /// Copy with every weight cleared, the shape recovered by parsing prompt text.
    pub fn without_weights(&self) -> Self {
        let mut out = self.clone();
        for (_, relations) in out.iter_mut() {
            for r in relations.iter_mut() {
                r.weight = None;
            }
        }
        out
    }
}

impl FromIterator<(Concept, Vec<Relation>)> for KnowledgeBundle {
    fn from_iter<I: IntoIterator<Item = (Concept, Vec<Relation>)>>(iter: I) -> Self {
        KnowledgeBundle(iter.into_iter().collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GenerationCondition {
    NoKnowledge,
    FullKnowledge,
    FilteredKnowledge,
}

impl GenerationCondition {
    pub const ALL: [GenerationCondition; 3] = [
        GenerationCondition::NoKnowledge,
        GenerationCondition::FullKnowledge,
        GenerationCondition::FilteredKnowledge,
    ];

    pub fn token(self) -> &'static str {
        match self {
            GenerationCondition::NoKnowledge => "NoKnowledge",
            GenerationCondition::FullKnowledge => "FullKnowledge",
            GenerationCondition::FilteredKnowledge => "FilteredKnowledge",
        }
    }

    /// Short form used on the command line and in file names.
    pub fn short(self) -> &'static str {
        match self {
            GenerationCondition::NoKnowledge => "none",
            GenerationCondition::FullKnowledge => "full",
            GenerationCondition::FilteredKnowledge => "filtered",
        }
    }
}

impl fmt::Display for GenerationCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for GenerationCondition {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GenerationCondition::ALL
            .into_iter()
            .find(|c| c.token() == s || c.short() == s)
            .ok_or_else(|| ModelError::UnknownCondition(s.to_string()))
    }
}

/// UTC instant truncated to whole seconds, written as `YYYY-MM-DDTHH:MM:SSZ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Timestamp(DateTime<Utc>);

impl Timestamp {
    const FORMAT: &'static str = "%Y-%m-%dT%H:%M:%SZ";

    pub fn now() -> Self {
        Self::from(Utc::now())
    }

    pub fn from_unix(secs: i64) -> Self {
        Timestamp(Utc.timestamp_opt(secs, 0).single().unwrap_or_default())
    }

    pub fn unix(&self) -> i64 {
        self.0.timestamp()
    }

    pub fn datetime(&self) -> DateTime<Utc> {
        self.0
    }

    pub fn plus_seconds(&self, secs: i64) -> Self {
        Self::from_unix(self.unix() + secs)
    }
}

impl From<DateTime<Utc>> for Timestamp {
    fn from(dt: DateTime<Utc>) -> Self {
        Self::from_unix(dt.timestamp())
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format(Self::FORMAT))
    }
}

impl FromStr for Timestamp {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DateTime::parse_from_rfc3339(s)
            .map(|dt| Timestamp::from(dt.with_timezone(&Utc)))
            .map_err(|e| ModelError::InvalidTimestamp(format!("{s}: {e}")))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSentence {
    pub text: String,
    pub condition: GenerationCondition,
    pub backend_id: String,
    #[serde(default)]
    pub decode_params: BTreeMap<String, String>,
    pub created_at: Timestamp,
}

/// The three ways filtered knowledge was observed to fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureVariant {
    /// Knowledge picks the wrong word sense.
    MisleadingKnowledge,
    /// Knowledge is correct per word but links nothing together.
    UnhelpfulKnowledge,
    /// Knowledge connects the concepts only indirectly.
    SlightConnection,
}

impl FailureVariant {
    pub const ALL: [FailureVariant; 3] = [
        FailureVariant::MisleadingKnowledge,
        FailureVariant::UnhelpfulKnowledge,
        FailureVariant::SlightConnection,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FailureVariant::MisleadingKnowledge => "MisleadingKnowledge",
            FailureVariant::UnhelpfulKnowledge => "UnhelpfulKnowledge",
            FailureVariant::SlightConnection => "SlightConnection",
        }
    }
}

impl FromStr for FailureVariant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FailureVariant::ALL
            .into_iter()
            .find(|v| v.label() == s)
            .ok_or_else(|| ModelError::UnknownFailureVariant(s.to_string()))
    }
}

/// Human label for one sentence. Bits are 0 or 1; kept as integers so that
/// out-of-range input survives parsing and shows up as a violation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub commonsense: u8,
    pub coverage: u8,
    /// Automatic coverage bit shown to the annotator, kept beside any override.
    #[serde(default)]
    pub coverage_auto: Option<u8>,
    pub annotator_id: String,
    #[serde(default)]
    pub failure_variant: Option<FailureVariant>,
    #[serde(default)]
    pub note: Option<String>,
    pub created_at: Timestamp,
}

impl Annotation {
    pub fn is_failure(&self) -> bool {
        self.commonsense == 0 || self.coverage == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    #[serde(flatten)]
    pub sentence: GeneratedSentence,
    #[serde(default)]
    pub annotation: Option<Annotation>,
}

impl From<GeneratedSentence> for AnnotatedSentence {
    fn from(sentence: GeneratedSentence) -> Self {
        AnnotatedSentence {
            sentence,
            annotation: None,
        }
    }
}

/// One raw label as submitted, retained even when a later label supersedes it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawLabel {
    pub condition: GenerationCondition,
    #[serde(flatten)]
    pub annotation: Annotation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Keep,
    Remove,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DecisionSource {
    Suggested,
    Human,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub relation_id: RelationId,
    pub verdict: Verdict,
    pub source: DecisionSource,
    pub annotator_id: String,
    #[serde(default)]
    pub rationale: Option<String>,
}

impl FilterDecision {
    pub fn human(relation_id: impl Into<RelationId>, verdict: Verdict, annotator_id: &str) -> Self {
        FilterDecision {
            relation_id: relation_id.into(),
            verdict,
            source: DecisionSource::Human,
            annotator_id: annotator_id.to_string(),
            rationale: None,
        }
    }
}

impl From<String> for RelationId {
    fn from(s: String) -> Self {
        RelationId(s)
    }
}

/// Resolves a decision list to one verdict per relation: a human decision
/// overrides a suggested one, and among equal sources the last one wins.
pub fn final_decisions(decisions: &[FilterDecision]) -> IndexMap<&RelationId, &FilterDecision> {
    let mut out: IndexMap<&RelationId, &FilterDecision> = IndexMap::new();
    for d in decisions {
        match out.get(&d.relation_id) {
            Some(prev) if prev.source > d.source => {}
            _ => {
                out.insert(&d.relation_id, d);
            }
        }
    }
    out
}

/// One dataset instance. Sentences are optional while the pipeline is running;
/// a finished record carries the full and filtered sentences with annotations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KitgiRecord {
    pub concept_set: ConceptSet,
    #[serde(default)]
    pub retrieved_knowledge: KnowledgeBundle,
    #[serde(default)]
    pub filtered_knowledge: KnowledgeBundle,
    #[serde(default)]
    pub sentence_full: Option<AnnotatedSentence>,
    #[serde(default)]
    pub sentence_filtered: Option<AnnotatedSentence>,
    #[serde(default)]
    pub sentence_none: Option<AnnotatedSentence>,
    #[serde(default)]
    pub decisions: Vec<FilterDecision>,
    #[serde(default)]
    pub annotations: Vec<RawLabel>,
}

impl KitgiRecord {
    pub fn new(concept_set: ConceptSet) -> Self {
        KitgiRecord {
            concept_set,
            retrieved_knowledge: KnowledgeBundle::new(),
            filtered_knowledge: KnowledgeBundle::new(),
            sentence_full: None,
            sentence_filtered: None,
            sentence_none: None,
            decisions: Vec::new(),
            annotations: Vec::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.concept_set.id
    }

    /// Installs freshly retrieved knowledge. With no decisions yet, the
    /// filtered bundle starts as a copy of the retrieved one.
    pub fn set_knowledge(&mut self, bundle: KnowledgeBundle) {
        self.filtered_knowledge = bundle.clone();
        self.retrieved_knowledge = bundle;
        self.decisions.clear();
    }

    pub fn sentence(&self, condition: GenerationCondition) -> Option<&AnnotatedSentence> {
        match condition {
            GenerationCondition::NoKnowledge => self.sentence_none.as_ref(),
            GenerationCondition::FullKnowledge => self.sentence_full.as_ref(),
            GenerationCondition::FilteredKnowledge => self.sentence_filtered.as_ref(),
        }
    }

    pub fn sentence_slot(
        &mut self,
        condition: GenerationCondition,
    ) -> &mut Option<AnnotatedSentence> {
        match condition {
            GenerationCondition::NoKnowledge => &mut self.sentence_none,
            GenerationCondition::FullKnowledge => &mut self.sentence_full,
            GenerationCondition::FilteredKnowledge => &mut self.sentence_filtered,
        }
    }

    pub fn annotation(&self, condition: GenerationCondition) -> Option<&Annotation> {
        self.sentence(condition).and_then(|s| s.annotation.as_ref())
    }

    /// Stores a label as the adjudicated annotation and appends it to the raw log.
    pub fn record_label(
        &mut self,
        condition: GenerationCondition,
        annotation: Annotation,
    ) -> Result<(), ModelError> {
        let slot = self
            .sentence_slot(condition)
            .as_mut()
            .ok_or(ModelError::MissingSentence(condition))?;
        slot.annotation = Some(annotation.clone());
        self.annotations.push(RawLabel {
            condition,
            annotation,
        });
        Ok(())
    }

    /// True when every retrieved relation has a final verdict.
    pub fn filter_decided(&self) -> bool {
        let finals = final_decisions(&self.decisions);
        !self.retrieved_knowledge.is_empty()
            && self
                .retrieved_knowledge
                .relations()
                .all(|r| finals.contains_key(&r.id))
    }
}
