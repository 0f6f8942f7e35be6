//! Record validation. Violations are values, never failures.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{
    final_decisions, AnnotatedSentence, Annotation, GenerationCondition, KitgiRecord,
    KnowledgeBundle, Verdict, MAX_CONCEPTS, MAX_RANK, MAX_RELATIONS_PER_CONCEPT, MIN_CONCEPTS,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationCode {
    EmptyRecordId,
    ConceptSetSizeOutOfRange,
    InvalidConcept,
    DuplicateConcept,
    ForeignBundleKey,
    TooManyRelations,
    RelationHeadMismatch,
    RankOutOfRange,
    RanksNotIncreasing,
    WeightsNotMonotone,
    InvalidWeight,
    EmptyTail,
    DuplicateRelationId,
    FilteredNotSubset,
    UnknownDecisionRelation,
    DuplicateDecision,
    ConservationMismatch,
    ConditionMismatch,
    EmptySentence,
    BitOutOfRange,
    VariantWithoutFailure,
    // Completeness codes, reported by `validate_complete` only.
    MissingBundleKey,
    MissingSentence,
    MissingAnnotation,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.code, self.message)
    }
}

#[derive(Default)]
struct Report(Vec<Violation>);

impl Report {
    fn push(&mut self, code: ViolationCode, message: impl Into<String>) {
        self.0.push(Violation {
            code,
            message: message.into(),
        });
    }
}

/// Checks every structural invariant of a record and its nested values.
///
/// Records still moving through the pipeline (no sentences yet) are valid
/// here; use [`validate_complete`] for finished dataset instances.
pub fn validate_record(record: &KitgiRecord) -> Vec<Violation> {
    let mut report = Report::default();
    check_concept_set(record, &mut report);
    check_bundle(
        "retrieved_knowledge",
        &record.retrieved_knowledge,
        record,
        &mut report,
    );
    check_bundle(
        "filtered_knowledge",
        &record.filtered_knowledge,
        record,
        &mut report,
    );
    check_subset(record, &mut report);
    check_decisions(record, &mut report);
    for condition in GenerationCondition::ALL {
        if let Some(sentence) = record.sentence(condition) {
            check_sentence(condition, sentence, &mut report);
        }
    }
    for (i, raw) in record.annotations.iter().enumerate() {
        check_annotation(&format!("annotations[{i}]"), &raw.annotation, &mut report);
    }
    report.0
}

/// Structural checks plus the completeness a finished record needs: knowledge
/// for every concept and annotated full and filtered sentences.
pub fn validate_complete(record: &KitgiRecord) -> Vec<Violation> {
    let mut out = validate_record(record);
    for concept in record.concept_set.iter() {
        if record.retrieved_knowledge.get(concept).is_none() {
            out.push(Violation {
                code: ViolationCode::MissingBundleKey,
                message: format!(
                    "no retrieved knowledge entry for {concept:?}",
                    concept = concept.to_string()
                ),
            });
        }
    }
    for condition in [
        GenerationCondition::FullKnowledge,
        GenerationCondition::FilteredKnowledge,
    ] {
        match record.sentence(condition) {
            None => out.push(Violation {
                code: ViolationCode::MissingSentence,
                message: format!("no {condition} sentence"),
            }),
            Some(s) if s.annotation.is_none() => out.push(Violation {
                code: ViolationCode::MissingAnnotation,
                message: format!("{condition} sentence is not annotated"),
            }),
            Some(_) => {}
        }
    }
    out
}

fn check_concept_set(record: &KitgiRecord, report: &mut Report) {
    let set = &record.concept_set;
    if set.id.trim().is_empty() {
        report.push(ViolationCode::EmptyRecordId, "concept set id is empty");
    }
    if !(MIN_CONCEPTS..=MAX_CONCEPTS).contains(&set.len()) {
        report.push(
            ViolationCode::ConceptSetSizeOutOfRange,
            format!(
                "{} concepts, expected {MIN_CONCEPTS} to {MAX_CONCEPTS}",
                set.len()
            ),
        );
    }
    let mut seen = HashSet::new();
    for concept in set.iter() {
        if let Some(reason) = concept.defect() {
            report.push(
                ViolationCode::InvalidConcept,
                format!("{:?}: {reason}", concept.surface()),
            );
        }
        if !seen.insert(concept) {
            report.push(
                ViolationCode::DuplicateConcept,
                format!("{:?} appears twice", concept.surface()),
            );
        }
    }
}

fn check_bundle(name: &str, bundle: &KnowledgeBundle, record: &KitgiRecord, report: &mut Report) {
    let mut ids = HashSet::new();
    for (concept, relations) in bundle.iter() {
        if !record.concept_set.contains(concept) {
            report.push(
                ViolationCode::ForeignBundleKey,
                format!("{name}: {concept} is not in the concept set"),
            );
        }
        if relations.len() > MAX_RELATIONS_PER_CONCEPT {
            report.push(
                ViolationCode::TooManyRelations,
                format!(
                    "{name}: {concept} has {} relations (max {MAX_RELATIONS_PER_CONCEPT})",
                    relations.len()
                ),
            );
        }
        for (i, r) in relations.iter().enumerate() {
            if &r.head != concept {
                report.push(
                    ViolationCode::RelationHeadMismatch,
                    format!("{name}: {} listed under {concept}", r.id),
                );
            }
            if r.rank > MAX_RANK {
                report.push(
                    ViolationCode::RankOutOfRange,
                    format!("{name}: {} has rank {}", r.id, r.rank),
                );
            }
            if r.tail.trim().is_empty() {
                report.push(
                    ViolationCode::EmptyTail,
                    format!("{name}: {} has an empty tail", r.id),
                );
            }
            if let Some(w) = r.weight {
                if !w.is_finite() || w < 0.0 {
                    report.push(
                        ViolationCode::InvalidWeight,
                        format!("{name}: {} has weight {w}", r.id),
                    );
                }
            }
            if !ids.insert(&r.id) {
                report.push(
                    ViolationCode::DuplicateRelationId,
                    format!("{name}: {} appears twice", r.id),
                );
            }
            if i > 0 {
                let prev = &relations[i - 1];
                if r.rank <= prev.rank {
                    report.push(
                        ViolationCode::RanksNotIncreasing,
                        format!(
                            "{name}: {concept} rank {} follows rank {}",
                            r.rank, prev.rank
                        ),
                    );
                }
                if let (Some(a), Some(b)) = (prev.weight, r.weight) {
                    if b > a {
                        report.push(
                            ViolationCode::WeightsNotMonotone,
                            format!("{name}: {concept} weight {b} follows weight {a}"),
                        );
                    }
                }
            }
        }
    }
}

fn check_subset(record: &KitgiRecord, report: &mut Report) {
    for (concept, relations) in record.filtered_knowledge.iter() {
        let retrieved = record.retrieved_knowledge.get(concept).unwrap_or_default();
        for r in relations {
            if !retrieved.iter().any(|x| x.id == r.id) {
                report.push(
                    ViolationCode::FilteredNotSubset,
                    format!(
                        "filtered relation {} is not retrieved under {concept}",
                        r.id
                    ),
                );
            }
        }
    }
}

fn check_decisions(record: &KitgiRecord, report: &mut Report) {
    let mut seen = HashSet::new();
    for d in &record.decisions {
        if !record.retrieved_knowledge.contains_id(&d.relation_id) {
            report.push(
                ViolationCode::UnknownDecisionRelation,
                format!("decision for unknown relation {}", d.relation_id),
            );
        }
        if !seen.insert((&d.relation_id, d.source)) {
            report.push(
                ViolationCode::DuplicateDecision,
                format!(
                    "more than one {:?} decision for {}",
                    d.source, d.relation_id
                ),
            );
        }
    }
    let removed = final_decisions(&record.decisions)
        .values()
        .filter(|d| {
            d.verdict == Verdict::Remove && record.retrieved_knowledge.contains_id(&d.relation_id)
        })
        .count();
    let kept = record.filtered_knowledge.len();
    let retrieved = record.retrieved_knowledge.len();
    if removed + kept != retrieved {
        report.push(
            ViolationCode::ConservationMismatch,
            format!("{removed} removed + {kept} filtered != {retrieved} retrieved"),
        );
    }
}

fn check_sentence(
    condition: GenerationCondition,
    sentence: &AnnotatedSentence,
    report: &mut Report,
) {
    let slot = format!("sentence_{}", condition.short());
    if sentence.sentence.condition != condition {
        report.push(
            ViolationCode::ConditionMismatch,
            format!("{slot} carries condition {}", sentence.sentence.condition),
        );
    }
    if sentence.sentence.text.trim().is_empty() {
        report.push(
            ViolationCode::EmptySentence,
            format!("{slot} text is empty"),
        );
    }
    if let Some(a) = &sentence.annotation {
        check_annotation(&slot, a, report);
    }
}

fn check_annotation(ctx: &str, a: &Annotation, report: &mut Report) {
    let bits = [
        ("commonsense", Some(a.commonsense)),
        ("coverage", Some(a.coverage)),
        ("coverage_auto", a.coverage_auto),
    ];
    let mut bits_ok = true;
    for (name, bit) in bits {
        if let Some(b) = bit {
            if b > 1 {
                bits_ok = false;
                report.push(ViolationCode::BitOutOfRange, format!("{ctx}: {name} = {b}"));
            }
        }
    }
    if bits_ok && a.failure_variant.is_some() && !a.is_failure() {
        report.push(
            ViolationCode::VariantWithoutFailure,
            format!("{ctx}: failure variant set on a (1,1) annotation"),
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::look_watch_window;
    use crate::model::{ConceptSet, FilterDecision, Relation, RelationType};

    fn codes(record: &KitgiRecord) -> Vec<ViolationCode> {
        validate_record(record)
            .into_iter()
            .map(|v| v.code)
            .collect()
    }

    #[test]
    fn worked_example_is_valid() {
        let record = look_watch_window();
        assert_eq!(record.retrieved_knowledge.len(), 15);
        assert_eq!(record.filtered_knowledge.len(), 11);
        assert_eq!(
            record
                .decisions
                .iter()
                .filter(|d| d.verdict == Verdict::Remove)
                .count(),
            4
        );
        assert_eq!(validate_record(&record), vec![]);
        assert_eq!(validate_complete(&record), vec![]);
    }

    #[test]
    fn two_concept_set_is_out_of_range() {
        let mut record =
            KitgiRecord::new(ConceptSet::from_words(&["dog", "pull", "race"]).unwrap());
        record.concept_set.concepts.pop();
        assert_eq!(
            codes(&record),
            vec![ViolationCode::ConceptSetSizeOutOfRange]
        );
    }

    #[test]
    fn foreign_filtered_relation_is_not_a_subset() {
        let mut record = look_watch_window();
        let (_, relations) = record.filtered_knowledge.iter_mut().next().unwrap();
        let head = relations[0].head.clone();
        relations[0] = Relation::new(
            head,
            RelationType::RelatedTo,
            "zebra",
            relations[0].weight,
            relations[0].rank,
        );
        assert_eq!(codes(&record), vec![ViolationCode::FilteredNotSubset]);
    }

    #[test]
    fn dropping_a_filtered_relation_breaks_conservation() {
        let mut record = look_watch_window();
        let (_, relations) = record.filtered_knowledge.iter_mut().last().unwrap();
        relations.pop();
        assert_eq!(codes(&record), vec![ViolationCode::ConservationMismatch]);
    }

    #[test]
    fn decision_codes() {
        let mut record = look_watch_window();
        let dup = record.decisions[0].clone();
        record.decisions.push(dup);
        assert_eq!(codes(&record), vec![ViolationCode::DuplicateDecision]);

        let mut record = look_watch_window();
        record.decisions.push(FilterDecision::human(
            "look/RelatedTo/zebra",
            Verdict::Keep,
            "a",
        ));
        assert_eq!(codes(&record), vec![ViolationCode::UnknownDecisionRelation]);
    }

    #[test]
    fn annotation_codes() {
        let mut record = look_watch_window();
        record
            .sentence_full
            .as_mut()
            .unwrap()
            .annotation
            .as_mut()
            .unwrap()
            .commonsense = 2;
        assert_eq!(codes(&record), vec![ViolationCode::BitOutOfRange]);

        let mut record = look_watch_window();
        let a = record
            .sentence_full
            .as_mut()
            .unwrap()
            .annotation
            .as_mut()
            .unwrap();
        a.failure_variant = Some(crate::model::FailureVariant::SlightConnection);
        assert_eq!(codes(&record), vec![ViolationCode::VariantWithoutFailure]);

        let mut record = look_watch_window();
        record.sentence_full.as_mut().unwrap().sentence.condition =
            GenerationCondition::NoKnowledge;
        assert_eq!(codes(&record), vec![ViolationCode::ConditionMismatch]);

        let mut record = look_watch_window();
        record.sentence_filtered.as_mut().unwrap().sentence.text = "  ".into();
        assert_eq!(codes(&record), vec![ViolationCode::EmptySentence]);
    }

    #[test]
    fn incomplete_record_is_structurally_valid() {
        let mut record = look_watch_window();
        record.sentence_filtered = None;
        assert_eq!(codes(&record), vec![]);
        let complete: Vec<_> = validate_complete(&record)
            .into_iter()
            .map(|v| v.code)
            .collect();
        assert_eq!(complete, vec![ViolationCode::MissingSentence]);
    }
}
