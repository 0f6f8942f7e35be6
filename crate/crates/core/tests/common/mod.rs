#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use kitgi_core::{
    apply_decisions, AnnotatedSentence, Annotation, Concept, ConceptSet, DecisionSource,
    FailureVariant, FilterDecision, GeneratedSentence, GenerationCondition, KitgiRecord,
    KnowledgeBundle, RawLabel, Relation, RelationType, Timestamp, Verdict,
};
use proptest::prelude::*;

/// Scratch directory on tmpfs when available; persistence tests fsync per case.
pub fn scratch() -> tempfile::TempDir {
    let shm = std::path::Path::new("/dev/shm");
    if shm.is_dir() {
        if let Ok(dir) = tempfile::tempdir_in(shm) {
            return dir;
        }
    }
    tempfile::tempdir().unwrap()
}

pub fn concept_surface() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => "[a-z]{1,8}",
        1 => "[a-z]{1,5}_[a-z]{1,5}",
        1 => "[a-zé]{1,4}[-'.][a-z]{1,4}",
    ]
}

pub fn concept_set() -> impl Strategy<Value = ConceptSet> {
    prop::collection::btree_set(concept_surface(), 3..=5).prop_map(|surfaces| {
        let concepts = surfaces
            .into_iter()
            .map(|s| Concept::new(s).unwrap())
            .collect();
        ConceptSet::new(concepts).unwrap()
    })
}

pub fn relation_type() -> impl Strategy<Value = RelationType> {
    prop_oneof![
        8 => prop::sample::select(RelationType::KNOWN.to_vec()),
        1 => "[A-Z][a-zA-Z]{2,9}".prop_map(|s| RelationType::parse(&s)),
    ]
}

/// Tails that stress the prompt delimiters and escaping.
pub fn tail() -> impl Strategy<Value = String> {
    prop_oneof![
        6 => "[a-z]{1,10}",
        2 => "[a-z_]{1,4}[a-z]{1,4}_?",
        2 => r"[a-z0-9.:,'\\-]{1,8}",
        1 => Just("relations_are:".to_string()),
        1 => Just("0._RelatedTo".to_string()),
        1 => Just(r"back\slash".to_string()),
    ]
}

/// Up to five relations per concept with unique `(rel, tail)` keys, strictly
/// increasing ranks and non-increasing weights.
pub fn relations_for(head: Concept) -> impl Strategy<Value = Vec<Relation>> {
    (
        prop::collection::vec((relation_type(), tail()), 0..=5),
        prop::collection::vec(0.0..50.0f64, 5),
        prop::sample::subsequence(vec![0u8, 1, 2, 3, 4], 0..=5),
        any::<bool>(),
    )
        .prop_map(move |(pairs, mut weights, ranks, weighted)| {
            weights.sort_by(|a, b| b.total_cmp(a));
            let mut seen = BTreeSet::new();
            let unique: Vec<_> = pairs
                .into_iter()
                .filter(|(r, t)| seen.insert((r.clone(), t.clone())))
                .collect();
            unique
                .into_iter()
                .zip(&ranks)
                .enumerate()
                .map(|(i, ((rel, tail), &rank))| {
                    let weight = weighted.then_some(weights[i]);
                    Relation::new(head.clone(), rel, tail, weight, rank)
                })
                .collect()
        })
}

pub fn bundle_for(set: &ConceptSet) -> BoxedStrategy<KnowledgeBundle> {
    let parts: Vec<_> = set
        .iter()
        .map(|c| {
            let c = c.clone();
            relations_for(c.clone()).prop_map(move |r| (c.clone(), r))
        })
        .collect();
    parts
        .prop_map(|blocks| blocks.into_iter().collect())
        .boxed()
}

pub fn set_and_bundle() -> impl Strategy<Value = (ConceptSet, KnowledgeBundle)> {
    concept_set().prop_flat_map(|set| {
        let bundle = bundle_for(&set);
        (Just(set), bundle)
    })
}

/// Per relation: no decision, or a list of (source, verdict) decisions in order.
pub fn decisions_for(bundle: &KnowledgeBundle) -> BoxedStrategy<Vec<FilterDecision>> {
    let ids: Vec<_> = bundle.relations().map(|r| r.id.clone()).collect();
    let n = ids.len();
    let step = (any::<bool>(), any::<bool>(), 0usize..3);
    prop::collection::vec(prop::collection::vec(step, 0..3), n)
        .prop_map(move |per_relation| {
            let mut out = Vec::new();
            for (id, steps) in ids.iter().zip(per_relation) {
                let mut used = BTreeSet::new();
                for (human, remove, annotator) in steps {
                    let source = if human {
                        DecisionSource::Human
                    } else {
                        DecisionSource::Suggested
                    };
                    if !used.insert(source) {
                        continue;
                    }
                    out.push(FilterDecision {
                        relation_id: id.clone(),
                        verdict: if remove {
                            Verdict::Remove
                        } else {
                            Verdict::Keep
                        },
                        source,
                        annotator_id: format!("ann-{annotator}"),
                        rationale: remove.then(|| "points at another concept".to_string()),
                    });
                }
            }
            out
        })
        .boxed()
}

pub fn annotation() -> impl Strategy<Value = Annotation> {
    (
        0u8..=1,
        0u8..=1,
        prop::option::of(0u8..=1),
        prop::option::of(0usize..3),
        prop::option::of("[ -~]{0,20}"),
        0i64..2_000_000_000,
    )
        .prop_map(
            |(commonsense, coverage, coverage_auto, variant, note, secs)| {
                let failed = commonsense == 0 || coverage == 0;
                let failure_variant = variant.filter(|_| failed).map(|v| {
                    [
                        FailureVariant::MisleadingKnowledge,
                        FailureVariant::UnhelpfulKnowledge,
                        FailureVariant::SlightConnection,
                    ][v]
                });
                Annotation {
                    commonsense,
                    coverage,
                    coverage_auto,
                    annotator_id: "annotator".to_string(),
                    failure_variant,
                    note,
                    created_at: Timestamp::from_unix(secs),
                }
            },
        )
}

pub fn sentence(condition: GenerationCondition) -> impl Strategy<Value = AnnotatedSentence> {
    (
        "[A-Za-z][ -~é\u{4e2d}]{0,40}",
        prop::collection::btree_map("[a-z_]{1,8}", "[ -~]{0,8}", 0..3),
        0i64..2_000_000_000,
        prop::option::of(annotation()),
    )
        .prop_map(
            move |(text, decode_params, secs, annotation)| AnnotatedSentence {
                sentence: GeneratedSentence {
                    text,
                    condition,
                    backend_id: "stub".to_string(),
                    decode_params: decode_params.into_iter().collect::<BTreeMap<_, _>>(),
                    created_at: Timestamp::from_unix(secs),
                },
                annotation,
            },
        )
}

/// A structurally valid record at any pipeline stage.
pub fn record() -> impl Strategy<Value = KitgiRecord> {
    set_and_bundle()
        .prop_flat_map(|(set, bundle)| {
            let decisions = decisions_for(&bundle);
            (Just(set), Just(bundle), decisions)
        })
        .prop_flat_map(|(set, bundle, decisions)| {
            (
                Just(set),
                Just(bundle),
                Just(decisions),
                prop::option::of(sentence(GenerationCondition::NoKnowledge)),
                prop::option::of(sentence(GenerationCondition::FullKnowledge)),
                prop::option::of(sentence(GenerationCondition::FilteredKnowledge)),
            )
        })
        .prop_map(|(set, bundle, decisions, none, full, filtered)| {
            let mut record = KitgiRecord::new(set);
            record.set_knowledge(bundle);
            apply_decisions(&mut record, decisions).unwrap();
            record.sentence_none = none;
            record.sentence_full = full;
            record.sentence_filtered = filtered;
            for condition in GenerationCondition::ALL {
                if let Some(a) = record.annotation(condition).cloned() {
                    record.annotations.push(RawLabel {
                        condition,
                        annotation: a,
                    });
                }
            }
            record
        })
}

pub fn records(max: usize) -> impl Strategy<Value = Vec<KitgiRecord>> {
    prop::collection::vec(record(), 1..=max).prop_map(|mut rs| {
        let mut ids = BTreeSet::new();
        rs.retain(|r| ids.insert(r.id().to_string()));
        rs
    })
}
