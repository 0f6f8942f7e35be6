//! Hand-built records used by tests across the workspace.
//!
//! The `{look, watch, window}` instance is the canonical worked example:
//! fifteen `RelatedTo` relations, four of which an annotator removed.

use std::collections::BTreeMap;

use crate::model::{
    AnnotatedSentence, Annotation, Concept, ConceptSet, FailureVariant, FilterDecision,
    GeneratedSentence, GenerationCondition, KitgiRecord, KnowledgeBundle, RawLabel, Relation,
    RelationId, RelationType, Timestamp, Verdict,
};

pub const LOOK_TAILS: [&str; 5] = ["see", "glance", "eyes", "seeing", "view"];
pub const WATCH_TAILS: [&str; 5] = ["time", "wrist", "clock", "look", "clook"];
pub const WINDOW_TAILS: [&str; 5] = ["glass", "opening", "looking", "house", "wall"];

/// `(head, tail)` pairs removed in the worked example.
pub const LOOK_WATCH_WINDOW_REMOVED: [(&str, &str); 4] = [
    ("look", "see"),
    ("look", "seeing"),
    ("watch", "look"),
    ("window", "looking"),
];

pub fn fixed_time() -> Timestamp {
    "2025-01-01T00:00:00Z".parse().expect("literal timestamp")
}

fn related_to(head: &str, tails: &[&str]) -> Vec<Relation> {
    let head = Concept::new(head).expect("literal concept");
    tails
        .iter()
        .enumerate()
        .map(|(rank, tail)| {
            Relation::new(
                head.clone(),
                RelationType::RelatedTo,
                *tail,
                Some(10.0 - rank as f64),
                rank as u8,
            )
        })
        .collect()
}

pub fn look_watch_window_set() -> ConceptSet {
    ConceptSet::from_words(&["look", "watch", "window"]).expect("literal concept set")
}

/// The fifteen retrieved relations, weights 10, 9, ... within each concept.
pub fn look_watch_window_bundle() -> KnowledgeBundle {
    [
        ("look", &LOOK_TAILS),
        ("watch", &WATCH_TAILS),
        ("window", &WINDOW_TAILS),
    ]
    .into_iter()
    .map(|(head, tails)| {
        (
            Concept::new(head).expect("literal concept"),
            related_to(head, tails),
        )
    })
    .collect()
}

pub fn look_watch_window_removed_ids() -> Vec<RelationId> {
    LOOK_WATCH_WINDOW_REMOVED
        .iter()
        .map(|(head, tail)| {
            RelationId::derive(
                &Concept::new(*head).unwrap(),
                &RelationType::RelatedTo,
                tail,
            )
        })
        .collect()
}

pub fn look_watch_window_decisions(annotator: &str) -> Vec<FilterDecision> {
    let removed = look_watch_window_removed_ids();
    look_watch_window_bundle()
        .relations()
        .map(|r| {
            let verdict = if removed.contains(&r.id) {
                Verdict::Remove
            } else {
                Verdict::Keep
            };
            FilterDecision::human(r.id.clone(), verdict, annotator)
        })
        .collect()
}

pub fn sentence(text: &str, condition: GenerationCondition) -> GeneratedSentence {
    GeneratedSentence {
        text: text.to_string(),
        condition,
        backend_id: "fixture".to_string(),
        decode_params: BTreeMap::new(),
        created_at: fixed_time(),
    }
}

pub fn annotation(commonsense: u8, coverage: u8, variant: Option<FailureVariant>) -> Annotation {
    Annotation {
        commonsense,
        coverage,
        coverage_auto: Some(coverage),
        annotator_id: "fixture".to_string(),
        failure_variant: variant,
        note: None,
        created_at: fixed_time(),
    }
}

/// Fully annotated worked-example record. The filtered bundle is written out
/// by hand (ranks keep their gaps) rather than derived through the filter code.
pub fn look_watch_window() -> KitgiRecord {
    let mut record = KitgiRecord::new(look_watch_window_set());
    record.retrieved_knowledge = look_watch_window_bundle();
    record.filtered_knowledge = [
        ("look", vec![(1, "glance"), (2, "eyes"), (4, "view")]),
        (
            "watch",
            vec![(0, "time"), (1, "wrist"), (2, "clock"), (4, "clook")],
        ),
        (
            "window",
            vec![(0, "glass"), (1, "opening"), (3, "house"), (4, "wall")],
        ),
    ]
    .into_iter()
    .map(|(head, kept)| {
        let c = Concept::new(head).unwrap();
        let relations = kept
            .into_iter()
            .map(|(rank, tail)| {
                Relation::new(
                    c.clone(),
                    RelationType::RelatedTo,
                    tail,
                    Some(10.0 - rank as f64),
                    rank,
                )
            })
            .collect();
        (c, relations)
    })
    .collect();
    record.decisions = look_watch_window_decisions("fixture");

    let full = annotation(1, 1, None);
    let filtered = annotation(1, 0, Some(FailureVariant::MisleadingKnowledge));
    record.sentence_full = Some(AnnotatedSentence {
        sentence: sentence(
            "A man looks through the window to watch the birds.",
            GenerationCondition::FullKnowledge,
        ),
        annotation: Some(full.clone()),
    });
    record.sentence_filtered = Some(AnnotatedSentence {
        sentence: sentence(
            "A man is looking at a window.",
            GenerationCondition::FilteredKnowledge,
        ),
        annotation: Some(filtered.clone()),
    });
    record.annotations = vec![
        RawLabel {
            condition: GenerationCondition::FullKnowledge,
            annotation: full,
        },
        RawLabel {
            condition: GenerationCondition::FilteredKnowledge,
            annotation: filtered,
        },
    ];
    record
}

/// Hand-checked coverage outcomes: (sentence, concepts, concepts expected missing).
pub const COVERAGE_TABLE: [(&str, &[&str], &[&str]); 50] = [
    // regular inflection
    (
        "Two dogs chase a ball in the park.",
        &["dog", "chase", "park"],
        &[],
    ),
    (
        "She is running to the store.",
        &["run", "store", "she"],
        &[],
    ),
    (
        "The cook is baking bread in the oven.",
        &["bake", "bread", "oven"],
        &[],
    ),
    ("He jumped over the fence.", &["jump", "fence", "over"], &[]),
    (
        "The baby cried until her mother arrived.",
        &["cry", "baby", "arrive"],
        &[],
    ),
    (
        "Flies buzz around the fruit.",
        &["fly", "buzz", "fruit"],
        &[],
    ),
    (
        "They used a knife to cut the cake.",
        &["use", "knife", "cake"],
        &[],
    ),
    (
        "He is using a hammer on the nails.",
        &["use", "hammer", "nail"],
        &[],
    ),
    (
        "She watches the boxes on the shelf.",
        &["watch", "box", "shelf"],
        &[],
    ),
    (
        "The dishes were washed by the boy.",
        &["dish", "wash", "boy"],
        &[],
    ),
    (
        "The swimmer is swimming in the pool.",
        &["swim", "pool", "swimmer"],
        &[],
    ),
    (
        "The man stopped the car and hopped out.",
        &["stop", "hop", "car"],
        &[],
    ),
    ("The girl was hoping to win.", &["hope", "win", "girl"], &[]),
    (
        "She smiled at the camera.",
        &["smile", "camera", "she"],
        &[],
    ),
    (
        "He tied his shoes before leaving.",
        &["tie", "shoe", "leave"],
        &[],
    ),
    (
        "We watched movies about horses.",
        &["watch", "movie", "horse"],
        &[],
    ),
    (
        "The team agreed to serve dinner.",
        &["agree", "serve", "dinner"],
        &[],
    ),
    (
        "The waiter is serving two tables.",
        &["serve", "table", "waiter"],
        &[],
    ),
    (
        "The kids are playing and laughing.",
        &["play", "laugh", "kid"],
        &[],
    ),
    (
        "She carried the bags upstairs.",
        &["carry", "bag", "upstairs"],
        &[],
    ),
    (
        "Ice is melting on the roads.",
        &["ice", "melt", "road"],
        &[],
    ),
    (
        "The dog barked at the passing cars.",
        &["bark", "pass", "car"],
        &[],
    ),
    (
        "He kisses his wife and hugs the kids.",
        &["kiss", "hug", "wife"],
        &[],
    ),
    (
        "They are changing the tires.",
        &["change", "tire", "they"],
        &[],
    ),
    (
        "The students were arguing in class.",
        &["argue", "student", "class"],
        &[],
    ),
    ("BOATS SAIL ON THE LAKE.", &["boat", "sail", "lake"], &[]),
    // multiword concepts
    (
        "The girl licks an ice cream cone.",
        &["ice_cream", "cone", "lick"],
        &[],
    ),
    (
        "A boy eats ice-cream on the beach.",
        &["ice_cream", "beach", "eat"],
        &[],
    ),
    (
        "She put ice in the cream.",
        &["ice_cream", "put", "she"],
        &["ice_cream"],
    ),
    (
        "Cream and ice fill the bowl.",
        &["ice_cream", "bowl", "fill"],
        &["ice_cream"],
    ),
    (
        "The tennis balls bounce on the tennis court.",
        &["tennis_ball", "tennis_court", "bounce"],
        &[],
    ),
    (
        "They are taking pictures with a camera.",
        &["take_picture", "camera", "they"],
        &[],
    ),
    (
        "He is taking a picture of the sunset.",
        &["take_picture", "sunset", "he"],
        &["take_picture"],
    ),
    (
        "She takes pictures of the ocean.",
        &["take_picture", "ocean", "she"],
        &[],
    ),
    (
        "The fire truck stopped at the fire station.",
        &["fire_truck", "fire_station", "stop"],
        &[],
    ),
    (
        "The truck caught fire.",
        &["fire_truck", "catch", "the"],
        &["fire_truck", "catch"],
    ),
    // irregular forms are outside the suffix rules
    (
        "The children are dancing on the stage.",
        &["dance", "stage", "child"],
        &["child"],
    ),
    (
        "The leaves are falling from the tree.",
        &["fall", "tree", "leaf"],
        &["leaf"],
    ),
    ("The man ate an apple.", &["eat", "apple", "man"], &["eat"]),
    // absent, derived or substring-only
    ("A dog sits on the mat.", &["cat", "sit", "mat"], &["cat"]),
    (
        "The catalog lists every item.",
        &["cat", "list", "item"],
        &["cat"],
    ),
    (
        "The runner finished first.",
        &["run", "finish", "first"],
        &["run"],
    ),
    (
        "He tugged the rope hard.",
        &["pull", "rope", "hard"],
        &["pull"],
    ),
    (
        "A player scored a goal.",
        &["play", "score", "goal"],
        &["play"],
    ),
    (
        "She sings in the shower.",
        &["sing", "shower", "song"],
        &["song"],
    ),
    (
        "The boats are moored.",
        &["boat", "sail", "water"],
        &["sail", "water"],
    ),
    (
        "Nobody is here.",
        &["dog", "cat", "bird"],
        &["dog", "cat", "bird"],
    ),
    (
        "The bus stops at the station.",
        &["bus", "stop", "station"],
        &[],
    ),
    (
        "Birds nest in the trees.",
        &["bird", "nest", "forest"],
        &["forest"],
    ),
    (
        "The hopeful girl waits.",
        &["hope", "girl", "wait"],
        &["hope"],
    ),
];
