//! Builds the vendored 121-record evaluation corpus.
//!
//! The ten named concept sets take their knowledge from the offline fixture
//! graph and carry hand-written sentences. The other 111 records are
//! synthetic, constructed so the corpus aggregates hit fixed targets:
//! per-type retrieved and removed relation counts, and the 2x2 label cells
//! for full and filtered knowledge.
//!
//! ```text
//! cargo run -p kitgi-cli --example synthesize_corpus [OUT]
//! ```

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use kitgi_conceptnet::{ClientConfig, ConceptNetClient};
use kitgi_core::apply_decisions;
use kitgi_core::fixtures::{fixed_time, look_watch_window_removed_ids};
use kitgi_core::{
    check_coverage, import_commongen, relation_counts, save_dataset, AnnotatedSentence, Annotation,
    BundleKind, Concept, ConceptSet, FailureVariant, FilterDecision, GeneratedSentence,
    GenerationCondition, KitgiRecord, KnowledgeBundle, RawLabel, Relation, RelationType, Verdict,
};

const RECORDS: usize = 121;

/// (type, retrieved, removed)
const RELATION_TARGETS: &[(&str, usize, usize)] = &[
    ("RelatedTo", 660, 352),
    ("AtLocation", 212, 54),
    ("IsA", 137, 45),
    ("Synonym", 131, 22),
    ("Antonym", 80, 20),
    ("UsedFor", 75, 39),
    ("CapableOf", 60, 30),
    ("HasContext", 55, 10),
    ("PartOf", 50, 25),
    ("HasA", 45, 20),
    ("HasProperty", 40, 17),
    ("DerivedFrom", 40, 6),
    ("Causes", 30, 15),
    ("HasPrerequisite", 12, 3),
    ("HasSubevent", 8, 1),
];

/// Concept-set sizes over the whole corpus: (size, sets).
const SET_SIZES: [(usize, usize); 3] = [(3, 70), (4, 35), (5, 16)];

/// Filtered-knowledge cells n11, n10, n01, n00 and full-knowledge n11, n10.
const FILTERED_CELLS: [usize; 4] = [8, 34, 25, 54];
const FULL_CELLS: [usize; 2] = [111, 10];

const VOCABULARY: &[&str] = &[
    "bread", "oven", "bake", "guitar", "play", "stage", "snow", "shovel", "driveway", "bike",
    "ride", "street", "coffee", "cup", "pour", "paint", "wall", "brush", "fish", "net", "catch",
    "lake", "swim", "pool", "dive", "flower", "garden", "water", "teacher", "student", "class",
    "write", "pen", "paper", "train", "station", "wait", "rain", "umbrella", "walk", "baby", "cry",
    "mother", "hold", "kitchen", "cook", "dinner", "table", "chair", "sit", "floor", "clean",
    "mop", "shirt", "iron", "wear", "hat", "beach", "sand", "wave", "surf", "board", "mountain",
    "climb", "rope", "tent", "camp", "fire", "wood", "chop", "axe", "farmer", "plant", "seed",
    "soil", "horse", "saddle", "barn", "cow", "milk", "bucket", "ice", "skate", "rink", "hockey",
    "puck", "goal", "score", "team", "player", "crowd", "cheer", "song", "sing", "dance", "music",
    "drum", "beat", "camera", "photo", "smile",
];

const TAILS: &[&str] = &[
    "thing", "object", "place", "home", "city", "food", "tool", "person", "animal", "color",
    "sound", "light", "motion", "work", "fun", "sport", "nature", "weather", "building", "vehicle",
    "hand", "foot", "heat", "cold", "energy", "time", "money", "shape", "group", "event",
];

/// Hand-written sentences for the named sets, in fixture-file order:
/// (full, filtered, filtered commonsense, filtered coverage, variant).
const NAMED: [(&str, &str, u8, u8, Option<FailureVariant>); 10] = [
    (
        "A dog pulls a sled to win the race.",
        "A dog is racing against another dog in a race.",
        1,
        0,
        Some(FailureVariant::SlightConnection),
    ),
    (
        "A man looks through the window to watch the birds.",
        "A man is looking at a window.",
        1,
        0,
        Some(FailureVariant::MisleadingKnowledge),
    ),
    (
        "They sail the boat on a sunny day.",
        "The day sails on a boat of water.",
        0,
        1,
        Some(FailureVariant::UnhelpfulKnowledge),
    ),
    (
        "The boy jumps off the wall and falls to the ground.",
        "The kids jump and fall on the ground.",
        1,
        1,
        None,
    ),
    (
        "He cannot drive the car while using his phone.",
        "The car drives the road to a car.",
        0,
        0,
        Some(FailureVariant::MisleadingKnowledge),
    ),
    (
        "He makes an attempt to throw the knife and the stick over the fence.",
        "The fence attempts to throw a stick at the knife.",
        0,
        1,
        Some(FailureVariant::SlightConnection),
    ),
    (
        "The cat likes to sleep on the sofa.",
        "The cat sleeps on the sofa.",
        1,
        1,
        None,
    ),
    (
        "She climbs the tree to eat an apple.",
        "The tree eats the sky.",
        0,
        0,
        Some(FailureVariant::SlightConnection),
    ),
    (
        "He kicks the ball across the field.",
        "The boy kicks the ball.",
        1,
        0,
        Some(FailureVariant::UnhelpfulKnowledge),
    ),
    (
        "I read a book in the library.",
        "The library reads a shelf.",
        0,
        0,
        Some(FailureVariant::UnhelpfulKnowledge),
    ),
];

/// Marks `take` of `n` positions, spread evenly.
fn spread(n: usize, take: usize) -> Vec<bool> {
    (0..n).map(|i| (i + 1) * take / n > i * take / n).collect()
}

/// `counts[k]` copies of each index `k`, interleaved evenly.
fn interleave(counts: &[usize]) -> Vec<usize> {
    let mut slots: Vec<(f64, usize)> = Vec::new();
    for (k, &c) in counts.iter().enumerate() {
        for i in 0..c {
            slots.push(((i as f64 + 0.5) / c as f64, k));
        }
    }
    slots.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    slots.into_iter().map(|(_, k)| k).collect()
}

fn synthetic_sets(named: &[ConceptSet]) -> Vec<ConceptSet> {
    let mut sizes: Vec<(usize, usize)> = SET_SIZES.to_vec();
    for set in named {
        let slot = sizes
            .iter_mut()
            .find(|(s, _)| *s == set.len())
            .expect("named set size is listed");
        slot.1 -= 1;
    }
    let order = interleave(&sizes.iter().map(|(_, n)| *n).collect::<Vec<_>>());
    let n = VOCABULARY.len();
    let mut seen: HashSet<String> = named.iter().map(|s| s.id.clone()).collect();
    let mut out = Vec::new();
    for (k, size_index) in order.into_iter().enumerate() {
        let size = sizes[size_index].0;
        let mut stride = 13;
        loop {
            let words: Vec<&str> = (0..size)
                .map(|j| VOCABULARY[(k * 7 + j * stride) % n])
                .collect();
            let set = ConceptSet::from_words(&words).expect("vocabulary words are valid concepts");
            if seen.insert(set.id.clone()) {
                out.push(set);
                break;
            }
            stride += 1;
        }
    }
    out
}

fn synthetic_bundles(
    sets: &[ConceptSet],
    budgets: &BTreeMap<RelationType, usize>,
) -> Vec<KnowledgeBundle> {
    let concepts: usize = sets.iter().map(ConceptSet::len).sum();
    let total: usize = budgets.values().sum();
    let types: Vec<&RelationType> = budgets.keys().collect();
    let mut sequence = interleave(&budgets.values().copied().collect::<Vec<_>>()).into_iter();
    let mut tail = 0usize;
    let mut concept_index = 0usize;
    sets.iter()
        .map(|set| {
            set.iter()
                .map(|c| {
                    let count =
                        (concept_index + 1) * total / concepts - concept_index * total / concepts;
                    concept_index += 1;
                    let mut used = HashSet::new();
                    let relations = (0..count)
                        .map(|rank| {
                            let rel =
                                types[sequence.next().expect("budget covers every slot")].clone();
                            let mut word = TAILS[tail % TAILS.len()];
                            tail += 1;
                            while !used.insert((rel.clone(), word)) {
                                word = TAILS[tail % TAILS.len()];
                                tail += 1;
                            }
                            let weight = 5.0 - rank as f64 * 0.5;
                            Relation::new(c.clone(), rel, word, Some(weight), rank as u8)
                        })
                        .collect();
                    (c.clone(), relations)
                })
                .collect()
        })
        .collect()
}

fn sentence(text: &str, condition: GenerationCondition, index: usize) -> GeneratedSentence {
    GeneratedSentence {
        text: text.to_string(),
        condition,
        backend_id: "t5-large".to_string(),
        decode_params: BTreeMap::from([("model".to_string(), "t5-large".to_string())]),
        created_at: fixed_time().plus_seconds(index as i64 * 60),
    }
}

fn label(
    record: &mut KitgiRecord,
    index: usize,
    condition: GenerationCondition,
    text: &str,
    bits: (u8, u8),
    variant: Option<FailureVariant>,
) {
    let auto = check_coverage(text, &record.concept_set).bit;
    assert_eq!(
        auto,
        bits.1,
        "{}: coverage of {text:?} under {}",
        record.id(),
        condition.token()
    );
    let annotation = Annotation {
        commonsense: bits.0,
        coverage: bits.1,
        coverage_auto: Some(auto),
        annotator_id: format!("ann-{}", index % 3 + 1),
        failure_variant: variant,
        note: None,
        created_at: fixed_time().plus_seconds(index as i64 * 60 + 3600),
    };
    record.annotations.push(RawLabel {
        condition,
        annotation: annotation.clone(),
    });
    *record.sentence_slot(condition) = Some(AnnotatedSentence {
        sentence: sentence(text, condition, index),
        annotation: Some(annotation),
    });
}

fn words(set: &ConceptSet, keep: usize) -> Vec<String> {
    set.iter().take(keep).map(Concept::spaced).collect()
}

fn plausible(set: &ConceptSet, covered: bool) -> String {
    let keep = if covered { set.len() } else { set.len() - 1 };
    format!(
        "Someone sees the {} at once.",
        words(set, keep).join(", the ")
    )
}

fn implausible(set: &ConceptSet, covered: bool) -> String {
    let keep = if covered { set.len() } else { set.len() - 1 };
    let mut w = words(set, keep);
    w.reverse();
    format!("The {} float over the moon.", w.join(" and the "))
}

#[tokio::main]
async fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| root.join("kitgi_121.jsonl"));

    let named_sets = import_commongen(&root.join("commongen_10.txt"))
        .expect("named sets")
        .sets;
    assert_eq!(named_sets.len(), NAMED.len());
    let client = ConceptNetClient::new(ClientConfig {
        fixture_dir: Some(root.join("kg")),
        ..ClientConfig::default()
    })
    .expect("fixture client");
    let mut records = Vec::with_capacity(RECORDS);
    for set in &named_sets {
        let mut record = KitgiRecord::new(set.clone());
        record.set_knowledge(client.build_bundle(set, 5).await.expect("fixture bundle"));
        records.push(record);
    }

    let targets: BTreeMap<RelationType, (usize, usize)> = RELATION_TARGETS
        .iter()
        .map(|(t, r, d)| (RelationType::parse(t), (*r, *d)))
        .collect();
    let named_counts = relation_counts(&records, BundleKind::Retrieved);
    let budgets: BTreeMap<RelationType, usize> = targets
        .iter()
        .map(|(t, (retrieved, _))| {
            (
                t.clone(),
                retrieved - named_counts.get(t).copied().unwrap_or(0),
            )
        })
        .collect();
    let synthetic = synthetic_sets(&named_sets);
    for (set, bundle) in synthetic
        .iter()
        .zip(synthetic_bundles(&synthetic, &budgets))
    {
        let mut record = KitgiRecord::new(set.clone());
        record.set_knowledge(bundle);
        records.push(record);
    }
    assert_eq!(records.len(), RECORDS);

    // Removals: the worked example's four, then each type's budget spread
    // evenly over that type's remaining relations.
    let fixed_removals = look_watch_window_removed_ids();
    let worked = records
        .iter()
        .position(|r| r.id() == named_sets[1].id)
        .expect("worked example present");
    let mut removed_left: BTreeMap<RelationType, usize> =
        targets.iter().map(|(t, (_, d))| (t.clone(), *d)).collect();
    *removed_left.get_mut(&RelationType::RelatedTo).unwrap() -= fixed_removals.len();
    let mut candidates: BTreeMap<RelationType, Vec<(usize, kitgi_core::RelationId)>> =
        BTreeMap::new();
    for (i, record) in records.iter().enumerate().filter(|(i, _)| *i != worked) {
        for r in record.retrieved_knowledge.relations() {
            candidates
                .entry(r.rel.clone())
                .or_default()
                .push((i, r.id.clone()));
        }
    }
    let mut removals: Vec<HashSet<kitgi_core::RelationId>> = vec![HashSet::new(); records.len()];
    removals[worked].extend(fixed_removals);
    for (rel, list) in &candidates {
        for ((i, id), take) in list.iter().zip(spread(list.len(), removed_left[rel])) {
            if take {
                removals[*i].insert(id.clone());
            }
        }
    }
    for (i, record) in records.iter_mut().enumerate() {
        let decisions: Vec<FilterDecision> = record
            .retrieved_knowledge
            .relations()
            .map(|r| {
                let verdict = if removals[i].contains(&r.id) {
                    Verdict::Remove
                } else {
                    Verdict::Keep
                };
                FilterDecision::human(r.id.clone(), verdict, &format!("ann-{}", i % 3 + 1))
            })
            .collect();
        apply_decisions(record, decisions).expect("decisions cover the retrieved bundle");
    }

    // Labels. Named records first, then the synthetic ones fill the cells.
    let mut filtered_left = FILTERED_CELLS;
    for (_, _, cs, cov, _) in NAMED {
        filtered_left[usize::from(1 - cs) * 2 + usize::from(1 - cov)] -= 1;
    }
    let synthetic_n = RECORDS - NAMED.len();
    let filtered_cells = interleave(&filtered_left);
    let full_misses = spread(synthetic_n, FULL_CELLS[1]);
    let variants = [
        FailureVariant::MisleadingKnowledge,
        FailureVariant::UnhelpfulKnowledge,
        FailureVariant::SlightConnection,
    ];
    let mut failures = 0usize;
    for (i, record) in records.iter_mut().enumerate() {
        let set = record.concept_set.clone();
        label(
            record,
            i,
            GenerationCondition::NoKnowledge,
            &implausible(&set, true),
            (0, 1),
            None,
        );
        if let Some((full, filtered, cs, cov, variant)) = NAMED.get(i) {
            label(
                record,
                i,
                GenerationCondition::FullKnowledge,
                full,
                (1, 1),
                None,
            );
            label(
                record,
                i,
                GenerationCondition::FilteredKnowledge,
                filtered,
                (*cs, *cov),
                *variant,
            );
            continue;
        }
        let j = i - NAMED.len();
        let full_cov = if full_misses[j] { 0 } else { 1 };
        label(
            record,
            i,
            GenerationCondition::FullKnowledge,
            &plausible(&set, full_cov == 1),
            (1, full_cov),
            None,
        );
        let cell = filtered_cells[j];
        let (cs, cov) = (1 - (cell / 2) as u8, 1 - (cell % 2) as u8);
        let text = if cs == 1 {
            plausible(&set, cov == 1)
        } else {
            implausible(&set, cov == 1)
        };
        let variant = (cell != 0).then(|| {
            failures += 1;
            variants[failures % variants.len()]
        });
        label(
            record,
            i,
            GenerationCondition::FilteredKnowledge,
            &text,
            (cs, cov),
            variant,
        );
    }

    save_dataset(&records, &out).expect("write corpus");
    println!("wrote {} records to {}", records.len(), out.display());
}
