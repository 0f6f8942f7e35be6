#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use kitgi_core::fixtures::{fixed_time, look_watch_window_bundle, look_watch_window_set, sentence};
use kitgi_core::{
    save_dataset, AnnotatedSentence, Concept, ConceptSet, GenerationCondition, KitgiRecord,
    KnowledgeBundle, Relation, RelationType, Verdict,
};
use kitgi_service::{DecisionSubmission, ManualClock, Store, VerdictEntry, DEFAULT_LEASE_SECS};

pub fn look_watch_window_fresh() -> KitgiRecord {
    let mut record = KitgiRecord::new(look_watch_window_set());
    record.set_knowledge(look_watch_window_bundle());
    record
}

pub fn dog_pull_race() -> KitgiRecord {
    let set = ConceptSet::from_words(&["dog", "pull", "race"]).unwrap();
    let mut record = KitgiRecord::new(set);
    let bundle: KnowledgeBundle = [("dog", "pet"), ("pull", "push"), ("race", "competition")]
        .into_iter()
        .map(|(head, tail)| {
            let c = Concept::new(head).unwrap();
            (
                c.clone(),
                vec![Relation::new(
                    c,
                    RelationType::RelatedTo,
                    tail,
                    Some(2.0),
                    0,
                )],
            )
        })
        .collect();
    record.set_knowledge(bundle);
    record
}

pub fn with_sentence(
    mut record: KitgiRecord,
    text: &str,
    condition: GenerationCondition,
) -> KitgiRecord {
    *record.sentence_slot(condition) = Some(AnnotatedSentence {
        sentence: sentence(text, condition),
        annotation: None,
    });
    record
}

/// `n` distinct three-concept records, each with one relation per concept.
pub fn synthetic(n: usize) -> Vec<KitgiRecord> {
    (0..n)
        .map(|i| {
            let words = [format!("alpha{i}"), format!("beta{i}"), format!("gamma{i}")];
            let refs: Vec<&str> = words.iter().map(String::as_str).collect();
            let mut record = KitgiRecord::new(ConceptSet::from_words(&refs).unwrap());
            let bundle: KnowledgeBundle = words
                .iter()
                .map(|w| {
                    let c = Concept::new(w.as_str()).unwrap();
                    (
                        c.clone(),
                        vec![Relation::new(c, RelationType::IsA, "thing", Some(1.0), 0)],
                    )
                })
                .collect();
            record.set_knowledge(bundle);
            record
        })
        .collect()
}

pub fn seed(dir: &Path, records: &[KitgiRecord]) -> std::path::PathBuf {
    let path = dir.join("seed.jsonl");
    save_dataset(records, &path).unwrap();
    path
}

pub fn clock() -> Arc<ManualClock> {
    Arc::new(ManualClock::new(fixed_time()))
}

pub fn open(data: &Path, seed: Option<&Path>, clock: Arc<ManualClock>) -> Store {
    Store::open(data, seed, clock, DEFAULT_LEASE_SECS).unwrap()
}

pub fn keep_all(record: &KitgiRecord, annotator: &str) -> DecisionSubmission {
    DecisionSubmission {
        annotator_id: annotator.to_string(),
        decisions: record
            .retrieved_knowledge
            .relations()
            .map(|r| VerdictEntry {
                relation_id: r.id.clone(),
                verdict: Verdict::Keep,
                rationale: None,
            })
            .collect(),
    }
}

/// Scratch directory on tmpfs when available, where syncs are cheap.
pub fn scratch() -> tempfile::TempDir {
    let shm = Path::new("/dev/shm");
    if shm.is_dir() {
        if let Ok(dir) = tempfile::tempdir_in(shm) {
            return dir;
        }
    }
    tempfile::tempdir().unwrap()
}
