mod common;

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::sync::Arc;
use std::thread;

use common::*;
use kitgi_core::fixtures::look_watch_window_removed_ids;
use kitgi_core::{EvalMatrix, FailureVariant, GenerationCondition, Verdict};
use kitgi_service::{
    Event, LabelSubmission, ServiceError, Stage, TaskPayload, VerdictEntry, DEFAULT_LEASE_SECS,
    EVENTS_FILE,
};

fn label(annotator: &str, commonsense: u8) -> LabelSubmission {
    LabelSubmission {
        annotator_id: annotator.into(),
        commonsense,
        coverage_override: None,
        failure_variant: None,
        note: None,
    }
}

#[test]
fn worked_example_keeps_eleven_relations() {
    let dir = tempfile::tempdir().unwrap();
    let record = look_watch_window_fresh();
    let seed_path = seed(dir.path(), std::slice::from_ref(&record));
    let store = open(&dir.path().join("data"), Some(&seed_path), clock());

    let task = store
        .lease_task("ann-1", Stage::FilterRelations)
        .unwrap()
        .unwrap();
    let TaskPayload::Filter {
        knowledge,
        suggestions,
        ..
    } = &task.payload
    else {
        panic!("filter payload")
    };
    assert_eq!(knowledge.len(), 15);
    assert!(!suggestions.is_empty());

    let mut submission = keep_all(&record, "ann-1");
    let removed = look_watch_window_removed_ids();
    for entry in &mut submission.decisions {
        if removed.contains(&entry.relation_id) {
            entry.verdict = Verdict::Remove;
        }
    }
    let accepted = store
        .submit_filter_decisions(&task.task_id.to_string(), submission)
        .unwrap();
    assert_eq!(accepted.filtered_relations, Some(11));
    assert!(!accepted.duplicate);

    let stored = store.record(record.id()).unwrap();
    assert_eq!(stored.retrieved_knowledge.len(), 15);
    assert_eq!(stored.filtered_knowledge.len(), 11);
    assert!(removed
        .iter()
        .all(|id| !stored.filtered_knowledge.contains_id(id)));
    assert!(store
        .lease_task("ann-1", Stage::FilterRelations)
        .unwrap()
        .is_none());
}

#[test]
fn partial_submission_names_undecided_relations() {
    let dir = tempfile::tempdir().unwrap();
    let record = look_watch_window_fresh();
    let seed_path = seed(dir.path(), std::slice::from_ref(&record));
    let store = open(&dir.path().join("data"), Some(&seed_path), clock());
    let task = store
        .lease_task("ann-1", Stage::FilterRelations)
        .unwrap()
        .unwrap();

    let mut submission = keep_all(&record, "ann-1");
    let dropped: Vec<_> = submission
        .decisions
        .drain(..3)
        .map(|e| e.relation_id)
        .collect();
    match store.submit_filter_decisions(&task.task_id.to_string(), submission) {
        Err(ServiceError::Undecided(ids)) => assert_eq!(ids, dropped),
        other => panic!("expected Undecided, got {other:?}"),
    }

    let mut submission = keep_all(&record, "ann-1");
    submission.decisions.push(VerdictEntry {
        relation_id: "look/RelatedTo/banana".into(),
        verdict: Verdict::Remove,
        rationale: None,
    });
    assert!(matches!(
        store.submit_filter_decisions(&task.task_id.to_string(), submission),
        Err(ServiceError::UnknownRelation(_))
    ));
    assert_eq!(
        store.record(record.id()).unwrap().filtered_knowledge.len(),
        15
    );
}

#[test]
fn label_without_all_concepts_records_commonsense_only() {
    let dir = tempfile::tempdir().unwrap();
    let record = with_sentence(
        dog_pull_race(),
        "The dog pulls a sled.",
        GenerationCondition::NoKnowledge,
    );
    let seed_path = seed(dir.path(), std::slice::from_ref(&record));
    let store = open(&dir.path().join("data"), Some(&seed_path), clock());

    let task = store
        .lease_task("ann-2", Stage::LabelSentence)
        .unwrap()
        .unwrap();
    assert_eq!(
        task.task_id.to_string(),
        format!("label-none-{}", record.id())
    );
    let TaskPayload::Label { coverage_auto, .. } = &task.payload else {
        panic!("label payload")
    };
    assert_eq!(coverage_auto.bit, 0);

    let accepted = store
        .submit_label(&task.task_id.to_string(), label("ann-2", 1))
        .unwrap();
    let annotation = accepted.annotation.unwrap();
    assert_eq!((annotation.commonsense, annotation.coverage), (1, 0));
    assert_eq!(annotation.coverage_auto, Some(0));

    let progress = store.progress();
    assert_eq!(
        progress.matrices["NoKnowledge"],
        EvalMatrix::from_cells(0, 1, 0, 0)
    );
}

#[test]
fn label_rules_are_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let record = with_sentence(
        dog_pull_race(),
        "The dog pulls a sled in the race.",
        GenerationCondition::NoKnowledge,
    );
    let seed_path = seed(dir.path(), std::slice::from_ref(&record));
    let store = open(&dir.path().join("data"), Some(&seed_path), clock());
    let id = format!("label-none-{}", record.id());

    assert!(matches!(
        store.submit_label(&id, label("ann", 2)),
        Err(ServiceError::InvalidLabel(_))
    ));
    let mut variant = label("ann", 1);
    variant.failure_variant = Some(FailureVariant::UnhelpfulKnowledge);
    assert!(matches!(
        store.submit_label(&id, variant),
        Err(ServiceError::InvalidLabel(_))
    ));
    assert!(matches!(
        store.submit_label(&id, label("ann", 1)),
        Err(ServiceError::NotLeased(_))
    ));
    assert!(matches!(
        store.submit_label(&format!("label-full-{}", record.id()), label("ann", 1)),
        Err(ServiceError::NotOpen(_))
    ));
    assert!(matches!(
        store.submit_filter_decisions(&id, keep_all(&record, "ann")),
        Err(ServiceError::WrongStage(_))
    ));
    assert!(matches!(
        store.submit_label("label-none-cs-missing", label("ann", 1)),
        Err(ServiceError::UnknownTask(_))
    ));
    assert!(matches!(
        store.lease_task(" ", Stage::LabelSentence),
        Err(ServiceError::EmptyAnnotator)
    ));
}

#[test]
fn resubmission_is_idempotent_and_conflicts_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let record = look_watch_window_fresh();
    let seed_path = seed(dir.path(), std::slice::from_ref(&record));
    let data = dir.path().join("data");
    let store = open(&data, Some(&seed_path), clock());
    let task = store
        .lease_task("ann-1", Stage::FilterRelations)
        .unwrap()
        .unwrap()
        .task_id
        .to_string();

    let first = store
        .submit_filter_decisions(&task, keep_all(&record, "ann-1"))
        .unwrap();
    let again = store
        .submit_filter_decisions(&task, keep_all(&record, "ann-1"))
        .unwrap();
    assert!(again.duplicate);
    assert_eq!(first.filtered_relations, again.filtered_relations);
    let events = std::fs::read_to_string(data.join(EVENTS_FILE)).unwrap();
    assert_eq!(events.lines().count(), 2);

    let mut different = keep_all(&record, "ann-1");
    different.decisions[0].verdict = Verdict::Remove;
    assert!(matches!(
        store.submit_filter_decisions(&task, different),
        Err(ServiceError::AlreadyCompleted(_))
    ));
}

#[test]
fn expired_lease_is_reassigned() {
    let dir = tempfile::tempdir().unwrap();
    let record = look_watch_window_fresh();
    let seed_path = seed(dir.path(), std::slice::from_ref(&record));
    let clock = clock();
    let store = open(&dir.path().join("data"), Some(&seed_path), clock.clone());

    let first = store
        .lease_task("slow", Stage::FilterRelations)
        .unwrap()
        .unwrap();
    assert!(store
        .lease_task("fast", Stage::FilterRelations)
        .unwrap()
        .is_none());
    assert_eq!(
        store
            .lease_task("slow", Stage::FilterRelations)
            .unwrap()
            .unwrap()
            .task_id,
        first.task_id
    );

    clock.advance(DEFAULT_LEASE_SECS);
    let second = store
        .lease_task("fast", Stage::FilterRelations)
        .unwrap()
        .unwrap();
    assert_eq!(second.task_id, first.task_id);
    assert_eq!(second.assignee, "fast");

    let id = first.task_id.to_string();
    match store.submit_filter_decisions(&id, keep_all(&record, "slow")) {
        Err(ServiceError::NotLeaseHolder { holder, .. }) => assert_eq!(holder, "fast"),
        other => panic!("expected NotLeaseHolder, got {other:?}"),
    }
    clock.advance(DEFAULT_LEASE_SECS + 1);
    assert!(matches!(
        store.submit_filter_decisions(&id, keep_all(&record, "fast")),
        Err(ServiceError::LeaseExpired(_))
    ));
    assert_eq!(store.progress().stages[&Stage::FilterRelations].open, 1);
}

#[test]
fn restart_replays_acknowledged_work() {
    let dir = tempfile::tempdir().unwrap();
    let records = synthetic(6);
    let seed_path = seed(dir.path(), &records);
    let data = dir.path().join("data");
    let clock = clock();
    {
        let store = open(&data, Some(&seed_path), clock.clone());
        for _ in 0..4 {
            let task = store
                .lease_task("ann", Stage::FilterRelations)
                .unwrap()
                .unwrap();
            let record = store.record(&task.record_id).unwrap();
            let mut submission = keep_all(&record, "ann");
            submission.decisions[0].verdict = Verdict::Remove;
            store
                .submit_filter_decisions(&task.task_id.to_string(), submission)
                .unwrap();
        }
        store
            .lease_task("ann", Stage::FilterRelations)
            .unwrap()
            .unwrap();
    }
    let store = open(&data, None, clock);
    let progress = store.progress();
    let counts = progress.stages[&Stage::FilterRelations];
    assert_eq!(
        (counts.total, counts.completed, counts.leased, counts.open),
        (6, 4, 1, 1)
    );
    let filtered: Vec<usize> = store
        .records()
        .iter()
        .map(|r| r.filtered_knowledge.len())
        .collect();
    assert_eq!(filtered, vec![2, 2, 2, 2, 3, 3]);
    let held = store
        .lease_task("ann", Stage::FilterRelations)
        .unwrap()
        .unwrap();
    assert_eq!(held.record_id, records[4].id());
}

#[test]
fn torn_final_line_is_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let records = synthetic(2);
    let seed_path = seed(dir.path(), &records);
    let data = dir.path().join("data");
    {
        let store = open(&data, Some(&seed_path), clock());
        let task = store
            .lease_task("ann", Stage::FilterRelations)
            .unwrap()
            .unwrap();
        store
            .submit_filter_decisions(&task.task_id.to_string(), keep_all(&records[0], "ann"))
            .unwrap();
    }
    let log = data.join(EVENTS_FILE);
    let intact = std::fs::read_to_string(&log).unwrap();
    OpenOptions::new()
        .append(true)
        .open(&log)
        .unwrap()
        .write_all(b"{\"event\":\"Leased\",\"task_id\":\"fil")
        .unwrap();

    let store = open(&data, None, clock());
    assert_eq!(std::fs::read_to_string(&log).unwrap(), intact);
    assert_eq!(
        store.progress().stages[&Stage::FilterRelations].completed,
        1
    );
    let task = store
        .lease_task("ann", Stage::FilterRelations)
        .unwrap()
        .unwrap();
    assert_eq!(task.record_id, records[1].id());
}

#[test]
fn corrupt_interior_line_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let records = synthetic(1);
    let seed_path = seed(dir.path(), &records);
    let data = dir.path().join("data");
    {
        let store = open(&data, Some(&seed_path), clock());
        store
            .lease_task("ann", Stage::FilterRelations)
            .unwrap()
            .unwrap();
    }
    let log = data.join(EVENTS_FILE);
    let body = std::fs::read_to_string(&log).unwrap();
    std::fs::write(&log, format!("garbage\n{body}")).unwrap();
    let result = kitgi_service::Store::open(&data, None, clock(), DEFAULT_LEASE_SECS);
    assert!(matches!(
        result,
        Err(ServiceError::CorruptLog { line: 1, .. })
    ));
}

#[test]
fn empty_corpus_reports_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(&dir.path().join("data"), None, clock());
    let progress = store.progress();
    assert_eq!(progress.records, 0);
    assert!(progress
        .stages
        .values()
        .all(|c| c.total == 0 && c.completed == 0));
    assert!(progress.label_conditions.is_empty());
    assert!(progress
        .matrices
        .values()
        .all(|m| *m == EvalMatrix::default()));
    assert!(store
        .lease_task("ann", Stage::FilterRelations)
        .unwrap()
        .is_none());
    assert!(store
        .lease_task("ann", Stage::LabelSentence)
        .unwrap()
        .is_none());
    assert_eq!(store.export(), "");
}

#[test]
fn concurrent_annotators_never_share_a_task() {
    let dir = tempfile::tempdir().unwrap();
    let records = synthetic(200);
    let seed_path = seed(dir.path(), &records);
    let data = dir.path().join("data");
    let store = Arc::new(open(&data, Some(&seed_path), clock()));

    let handles: Vec<_> = (0..8)
        .map(|n| {
            let store = store.clone();
            thread::spawn(move || {
                let annotator = format!("ann-{n}");
                let mut done = Vec::new();
                while let Some(task) = store
                    .lease_task(&annotator, Stage::FilterRelations)
                    .unwrap()
                {
                    let record = store.record(&task.record_id).unwrap();
                    store
                        .submit_filter_decisions(
                            &task.task_id.to_string(),
                            keep_all(&record, &annotator),
                        )
                        .unwrap();
                    done.push(task.task_id.to_string());
                }
                done
            })
        })
        .collect();
    let mut seen = HashMap::new();
    for handle in handles {
        for task in handle.join().unwrap() {
            *seen.entry(task).or_insert(0) += 1;
        }
    }
    assert_eq!(seen.len(), 200);
    assert!(seen.values().all(|&n| n == 1));

    let mut leases: HashMap<String, usize> = HashMap::new();
    for line in std::fs::read_to_string(data.join(EVENTS_FILE))
        .unwrap()
        .lines()
    {
        if let Event::Leased { task_id, .. } = serde_json::from_str(line).unwrap() {
            *leases.entry(task_id.to_string()).or_insert(0) += 1;
        }
    }
    assert_eq!(leases.len(), 200);
    assert!(leases.values().all(|&n| n == 1));
    assert_eq!(
        store.progress().stages[&Stage::FilterRelations].completed,
        200
    );
}

#[test]
fn export_contains_every_valid_record() {
    let dir = tempfile::tempdir().unwrap();
    let records = synthetic(3);
    let seed_path = seed(dir.path(), &records);
    let store = open(&dir.path().join("data"), Some(&seed_path), clock());
    let task = store
        .lease_task("ann", Stage::FilterRelations)
        .unwrap()
        .unwrap();
    store
        .submit_filter_decisions(&task.task_id.to_string(), keep_all(&records[0], "ann"))
        .unwrap();
    let exported: Vec<_> = store
        .export()
        .lines()
        .enumerate()
        .map(|(i, line)| kitgi_core::decode_record(line, i + 1).unwrap())
        .collect();
    assert_eq!(exported.len(), 3);
    assert_eq!(exported[0].decisions.len(), 3);
    assert_eq!(exported, store.records());
}
