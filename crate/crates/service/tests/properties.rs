mod common;

use common::*;
use kitgi_core::Verdict;
use kitgi_service::Stage;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// Any full verdict vector leaves exactly the kept relations, and a
    /// reopened store replays to the same record.
    #[test]
    fn filter_submission_survives_restart(removed in proptest::collection::vec(any::<bool>(), 15)) {
        let dir = scratch();
        let record = look_watch_window_fresh();
        let seed_path = seed(dir.path(), std::slice::from_ref(&record));
        let data = dir.path().join("data");
        let store = open(&data, Some(&seed_path), clock());
        let task = store.lease_task("ann", Stage::FilterRelations).unwrap().unwrap();
        let mut submission = keep_all(&record, "ann");
        for (entry, remove) in submission.decisions.iter_mut().zip(&removed) {
            if *remove {
                entry.verdict = Verdict::Remove;
            }
        }
        let accepted = store.submit_filter_decisions(&task.task_id.to_string(), submission.clone()).unwrap();
        let kept = removed.iter().filter(|r| !**r).count();
        prop_assert_eq!(accepted.filtered_relations, Some(kept));
        let before = store.record(record.id()).unwrap();
        drop(store);

        let reopened = open(&data, None, clock());
        prop_assert_eq!(reopened.record(record.id()).unwrap(), before);
        let again = reopened.submit_filter_decisions(&task.task_id.to_string(), submission).unwrap();
        prop_assert!(again.duplicate);
    }
}
