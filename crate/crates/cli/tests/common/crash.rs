//! Several annotators work the filter queue over HTTP; the server is
//! SIGKILLed mid-run and restarted on the same data directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use kitgi_core::{
    save_dataset, Concept, ConceptSet, KitgiRecord, KnowledgeBundle, Relation, RelationType,
};
use serde_json::{json, Value};

use super::ServeProcess;

pub const ANNOTATORS: usize = 8;

#[derive(Debug)]
pub struct CrashReport {
    pub tasks: usize,
    /// Submissions answered with 200 before the kill.
    pub acknowledged: usize,
    /// Filter tasks completed right after the restart.
    pub completed_after_restart: usize,
    pub completed_at_end: usize,
    /// Tasks leased to more than one annotator over the whole run.
    pub shared_leases: usize,
    /// Tasks with more than one accepted submission in the log.
    pub repeated_submissions: usize,
    /// Acknowledged tasks whose record lost its decisions.
    pub lost: usize,
    pub clean_shutdown: bool,
}

impl CrashReport {
    pub fn holds(&self) -> bool {
        self.acknowledged > 0
            && self.completed_after_restart >= self.acknowledged
            && self.completed_at_end == self.tasks
            && self.shared_leases == 0
            && self.repeated_submissions == 0
            && self.lost == 0
            && self.clean_shutdown
    }
}

fn records(n: usize) -> Vec<KitgiRecord> {
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

fn keep_all(task: &Value, annotator: &str) -> Value {
    let decisions: Vec<Value> = task["payload"]["knowledge"]
        .as_object()
        .into_iter()
        .flat_map(|m| m.values())
        .flat_map(|rels| rels.as_array().cloned().unwrap_or_default())
        .map(|r| json!({ "relation_id": r["id"], "verdict": "Keep" }))
        .collect();
    json!({ "annotator_id": annotator, "decisions": decisions })
}

/// Leases and submits until the queue is empty, `stop` is raised or the
/// server goes away. Returns the ids of acknowledged submissions.
async fn annotate(
    http: reqwest::Client,
    base: String,
    annotator: String,
    acked: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
) -> Vec<String> {
    let mut done = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        let Ok(res) = http
            .get(format!(
                "{base}/tasks/next?stage=FilterRelations&annotator={annotator}"
            ))
            .send()
            .await
        else {
            break;
        };
        if res.status() != 200 {
            break;
        }
        let Ok(task) = res.json::<Value>().await else {
            break;
        };
        let id = task["task_id"].as_str().unwrap().to_string();
        let Ok(res) = http
            .post(format!("{base}/tasks/{id}/decisions"))
            .json(&keep_all(&task, &annotator))
            .send()
            .await
        else {
            break;
        };
        if res.status() != 200 {
            break;
        }
        acked.fetch_add(1, Ordering::SeqCst);
        done.push(id);
    }
    done
}

async fn run_annotators(
    base: &str,
    acked: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
) -> Vec<tokio::task::JoinHandle<Vec<String>>> {
    let http = reqwest::Client::new();
    (0..ANNOTATORS)
        .map(|n| {
            tokio::spawn(annotate(
                http.clone(),
                base.to_string(),
                format!("ann-{n}"),
                acked.clone(),
                stop.clone(),
            ))
        })
        .collect()
}

async fn completed(base: &str) -> usize {
    let progress: Value = reqwest::get(format!("{base}/progress"))
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    progress["stages"]["FilterRelations"]["completed"]
        .as_u64()
        .unwrap() as usize
}

pub async fn crash_and_restart(dir: &Path, tasks: usize, kill_after: usize) -> CrashReport {
    let dataset = dir.join("seed.jsonl");
    save_dataset(&records(tasks), &dataset).unwrap();
    let data = dir.join("data");

    let server = ServeProcess::start(dir, &dataset, &data);
    let acked = Arc::new(AtomicUsize::new(0));
    let stop = Arc::new(AtomicBool::new(false));
    let workers = run_annotators(&server.base, acked.clone(), stop.clone()).await;
    while acked.load(Ordering::SeqCst) < kill_after {
        tokio::time::sleep(Duration::from_millis(2)).await;
    }
    server.kill();
    let mut acknowledged = BTreeSet::new();
    for w in workers {
        acknowledged.extend(w.await.unwrap());
    }

    let server = ServeProcess::start(dir, &dataset, &data);
    let completed_after_restart = completed(&server.base).await;
    let mut lost = 0;
    for id in &acknowledged {
        let record_id = id.strip_prefix("filter-").unwrap();
        let record: Value = reqwest::get(format!("{}/records/{record_id}", server.base))
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        let decided = record["decisions"]
            .as_array()
            .is_some_and(|d| !d.is_empty());
        if !decided {
            lost += 1;
        }
    }

    // The same names come back, so leases taken before the kill are reclaimed.
    let drain = run_annotators(&server.base, Arc::new(AtomicUsize::new(0)), stop).await;
    for w in drain {
        w.await.unwrap();
    }
    let completed_at_end = completed(&server.base).await;
    let clean_shutdown = server.terminate().success();

    let (shared_leases, repeated_submissions) = audit(&data);
    CrashReport {
        tasks,
        acknowledged: acknowledged.len(),
        completed_after_restart,
        completed_at_end,
        shared_leases,
        repeated_submissions,
        lost,
        clean_shutdown,
    }
}

/// (tasks leased to more than one annotator, tasks submitted more than once)
/// according to the event log.
pub fn audit(data: &Path) -> (usize, usize) {
    let mut leased: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut submitted: BTreeMap<String, usize> = BTreeMap::new();
    let log = std::fs::read_to_string(data.join("events.jsonl")).unwrap();
    for line in log.lines() {
        let event: Value = serde_json::from_str(line).unwrap();
        let task = event["task_id"].as_str().unwrap().to_string();
        match event["event"].as_str() {
            Some("Leased") => {
                leased
                    .entry(task)
                    .or_default()
                    .insert(event["annotator_id"].as_str().unwrap().to_string());
            }
            Some("FilterSubmitted") => *submitted.entry(task).or_default() += 1,
            _ => {}
        }
    }
    (
        leased.values().filter(|a| a.len() > 1).count(),
        submitted.values().filter(|&&n| n > 1).count(),
    )
}

#[derive(Debug)]
pub struct StressReport {
    pub tasks: usize,
    pub acknowledged: usize,
    pub completed: usize,
    pub shared_leases: usize,
    pub repeated_submissions: usize,
}

impl StressReport {
    pub fn holds(&self) -> bool {
        self.acknowledged == self.tasks
            && self.completed == self.tasks
            && self.shared_leases == 0
            && self.repeated_submissions == 0
    }
}

/// All annotators drain the queue against one uninterrupted server.
pub async fn stress(dir: &Path, tasks: usize) -> StressReport {
    let dataset = dir.join("seed.jsonl");
    save_dataset(&records(tasks), &dataset).unwrap();
    let data = dir.join("data");
    let server = ServeProcess::start(dir, &dataset, &data);
    let acked = Arc::new(AtomicUsize::new(0));
    let workers = run_annotators(
        &server.base,
        acked.clone(),
        Arc::new(AtomicBool::new(false)),
    )
    .await;
    for w in workers {
        w.await.unwrap();
    }
    let completed = completed(&server.base).await;
    server.terminate();
    let (shared_leases, repeated_submissions) = audit(&data);
    StressReport {
        tasks,
        acknowledged: acked.load(Ordering::SeqCst),
        completed,
        shared_leases,
        repeated_submissions,
    }
}
