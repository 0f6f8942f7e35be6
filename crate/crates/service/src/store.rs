//! Corpus state rebuilt from a base dataset plus an append-only event log.
//!
//! Every state change is first appended to `events.jsonl` and synced, then
//! applied in memory, so a crash never loses an acknowledged submission.
//! A torn final line (crash mid-write) is dropped on the next open.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use indexmap::IndexMap;
use kitgi_core::{
    apply_decisions, check_coverage, encode_record, load_dataset, save_dataset, suggest_removals,
    validate_record, Annotation, DecisionSource, EvalMatrix, FailureVariant, FilterDecision,
    GenerationCondition, KitgiRecord, RelationId, Timestamp, Verdict,
};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::tasks::{Stage, Task, TaskId, TaskPayload};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const DEFAULT_LEASE_SECS: i64 = 15 * 60;

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Timestamp::now()
    }
}

/// Settable clock for tests.
#[derive(Debug)]
pub struct ManualClock(Mutex<Timestamp>);

impl ManualClock {
    pub fn new(start: Timestamp) -> Self {
        ManualClock(Mutex::new(start))
    }

    pub fn advance(&self, secs: i64) {
        let mut t = self.0.lock().expect("clock lock");
        *t = t.plus_seconds(secs);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Timestamp {
        *self.0.lock().expect("clock lock")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictEntry {
    pub relation_id: RelationId,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionSubmission {
    pub annotator_id: String,
    pub decisions: Vec<VerdictEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSubmission {
    pub annotator_id: String,
    pub commonsense: u8,
    #[serde(default)]
    pub coverage_override: Option<u8>,
    #[serde(default)]
    pub failure_variant: Option<FailureVariant>,
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event")]
pub enum Event {
    Leased {
        task_id: TaskId,
        annotator_id: String,
        expires_at: Timestamp,
        at: Timestamp,
    },
    FilterSubmitted {
        task_id: TaskId,
        submission: DecisionSubmission,
        at: Timestamp,
    },
    LabelSubmitted {
        task_id: TaskId,
        submission: LabelSubmission,
        annotation: Annotation,
        at: Timestamp,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Accepted {
    pub task_id: TaskId,
    pub record_id: String,
    /// True when this exact submission had already been accepted.
    pub duplicate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filtered_relations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annotation: Option<Annotation>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StageCounts {
    pub total: usize,
    pub completed: usize,
    pub leased: usize,
    pub open: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Progress {
    pub records: usize,
    pub stages: IndexMap<Stage, StageCounts>,
    /// Label counts per condition token, for conditions whose stage is open.
    pub label_conditions: IndexMap<String, StageCounts>,
    /// Cells over the records annotated so far, per condition token.
    pub matrices: IndexMap<String, EvalMatrix>,
}

#[derive(Clone, Debug)]
struct Lease {
    annotator_id: String,
    expires_at: Timestamp,
}

struct State {
    records: IndexMap<String, KitgiRecord>,
    leases: HashMap<TaskId, Lease>,
    last_filter: HashMap<TaskId, DecisionSubmission>,
    last_label: HashMap<TaskId, LabelSubmission>,
    log: File,
    log_path: PathBuf,
}

pub struct Store {
    state: Mutex<State>,
    clock: Arc<dyn Clock>,
    lease_secs: i64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ServiceError + '_ {
    move |source| ServiceError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads complete events, truncating a torn or unparseable final line.
fn read_events(path: &Path) -> Result<Vec<Event>, ServiceError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut reader = BufReader::new(file);
    let mut events = Vec::new();
    let mut offset = 0u64;
    let mut line_no = 0;
    let mut buf = String::new();
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf).map_err(io_err(path))?;
        if n == 0 {
            return Ok(events);
        }
        line_no += 1;
        let complete = buf.ends_with('\n');
        if buf.trim().is_empty() && complete {
            offset += n as u64;
            continue;
        }
        match serde_json::from_str::<Event>(buf.trim_end()) {
            Ok(e) if complete => events.push(e),
            outcome => {
                let mut rest = String::new();
                reader.read_line(&mut rest).map_err(io_err(path))?;
                if !rest.is_empty() {
                    let message = outcome
                        .err()
                        .map_or_else(|| "unterminated line".to_string(), |e| e.to_string());
                    return Err(ServiceError::CorruptLog {
                        line: line_no,
                        message,
                    });
                }
                warn!("{}: dropping torn final line {line_no}", path.display());
                let file = OpenOptions::new()
                    .write(true)
                    .open(path)
                    .map_err(io_err(path))?;
                file.set_len(offset).map_err(io_err(path))?;
                file.sync_all().map_err(io_err(path))?;
                return Ok(events);
            }
        }
        offset += n as u64;
    }
}

impl State {
    fn append(&mut self, event: &Event) -> Result<(), ServiceError> {
        let mut line = serde_json::to_string(event).expect("events serialize");
        line.push('\n');
        let path = self.log_path.clone();
        self.log.write_all(line.as_bytes()).map_err(io_err(&path))?;
        self.log.sync_data().map_err(io_err(&path))?;
        Ok(())
    }

    fn apply(&mut self, event: Event) {
        match event {
            Event::Leased {
                task_id,
                annotator_id,
                expires_at,
                ..
            } => {
                self.leases.insert(
                    task_id,
                    Lease {
                        annotator_id,
                        expires_at,
                    },
                );
            }
            Event::FilterSubmitted {
                task_id,
                submission,
                ..
            } => {
                if let Some(record) = self.records.get_mut(task_id.record_id()) {
                    let mut decisions: Vec<FilterDecision> = record
                        .decisions
                        .iter()
                        .filter(|d| d.source != DecisionSource::Human)
                        .cloned()
                        .collect();
                    decisions.extend(submission.decisions.iter().map(|e| FilterDecision {
                        relation_id: e.relation_id.clone(),
                        verdict: e.verdict,
                        source: DecisionSource::Human,
                        annotator_id: submission.annotator_id.clone(),
                        rationale: e.rationale.clone(),
                    }));
                    if let Err(e) = apply_decisions(record, decisions) {
                        warn!("skipping filter event for {task_id}: {e}");
                    }
                }
                self.leases.remove(&task_id);
                self.last_filter.insert(task_id, submission);
            }
            Event::LabelSubmitted {
                task_id,
                submission,
                annotation,
                ..
            } => {
                if let TaskId::Label(condition, record_id) = &task_id {
                    if let Some(record) = self.records.get_mut(record_id) {
                        if let Err(e) = record.record_label(*condition, annotation) {
                            warn!("skipping label event for {task_id}: {e}");
                        }
                    }
                }
                self.leases.remove(&task_id);
                self.last_label.insert(task_id, submission);
            }
        }
    }

    fn open_conditions(&self) -> Vec<GenerationCondition> {
        if self.records.is_empty() {
            return Vec::new();
        }
        GenerationCondition::ALL
            .into_iter()
            .filter(|c| self.records.values().all(|r| r.sentence(*c).is_some()))
            .collect()
    }

    fn task_ids(&self, stage: Stage) -> Vec<TaskId> {
        match stage {
            Stage::FilterRelations => self
                .records
                .values()
                .filter(|r| !r.retrieved_knowledge.is_empty())
                .map(|r| TaskId::Filter(r.id().to_string()))
                .collect(),
            Stage::LabelSentence => self
                .open_conditions()
                .into_iter()
                .flat_map(|c| {
                    self.records
                        .keys()
                        .map(move |id| TaskId::Label(c, id.clone()))
                })
                .collect(),
        }
    }

    fn is_complete(&self, task: &TaskId) -> bool {
        let Some(record) = self.records.get(task.record_id()) else {
            return false;
        };
        match task {
            TaskId::Filter(_) => record.filter_decided(),
            TaskId::Label(c, _) => record.annotation(*c).is_some(),
        }
    }

    fn active_lease(&self, task: &TaskId, now: Timestamp) -> Option<&Lease> {
        self.leases.get(task).filter(|l| l.expires_at > now)
    }

    fn task(&self, id: &TaskId, lease: &Lease) -> Task {
        let record = &self.records[id.record_id()];
        let payload = match id {
            TaskId::Filter(_) => TaskPayload::Filter {
                concept_set: record.concept_set.clone(),
                knowledge: record.retrieved_knowledge.clone(),
                suggestions: suggest_removals(&record.concept_set, &record.retrieved_knowledge),
            },
            TaskId::Label(c, _) => {
                let sentence = record
                    .sentence(*c)
                    .map(|s| s.sentence.text.clone())
                    .unwrap_or_default();
                TaskPayload::Label {
                    concept_set: record.concept_set.clone(),
                    condition: *c,
                    coverage_auto: check_coverage(&sentence, &record.concept_set),
                    sentence,
                }
            }
        };
        Task {
            task_id: id.clone(),
            record_id: record.id().to_string(),
            stage: id.stage(),
            payload,
            lease_expiry: lease.expires_at,
            assignee: lease.annotator_id.clone(),
        }
    }

    fn check_lease(
        &self,
        task: &TaskId,
        annotator: &str,
        now: Timestamp,
    ) -> Result<(), ServiceError> {
        let lease = self
            .leases
            .get(task)
            .ok_or_else(|| ServiceError::NotLeased(task.to_string()))?;
        if lease.annotator_id != annotator {
            if lease.expires_at > now {
                return Err(ServiceError::NotLeaseHolder {
                    task: task.to_string(),
                    holder: lease.annotator_id.clone(),
                });
            }
            return Err(ServiceError::NotLeased(task.to_string()));
        }
        if lease.expires_at <= now {
            return Err(ServiceError::LeaseExpired(task.to_string()));
        }
        Ok(())
    }

    fn counts(&self, ids: &[TaskId], now: Timestamp) -> StageCounts {
        let mut c = StageCounts {
            total: ids.len(),
            ..StageCounts::default()
        };
        for id in ids {
            if self.is_complete(id) {
                c.completed += 1;
            } else if self.active_lease(id, now).is_some() {
                c.leased += 1;
            } else {
                c.open += 1;
            }
        }
        c
    }
}

impl Store {
    /// Opens `data_dir`, seeding its corpus from `seed` on first use.
    pub fn open(
        data_dir: &Path,
        seed: Option<&Path>,
        clock: Arc<dyn Clock>,
        lease_secs: i64,
    ) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(data_dir).map_err(io_err(data_dir))?;
        let corpus = data_dir.join(CORPUS_FILE);
        if !corpus.exists() {
            let records = match seed {
                Some(path) => load_dataset(path)?,
                None => Vec::new(),
            };
            save_dataset(&records, &corpus)?;
        } else if seed.is_some() {
            warn!("{} already exists; ignoring seed dataset", corpus.display());
        }
        let records = load_dataset(&corpus)?
            .into_iter()
            .map(|r| (r.id().to_string(), r))
            .collect();
        let log_path = data_dir.join(EVENTS_FILE);
        let events = read_events(&log_path)?;
        let mut log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(io_err(&log_path))?;
        log.seek(SeekFrom::End(0)).map_err(io_err(&log_path))?;
        let mut state = State {
            records,
            leases: HashMap::new(),
            last_filter: HashMap::new(),
            last_label: HashMap::new(),
            log,
            log_path,
        };
        for event in events {
            state.apply(event);
        }
        Ok(Store {
            state: Mutex::new(state),
            clock,
            lease_secs,
        })
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state
            .lock()
            .unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    /// Leases the first open task of `stage`. An annotator asking again while
    /// holding a live lease gets the same task back.
    pub fn lease_task(
        &self,
        annotator_id: &str,
        stage: Stage,
    ) -> Result<Option<Task>, ServiceError> {
        if annotator_id.trim().is_empty() {
            return Err(ServiceError::EmptyAnnotator);
        }
        let now = self.clock.now();
        let mut state = self.lock();
        let ids = state.task_ids(stage);
        let pending: Vec<&TaskId> = ids.iter().filter(|t| !state.is_complete(t)).collect();
        if let Some(id) = pending.iter().find(|t| {
            state
                .active_lease(t, now)
                .is_some_and(|l| l.annotator_id == annotator_id)
        }) {
            let lease = state.leases[*id].clone();
            return Ok(Some(state.task(id, &lease)));
        }
        let Some(id) = pending
            .into_iter()
            .find(|t| state.active_lease(t, now).is_none())
            .cloned()
        else {
            return Ok(None);
        };
        let event = Event::Leased {
            task_id: id.clone(),
            annotator_id: annotator_id.to_string(),
            expires_at: now.plus_seconds(self.lease_secs),
            at: now,
        };
        state.append(&event)?;
        state.apply(event);
        let lease = state.leases[&id].clone();
        Ok(Some(state.task(&id, &lease)))
    }

    pub fn submit_filter_decisions(
        &self,
        task_id: &str,
        submission: DecisionSubmission,
    ) -> Result<Accepted, ServiceError> {
        let task: TaskId = task_id.parse()?;
        if task.stage() != Stage::FilterRelations {
            return Err(ServiceError::WrongStage(task_id.to_string()));
        }
        if submission.annotator_id.trim().is_empty() {
            return Err(ServiceError::EmptyAnnotator);
        }
        let now = self.clock.now();
        let mut state = self.lock();
        let record = state
            .records
            .get(task.record_id())
            .ok_or_else(|| ServiceError::UnknownTask(task_id.to_string()))?;
        let accepted = |state: &State, duplicate| Accepted {
            task_id: task.clone(),
            record_id: task.record_id().to_string(),
            duplicate,
            filtered_relations: Some(state.records[task.record_id()].filtered_knowledge.len()),
            annotation: None,
        };
        if state.is_complete(&task) {
            if state.last_filter.get(&task) == Some(&submission) {
                return Ok(accepted(&state, true));
            }
            return Err(ServiceError::AlreadyCompleted(task_id.to_string()));
        }
        let unknown: Vec<RelationId> = submission
            .decisions
            .iter()
            .filter(|e| !record.retrieved_knowledge.contains_id(&e.relation_id))
            .map(|e| e.relation_id.clone())
            .collect();
        let undecided: Vec<RelationId> = record
            .retrieved_knowledge
            .relations()
            .filter(|r| !submission.decisions.iter().any(|e| e.relation_id == r.id))
            .map(|r| r.id.clone())
            .collect();
        state.check_lease(&task, &submission.annotator_id, now)?;
        if !unknown.is_empty() {
            return Err(ServiceError::UnknownRelation(unknown));
        }
        if !undecided.is_empty() {
            return Err(ServiceError::Undecided(undecided));
        }
        let mut submission = submission;
        dedup_last(&mut submission.decisions);
        let event = Event::FilterSubmitted {
            task_id: task.clone(),
            submission,
            at: now,
        };
        state.append(&event)?;
        state.apply(event);
        Ok(accepted(&state, false))
    }

    pub fn submit_label(
        &self,
        task_id: &str,
        submission: LabelSubmission,
    ) -> Result<Accepted, ServiceError> {
        let task: TaskId = task_id.parse()?;
        let TaskId::Label(condition, record_id) = &task else {
            return Err(ServiceError::WrongStage(task_id.to_string()));
        };
        if submission.annotator_id.trim().is_empty() {
            return Err(ServiceError::EmptyAnnotator);
        }
        for (name, bit) in [
            ("commonsense", Some(submission.commonsense)),
            ("coverage_override", submission.coverage_override),
        ] {
            if bit.is_some_and(|b| b > 1) {
                return Err(ServiceError::InvalidLabel(format!("{name} must be 0 or 1")));
            }
        }
        let now = self.clock.now();
        let mut state = self.lock();
        let record = state
            .records
            .get(record_id)
            .ok_or_else(|| ServiceError::UnknownTask(task_id.to_string()))?;
        let accepted = |state: &State, duplicate| Accepted {
            task_id: task.clone(),
            record_id: record_id.clone(),
            duplicate,
            filtered_relations: None,
            annotation: state.records[record_id].annotation(*condition).cloned(),
        };
        if state.is_complete(&task) {
            if state.last_label.get(&task) == Some(&submission) {
                return Ok(accepted(&state, true));
            }
            return Err(ServiceError::AlreadyCompleted(task_id.to_string()));
        }
        if !state.open_conditions().contains(condition) {
            return Err(ServiceError::NotOpen(task_id.to_string()));
        }
        let sentence = record
            .sentence(*condition)
            .map(|s| s.sentence.text.clone())
            .unwrap_or_default();
        let coverage_auto = check_coverage(&sentence, &record.concept_set).bit;
        let coverage = submission.coverage_override.unwrap_or(coverage_auto);
        if submission.failure_variant.is_some() && submission.commonsense == 1 && coverage == 1 {
            return Err(ServiceError::InvalidLabel(
                "failure_variant requires commonsense=0 or coverage=0".into(),
            ));
        }
        state.check_lease(&task, &submission.annotator_id, now)?;
        let annotation = Annotation {
            commonsense: submission.commonsense,
            coverage,
            coverage_auto: Some(coverage_auto),
            annotator_id: submission.annotator_id.clone(),
            failure_variant: submission.failure_variant,
            note: submission.note.clone(),
            created_at: now,
        };
        let event = Event::LabelSubmitted {
            task_id: task.clone(),
            submission,
            annotation,
            at: now,
        };
        state.append(&event)?;
        state.apply(event);
        Ok(accepted(&state, false))
    }

    pub fn progress(&self) -> Progress {
        let now = self.clock.now();
        let state = self.lock();
        let stages = Stage::ALL
            .into_iter()
            .map(|s| (s, state.counts(&state.task_ids(s), now)))
            .collect();
        let label_conditions = state
            .open_conditions()
            .into_iter()
            .map(|c| {
                let ids: Vec<TaskId> = state
                    .records
                    .keys()
                    .map(|id| TaskId::Label(c, id.clone()))
                    .collect();
                (c.token().to_string(), state.counts(&ids, now))
            })
            .collect();
        let matrices = GenerationCondition::ALL
            .into_iter()
            .map(|c| {
                let mut m = EvalMatrix::default();
                for a in state.records.values().filter_map(|r| r.annotation(c)) {
                    m.add(a.commonsense, a.coverage);
                }
                (c.token().to_string(), m)
            })
            .collect();
        Progress {
            records: state.records.len(),
            stages,
            label_conditions,
            matrices,
        }
    }

    pub fn record(&self, id: &str) -> Result<KitgiRecord, ServiceError> {
        self.lock()
            .records
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownRecord(id.to_string()))
    }

    pub fn records(&self) -> Vec<KitgiRecord> {
        self.lock().records.values().cloned().collect()
    }

    /// Dataset lines for every record that passes validation.
    pub fn export(&self) -> String {
        let state = self.lock();
        let mut out = String::new();
        for record in state.records.values() {
            let violations = validate_record(record);
            if violations.is_empty() {
                out.push_str(&encode_record(record));
                out.push('\n');
            } else {
                warn!(
                    "export skips {}: {} violations",
                    record.id(),
                    violations.len()
                );
            }
        }
        out
    }
}

/// Keeps the last entry per relation id, in first-seen order.
fn dedup_last(entries: &mut Vec<VerdictEntry>) {
    let mut last: IndexMap<RelationId, VerdictEntry> = IndexMap::new();
    for e in entries.drain(..) {
        last.insert(e.relation_id.clone(), e);
    }
    entries.extend(last.into_values());
}
