//! Dataset-building subcommands: import, knowledge retrieval, prompts,
//! generation and filter decisions.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use futures::stream::{self, StreamExt};
use kitgi_conceptnet::{ClientConfig, ConceptNetClient, KgError};
use kitgi_core::{
    apply_decisions, import_commongen, load_dataset, save_dataset, suggest_removals,
    AnnotatedSentence, DecisionSource, FilterDecision, GenerationCondition, KitgiRecord,
    PromptTemplate, RelationId, Verdict, MAX_RELATIONS_PER_CONCEPT,
};
use kitgi_generation::{
    generate_batch, prompt_for, BatchItem, DecodeParams, GenerationSettings, Generator,
    HttpBackend, StubBackend, SubprocessBackend,
};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::args::{
    BackendArg, DecisionArgs, FetchArgs, GenerateArgs, ImportArgs, PromptArgs, SuggestArgs,
    TemplateArgs,
};
use crate::config::{Config, GenerationConfig};
use crate::failure::Failure;
use crate::output::write_lines;

pub const DEFAULT_BASE_URL: &str = "https://api.conceptnet.io";

pub fn import(dataset: &Path, args: &ImportArgs) -> Result<(), Failure> {
    let outcome = import_commongen(&args.input)?;
    for skip in &outcome.skipped {
        warn!(
            "{}:{}: skipped ({:?}): {}",
            args.input.display(),
            skip.line,
            skip.reason,
            skip.detail
        );
    }
    let records: Vec<KitgiRecord> = outcome.sets.into_iter().map(KitgiRecord::new).collect();
    if dataset.exists() {
        let existing = load_dataset(dataset)?;
        let same = existing.len() == records.len()
            && existing.iter().zip(&records).all(|(a, b)| a.id() == b.id());
        if same {
            say!(
                "{}: {} concept sets already imported",
                dataset.display(),
                records.len()
            );
            return Ok(());
        }
        if !args.force {
            return Err(Failure::User(format!(
                "{} already holds {} different records; pass --force to replace it",
                dataset.display(),
                existing.len()
            )));
        }
    }
    save_dataset(&records, dataset)?;
    say!(
        "{}: imported {} concept sets, skipped {}",
        dataset.display(),
        records.len(),
        outcome.skipped.len()
    );
    Ok(())
}

fn kg_config(config: &Config, args: &FetchArgs) -> ClientConfig {
    let k = &config.knowledge;
    let mut out = ClientConfig {
        base_url: args.base_url.clone().or_else(|| k.base_url.clone()),
        cache_dir: args.cache_dir.clone().or_else(|| k.cache_dir.clone()),
        fixture_dir: args.fixture_dir.clone().or_else(|| k.fixture_dir.clone()),
        ..ClientConfig::default()
    }
    .with_env();
    if out.base_url.is_none() {
        out.base_url = Some(DEFAULT_BASE_URL.to_string());
    }
    if let Some(n) = args.concurrency.or(k.concurrency) {
        out.concurrency = n.max(1);
    }
    out
}

pub async fn fetch_knowledge(
    dataset: &Path,
    config: &Config,
    args: &FetchArgs,
) -> Result<(), Failure> {
    let limit = args
        .limit
        .or(config.knowledge.limit)
        .unwrap_or(MAX_RELATIONS_PER_CONCEPT);
    if !(1..=MAX_RELATIONS_PER_CONCEPT).contains(&limit) {
        return Err(KgError::InvalidLimit {
            got: limit,
            max: MAX_RELATIONS_PER_CONCEPT,
        }
        .into());
    }
    let client_config = kg_config(config, args);
    let concurrency = client_config.concurrency;
    let client = ConceptNetClient::new(client_config)?;
    let mut records = load_dataset(dataset)?;
    let pending: Vec<usize> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| args.force || r.retrieved_knowledge.is_empty())
        .map(|(i, _)| i)
        .collect();

    let results: Vec<_> = stream::iter(pending.iter().copied())
        .map(|i| {
            let client = &client;
            let set = records[i].concept_set.clone();
            async move { (i, client.build_bundle(&set, limit).await) }
        })
        .buffered(concurrency)
        .collect()
        .await;

    let mut failures = Vec::new();
    let mut fetched = 0;
    for (i, result) in results {
        match result {
            Ok(bundle) => {
                let record = &mut records[i];
                if !record.decisions.is_empty() {
                    warn!(
                        "{}: refetched knowledge discards {} filter decisions",
                        record.id(),
                        record.decisions.len()
                    );
                }
                record.set_knowledge(bundle);
                fetched += 1;
            }
            Err(e) => failures.push((records[i].id().to_string(), Failure::from(e))),
        }
    }
    if fetched > 0 {
        save_dataset(&records, dataset)?;
    }
    let relations: usize = records.iter().map(|r| r.retrieved_knowledge.len()).sum();
    say!(
        "{}: fetched {fetched} of {} pending records, {relations} relations in total",
        dataset.display(),
        pending.len()
    );
    batch_result("knowledge retrieval", pending.len(), failures)
}

/// One-line cause per failure; the exit status follows the worst failure.
fn batch_result(
    what: &str,
    attempted: usize,
    failures: Vec<(String, Failure)>,
) -> Result<(), Failure> {
    if failures.is_empty() {
        return Ok(());
    }
    for (id, failure) in &failures {
        eprintln!("error: {id}: {failure}");
    }
    let message = format!(
        "{what} failed for {} of {attempted} records",
        failures.len()
    );
    if failures
        .iter()
        .any(|(_, f)| matches!(f, Failure::Runtime(_)))
    {
        Err(Failure::Runtime(message))
    } else {
        Err(Failure::User(message))
    }
}

fn settings(
    args: &TemplateArgs,
    generation: &GenerationConfig,
) -> Result<GenerationSettings, Failure> {
    let template = match args.template.as_ref().or(generation.template.as_ref()) {
        Some(path) => PromptTemplate::load(path)?,
        None => PromptTemplate::default(),
    };
    let renumber = !args.no_renumber && generation.renumber.unwrap_or(true);
    Ok(GenerationSettings {
        template,
        renumber,
        ..GenerationSettings::default()
    })
}

/// None when the condition takes no knowledge or none was retrieved yet.
fn knowledge_for(
    record: &KitgiRecord,
    condition: GenerationCondition,
) -> Option<&kitgi_core::KnowledgeBundle> {
    if record.retrieved_knowledge.is_empty() {
        return None;
    }
    match condition {
        GenerationCondition::NoKnowledge => None,
        GenerationCondition::FullKnowledge => Some(&record.retrieved_knowledge),
        GenerationCondition::FilteredKnowledge => Some(&record.filtered_knowledge),
    }
}

#[derive(Serialize)]
struct PromptLine<'a> {
    record_id: &'a str,
    condition: GenerationCondition,
    prompt: String,
}

pub fn build_prompts(dataset: &Path, config: &Config, args: &PromptArgs) -> Result<(), Failure> {
    let settings = settings(&args.template, &config.generation)?;
    let condition = GenerationCondition::from(args.condition);
    let records = load_dataset(dataset)?;
    let mut lines = Vec::with_capacity(records.len());
    for record in &records {
        let prompt = prompt_for(
            &record.concept_set,
            knowledge_for(record, condition),
            condition,
            &settings,
        )?;
        let line = PromptLine {
            record_id: record.id(),
            condition,
            prompt,
        };
        lines.push(serde_json::to_string(&line).expect("prompt lines serialize"));
    }
    write_lines(args.out.as_deref(), &lines)?;
    info!("{} prompts for {}", lines.len(), condition.token());
    Ok(())
}

fn backend(
    args: &GenerateArgs,
    generation: &GenerationConfig,
) -> Result<Box<dyn Generator>, Failure> {
    let kind = match (args.backend, generation.backend.as_deref()) {
        (Some(kind), _) => kind,
        (None, None | Some("stub")) => BackendArg::Stub,
        (None, Some("http")) => BackendArg::Http,
        (None, Some("subprocess")) => BackendArg::Subprocess,
        (None, Some(other)) => {
            return Err(Failure::User(format!(
                "unknown backend {other:?} in config"
            )))
        }
    };
    let defaults = DecodeParams::default();
    let params = DecodeParams {
        model: args
            .model
            .clone()
            .or_else(|| generation.model.clone())
            .unwrap_or(defaults.model),
        temperature: args
            .temperature
            .or(generation.temperature)
            .unwrap_or(defaults.temperature),
        max_tokens: args
            .max_tokens
            .or(generation.max_tokens)
            .unwrap_or(defaults.max_tokens),
        seed: args.seed.or(generation.seed),
    };
    let timeout = Duration::from_secs(args.timeout_secs.or(generation.timeout_secs).unwrap_or(60));
    Ok(match kind {
        BackendArg::Stub => Box::new(StubBackend),
        BackendArg::Http => {
            let endpoint = args
                .endpoint
                .clone()
                .or_else(|| generation.endpoint.clone())
                .ok_or_else(|| Failure::User("the http backend needs --endpoint".into()))?;
            Box::new(HttpBackend::new(endpoint, params, timeout)?)
        }
        BackendArg::Subprocess => {
            let command = args
                .command
                .clone()
                .or_else(|| generation.command.clone())
                .ok_or_else(|| Failure::User("the subprocess backend needs --command".into()))?;
            Box::new(SubprocessBackend::new(command, params, timeout))
        }
    })
}

pub async fn generate(dataset: &Path, config: &Config, args: &GenerateArgs) -> Result<(), Failure> {
    let condition = GenerationCondition::from(args.condition);
    let mut settings = settings(&args.template, &config.generation)?;
    settings.created_at = args.timestamp;
    if let Some(n) = args.concurrency.or(config.generation.concurrency) {
        settings.concurrency = n.max(1);
    }
    let backend = backend(args, &config.generation)?;
    let mut records = load_dataset(dataset)?;

    if condition == GenerationCondition::FilteredKnowledge && !args.allow_undecided {
        let undecided: Vec<&str> = records
            .iter()
            .filter(|r| !r.filter_decided())
            .map(KitgiRecord::id)
            .collect();
        if !undecided.is_empty() {
            return Err(Failure::User(format!(
                "{} of {} records have no complete filter decisions (first: {}); run apply-decisions or the \
                 annotation service first, or pass --allow-undecided",
                undecided.len(),
                records.len(),
                undecided[0]
            )));
        }
    }

    let pending: Vec<usize> = (0..records.len())
        .filter(|&i| args.force || records[i].sentence(condition).is_none())
        .collect();
    let items: Vec<BatchItem> = pending
        .iter()
        .map(|&i| BatchItem {
            record_id: records[i].id().to_string(),
            set: records[i].concept_set.clone(),
            bundle: knowledge_for(&records[i], condition).cloned(),
        })
        .collect();
    let outcome = generate_batch(&items, condition, backend.as_ref(), &settings).await;

    let written = outcome.sentences.len();
    for (index, sentence) in outcome.sentences {
        let record = &mut records[pending[index]];
        let labels_before = record.annotations.len();
        record.annotations.retain(|l| l.condition != condition);
        if record.annotations.len() != labels_before {
            warn!(
                "{}: regenerated {} sentence drops its labels",
                record.id(),
                condition.token()
            );
        }
        *record.sentence_slot(condition) = Some(AnnotatedSentence::from(sentence));
    }
    if written > 0 {
        save_dataset(&records, dataset)?;
    }
    say!(
        "{}: {written} {} sentences generated by {}, {} already present",
        dataset.display(),
        condition.token(),
        backend.backend_id(),
        records.len() - pending.len()
    );
    let failures = outcome
        .failures
        .into_iter()
        .map(|f| (f.record_id, Failure::from(f.error)))
        .collect();
    batch_result("generation", pending.len(), failures)
}

#[derive(Serialize)]
struct SuggestionLine<'a> {
    record_id: &'a str,
    suggestions: Vec<kitgi_core::RemovalSuggestion>,
}

pub fn suggest_filters(dataset: &Path, args: &SuggestArgs) -> Result<(), Failure> {
    let records = load_dataset(dataset)?;
    let mut lines = Vec::new();
    let mut total = 0;
    for record in records.iter().filter(|r| !r.retrieved_knowledge.is_empty()) {
        let suggestions = suggest_removals(&record.concept_set, &record.retrieved_knowledge);
        total += suggestions.len();
        let line = SuggestionLine {
            record_id: record.id(),
            suggestions,
        };
        lines.push(serde_json::to_string(&line).expect("suggestion lines serialize"));
    }
    write_lines(args.out.as_deref(), &lines)?;
    info!("{total} suggested removals over {} records", lines.len());
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionLine {
    record_id: String,
    relation_id: RelationId,
    verdict: Verdict,
    annotator_id: String,
    #[serde(default)]
    rationale: Option<String>,
}

fn read_decisions(path: &Path) -> Result<Vec<DecisionLine>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Failure::User(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Human verdicts replace earlier human verdicts on the same relation.
pub fn apply_decision_file(dataset: &Path, args: &DecisionArgs) -> Result<(), Failure> {
    let lines = read_decisions(&args.decisions)?;
    let mut records = load_dataset(dataset)?;
    let index: HashMap<String, usize> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id().to_string(), i))
        .collect();

    let mut by_record: Vec<(usize, Vec<FilterDecision>)> = Vec::new();
    let mut failures = Vec::new();
    for line in lines {
        if line.annotator_id.trim().is_empty() {
            failures.push((
                line.record_id,
                Failure::User(format!("{}: empty annotator id", line.relation_id)),
            ));
            continue;
        }
        let Some(&i) = index.get(&line.record_id) else {
            failures.push((line.record_id, Failure::User("no such record".into())));
            continue;
        };
        let mut decision =
            FilterDecision::human(line.relation_id, line.verdict, &line.annotator_id);
        decision.rationale = line.rationale;
        match by_record.iter_mut().find(|(r, _)| *r == i) {
            Some((_, batch)) => batch.push(decision),
            None => by_record.push((i, vec![decision])),
        }
    }

    let mut applied = 0;
    for (i, incoming) in by_record {
        let record = &mut records[i];
        let mut latest: Vec<FilterDecision> = Vec::new();
        for d in incoming {
            latest.retain(|l| l.relation_id != d.relation_id);
            latest.push(d);
        }
        let mut decisions: Vec<FilterDecision> = record
            .decisions
            .iter()
            .filter(|d| {
                d.source != DecisionSource::Human
                    || !latest.iter().any(|l| l.relation_id == d.relation_id)
            })
            .cloned()
            .collect();
        decisions.extend(latest);
        match apply_decisions(record, decisions) {
            Ok(()) => applied += 1,
            Err(e) => failures.push((record.id().to_string(), Failure::User(e.to_string()))),
        }
    }
    if applied > 0 {
        save_dataset(&records, dataset)?;
    }
    let decided = records.iter().filter(|r| r.filter_decided()).count();
    let removed: usize = records
        .iter()
        .map(|r| r.retrieved_knowledge.len() - r.filtered_knowledge.len())
        .sum();
    say!(
        "{}: decisions applied to {applied} records; {decided} of {} fully decided, {removed} relations removed",
        dataset.display(),
        records.len()
    );
    batch_result("applying decisions", applied + failures.len(), failures)
}

pub fn resolve_dataset(flag: Option<&PathBuf>, config: &Config) -> PathBuf {
    flag.cloned()
        .or_else(|| config.dataset.clone())
        .unwrap_or_else(|| PathBuf::from("kitgi.jsonl"))
}
