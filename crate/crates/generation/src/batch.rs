use std::collections::BTreeMap;

use futures::stream::{self, StreamExt};
use kitgi_core::{
    build_prompt, ConceptSet, GeneratedSentence, GenerationCondition, KnowledgeBundle,
    PromptTemplate, Timestamp,
};
use log::warn;

use crate::backend::Generator;
use crate::error::GenError;

#[derive(Clone, Debug)]
pub struct GenerationSettings {
    pub template: PromptTemplate,
    /// Rewrite ranks to 0..n before rendering, hiding gaps left by filtering.
    pub renumber: bool,
    pub concurrency: usize,
    /// Stamped on every sentence; `None` means the current time.
    pub created_at: Option<Timestamp>,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        GenerationSettings {
            template: PromptTemplate::default(),
            renumber: true,
            concurrency: 4,
            created_at: None,
        }
    }
}

impl GenerationSettings {
    fn decode_params(&self) -> BTreeMap<String, String> {
        let mut params = self.template.describe();
        params.insert("renumber".to_string(), self.renumber.to_string());
        params
    }
}

#[derive(Clone, Debug)]
pub struct BatchItem {
    pub record_id: String,
    pub set: ConceptSet,
    pub bundle: Option<KnowledgeBundle>,
}

#[derive(Debug)]
pub struct BatchFailure {
    pub index: usize,
    pub record_id: String,
    pub error: GenError,
}

/// Successes and failures, each in input order, keyed by input index.
#[derive(Debug, Default)]
pub struct BatchOutcome {
    pub sentences: Vec<(usize, GeneratedSentence)>,
    pub failures: Vec<BatchFailure>,
}

/// First non-blank line of a completion, trimmed.
pub fn first_line(completion: &str) -> Option<&str> {
    completion.lines().map(str::trim).find(|l| !l.is_empty())
}

/// Prompt for one item under `condition`. Knowledge conditions need a bundle.
pub fn prompt_for(
    set: &ConceptSet,
    bundle: Option<&KnowledgeBundle>,
    condition: GenerationCondition,
    settings: &GenerationSettings,
) -> Result<String, GenError> {
    let bundle = match condition {
        GenerationCondition::NoKnowledge => None,
        _ => Some(bundle.ok_or(GenError::MissingKnowledge)?),
    };
    let renumbered = bundle
        .filter(|_| settings.renumber)
        .map(KnowledgeBundle::renumbered);
    Ok(build_prompt(
        set,
        renumbered.as_ref().or(bundle),
        &settings.template,
    )?)
}

pub async fn generate(
    prompt: &str,
    condition: GenerationCondition,
    backend: &dyn Generator,
    created_at: Timestamp,
    mut decode_params: BTreeMap<String, String>,
) -> Result<GeneratedSentence, GenError> {
    let raw = backend.complete(prompt).await?;
    let text = first_line(&raw)
        .ok_or(GenError::EmptyCompletion)?
        .to_string();
    decode_params.extend(backend.decode_params());
    Ok(GeneratedSentence {
        text,
        condition,
        backend_id: backend.backend_id(),
        decode_params,
        created_at,
    })
}

/// Generates one sentence per item with at most `settings.concurrency`
/// backend calls in flight. A failing item never aborts the batch:
/// `sentences.len() + failures.len() == items.len()`.
pub async fn generate_batch(
    items: &[BatchItem],
    condition: GenerationCondition,
    backend: &dyn Generator,
    settings: &GenerationSettings,
) -> BatchOutcome {
    let created_at = settings.created_at.unwrap_or_else(Timestamp::now);
    let params = settings.decode_params();
    let results: Vec<(usize, Result<GeneratedSentence, GenError>)> =
        stream::iter(items.iter().enumerate())
            .map(|(index, item)| {
                let params = params.clone();
                async move {
                    let result =
                        match prompt_for(&item.set, item.bundle.as_ref(), condition, settings) {
                            Ok(prompt) => {
                                generate(&prompt, condition, backend, created_at, params).await
                            }
                            Err(e) => Err(e),
                        };
                    (index, result)
                }
            })
            .buffered(settings.concurrency.max(1))
            .collect()
            .await;

    let mut outcome = BatchOutcome::default();
    for (index, result) in results {
        match result {
            Ok(sentence) => outcome.sentences.push((index, sentence)),
            Err(error) => {
                warn!("generation failed for {}: {error}", items[index].record_id);
                outcome.failures.push(BatchFailure {
                    index,
                    record_id: items[index].record_id.clone(),
                    error,
                });
            }
        }
    }
    outcome
}
