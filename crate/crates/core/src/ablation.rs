//! Knowledge ablation: removal suggestions, filter application and
//! relation-type distributions.

use std::collections::{BTreeMap, HashSet};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::coverage::{stem, tokenize};
use crate::error::AblationError;
use crate::model::{
    final_decisions, Concept, ConceptSet, FilterDecision, KitgiRecord, KnowledgeBundle, RelationId,
    RelationType, Verdict,
};
use crate::percent::{largest_remainder, Percent};

/// Ordered by how strongly the lexical evidence points at removal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RemovalReason {
    /// The tail is literally another concept of the set.
    CrossConceptTail,
    /// The tail stems to another concept's stem.
    CrossConceptStem,
    /// The tail stems to the head concept's own stem.
    SelfParaphrase,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalSuggestion {
    pub relation_id: RelationId,
    pub reason: RemovalReason,
    /// Matched concept surface for `CrossConceptTail`, matched stem otherwise.
    pub evidence: String,
}

fn phrase_stem(term: &str) -> String {
    tokenize(term)
        .iter()
        .map(|w| stem(w))
        .collect::<Vec<_>>()
        .join("_")
}

/// Flags relations whose tail lexically points at another member of the set
/// (or paraphrases its own head). Suggestions are advisory only.
pub fn suggest_removals(set: &ConceptSet, bundle: &KnowledgeBundle) -> Vec<RemovalSuggestion> {
    let stems: Vec<(&Concept, String)> =
        set.iter().map(|c| (c, phrase_stem(c.surface()))).collect();
    let mut out: Vec<(usize, usize, RemovalSuggestion)> = Vec::new();
    for (ci, concept) in set.iter().enumerate() {
        let Some(relations) = bundle.get(concept) else {
            continue;
        };
        for (ri, r) in relations.iter().enumerate() {
            let tail_stem = phrase_stem(&r.tail);
            let others = || stems.iter().filter(|(c, _)| *c != concept);
            let found = if let Some((c, _)) = others().find(|(c, _)| c.surface() == r.tail) {
                Some((RemovalReason::CrossConceptTail, c.surface().to_string()))
            } else if let Some((_, s)) = others().find(|(_, s)| !s.is_empty() && *s == tail_stem) {
                Some((RemovalReason::CrossConceptStem, s.clone()))
            } else if !tail_stem.is_empty() && tail_stem == stems[ci].1 {
                Some((RemovalReason::SelfParaphrase, tail_stem.clone()))
            } else {
                None
            };
            if let Some((reason, evidence)) = found {
                out.push((
                    ci,
                    ri,
                    RemovalSuggestion {
                        relation_id: r.id.clone(),
                        reason,
                        evidence,
                    },
                ));
            }
        }
    }
    out.sort_by_key(|(ci, ri, s)| (s.reason == RemovalReason::SelfParaphrase, *ci, *ri));
    out.into_iter().map(|(_, _, s)| s).collect()
}

/// Removal set resolved from a decision list and checked against the bundle
/// it was made for. Applying a plan is a projection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilterPlan {
    removed: HashSet<RelationId>,
}

impl FilterPlan {
    pub fn new(
        source: &KnowledgeBundle,
        decisions: &[FilterDecision],
    ) -> Result<Self, AblationError> {
        if let Some(d) = decisions
            .iter()
            .find(|d| !source.contains_id(&d.relation_id))
        {
            return Err(AblationError::UnknownRelation(d.relation_id.clone()));
        }
        let removed = final_decisions(decisions)
            .into_iter()
            .filter(|(_, d)| d.verdict == Verdict::Remove)
            .map(|(id, _)| id.clone())
            .collect();
        Ok(FilterPlan { removed })
    }

    pub fn removed(&self) -> &HashSet<RelationId> {
        &self.removed
    }

    /// Drops removed relations; kept ones keep their original ranks.
    pub fn apply(&self, bundle: &KnowledgeBundle) -> KnowledgeBundle {
        bundle
            .iter()
            .map(|(c, relations)| {
                let kept = relations
                    .iter()
                    .filter(|r| !self.removed.contains(&r.id))
                    .cloned()
                    .collect();
                (c.clone(), kept)
            })
            .collect()
    }
}

pub fn apply_filter(
    bundle: &KnowledgeBundle,
    decisions: &[FilterDecision],
) -> Result<KnowledgeBundle, AblationError> {
    Ok(FilterPlan::new(bundle, decisions)?.apply(bundle))
}

/// Replaces a record's decisions and recomputes its filtered knowledge.
pub fn apply_decisions(
    record: &mut KitgiRecord,
    decisions: Vec<FilterDecision>,
) -> Result<(), AblationError> {
    let filtered = apply_filter(&record.retrieved_knowledge, &decisions)?;
    record.decisions = decisions;
    record.filtered_knowledge = filtered;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BundleKind {
    Retrieved,
    Filtered,
    /// Relations with a final Remove verdict, looked up in the retrieved bundle.
    Removed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RelationDistribution {
    /// Sorted by count descending, then label.
    pub counts: IndexMap<RelationType, usize>,
    pub total: usize,
    /// Rounded to one decimal; always sums to exactly 100.0.
    pub percentages: IndexMap<RelationType, Percent>,
}

impl RelationDistribution {
    pub fn from_counts(counts: BTreeMap<RelationType, usize>) -> Result<Self, AblationError> {
        let total: usize = counts.values().sum();
        if total == 0 {
            return Err(AblationError::EmptyCorpus);
        }
        let mut sorted: Vec<(RelationType, usize)> = counts.into_iter().collect();
        sorted.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let shares = largest_remainder(&sorted.iter().map(|(_, n)| *n).collect::<Vec<_>>());
        Ok(RelationDistribution {
            percentages: sorted
                .iter()
                .zip(shares)
                .map(|((t, _), p)| (t.clone(), p))
                .collect(),
            counts: sorted.into_iter().collect(),
            total,
        })
    }

    pub fn count(&self, rel: &RelationType) -> usize {
        self.counts.get(rel).copied().unwrap_or(0)
    }

    pub fn percent(&self, rel: &RelationType) -> Percent {
        self.percentages.get(rel).copied().unwrap_or_default()
    }
}

pub fn relation_counts(
    records: &[KitgiRecord],
    which: BundleKind,
) -> BTreeMap<RelationType, usize> {
    let mut counts = BTreeMap::new();
    for record in records {
        match which {
            BundleKind::Retrieved => {
                for r in record.retrieved_knowledge.relations() {
                    *counts.entry(r.rel.clone()).or_insert(0) += 1;
                }
            }
            BundleKind::Filtered => {
                for r in record.filtered_knowledge.relations() {
                    *counts.entry(r.rel.clone()).or_insert(0) += 1;
                }
            }
            BundleKind::Removed => {
                for (id, d) in final_decisions(&record.decisions) {
                    if d.verdict == Verdict::Remove {
                        if let Some(r) = record.retrieved_knowledge.relation(id) {
                            *counts.entry(r.rel.clone()).or_insert(0) += 1;
                        }
                    }
                }
            }
        }
    }
    counts
}

pub fn relation_distribution(
    records: &[KitgiRecord],
    which: BundleKind,
) -> Result<RelationDistribution, AblationError> {
    if records.is_empty() {
        return Err(AblationError::EmptyCorpus);
    }
    RelationDistribution::from_counts(relation_counts(records, which))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{
        look_watch_window, look_watch_window_bundle, look_watch_window_decisions,
        look_watch_window_set,
    };
    use crate::model::{DecisionSource, Relation};

    #[test]
    fn worked_example_suggestions() {
        let s = suggest_removals(&look_watch_window_set(), &look_watch_window_bundle());
        let got: Vec<_> = s
            .iter()
            .map(|s| (s.relation_id.as_str(), s.reason, s.evidence.as_str()))
            .collect();
        assert_eq!(
            got,
            [
                (
                    "watch/RelatedTo/look",
                    RemovalReason::CrossConceptTail,
                    "look"
                ),
                (
                    "window/RelatedTo/looking",
                    RemovalReason::CrossConceptStem,
                    "look"
                ),
            ]
        );
        assert!(!s
            .iter()
            .any(|s| s.relation_id.as_str() == "look/RelatedTo/see"));
    }

    #[test]
    fn self_paraphrase_ranks_last() {
        let set = ConceptSet::from_words(&["run", "track", "shoe"]).unwrap();
        let run = Concept::new("run").unwrap();
        let shoe = Concept::new("shoe").unwrap();
        let bundle: KnowledgeBundle = [
            (
                run.clone(),
                vec![Relation::new(
                    run.clone(),
                    RelationType::RelatedTo,
                    "running",
                    Some(2.0),
                    0,
                )],
            ),
            (
                shoe.clone(),
                vec![Relation::new(
                    shoe.clone(),
                    RelationType::UsedFor,
                    "run",
                    Some(2.0),
                    0,
                )],
            ),
        ]
        .into_iter()
        .collect();
        let reasons: Vec<_> = suggest_removals(&set, &bundle)
            .into_iter()
            .map(|s| s.reason)
            .collect();
        assert_eq!(
            reasons,
            [
                RemovalReason::CrossConceptTail,
                RemovalReason::SelfParaphrase
            ]
        );
    }

    #[test]
    fn disjoint_vocabulary_yields_nothing() {
        let set = ConceptSet::from_words(&["cat", "sofa", "sleep"]).unwrap();
        let cat = Concept::new("cat").unwrap();
        let bundle: KnowledgeBundle = [(
            cat.clone(),
            vec![Relation::new(cat, RelationType::IsA, "pet", Some(1.0), 0)],
        )]
        .into_iter()
        .collect();
        assert!(suggest_removals(&set, &bundle).is_empty());
    }

    #[test]
    fn worked_example_filter() {
        let filtered = apply_filter(
            &look_watch_window_bundle(),
            &look_watch_window_decisions("a"),
        )
        .unwrap();
        assert_eq!(filtered.len(), 11);
        assert_eq!(filtered, look_watch_window().filtered_knowledge);
    }

    #[test]
    fn no_decisions_is_identity() {
        let b = look_watch_window_bundle();
        assert_eq!(apply_filter(&b, &[]).unwrap(), b);
    }

    #[test]
    fn unknown_relation_is_an_error() {
        let d = FilterDecision::human("look/RelatedTo/zebra", Verdict::Remove, "a");
        assert!(matches!(
            apply_filter(&look_watch_window_bundle(), &[d]),
            Err(AblationError::UnknownRelation(_))
        ));
    }

    #[test]
    fn human_keep_beats_suggested_remove() {
        let id = RelationId::from("look/RelatedTo/see");
        let suggested = FilterDecision {
            source: DecisionSource::Suggested,
            ..FilterDecision::human(id.clone(), Verdict::Remove, "tool")
        };
        let human = FilterDecision::human(id, Verdict::Keep, "ann");
        assert_eq!(
            apply_filter(&look_watch_window_bundle(), &[suggested, human])
                .unwrap()
                .len(),
            15
        );
    }

    #[test]
    fn single_type_distribution() {
        let mut record = look_watch_window();
        record.retrieved_knowledge = record
            .retrieved_knowledge
            .iter()
            .take(1)
            .map(|(c, r)| (c.clone(), r.to_vec()))
            .collect();
        let d = relation_distribution(&[record], BundleKind::Retrieved).unwrap();
        assert_eq!(d.total, 5);
        assert_eq!(d.percent(&RelationType::RelatedTo).to_string(), "100.0");
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(
            relation_distribution(&[], BundleKind::Retrieved),
            Err(AblationError::EmptyCorpus)
        ));
    }

    #[test]
    fn removed_plus_filtered_is_retrieved() {
        let records = [look_watch_window()];
        let removed = relation_counts(&records, BundleKind::Removed);
        assert_eq!(removed[&RelationType::RelatedTo], 4);
        assert_eq!(
            relation_counts(&records, BundleKind::Filtered)[&RelationType::RelatedTo],
            11
        );
    }
}
