//! Commonsense × coverage matrices, summary rates, improved-subset selection
//! and report emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::Serialize;

use crate::ablation::{relation_counts, BundleKind, RelationDistribution};
use crate::error::StatsError;
use crate::model::{GenerationCondition, KitgiRecord, RelationType};
use crate::percent::Percent;

/// Cell counts; the first digit is commonsense, the second coverage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EvalMatrix {
    pub n11: usize,
    pub n10: usize,
    pub n01: usize,
    pub n00: usize,
    pub total: usize,
}

impl EvalMatrix {
    pub fn from_cells(n11: usize, n10: usize, n01: usize, n00: usize) -> Self {
        EvalMatrix {
            n11,
            n10,
            n01,
            n00,
            total: n11 + n10 + n01 + n00,
        }
    }

    pub fn add(&mut self, commonsense: u8, coverage: u8) {
        match (commonsense, coverage) {
            (1, 1) => self.n11 += 1,
            (1, _) => self.n10 += 1,
            (_, 1) => self.n01 += 1,
            _ => self.n00 += 1,
        }
        self.total += 1;
    }

    fn cells(&self) -> [(u8, u8, usize); 4] {
        [
            (1, 1, self.n11),
            (1, 0, self.n10),
            (0, 1, self.n01),
            (0, 0, self.n00),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SummaryRates {
    pub both_correct: Percent,
    pub commonsense_rate: Percent,
    pub coverage_rate: Percent,
    pub coverage_fail_rate: Percent,
}

pub fn build_matrix(
    records: &[KitgiRecord],
    condition: GenerationCondition,
) -> Result<EvalMatrix, StatsError> {
    if records.is_empty() {
        return Err(StatsError::EmptyCorpus);
    }
    let missing = missing_annotations(records, condition);
    if !missing.is_empty() {
        return Err(StatsError::MissingAnnotation {
            condition,
            record_ids: missing,
        });
    }
    let mut m = EvalMatrix::default();
    for a in records.iter().filter_map(|r| r.annotation(condition)) {
        m.add(a.commonsense, a.coverage);
    }
    Ok(m)
}

fn missing_annotations(records: &[KitgiRecord], condition: GenerationCondition) -> Vec<String> {
    records
        .iter()
        .filter(|r| r.annotation(condition).is_none())
        .map(|r| r.id().to_string())
        .collect()
}

/// Rates are undefined for an empty matrix and come back as zero.
pub fn summarize(m: &EvalMatrix) -> SummaryRates {
    let rate = |n: usize| {
        if m.total == 0 {
            Percent::default()
        } else {
            Percent::ratio(n, m.total)
        }
    };
    SummaryRates {
        both_correct: rate(m.n11),
        commonsense_rate: rate(m.n11 + m.n10),
        coverage_rate: rate(m.n11 + m.n01),
        coverage_fail_rate: rate(m.n10 + m.n00),
    }
}

/// Ids of records that were implausible without knowledge and plausible with it.
pub fn select_improved(records: &[KitgiRecord]) -> Result<Vec<String>, StatsError> {
    for condition in [
        GenerationCondition::NoKnowledge,
        GenerationCondition::FullKnowledge,
    ] {
        let missing = missing_annotations(records, condition);
        if !missing.is_empty() {
            return Err(StatsError::MissingAnnotation {
                condition,
                record_ids: missing,
            });
        }
    }
    Ok(records
        .iter()
        .filter(|r| {
            let none = r
                .annotation(GenerationCondition::NoKnowledge)
                .map(|a| a.commonsense);
            let full = r
                .annotation(GenerationCondition::FullKnowledge)
                .map(|a| a.commonsense);
            none == Some(0) && full == Some(1)
        })
        .map(|r| r.id().to_string())
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RelationAccounting {
    pub retrieved: usize,
    pub removed: usize,
    pub remaining: usize,
}

/// Change of one relation type's share between retrieved and filtered
/// knowledge, in absolute points and relative to the retrieved share.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShareChange {
    pub relation_type: RelationType,
    pub retrieved: Percent,
    pub filtered: Percent,
    pub absolute_points: f64,
    pub relative_percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub matrix: EvalMatrix,
    pub rates: SummaryRates,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusReport {
    pub records: usize,
    pub relations: RelationAccounting,
    pub distribution_retrieved: Option<RelationDistribution>,
    pub distribution_filtered: Option<RelationDistribution>,
    pub distribution_removed: Option<RelationDistribution>,
    pub share_changes: Vec<ShareChange>,
    /// Keyed by condition token; present only when every record is annotated.
    pub matrices: IndexMap<String, ConditionReport>,
    /// Condition token → number of records lacking an annotation.
    pub unannotated: IndexMap<String, usize>,
    /// Condition token → variant (or `Unclassified`) → count, over failed annotations.
    pub failure_variants: IndexMap<String, IndexMap<String, usize>>,
}

impl CorpusReport {
    pub fn build(records: &[KitgiRecord]) -> Result<Self, StatsError> {
        if records.is_empty() {
            return Err(StatsError::EmptyCorpus);
        }
        let dist = |kind| RelationDistribution::from_counts(relation_counts(records, kind)).ok();
        let retrieved = dist(BundleKind::Retrieved);
        let filtered = dist(BundleKind::Filtered);
        let removed = dist(BundleKind::Removed);
        let total = |d: &Option<RelationDistribution>| d.as_ref().map_or(0, |d| d.total);
        let relations = RelationAccounting {
            retrieved: total(&retrieved),
            removed: total(&removed),
            remaining: total(&filtered),
        };

        let mut share_changes = Vec::new();
        if let (Some(r), Some(f)) = (&retrieved, &filtered) {
            for rel in r.counts.keys().take(3) {
                let (a, b) = (r.percent(rel), f.percent(rel));
                let points = (f64::from(b.tenths()) - f64::from(a.tenths())) / 10.0;
                let relative = if a.tenths() == 0 {
                    0.0
                } else {
                    (points / a.as_f64() * 1000.0).round() / 10.0
                };
                share_changes.push(ShareChange {
                    relation_type: rel.clone(),
                    retrieved: a,
                    filtered: b,
                    absolute_points: points,
                    relative_percent: relative,
                });
            }
        }

        let mut matrices = IndexMap::new();
        let mut unannotated = IndexMap::new();
        let mut failure_variants = IndexMap::new();
        for condition in GenerationCondition::ALL {
            let key = condition.token().to_string();
            let missing = missing_annotations(records, condition).len();
            if missing == 0 {
                let matrix = build_matrix(records, condition)?;
                matrices.insert(
                    key.clone(),
                    ConditionReport {
                        rates: summarize(&matrix),
                        matrix,
                    },
                );
            } else {
                unannotated.insert(key.clone(), missing);
            }
            if missing < records.len() {
                failure_variants.insert(key, variant_tally(records, condition));
            }
        }

        Ok(CorpusReport {
            records: records.len(),
            relations,
            distribution_retrieved: retrieved,
            distribution_filtered: filtered,
            distribution_removed: removed,
            share_changes,
            matrices,
            unannotated,
            failure_variants,
        })
    }

    pub fn matrix(&self, condition: GenerationCondition) -> Option<&ConditionReport> {
        self.matrices.get(condition.token())
    }
}

fn variant_tally(
    records: &[KitgiRecord],
    condition: GenerationCondition,
) -> IndexMap<String, usize> {
    let mut tally: BTreeMap<&str, usize> = BTreeMap::new();
    for a in records
        .iter()
        .filter_map(|r| r.annotation(condition))
        .filter(|a| a.is_failure())
    {
        let label = a.failure_variant.map_or("Unclassified", |v| v.label());
        *tally.entry(label).or_insert(0) += 1;
    }
    let mut out = IndexMap::new();
    for label in crate::model::FailureVariant::ALL
        .iter()
        .map(|v| v.label())
        .chain(["Unclassified"])
    {
        out.insert(label.to_string(), tally.get(label).copied().unwrap_or(0));
    }
    out
}

fn distribution_csv(d: Option<&RelationDistribution>) -> String {
    let mut out = String::from("relation_type,count,percent\n");
    if let Some(d) = d {
        for (rel, n) in &d.counts {
            let _ = writeln!(out, "{},{},{}", rel, n, d.percent(rel));
        }
        let _ = writeln!(out, "TOTAL,{},{}", d.total, Percent::HUNDRED);
    }
    out
}

fn matrix_csv(report: Option<&ConditionReport>) -> String {
    let mut out = String::from("commonsense,coverage,count,percent\n");
    if let Some(r) = report {
        for (cs, cov, n) in r.matrix.cells() {
            let _ = writeln!(
                out,
                "{cs},{cov},{n},{}",
                Percent::ratio(n, r.matrix.total.max(1))
            );
        }
        let _ = writeln!(out, "TOTAL,,{},{}", r.matrix.total, Percent::HUNDRED);
    }
    out
}

fn variants_csv(report: &CorpusReport) -> String {
    let mut out = String::from("condition,variant,count\n");
    for (condition, tally) in &report.failure_variants {
        for (variant, n) in tally {
            let _ = writeln!(out, "{condition},{variant},{n}");
        }
    }
    out
}

pub const REPORT_FILES: [&str; 6] = [
    "distribution_full.csv",
    "distribution_filtered.csv",
    "matrix_full.csv",
    "matrix_filtered.csv",
    "failure_variants.csv",
    "summary.json",
];

/// Writes the report files into `out_dir` (created if needed). Output bytes
/// depend only on the records. `matrix_none.csv` is added when the
/// no-knowledge condition is fully annotated.
pub fn emit_report(
    records: &[KitgiRecord],
    out_dir: &Path,
) -> Result<(CorpusReport, Vec<PathBuf>), StatsError> {
    let report = CorpusReport::build(records)?;
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| StatsError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;

    let mut files: Vec<(&str, String)> = vec![
        (
            "distribution_full.csv",
            distribution_csv(report.distribution_retrieved.as_ref()),
        ),
        (
            "distribution_filtered.csv",
            distribution_csv(report.distribution_filtered.as_ref()),
        ),
        (
            "matrix_full.csv",
            matrix_csv(report.matrix(GenerationCondition::FullKnowledge)),
        ),
        (
            "matrix_filtered.csv",
            matrix_csv(report.matrix(GenerationCondition::FilteredKnowledge)),
        ),
        ("failure_variants.csv", variants_csv(&report)),
    ];
    if let Some(none) = report.matrix(GenerationCondition::NoKnowledge) {
        files.push(("matrix_none.csv", matrix_csv(Some(none))));
    }
    let mut summary = serde_json::to_string_pretty(&report).expect("report serializes");
    summary.push('\n');
    files.push(("summary.json", summary));

    let mut written = Vec::new();
    for (name, content) in files {
        let path = out_dir.join(name);
        fs::write(&path, content).map_err(io(&path))?;
        written.push(path);
    }
    Ok((report, written))
}
