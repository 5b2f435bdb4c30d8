use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::render::RawRow;
use super::{EvalError, Stage, StageResult};
use crate::dataset::{Difficulty, EditSample};
use crate::editops::EditCategory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleInfo {
    pub category: EditCategory,
    pub difficulty: Difficulty,
}

impl SampleInfo {
    pub fn index(samples: &[EditSample]) -> BTreeMap<String, SampleInfo> {
        samples
            .iter()
            .map(|s| {
                (
                    s.sample_id.clone(),
                    SampleInfo {
                        category: s.category,
                        difficulty: s.difficulty,
                    },
                )
            })
            .collect()
    }
}

/// Identifies the run a result came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RunInfo {
    pub label: String,
    pub config_hash: String,
    pub template_version: String,
    pub seed: u64,
}

/// One table row: a run at one stage. Means are percentages rounded to one
/// decimal; `None` where nothing was scored.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub run: RunInfo,
    pub stage: Stage,
    pub categories: BTreeMap<EditCategory, f64>,
    /// Micro-average over every scored sample of the row.
    pub avg: Option<f64>,
    pub difficulty: BTreeMap<Difficulty, f64>,
    pub scored: usize,
    pub errors: usize,
    pub fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageReport {
    /// Sorted by run label, then stage.
    pub rows: Vec<ReportRow>,
    /// Distinct samples per category over all rows.
    pub sample_counts: BTreeMap<EditCategory, usize>,
    pub difficulty_counts: BTreeMap<Difficulty, usize>,
}

impl StageReport {
    pub fn row(&self, label: &str, stage: Stage) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.run.label == label && r.stage == stage)
    }
}

/// Attaches category, bucket and run metadata to each result.
pub fn attach(
    results: &[StageResult],
    index: &BTreeMap<String, SampleInfo>,
    run: &RunInfo,
) -> Result<Vec<RawRow>, EvalError> {
    results
        .iter()
        .map(|r| {
            r.validate()?;
            let info = index
                .get(&r.sample_id)
                .ok_or_else(|| EvalError::UnknownSampleId(r.sample_id.clone()))?;
            Ok(RawRow {
                label: run.label.clone(),
                config_hash: run.config_hash.clone(),
                template_version: run.template_version.clone(),
                seed: run.seed,
                sample_id: r.sample_id.clone(),
                stage: r.stage,
                category: info.category,
                difficulty: info.difficulty,
                iou: r.iou,
                fallback_used: r.fallback_used,
                error: r.error.clone(),
            })
        })
        .collect()
}

pub fn aggregate(
    results: &[StageResult],
    index: &BTreeMap<String, SampleInfo>,
    run: &RunInfo,
) -> Result<StageReport, EvalError> {
    Ok(aggregate_rows(&attach(results, index, run)?))
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

fn mean_percent(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(round1(values.iter().sum::<f64>() / values.len() as f64 * 100.0))
}

/// Per-row means over scored samples. Errored samples are counted, not
/// averaged. Independent of the order of `rows`.
pub fn aggregate_rows(rows: &[RawRow]) -> StageReport {
    let mut sorted: Vec<&RawRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.label, a.stage, &a.sample_id, &a.config_hash).cmp(&(&b.label, b.stage, &b.sample_id, &b.config_hash))
    });
    let mut groups: BTreeMap<(&str, Stage), Vec<&RawRow>> = BTreeMap::new();
    let mut per_category: BTreeMap<EditCategory, BTreeSet<&str>> = BTreeMap::new();
    let mut per_bucket: BTreeMap<Difficulty, BTreeSet<&str>> = BTreeMap::new();
    for r in &sorted {
        groups.entry((&r.label, r.stage)).or_default().push(r);
        per_category.entry(r.category).or_default().insert(&r.sample_id);
        per_bucket.entry(r.difficulty).or_default().insert(&r.sample_id);
    }
    let mut report = StageReport {
        sample_counts: per_category.into_iter().map(|(c, s)| (c, s.len())).collect(),
        difficulty_counts: per_bucket.into_iter().map(|(d, s)| (d, s.len())).collect(),
        ..Default::default()
    };
    for ((_, stage), members) in groups {
        let first = members[0];
        let scored: Vec<&RawRow> = members.iter().copied().filter(|r| r.iou.is_some()).collect();
        let values = |keep: &dyn Fn(&RawRow) -> bool| -> Vec<f64> {
            scored.iter().filter(|r| keep(r)).filter_map(|r| r.iou).collect()
        };
        let categories = EditCategory::ALL
            .into_iter()
            .filter_map(|c| mean_percent(&values(&|r| r.category == c)).map(|m| (c, m)))
            .collect();
        let difficulty = Difficulty::ALL
            .into_iter()
            .filter_map(|d| mean_percent(&values(&|r| r.difficulty == d)).map(|m| (d, m)))
            .collect();
        report.rows.push(ReportRow {
            run: RunInfo {
                label: first.label.clone(),
                config_hash: first.config_hash.clone(),
                template_version: first.template_version.clone(),
                seed: first.seed,
            },
            stage,
            categories,
            avg: mean_percent(&values(&|_| true)),
            difficulty,
            scored: scored.len(),
            errors: members.len() - scored.len(),
            fallbacks: members.iter().filter(|r| r.fallback_used).count(),
        });
    }
    report
}
