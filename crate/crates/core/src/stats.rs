//! Dataset-level summaries of clip labels: level distribution, concept
//! histograms per level and mean concept counts.
//!
//! All fractions are over clips, not over screen time.

use std::collections::{BTreeMap, BTreeSet};

use crate::annotation::{ClipLabel, Concept, ObjLevel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub clip_count: usize,
    pub level_counts: [usize; 4],
    pub level_fractions: BTreeMap<ObjLevel, f64>,
    /// `[concept][level]` clip counts.
    pub concept_counts_by_level: [[usize; 4]; Concept::COUNT],
    /// Mean concepts per clip for HN, NS and S; levels without clips are absent.
    pub mean_concepts_per_level: BTreeMap<ObjLevel, f64>,
}

fn level_means<'a>(labels: impl IntoIterator<Item = &'a ClipLabel>) -> BTreeMap<ObjLevel, f64> {
    let mut sums = [0usize; 4];
    let mut counts = [0usize; 4];
    for l in labels {
        sums[l.level.index()] += l.concepts.len();
        counts[l.level.index()] += 1;
    }
    ObjLevel::ALL
        .into_iter()
        .filter(|lvl| lvl.requires_concepts() && counts[lvl.index()] > 0)
        .map(|lvl| (lvl, sums[lvl.index()] as f64 / counts[lvl.index()] as f64))
        .collect()
}

pub fn summarize(labels: &[ClipLabel]) -> Result<DatasetSummary> {
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut level_counts = [0usize; 4];
    let mut concept_counts_by_level = [[0usize; 4]; Concept::COUNT];
    for l in labels {
        level_counts[l.level.index()] += 1;
        for c in &l.concepts {
            concept_counts_by_level[c.index()][l.level.index()] += 1;
        }
    }
    let n = labels.len() as f64;
    Ok(DatasetSummary {
        clip_count: labels.len(),
        level_counts,
        level_fractions: ObjLevel::ALL
            .into_iter()
            .map(|lvl| (lvl, level_counts[lvl.index()] as f64 / n))
            .collect(),
        concept_counts_by_level,
        mean_concepts_per_level: level_means(labels),
    })
}

/// Mean concepts per level for one annotator, and whether they grow with
/// the level.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatorTrend {
    pub means: BTreeMap<ObjLevel, f64>,
    /// Means are non-decreasing along HN ≤ NS ≤ S (absent levels skipped).
    pub non_decreasing: bool,
}

impl AnnotatorTrend {
    fn from_means(means: BTreeMap<ObjLevel, f64>) -> Self {
        let ordered: Vec<f64> = means.values().copied().collect();
        let non_decreasing = ordered.windows(2).all(|w| w[0] <= w[1]);
        AnnotatorTrend {
            means,
            non_decreasing,
        }
    }
}

/// Per-annotator concept-count trend, computed on pre-merge projections.
/// Each label is attributed to every annotator in its provenance.
pub fn per_annotator_trend(labels: &[ClipLabel]) -> Result<BTreeMap<String, AnnotatorTrend>> {
    let mut by_annotator: BTreeMap<&str, Vec<&ClipLabel>> = BTreeMap::new();
    for l in labels {
        for a in &l.annotators {
            by_annotator.entry(a).or_default().push(l);
        }
    }
    if by_annotator.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(by_annotator
        .into_iter()
        .map(|(a, ls)| (a.to_owned(), AnnotatorTrend::from_means(level_means(ls))))
        .collect())
}

/// Level fractions after dropping the clips whose level is in `drop`.
pub fn task_class_fractions(
    labels: &[ClipLabel],
    drop: &BTreeSet<ObjLevel>,
) -> Result<BTreeMap<ObjLevel, f64>> {
    let mut counts = [0usize; 4];
    for l in labels.iter().filter(|l| !drop.contains(&l.level)) {
        counts[l.level.index()] += 1;
    }
    let kept: usize = counts.iter().sum();
    if kept == 0 {
        return Err(if labels.is_empty() {
            Error::EmptyInput
        } else {
            Error::AllDropped
        });
    }
    Ok(ObjLevel::ALL
        .into_iter()
        .filter(|lvl| !drop.contains(lvl))
        .map(|lvl| (lvl, counts[lvl.index()] as f64 / kept as f64))
        .collect())
}

/// Long-format CSV: `level,concept,count,fraction`.
///
/// One `*` row per level gives the clip count and its share of all clips;
/// per-concept rows give the number of clips of that level with the concept
/// and the share of that level's clips.
pub fn summary_csv(s: &DatasetSummary) -> String {
    let mut out = String::from("level,concept,count,fraction\n");
    for lvl in ObjLevel::ALL {
        let n = s.level_counts[lvl.index()];
        out.push_str(&format!("{lvl},*,{n},{}\n", s.level_fractions[&lvl]));
        if !lvl.requires_concepts() {
            continue;
        }
        for c in Concept::ALL {
            let k = s.concept_counts_by_level[c.index()][lvl.index()];
            let frac = if n == 0 { 0.0 } else { k as f64 / n as f64 };
            out.push_str(&format!("{lvl},{c},{k},{frac}\n"));
        }
    }
    out
}
