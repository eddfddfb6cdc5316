//! Projection of free-delimited spans onto clip delimitations, and the
//! max-level merge of several annotators.
//!
//! A span *qualifies* for a clip when the intersection covers at least
//! `overlap_threshold` of the basis duration (the clip's, by default). Each
//! clip takes the highest level among qualifying spans, with the concepts of
//! every qualifying span at that level unioned. Clips without a qualifying
//! span are Easy Negatives.

use std::collections::{BTreeMap, BTreeSet};

use crate::annotation::{ClipDelimitation, ClipLabel, ConceptSet, ObjLevel, SpanAnnotation};
use crate::error::{Error, Result};

/// Duration the intersection is divided by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverlapBasis {
    #[default]
    ClipDuration,
    SpanDuration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    pub overlap_threshold: f64,
    pub overlap_basis: OverlapBasis,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            overlap_threshold: 0.2,
            overlap_basis: OverlapBasis::ClipDuration,
        }
    }
}

impl ProjectionConfig {
    pub fn with_threshold(overlap_threshold: f64) -> Result<Self> {
        let cfg = ProjectionConfig {
            overlap_threshold,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.overlap_threshold;
        if t > 0.0 && t <= 1.0 {
            Ok(())
        } else {
            Err(Error::BadThreshold(t))
        }
    }

    /// Fraction of the basis covered by the span/clip intersection.
    pub fn overlap_fraction(&self, span: &SpanAnnotation, clip: &ClipDelimitation) -> f64 {
        let inter = (span.end.min(clip.end) - span.start.max(clip.start)).max(0.0);
        let basis = match self.overlap_basis {
            OverlapBasis::ClipDuration => clip.duration(),
            OverlapBasis::SpanDuration => span.duration(),
        };
        inter / basis
    }

    fn qualifies(&self, span: &SpanAnnotation, clip: &ClipDelimitation) -> bool {
        let inter = span.end.min(clip.end) - span.start.max(clip.start);
        inter > 0.0 && self.overlap_fraction(span, clip) >= self.overlap_threshold
    }
}

/// Projects one annotator's spans of a film onto that film's clips.
///
/// Every clip gets a label, so the output has exactly `clips.len()` entries
/// in clip order.
pub fn project(
    annotator: &str,
    spans: &[SpanAnnotation],
    clips: &[ClipDelimitation],
    cfg: &ProjectionConfig,
) -> Result<Vec<ClipLabel>> {
    cfg.validate()?;
    let Some(film) = clips.first().map(|c| c.film_id.as_str()) else {
        return Ok(Vec::new());
    };
    if let Some(c) = clips.iter().find(|c| c.film_id != film) {
        return Err(Error::FilmMismatch {
            span_film: c.film_id.clone(),
            clip_film: film.to_owned(),
        });
    }
    if let Some(s) = spans.iter().find(|s| s.film_id != film) {
        return Err(Error::FilmMismatch {
            span_film: s.film_id.clone(),
            clip_film: film.to_owned(),
        });
    }

    Ok(clips
        .iter()
        .map(|clip| {
            let mut level = ObjLevel::EN;
            let mut concepts = ConceptSet::new();
            for span in spans.iter().filter(|s| cfg.qualifies(s, clip)) {
                if span.level > level {
                    level = span.level;
                    concepts = span.concepts.clone();
                } else if span.level == level {
                    concepts.extend(span.concepts.iter().copied());
                }
            }
            ClipLabel {
                film_id: clip.film_id.clone(),
                clip_id: clip.clip_id.clone(),
                level,
                concepts,
                annotators: BTreeSet::from([annotator.to_owned()]),
            }
        })
        .collect())
}

/// Merges several annotators' projections of the same clips.
///
/// The merged level is the maximum; concepts are the union over exactly the
/// annotators at that maximum, and so is the provenance.
pub fn merge(per_annotator: &[(String, Vec<ClipLabel>)]) -> Result<Vec<ClipLabel>> {
    let (_, first) = per_annotator.first().ok_or(Error::EmptyInput)?;
    for (_, labels) in &per_annotator[1..] {
        let same = labels.len() == first.len()
            && labels
                .iter()
                .zip(first)
                .all(|(a, b)| a.clip_id == b.clip_id && a.film_id == b.film_id);
        if !same {
            return Err(Error::ClipSetMismatch);
        }
    }

    Ok((0..first.len())
        .map(|i| {
            let top = per_annotator
                .iter()
                .map(|(_, l)| l[i].level)
                .max()
                .expect("at least one annotator");
            let mut concepts = ConceptSet::new();
            let mut annotators = BTreeSet::new();
            for (id, labels) in per_annotator {
                let l = &labels[i];
                if l.level != top {
                    continue;
                }
                concepts.extend(l.concepts.iter().copied());
                if l.annotators.is_empty() {
                    annotators.insert(id.clone());
                } else {
                    annotators.extend(l.annotators.iter().cloned());
                }
            }
            ClipLabel {
                film_id: first[i].film_id.clone(),
                clip_id: first[i].clip_id.clone(),
                level: top,
                concepts,
                annotators,
            }
        })
        .collect())
}

/// Result of fusing a whole corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Fusion {
    /// Per-annotator projections, grouped by film then annotator.
    pub projections: Vec<ClipLabel>,
    /// One merged label per clip, in clip-index order.
    pub merged: Vec<ClipLabel>,
    /// Films with clips but no annotation at all; their clips are implicit EN.
    pub unannotated_films: Vec<String>,
    /// Films that have spans but no clip delimitations; their spans are ignored.
    pub films_without_clips: Vec<String>,
}

/// Projects every annotator on every film and merges per film.
///
/// Annotators are discovered per film from the spans. An annotator with no
/// span on a film contributes nothing beyond an implicit EN timeline, which
/// never changes the merge.
pub fn fuse(
    spans: &[SpanAnnotation],
    clips: &[ClipDelimitation],
    cfg: &ProjectionConfig,
) -> Result<Fusion> {
    cfg.validate()?;
    let mut clips_by_film: BTreeMap<&str, Vec<ClipDelimitation>> = BTreeMap::new();
    for c in clips {
        clips_by_film.entry(&c.film_id).or_default().push(c.clone());
    }
    let mut spans_by_film: BTreeMap<&str, BTreeMap<&str, Vec<SpanAnnotation>>> = BTreeMap::new();
    for s in spans {
        spans_by_film
            .entry(&s.film_id)
            .or_default()
            .entry(&s.annotator_id)
            .or_default()
            .push(s.clone());
    }

    let mut out = Fusion::default();
    for (&film, film_clips) in &clips_by_film {
        let Some(by_annotator) = spans_by_film.get(film) else {
            out.unannotated_films.push(film.to_owned());
            out.merged.extend(film_clips.iter().map(|c| ClipLabel {
                film_id: c.film_id.clone(),
                clip_id: c.clip_id.clone(),
                level: ObjLevel::EN,
                concepts: ConceptSet::new(),
                annotators: BTreeSet::new(),
            }));
            continue;
        };
        let mut projected = Vec::with_capacity(by_annotator.len());
        for (&annotator, ann_spans) in by_annotator {
            let labels = project(annotator, ann_spans, film_clips, cfg)?;
            out.projections.extend(labels.iter().cloned());
            projected.push((annotator.to_owned(), labels));
        }
        out.merged.extend(merge(&projected)?);
    }
    out.films_without_clips = spans_by_film
        .keys()
        .filter(|f| !clips_by_film.contains_key(*f))
        .map(|f| f.to_string())
        .collect();
    Ok(out)
}

/// Merged class counts at one overlap threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub threshold: f64,
    /// Clips per level, indexed by [`ObjLevel::index`].
    pub counts: [usize; 4],
    /// `counts` minus the counts of the first threshold.
    pub deltas: [i64; 4],
}

/// Re-runs the fusion at each threshold and tabulates merged level counts.
pub fn sweep_thresholds(
    spans: &[SpanAnnotation],
    clips: &[ClipDelimitation],
    thresholds: &[f64],
    basis: OverlapBasis,
) -> Result<Vec<SweepRow>> {
    let mut rows: Vec<SweepRow> = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let cfg = ProjectionConfig {
            overlap_threshold: t,
            overlap_basis: basis,
        };
        let fused = fuse(spans, clips, &cfg)?;
        let mut counts = [0usize; 4];
        for l in &fused.merged {
            counts[l.level.index()] += 1;
        }
        let deltas = match rows.first() {
            Some(base) => std::array::from_fn(|k| counts[k] as i64 - base.counts[k] as i64),
            None => [0; 4],
        };
        rows.push(SweepRow {
            threshold: t,
            counts,
            deltas,
        });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("threshold,EN,HN,NS,S,dEN,dHN,dNS,dS\n");
    for r in rows {
        let c = r.counts;
        let d = r.deltas;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.threshold, c[0], c[1], c[2], c[3], d[0], d[1], d[2], d[3]
        ));
    }
    out
}
