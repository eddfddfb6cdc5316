//! Objectification vocabulary and the timeline data model.
//!
//! Annotators mark free-delimited spans of a film with an objectification
//! level and the visual concepts that produce it. Spans are later projected
//! onto fixed clip delimitations (see [`crate::fusion`]).
//!
//! Three text formats live here:
//!
//! * annotation spans, JSON Lines:
//!   `{"film":"juno","annotator":"a1","start":12.0,"end":30.5,"level":"S","concepts":["Body","Posture"]}`
//! * the clip index, CSV rows `clip_id,film_id,start_s,end_s` (an optional
//!   header row starting with `clip_id` is skipped);
//! * clip labels, JSON Lines with `film`, `clip`, `level`, `concepts` and
//!   `annotators`. Both per-annotator projections and merged labels use it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Objectification level, ordered `EN < HN < NS < S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ObjLevel {
    /// Easy Negative. Also the implicit level of any unannotated time.
    EN,
    /// Hard Negative: objectification elements present, no effect produced.
    HN,
    /// Not Sure.
    NS,
    /// Sure.
    S,
}

impl ObjLevel {
    pub const ALL: [ObjLevel; 4] = [ObjLevel::EN, ObjLevel::HN, ObjLevel::NS, ObjLevel::S];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ObjLevel::EN => "EN",
            ObjLevel::HN => "HN",
            ObjLevel::NS => "NS",
            ObjLevel::S => "S",
        }
    }

    /// Whether a span at this level must carry at least one concept.
    pub fn requires_concepts(self) -> bool {
        self != ObjLevel::EN
    }
}

impl fmt::Display for ObjLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjLevel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "EN" => Ok(ObjLevel::EN),
            "HN" => Ok(ObjLevel::HN),
            "NS" => Ok(ObjLevel::NS),
            "S" => Ok(ObjLevel::S),
            other => Err(format!("unknown level {other:?}")),
        }
    }
}

/// The eight visual concepts of the objectification thesaurus.
///
/// The declaration order is the canonical index used for one-hot encodings
/// and for the layout of the concept subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Concept {
    TypeOfShot,
    Look,
    Body,
    Posture,
    Clothing,
    Appearance,
    ExpressionOfEmotion,
    Activity,
}

impl Concept {
    pub const COUNT: usize = 8;

    pub const ALL: [Concept; 8] = [
        Concept::TypeOfShot,
        Concept::Look,
        Concept::Body,
        Concept::Posture,
        Concept::Clothing,
        Concept::Appearance,
        Concept::ExpressionOfEmotion,
        Concept::Activity,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Concept::TypeOfShot => "TypeOfShot",
            Concept::Look => "Look",
            Concept::Body => "Body",
            Concept::Posture => "Posture",
            Concept::Clothing => "Clothing",
            Concept::Appearance => "Appearance",
            Concept::ExpressionOfEmotion => "ExpressionOfEmotion",
            Concept::Activity => "Activity",
        }
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Concept {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Concept::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown concept {s:?}"))
    }
}

pub type ConceptSet = BTreeSet<Concept>;

fn check_level_concepts(level: ObjLevel, concepts: &ConceptSet) -> std::result::Result<(), String> {
    if level == ObjLevel::EN && !concepts.is_empty() {
        return Err("No concept can be annotated for an EN span".into());
    }
    if level.requires_concepts() && concepts.is_empty() {
        return Err(format!("level {level} requires at least one concept"));
    }
    Ok(())
}

/// One annotator's free-delimited span of a film.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanAnnotation {
    pub film_id: String,
    pub annotator_id: String,
    pub start: f64,
    pub end: f64,
    pub level: ObjLevel,
    pub concepts: ConceptSet,
}

impl SpanAnnotation {
    /// Builds a span, enforcing `0 <= start < end` and the level/concept rule.
    pub fn new(
        film_id: impl Into<String>,
        annotator_id: impl Into<String>,
        start: f64,
        end: f64,
        level: ObjLevel,
        concepts: impl IntoIterator<Item = Concept>,
    ) -> std::result::Result<Self, String> {
        let concepts: ConceptSet = concepts.into_iter().collect();
        if !start.is_finite() || !end.is_finite() {
            return Err("span bounds must be finite".into());
        }
        if start < 0.0 {
            return Err(format!("negative start {start}"));
        }
        if start >= end {
            return Err(format!("empty or inverted span [{start}, {end})"));
        }
        check_level_concepts(level, &concepts)?;
        Ok(SpanAnnotation {
            film_id: film_id.into(),
            annotator_id: annotator_id.into(),
            start,
            end,
            level,
            concepts,
        })
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// A fixed clip boundary of a film.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipDelimitation {
    pub clip_id: String,
    pub film_id: String,
    pub start: f64,
    pub end: f64,
}

impl ClipDelimitation {
    pub fn new(
        clip_id: impl Into<String>,
        film_id: impl Into<String>,
        start: f64,
        end: f64,
    ) -> std::result::Result<Self, String> {
        if !start.is_finite() || !end.is_finite() {
            return Err("clip bounds must be finite".into());
        }
        if start < 0.0 {
            return Err(format!("negative start {start}"));
        }
        if start >= end {
            return Err(format!("empty or inverted clip [{start}, {end})"));
        }
        Ok(ClipDelimitation {
            clip_id: clip_id.into(),
            film_id: film_id.into(),
            start,
            end,
        })
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Clip-aligned label, either one annotator's projection or a merge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipLabel {
    pub film_id: String,
    pub clip_id: String,
    pub level: ObjLevel,
    pub concepts: ConceptSet,
    /// Annotators whose label produced this one.
    pub annotators: BTreeSet<String>,
}

impl ClipLabel {
    pub fn new(
        film_id: impl Into<String>,
        clip_id: impl Into<String>,
        level: ObjLevel,
        concepts: impl IntoIterator<Item = Concept>,
        annotators: impl IntoIterator<Item = String>,
    ) -> std::result::Result<Self, String> {
        let concepts: ConceptSet = concepts.into_iter().collect();
        check_level_concepts(level, &concepts)?;
        Ok(ClipLabel {
            film_id: film_id.into(),
            clip_id: clip_id.into(),
            level,
            concepts,
            annotators: annotators.into_iter().collect(),
        })
    }

    pub fn has(&self, concept: Concept) -> bool {
        self.concepts.contains(&concept)
    }
}

#[derive(Deserialize)]
struct RawSpan {
    film: String,
    annotator: String,
    start: f64,
    end: f64,
    level: String,
    #[serde(default)]
    concepts: Vec<String>,
}

#[derive(Serialize)]
struct SpanRecord<'a> {
    film: &'a str,
    annotator: &'a str,
    start: f64,
    end: f64,
    level: &'static str,
    concepts: Vec<&'static str>,
}

#[derive(Serialize, Deserialize)]
struct LabelRecord {
    film: String,
    clip: String,
    level: String,
    #[serde(default)]
    concepts: Vec<String>,
    #[serde(default)]
    annotators: Vec<String>,
}

fn parse_concepts(names: &[String]) -> std::result::Result<ConceptSet, String> {
    names.iter().map(|n| n.parse::<Concept>()).collect()
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Parses annotation spans from JSON Lines. Blank lines are skipped; line
/// numbers in errors are 1-based.
pub fn parse_annotations(text: &str) -> Result<Vec<SpanAnnotation>> {
    content_lines(text)
        .map(|(line, l)| {
            let raw: RawSpan = serde_json::from_str(l).map_err(|e| Error::MalformedRecord {
                line,
                reason: e.to_string(),
            })?;
            let invariant = |reason: String| Error::InvariantViolation { line, reason };
            let level = raw.level.parse::<ObjLevel>().map_err(invariant)?;
            let concepts = parse_concepts(&raw.concepts).map_err(invariant)?;
            SpanAnnotation::new(raw.film, raw.annotator, raw.start, raw.end, level, concepts)
                .map_err(invariant)
        })
        .collect()
}

pub fn serialize_annotations(spans: &[SpanAnnotation]) -> String {
    let mut out = String::new();
    for s in spans {
        let rec = SpanRecord {
            film: &s.film_id,
            annotator: &s.annotator_id,
            start: s.start,
            end: s.end,
            level: s.level.as_str(),
            concepts: s.concepts.iter().map(|c| c.as_str()).collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("span record serializes"));
        out.push('\n');
    }
    out
}

/// Parses the clip index, returning clips grouped by film (films in
/// lexicographic order) and sorted by start time within each film.
pub fn parse_clip_index(text: &str) -> Result<Vec<ClipDelimitation>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut by_film: BTreeMap<String, Vec<ClipDelimitation>> = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::MalformedRecord {
            line: e.position().map_or(i + 1, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        if i == 0 && rec.get(0) == Some("clip_id") {
            continue;
        }
        let malformed = |reason: String| Error::MalformedRecord { line, reason };
        if rec.len() != 4 {
            return Err(malformed(format!("expected 4 fields, found {}", rec.len())));
        }
        let time = |k: usize| {
            rec[k]
                .parse::<f64>()
                .map_err(|e| malformed(format!("field {}: {e}", k + 1)))
        };
        let (start, end) = (time(2)?, time(3)?);
        let clip = ClipDelimitation::new(&rec[0], &rec[1], start, end)
            .map_err(|reason| Error::InvariantViolation { line, reason })?;
        by_film.entry(clip.film_id.clone()).or_default().push(clip);
    }
    let mut out = Vec::new();
    for (film, mut clips) in by_film {
        clips.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.end.total_cmp(&b.end)));
        let mut seen = BTreeSet::new();
        for c in &clips {
            if !seen.insert(c.clip_id.as_str()) {
                return Err(Error::DuplicateClip {
                    film,
                    clip: c.clip_id.clone(),
                });
            }
        }
        for pair in clips.windows(2) {
            if pair[0].end > pair[1].start {
                return Err(Error::OverlappingClips {
                    film,
                    first: pair[0].clip_id.clone(),
                    second: pair[1].clip_id.clone(),
                });
            }
        }
        out.extend(clips);
    }
    Ok(out)
}

pub fn serialize_clip_index(clips: &[ClipDelimitation]) -> String {
    clips
        .iter()
        .map(|c| format!("{},{},{},{}\n", c.clip_id, c.film_id, c.start, c.end))
        .collect()
}

/// Parses clip labels (projection dumps or merged output) from JSON Lines.
pub fn parse_labels(text: &str) -> Result<Vec<ClipLabel>> {
    content_lines(text)
        .map(|(line, l)| {
            let raw: LabelRecord = serde_json::from_str(l).map_err(|e| Error::MalformedRecord {
                line,
                reason: e.to_string(),
            })?;
            let invariant = |reason: String| Error::InvariantViolation { line, reason };
            let level = raw.level.parse::<ObjLevel>().map_err(invariant)?;
            let concepts = parse_concepts(&raw.concepts).map_err(invariant)?;
            ClipLabel::new(raw.film, raw.clip, level, concepts, raw.annotators).map_err(invariant)
        })
        .collect()
}

pub fn serialize_labels(labels: &[ClipLabel]) -> String {
    let mut out = String::new();
    for l in labels {
        let rec = LabelRecord {
            film: l.film_id.clone(),
            clip: l.clip_id.clone(),
            level: l.level.as_str().to_owned(),
            concepts: l.concepts.iter().map(|c| c.as_str().to_owned()).collect(),
            annotators: l.annotators.iter().cloned().collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("label record serializes"));
        out.push('\n');
    }
    out
}
