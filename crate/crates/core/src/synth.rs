//! Deterministic synthetic datasets for oracles and demos.
//!
//! Each concept owns a direction of a seeded orthonormal frame. A clip's
//! embedding is `amplitude` times the sum of its concepts' directions plus
//! isotropic Gaussian noise. Levels follow the compositional pattern of the
//! real data: `EN` clips show no concept, `HN` clips one, `S` clips two to
//! four, so objectification is "two or more concepts present".

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::annotation::{
    ClipDelimitation, ClipLabel, Concept, ConceptSet, ObjLevel, SpanAnnotation,
};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub films: usize,
    pub clips_per_film: usize,
    pub dim: usize,
    pub amplitude: f64,
    pub noise: f64,
    /// Relative level frequencies, `[EN, HN, NS, S]`.
    pub level_weights: [f64; 4],
    /// Extra offset of `S` clips along a dedicated direction.
    pub objectification_shift: f64,
    /// `(a, b, s)`: concept `b` is rendered along `normalize(d_b + s·d_a)`.
    pub entangle: Option<(Concept, Concept, f64)>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            films: 12,
            clips_per_film: 80,
            dim: 64,
            amplitude: 2.0,
            noise: 0.01,
            level_weights: [0.5, 0.25, 0.0, 0.25],
            objectification_shift: 0.0,
            entangle: None,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn with_seed(seed: u64) -> Self {
        SynthConfig {
            seed,
            ..Default::default()
        }
    }

    /// Objectification is an offset along one direction and concepts are
    /// not rendered, so a linear model trained on any negatives separates
    /// `S` from every negative level.
    pub fn linear_oracle(seed: u64) -> Self {
        SynthConfig {
            amplitude: 0.0,
            noise: 0.2,
            objectification_shift: 8.0,
            ..Self::with_seed(seed)
        }
    }

    /// `Body` shares a component with `Clothing` and detection is noisy.
    pub fn entangled(seed: u64) -> Self {
        SynthConfig {
            noise: 0.3,
            entangle: Some((Concept::Body, Concept::Clothing, 2.0)),
            ..Self::with_seed(seed)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthBundle {
    pub clips: Vec<ClipDelimitation>,
    /// Ground-truth labels, equal to the merge of `spans` at any threshold.
    pub labels: Vec<ClipLabel>,
    /// Two annotators; the second omits some non-`EN` clips.
    pub spans: Vec<SpanAnnotation>,
    pub embeddings: EmbeddingTable,
    /// Unit rendering direction of each concept, canonical order.
    pub directions: Vec<Vec<f64>>,
}

/// `count` orthonormal vectors of length `dim` by Gram-Schmidt.
pub fn orthonormal_frame(dim: usize, count: usize, rng: &mut seed::Rng) -> Result<Vec<Vec<f64>>> {
    if count > dim {
        return Err(Error::Shape(format!(
            "cannot fit {count} orthonormal vectors in {dim} dimensions"
        )));
    }
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(count);
    while frame.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
        for u in &frame {
            let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            frame.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    Ok(frame)
}

fn pick_level(weights: &[f64; 4], rng: &mut seed::Rng) -> ObjLevel {
    let total: f64 = weights.iter().sum();
    let mut r = rng.random_range(0.0..total);
    for (level, w) in ObjLevel::ALL.into_iter().zip(weights) {
        if r < *w {
            return level;
        }
        r -= w;
    }
    ObjLevel::S
}

fn pick_concepts(level: ObjLevel, rng: &mut seed::Rng) -> ConceptSet {
    let n = match level {
        ObjLevel::EN => 0,
        ObjLevel::HN => 1,
        ObjLevel::NS => rng.random_range(1..=3),
        ObjLevel::S => rng.random_range(2..=4),
    };
    let mut all = Concept::ALL;
    all.shuffle(rng);
    all[..n].iter().copied().collect()
}

/// Labels and clip delimitations only.
pub fn synth_labels(cfg: &SynthConfig) -> Result<(Vec<ClipDelimitation>, Vec<ClipLabel>)> {
    if cfg.films == 0 || cfg.clips_per_film == 0 || cfg.level_weights.iter().any(|w| *w < 0.0) {
        return Err(Error::Shape(
            "synthetic dataset needs films, clips and non-negative weights".into(),
        ));
    }
    let mut rng = seed::rng_at(cfg.seed, &[1]);
    let mut clips = Vec::new();
    let mut labels = Vec::new();
    for f in 0..cfg.films {
        let film = format!("film{f:02}");
        for i in 0..cfg.clips_per_film {
            let id = format!("{film}_c{i:03}");
            let start = 10.0 * i as f64;
            clips.push(
                ClipDelimitation::new(&id, &film, start, start + 10.0).map_err(Error::Shape)?,
            );
            let level = pick_level(&cfg.level_weights, &mut rng);
            let concepts = pick_concepts(level, &mut rng);
            labels.push(
                ClipLabel::new(&film, &id, level, concepts, ["a1".to_string()])
                    .map_err(Error::Shape)?,
            );
        }
    }
    Ok((clips, labels))
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthBundle> {
    let (clips, labels) = synth_labels(cfg)?;
    let mut frame_rng = seed::rng_at(cfg.seed, &[2]);
    let frame = orthonormal_frame(cfg.dim, Concept::COUNT + 1, &mut frame_rng)?;
    let mut directions: Vec<Vec<f64>> = frame[..Concept::COUNT].to_vec();
    if let Some((a, b, s)) = cfg.entangle {
        let mixed: Vec<f64> = directions[b.index()]
            .iter()
            .zip(&directions[a.index()])
            .map(|(db, da)| db + s * da)
            .collect();
        let norm = mixed.iter().map(|v| v * v).sum::<f64>().sqrt();
        directions[b.index()] = mixed.into_iter().map(|v| v / norm).collect();
    }
    let obj_dir = &frame[Concept::COUNT];

    let noise = Normal::new(0.0, cfg.noise.max(0.0)).map_err(|e| Error::Shape(e.to_string()))?;
    let mut rng = seed::rng_at(cfg.seed, &[3]);
    let mut embeddings = EmbeddingTable::new(cfg.dim)?;
    for l in &labels {
        let mut v: Vec<f64> = (0..cfg.dim).map(|_| noise.sample(&mut rng)).collect();
        for c in &l.concepts {
            v.iter_mut()
                .zip(&directions[c.index()])
                .for_each(|(x, d)| *x += cfg.amplitude * d);
        }
        if l.level == ObjLevel::S {
            v.iter_mut()
                .zip(obj_dir)
                .for_each(|(x, d)| *x += cfg.objectification_shift * d);
        }
        embeddings.insert(l.clip_id.clone(), v.into_iter().map(|x| x as f32).collect())?;
    }

    let mut span_rng = seed::rng_at(cfg.seed, &[4]);
    let mut spans = Vec::new();
    for (annotator, keep) in [("a1", 1.0), ("a2", 0.7)] {
        for (clip, l) in clips.iter().zip(&labels) {
            if l.level == ObjLevel::EN || !span_rng.random_bool(keep) {
                continue;
            }
            let span = SpanAnnotation::new(
                &clip.film_id,
                annotator,
                clip.start,
                clip.end,
                l.level,
                l.concepts.iter().copied(),
            )
            .map_err(Error::Shape)?;
            spans.push(span);
        }
    }
    Ok(SynthBundle {
        clips,
        labels,
        spans,
        embeddings,
        directions,
    })
}

/// Labels with `NS` dropped and predictions that are wrong exactly on the
/// `HN` clips (the truth being `level == S`).
pub fn hn_failure_fixture(seed: u64, n: usize) -> Result<(Vec<ClipLabel>, Vec<bool>)> {
    let cfg = SynthConfig {
        films: 1,
        clips_per_film: n,
        level_weights: [0.5, 0.25, 0.0, 0.25],
        seed,
        ..Default::default()
    };
    let (_, labels) = synth_labels(&cfg)?;
    let preds = labels
        .iter()
        .map(|l| match l.level {
            ObjLevel::HN => true,
            level => level == ObjLevel::S,
        })
        .collect();
    Ok((labels, preds))
}

/// Labels with predictions whose success is an independent coin flip of
/// rate `p_success`.
pub fn independent_failure_fixture(
    seed: u64,
    n: usize,
    p_success: f64,
) -> Result<(Vec<ClipLabel>, Vec<bool>)> {
    let cfg = SynthConfig {
        films: 1,
        clips_per_film: n,
        seed,
        ..Default::default()
    };
    let (_, labels) = synth_labels(&cfg)?;
    let mut rng = seed::rng_at(seed, &[5]);
    let preds = labels
        .iter()
        .map(|l| {
            let truth = l.level == ObjLevel::S;
            if rng.random_bool(p_success) {
                truth
            } else {
                !truth
            }
        })
        .collect();
    Ok((labels, preds))
}
