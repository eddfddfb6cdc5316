//! Post-hoc concept bottleneck.
//!
//! One concept activation vector (CAV) is fitted per concept: the unit
//! normal of a linear SVM separating clips that show the concept from
//! negatives. Embeddings projected on the eight normals give concept
//! coordinates, on which interpretable classifiers are trained.
//!
//! Projection coordinates use the bias-free dot product with the unit
//! normal. Presence detection uses the full signed score `w·x + b`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::{ClipLabel, Concept, ObjLevel};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result, Side};
use crate::harness::{
    self, run_task_with_models, EvalReport, FeatureMap, ModelKind, TaskConfig, TrainedModel,
};
use crate::models::{dot, f1, train_svm, DecisionTree, LinearModel, Metrics, NodeKind, SvmConfig};
use crate::seed;

/// Which clips serve as negatives for a concept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativeMode {
    /// `EN` clips only.
    EnOnly,
    /// `EN` clips plus `S`/`HN` clips without the concept.
    EnPlusWithout,
}

impl std::str::FromStr for NegativeMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "en-only" => Ok(NegativeMode::EnOnly),
            "en-plus-without" => Ok(NegativeMode::EnPlusWithout),
            _ => Err(format!("unknown negative mode {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptVector {
    pub concept: Concept,
    pub unit_normal: Vec<f64>,
    /// SVM bias divided by `‖w‖`, so `unit_normal·x + bias` has the sign of
    /// the SVM decision.
    pub bias: f64,
    pub negative_mode: NegativeMode,
    /// F1 on the held-out test fold.
    pub cv_f1: f64,
    /// Selected margin tolerance.
    pub c: f64,
}

impl ConceptVector {
    /// Normalizes a fitted separator.
    pub fn from_linear(
        concept: Concept,
        model: &LinearModel,
        negative_mode: NegativeMode,
        cv_f1: f64,
        c: f64,
    ) -> Result<Self> {
        let norm = dot(&model.weights, &model.weights).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Shape(format!(
                "separator for {concept} has zero or non-finite norm"
            )));
        }
        Ok(ConceptVector {
            concept,
            unit_normal: model.weights.iter().map(|w| w / norm).collect(),
            bias: model.bias / norm,
            negative_mode,
            cv_f1,
            c,
        })
    }

    /// Signed presence score `n·x + b`.
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.unit_normal, x) + self.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptScores {
    pub clip_id: String,
    pub scores: [f64; 8],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptSets {
    pub positives: Vec<String>,
    pub negatives: Vec<String>,
}

/// Positives are `S`/`HN` clips showing `concept`; negatives follow `mode`.
/// `NS` clips are ignored.
pub fn build_concept_sets(
    labels: &[ClipLabel],
    concept: Concept,
    mode: NegativeMode,
) -> Result<ConceptSets> {
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for l in labels {
        match l.level {
            ObjLevel::NS => {}
            ObjLevel::EN => negatives.push(l.clip_id.clone()),
            ObjLevel::HN | ObjLevel::S if l.has(concept) => positives.push(l.clip_id.clone()),
            ObjLevel::HN | ObjLevel::S => {
                if mode == NegativeMode::EnPlusWithout {
                    negatives.push(l.clip_id.clone());
                }
            }
        }
    }
    for (side, set) in [(Side::Positive, &positives), (Side::Negative, &negatives)] {
        if set.is_empty() {
            return Err(Error::EmptyClass { concept, side });
        }
    }
    Ok(ConceptSets {
        positives,
        negatives,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavConfig {
    /// Outer folds; the last is the test fold.
    pub folds: usize,
    /// Cross-validation folds over the remaining data.
    pub cv_folds: usize,
    pub c_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for CavConfig {
    fn default() -> Self {
        CavConfig {
            folds: 10,
            cv_folds: 8,
            c_grid: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            seed: 0,
        }
    }
}

impl CavConfig {
    pub fn with_seed(seed: u64) -> Self {
        CavConfig {
            seed,
            ..Default::default()
        }
    }
}

fn rows(emb: &EmbeddingTable, ids: &[String]) -> Result<Vec<Vec<f64>>> {
    ids.iter().map(|id| emb.vector(id)).collect()
}

fn labelled(
    emb: &EmbeddingTable,
    pos: &[String],
    neg: &[String],
) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
    let mut x = rows(emb, pos)?;
    x.extend(rows(emb, neg)?);
    let y = (0..x.len()).map(|i| i < pos.len()).collect();
    Ok((x, y))
}

/// Fits one CAV.
///
/// Both sets are shuffled and dealt into `folds` folds; the last fold of
/// each is the test set. The rest is re-dealt into `cv_folds` folds. For
/// each `c` in the grid, every cross-validation fold is scored by the mean
/// validation F1 of SVMs trained on balanced draws of the other folds; the
/// best mean wins, ties going to the larger `c`. The final SVM is refitted
/// on all non-test data and its test F1 is stored as `cv_f1`.
pub fn fit_cav(
    emb: &EmbeddingTable,
    concept: Concept,
    sets: &ConceptSets,
    mode: NegativeMode,
    cfg: &CavConfig,
) -> Result<ConceptVector> {
    if cfg.folds < 2 || cfg.cv_folds < 2 || cfg.c_grid.is_empty() {
        return Err(Error::Shape(
            "need at least 2 folds, 2 CV folds and one c".into(),
        ));
    }
    for (name, set) in [("positive", &sets.positives), ("negative", &sets.negatives)] {
        if set.len() < cfg.folds {
            return Err(Error::ClassTooSmall {
                class: format!("{concept} {name}"),
                count: set.len(),
                folds: cfg.folds,
            });
        }
    }
    let split = |ids: &[String], branch: u64| {
        let order = harness::shuffled(ids, &mut seed::rng_at(cfg.seed, &[branch]));
        let mut folds = harness::deal(&order, cfg.folds);
        let test = folds.pop().expect("at least two folds");
        let rest = folds.concat();
        let cv = harness::deal(&rest, cfg.cv_folds);
        (test, rest, cv)
    };
    let (pos_test, pos_rest, pos_cv) = split(&sets.positives, 0);
    let (neg_test, neg_rest, neg_cv) = split(&sets.negatives, 1);

    let mut best: Option<(f64, f64)> = None;
    for &c in &cfg.c_grid {
        let mut scores = Vec::new();
        for f in 0..cfg.cv_folds {
            let others = |cv: &[Vec<String>]| -> Vec<String> {
                cv.iter()
                    .enumerate()
                    .filter(|(i, _)| *i != f)
                    .flat_map(|(_, v)| v.clone())
                    .collect()
            };
            let (val_x, val_y) = labelled(emb, &pos_cv[f], &neg_cv[f])?;
            let draws = harness::balanced_train_sets(
                &others(&pos_cv),
                &others(&neg_cv),
                seed::derive(cfg.seed, &[2, f as u64]),
            )?;
            for (d, set) in draws.iter().enumerate() {
                let (x, y) = labelled(emb, &set.positives, &set.negatives)?;
                let svm = train_svm(
                    &x,
                    &y,
                    &SvmConfig::new(c, seed::derive(cfg.seed, &[3, f as u64, d as u64])),
                )?;
                let preds: Vec<bool> = val_x.iter().map(|v| svm.decision(v) > 0.0).collect();
                scores.push(f1(&preds, &val_y)?.f1);
            }
        }
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        if best.is_none_or(|(b, _)| mean >= b) {
            best = Some((mean, c));
        }
    }
    let (_, c) = best.expect("non-empty grid");
    let (x, y) = labelled(emb, &pos_rest, &neg_rest)?;
    let svm = train_svm(&x, &y, &SvmConfig::new(c, seed::derive(cfg.seed, &[4])))?;
    let mut cav = ConceptVector::from_linear(concept, &svm, mode, 0.0, c)?;
    cav.cv_f1 = concept_presence_f1(&cav, emb, &pos_test, &neg_test, PresenceRule::WithBias)?.f1;
    Ok(cav)
}

/// Fits all eight CAVs in canonical order, concurrently.
pub fn fit_all_cavs(
    emb: &EmbeddingTable,
    labels: &[ClipLabel],
    mode: NegativeMode,
    cfg: &CavConfig,
) -> Result<Vec<ConceptVector>> {
    Concept::ALL
        .par_iter()
        .map(|&concept| {
            let sets = build_concept_sets(labels, concept, mode)?;
            let per = CavConfig {
                seed: seed::derive(cfg.seed, &[concept.index() as u64]),
                ..cfg.clone()
            };
            fit_cav(emb, concept, &sets, mode, &per)
        })
        .collect()
}

fn check_cavs(cavs: &[ConceptVector], dim: usize) -> Result<()> {
    if cavs.len() != Concept::COUNT || cavs.iter().zip(Concept::ALL).any(|(v, c)| v.concept != c) {
        return Err(Error::Shape(
            "expected the eight CAVs in canonical order".into(),
        ));
    }
    if let Some(v) = cavs.iter().find(|v| v.unit_normal.len() != dim) {
        return Err(Error::DimensionMismatch {
            clip: v.concept.to_string(),
            expected: dim,
            found: v.unit_normal.len(),
        });
    }
    Ok(())
}

/// Bias-free coordinates of `x` in the concept subspace.
pub fn concept_scores(x: &[f64], cavs: &[ConceptVector]) -> Result<[f64; 8]> {
    check_cavs(cavs, x.len())?;
    Ok(std::array::from_fn(|i| dot(x, &cavs[i].unit_normal)))
}

/// Concept coordinates of every clip of the table, in clip-id order.
pub fn score_table(emb: &EmbeddingTable, cavs: &[ConceptVector]) -> Result<Vec<ConceptScores>> {
    check_cavs(cavs, emb.dim())?;
    emb.iter()
        .map(|(id, v)| {
            let x: Vec<f64> = v.iter().map(|&f| f64::from(f)).collect();
            Ok(ConceptScores {
                clip_id: id.to_owned(),
                scores: concept_scores(&x, cavs)?,
            })
        })
        .collect()
}

pub fn score_features(scores: &[ConceptScores]) -> FeatureMap {
    scores
        .iter()
        .map(|s| (s.clip_id.clone(), s.scores.to_vec()))
        .collect()
}

/// Whether presence uses the CAV bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresenceRule {
    /// Present iff `n·x + b > 0`.
    #[default]
    WithBias,
    /// Present iff `n·x > 0`.
    BiasFree,
}

/// F1 of presence detection on a test partition.
pub fn concept_presence_f1(
    cav: &ConceptVector,
    emb: &EmbeddingTable,
    positives: &[String],
    negatives: &[String],
    rule: PresenceRule,
) -> Result<Metrics> {
    let (x, y) = labelled(emb, positives, negatives)?;
    if let Some(v) = x.first().filter(|v| v.len() != cav.unit_normal.len()) {
        return Err(Error::DimensionMismatch {
            clip: cav.concept.to_string(),
            expected: cav.unit_normal.len(),
            found: v.len(),
        });
    }
    let bias = match rule {
        PresenceRule::WithBias => cav.bias,
        PresenceRule::BiasFree => 0.0,
    };
    let preds: Vec<bool> = x
        .iter()
        .map(|v| dot(&cav.unit_normal, v) + bias > 0.0)
        .collect();
    f1(&preds, &y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PcbmKind {
    Dt,
    Lr,
}

/// Trains a tree or logistic regression on concept coordinates with the
/// harness protocol. Returns the draw with the best validation F1 and the
/// full report.
pub fn train_pcbm(
    scores: &[ConceptScores],
    labels: &[ClipLabel],
    kind: PcbmKind,
    task: &TaskConfig,
) -> Result<(TrainedModel, EvalReport)> {
    let cfg = TaskConfig {
        model: match kind {
            PcbmKind::Dt => ModelKind::PcbmDt,
            PcbmKind::Lr => ModelKind::PcbmLr,
        },
        ..task.clone()
    };
    let (report, models) = run_task_with_models(&cfg, labels, &score_features(scores))?;
    let mut best = 0;
    for (i, d) in report.draws.iter().enumerate() {
        if d.validation_f1 > report.draws[best].validation_f1 {
            best = i;
        }
    }
    Ok((models[best].clone(), report))
}

/// Indented rendering of the first `max_depth` levels of a tree over
/// concept coordinates. A split takes two lines, one per branch; a leaf is
/// shown inline after its branch. Counts are `[negative, positive]`.
pub fn export_tree_report(tree: &DecisionTree, names: &[&str], max_depth: usize) -> String {
    fn class(n: &crate::models::Node) -> &'static str {
        if n.majority() {
            "objectifying"
        } else {
            "not objectifying"
        }
    }
    fn walk(
        tree: &DecisionTree,
        names: &[&str],
        id: usize,
        depth: usize,
        max_depth: usize,
        out: &mut String,
    ) {
        let node = &tree.nodes[id];
        let NodeKind::Split {
            feature,
            threshold,
            left,
            right,
        } = node.kind
        else {
            return;
        };
        let name = names
            .get(feature)
            .copied()
            .map_or_else(|| format!("x{feature}"), str::to_owned);
        let pad = "  ".repeat(depth);
        for (op, child) in [("<=", left), (">", right)] {
            let c = &tree.nodes[child];
            let tail = match (&c.kind, depth + 1 >= max_depth) {
                (NodeKind::Leaf, _) => format!(" -> {} {:?}", class(c), c.counts),
                (_, true) => format!(" -> ... {} {:?}", class(c), c.counts),
                _ => String::new(),
            };
            out.push_str(&format!("{pad}{name} {op} {threshold:.4}{tail}\n"));
            if depth + 1 < max_depth {
                walk(tree, names, child, depth + 1, max_depth, out);
            }
        }
    }
    let root = tree.root();
    let mut out = String::new();
    if root.kind == NodeKind::Leaf || max_depth == 0 {
        out.push_str(&format!("{} {:?}\n", class(root), root.counts));
        return out;
    }
    walk(tree, names, 0, 0, max_depth, &mut out);
    out
}

/// Concept names in canonical order, for [`export_tree_report`].
pub fn concept_names() -> [&'static str; 8] {
    Concept::ALL.map(Concept::as_str)
}

/// Per-concept F1 table: `concept,negative_mode,c,f1`.
pub fn cav_csv(cavs: &[ConceptVector]) -> String {
    let mut out = String::from("concept,negative_mode,c,f1\n");
    for v in cavs {
        let mode = match v.negative_mode {
            NegativeMode::EnOnly => "en-only",
            NegativeMode::EnPlusWithout => "en-plus-without",
        };
        out.push_str(&format!("{},{mode},{},{}\n", v.concept, v.c, v.cv_f1));
    }
    out
}

/// Concept scores as CSV with a header of concept names.
pub fn scores_csv(scores: &[ConceptScores]) -> String {
    let mut out = String::from("clip_id");
    for n in concept_names() {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for s in scores {
        out.push_str(&s.clip_id);
        for v in s.scores {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}
