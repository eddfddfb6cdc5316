//! Evaluation harness: stratified folds, balanced training draws, the four
//! train/test task configurations, leave-movies-out splits, and error-factor
//! analysis.
//!
//! The positive class is always `S`; `NS` clips never enter a task. Every
//! class is shuffled and dealt round-robin into `k` folds. Fold `k − 1` is
//! the test fold and fold `k − 2` the validation fold of each class; the
//! rest is training data.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::{ClipLabel, Concept, ObjLevel};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::models::{
    f1, train_logreg, train_mlp_observed, train_tree, trivial_baseline_f1, Classifier,
    DecisionTree, LinearModel, LogregConfig, Metrics, MlpConfig, MlpModel, TreeConfig,
};
use crate::seed;

pub const DEFAULT_FOLDS: usize = 10;

/// Feature rows keyed by clip id: embeddings or concept scores.
pub type FeatureMap = BTreeMap<String, Vec<f64>>;

pub fn embedding_features(emb: &EmbeddingTable) -> FeatureMap {
    emb.iter()
        .map(|(id, v)| (id.to_owned(), v.iter().map(|&f| f64::from(f)).collect()))
        .collect()
}

pub(crate) fn lookup(features: &FeatureMap, ids: &[String]) -> Result<Vec<Vec<f64>>> {
    ids.iter()
        .map(|id| {
            features
                .get(id)
                .cloned()
                .ok_or_else(|| Error::MissingEmbedding(id.clone()))
        })
        .collect()
}

/// Deals already-shuffled ids round-robin into `k` folds.
pub(crate) fn deal(ids: &[String], k: usize) -> Vec<Vec<String>> {
    let mut folds = vec![Vec::new(); k];
    for (i, id) in ids.iter().enumerate() {
        folds[i % k].push(id.clone());
    }
    folds
}

/// Sorts then shuffles, so the result depends only on the id set and the rng.
pub(crate) fn shuffled(ids: &[String], rng: &mut seed::Rng) -> Vec<String> {
    let mut v = ids.to_vec();
    v.sort();
    v.shuffle(rng);
    v
}

/// Per-class fold assignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: BTreeMap<ObjLevel, Vec<Vec<String>>>,
}

impl FoldPlan {
    pub fn test_fold(&self) -> usize {
        self.k - 1
    }

    pub fn validation_fold(&self) -> usize {
        self.k - 2
    }

    fn class(&self, level: ObjLevel) -> Result<&Vec<Vec<String>>> {
        self.folds.get(&level).ok_or(Error::MissingClass(level))
    }

    pub fn test(&self, level: ObjLevel) -> Result<&[String]> {
        Ok(&self.class(level)?[self.test_fold()])
    }

    pub fn validation(&self, level: ObjLevel) -> Result<&[String]> {
        Ok(&self.class(level)?[self.validation_fold()])
    }

    pub fn train(&self, level: ObjLevel) -> Result<Vec<String>> {
        Ok(self.class(level)?[..self.validation_fold()].concat())
    }
}

/// Seeded stratified folds over every non-`NS` level present in `labels`.
pub fn make_folds(labels: &[ClipLabel], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 3 {
        return Err(Error::Shape(format!("need at least 3 folds, got {k}")));
    }
    let mut by_level: BTreeMap<ObjLevel, Vec<String>> = BTreeMap::new();
    for l in labels.iter().filter(|l| l.level != ObjLevel::NS) {
        by_level.entry(l.level).or_default().push(l.clip_id.clone());
    }
    let mut folds = BTreeMap::new();
    for (level, ids) in by_level {
        if ids.len() < k {
            return Err(Error::ClassTooSmall {
                class: level.to_string(),
                count: ids.len(),
                folds: k,
            });
        }
        let order = shuffled(&ids, &mut seed::rng_at(seed, &[level.index() as u64]));
        folds.insert(level, deal(&order, k));
    }
    Ok(FoldPlan { k, seed, folds })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrainSet {
    pub positives: Vec<String>,
    pub negatives: Vec<String>,
}

/// Balanced training sets: the minority class in full, paired with disjoint
/// chunks of the shuffled majority class. There are
/// `max(1, ⌊majority / minority⌋)` sets; leftover majority samples go unused.
pub fn balanced_train_sets(
    positives: &[String],
    negatives: &[String],
    seed: u64,
) -> Result<Vec<TrainSet>> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::NoTrainData);
    }
    let pos_minority = positives.len() <= negatives.len();
    let (minority, majority) = if pos_minority {
        (positives, negatives)
    } else {
        (negatives, positives)
    };
    let majority = shuffled(majority, &mut seed::rng(seed));
    let n = minority.len();
    let draws = (majority.len() / n).max(1);
    Ok((0..draws)
        .map(|d| {
            let chunk = majority[d * n..((d + 1) * n).min(majority.len())].to_vec();
            if pos_minority {
                TrainSet {
                    positives: minority.to_vec(),
                    negatives: chunk,
                }
            } else {
                TrainSet {
                    positives: chunk,
                    negatives: minority.to_vec(),
                }
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainNegatives {
    #[serde(rename = "EN")]
    En,
    #[serde(rename = "HN")]
    Hn,
}

impl TrainNegatives {
    pub fn level(self) -> ObjLevel {
        match self {
            TrainNegatives::En => ObjLevel::EN,
            TrainNegatives::Hn => ObjLevel::HN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestNegatives {
    #[serde(rename = "EN")]
    En,
    #[serde(rename = "EN+HN")]
    EnHn,
}

impl TestNegatives {
    pub fn levels(self) -> &'static [ObjLevel] {
        match self {
            TestNegatives::En => &[ObjLevel::EN],
            TestNegatives::EnHn => &[ObjLevel::EN, ObjLevel::HN],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Mlp,
    PcbmDt,
    PcbmLr,
    AllPositive,
    CoinFlip,
}

macro_rules! string_enum {
    ($ty:ty { $($name:literal => $v:expr),* $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(x if *x == $v => $name,)* _ => unreachable!() })
            }
        }
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($name => Ok($v),)*
                    _ => Err(format!("unknown value {s:?}")),
                }
            }
        }
    };
}

string_enum!(TrainNegatives { "EN" => TrainNegatives::En, "HN" => TrainNegatives::Hn });
string_enum!(TestNegatives { "EN" => TestNegatives::En, "EN+HN" => TestNegatives::EnHn });
string_enum!(ModelKind {
    "mlp" => ModelKind::Mlp,
    "pcbm-dt" => ModelKind::PcbmDt,
    "pcbm-lr" => ModelKind::PcbmLr,
    "all-positive" => ModelKind::AllPositive,
    "coin-flip" => ModelKind::CoinFlip,
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub train_negatives: TrainNegatives,
    pub test_negatives: TestNegatives,
    pub model: ModelKind,
    pub seed: u64,
    pub folds: usize,
    pub mlp_epochs: usize,
    pub mlp_lr: f64,
    pub mlp_batch: usize,
    pub tree_max_depth: usize,
    pub logreg_l2: f64,
}

impl TaskConfig {
    pub fn new(
        train_negatives: TrainNegatives,
        test_negatives: TestNegatives,
        model: ModelKind,
        seed: u64,
    ) -> Self {
        let mlp = MlpConfig::default();
        TaskConfig {
            train_negatives,
            test_negatives,
            model,
            seed,
            folds: DEFAULT_FOLDS,
            mlp_epochs: mlp.epochs,
            mlp_lr: mlp.lr,
            mlp_batch: mlp.batch,
            tree_max_depth: TreeConfig::default().max_depth,
            logreg_l2: 1e-3,
        }
    }

    /// The four train/test combinations for one model, in table order.
    pub fn grid(model: ModelKind, seed: u64) -> Vec<TaskConfig> {
        let mut out = Vec::new();
        for train in [TrainNegatives::En, TrainNegatives::Hn] {
            for test in [TestNegatives::En, TestNegatives::EnHn] {
                out.push(TaskConfig::new(train, test, model, seed));
            }
        }
        out
    }
}

/// A trained model of any kind the harness runs.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Mlp(MlpModel),
    Tree(DecisionTree),
    Linear(LinearModel),
    AllPositive,
    /// Predicts positive with probability ½, from a seeded stream over rows.
    CoinFlip(u64),
}

impl TrainedModel {
    pub fn predict_rows(&self, xs: &[Vec<f64>]) -> Vec<bool> {
        match self {
            TrainedModel::Mlp(m) => m.predict_all(xs),
            TrainedModel::Tree(t) => t.predict_all(xs),
            TrainedModel::Linear(l) => l.predict_all(xs),
            TrainedModel::AllPositive => vec![true; xs.len()],
            TrainedModel::CoinFlip(s) => {
                let mut rng = seed::rng(*s);
                xs.iter().map(|_| rng.random_bool(0.5)).collect()
            }
        }
    }
}

/// Ids and ground truth of an evaluation set.
#[derive(Debug, Clone, PartialEq, Default)]
struct EvalSet {
    ids: Vec<String>,
    truth: Vec<bool>,
    x: Vec<Vec<f64>>,
}

impl EvalSet {
    fn build(features: &FeatureMap, positives: &[String], negatives: &[String]) -> Result<Self> {
        let ids: Vec<String> = positives.iter().chain(negatives).cloned().collect();
        let truth = (0..ids.len()).map(|i| i < positives.len()).collect();
        let x = lookup(features, &ids)?;
        Ok(EvalSet { ids, truth, x })
    }
}

/// Trains one draw and selects the MLP epoch with the best validation F1
/// (latest on ties). Returns the model, validation F1 and selected epoch.
fn train_draw(
    cfg: &TaskConfig,
    features: &FeatureMap,
    set: &TrainSet,
    val: &EvalSet,
    draw_seed: u64,
) -> Result<(TrainedModel, f64, Option<usize>)> {
    let train = EvalSet::build(features, &set.positives, &set.negatives)?;
    let val_f1 = |m: &TrainedModel| -> Result<f64> {
        if val.ids.is_empty() {
            return Ok(0.0);
        }
        Ok(f1(&m.predict_rows(&val.x), &val.truth)?.f1)
    };
    let model = match cfg.model {
        ModelKind::Mlp => {
            let mlp_cfg = MlpConfig {
                epochs: cfg.mlp_epochs,
                lr: cfg.mlp_lr,
                batch: cfg.mlp_batch,
                seed: draw_seed,
            };
            let mut best: Option<(f64, usize, MlpModel)> = None;
            let mut failure = None;
            train_mlp_observed(&train.x, &train.truth, &mlp_cfg, |epoch, m| {
                if epoch == 0 && mlp_cfg.epochs > 0 {
                    return;
                }
                let score = if val.ids.is_empty() {
                    Ok(0.0)
                } else {
                    f1(&m.predict_all(&val.x), &val.truth).map(|r| r.f1)
                };
                match score {
                    Ok(s) if best.as_ref().is_none_or(|(b, _, _)| s >= *b) => {
                        best = Some((s, epoch, m.clone()))
                    }
                    Ok(_) => {}
                    Err(e) => failure = Some(e),
                }
            })?;
            if let Some(e) = failure {
                return Err(e);
            }
            let (score, epoch, m) = best.expect("at least one epoch observed");
            return Ok((TrainedModel::Mlp(m), score, Some(epoch)));
        }
        ModelKind::PcbmDt => TrainedModel::Tree(train_tree(
            &train.x,
            &train.truth,
            &TreeConfig {
                max_depth: cfg.tree_max_depth,
                min_leaf: 1,
            },
        )?),
        ModelKind::PcbmLr => TrainedModel::Linear(train_logreg(
            &train.x,
            &train.truth,
            &LogregConfig::new(cfg.logreg_l2),
        )?),
        ModelKind::AllPositive => TrainedModel::AllPositive,
        ModelKind::CoinFlip => TrainedModel::CoinFlip(draw_seed),
    };
    let score = val_f1(&model)?;
    Ok((model, score, None))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DrawResult {
    pub draw: usize,
    pub seed: u64,
    pub train_positives: usize,
    pub train_negatives: usize,
    /// Epoch kept by validation selection (MLP only).
    pub selected_epoch: Option<usize>,
    pub validation_f1: f64,
    pub test: Metrics,
    /// Test predictions aligned with [`EvalReport::test_ids`].
    pub predictions: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Baselines {
    /// Coin flip at rate ½, evaluated in closed form.
    pub random: f64,
    pub all_positive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub config: TaskConfig,
    pub test_ids: Vec<String>,
    pub test_truth: Vec<bool>,
    /// Fraction of positives in the test set.
    pub f_data: f64,
    pub mean_f1: f64,
    /// Population standard deviation over draws.
    pub std_f1: f64,
    pub draws: Vec<DrawResult>,
    pub baselines: Baselines,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn check_task_labels(labels: &[ClipLabel]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for l in labels {
        if !seen.insert(l.clip_id.as_str()) {
            return Err(Error::DuplicateClip {
                film: l.film_id.clone(),
                clip: l.clip_id.clone(),
            });
        }
    }
    Ok(())
}

/// Runs one task and also returns the model of every draw.
pub fn run_task_with_models(
    cfg: &TaskConfig,
    labels: &[ClipLabel],
    features: &FeatureMap,
) -> Result<(EvalReport, Vec<TrainedModel>)> {
    check_task_labels(labels)?;
    let train_level = cfg.train_negatives.level();
    let needed: BTreeSet<ObjLevel> = std::iter::once(ObjLevel::S)
        .chain(std::iter::once(train_level))
        .chain(cfg.test_negatives.levels().iter().copied())
        .collect();
    let used: Vec<ClipLabel> = labels
        .iter()
        .filter(|l| needed.contains(&l.level))
        .cloned()
        .collect();
    let plan = make_folds(&used, cfg.folds, cfg.seed)?;
    for &level in &needed {
        plan.class(level)?;
    }

    let mut test_neg = Vec::new();
    for &level in cfg.test_negatives.levels() {
        test_neg.extend_from_slice(plan.test(level)?);
    }
    let test = EvalSet::build(features, plan.test(ObjLevel::S)?, &test_neg)?;
    let val = EvalSet::build(
        features,
        plan.validation(ObjLevel::S)?,
        plan.validation(train_level)?,
    )?;
    let sets = balanced_train_sets(
        &plan.train(ObjLevel::S)?,
        &plan.train(train_level)?,
        seed::derive(cfg.seed, &[u64::MAX]),
    )?;

    let results: Vec<(DrawResult, TrainedModel)> = sets
        .par_iter()
        .enumerate()
        .map(|(draw, set)| {
            let draw_seed = seed::derive(cfg.seed, &[draw as u64]);
            let (model, validation_f1, selected_epoch) =
                train_draw(cfg, features, set, &val, draw_seed)?;
            let predictions = model.predict_rows(&test.x);
            let metrics = f1(&predictions, &test.truth)?;
            Ok((
                DrawResult {
                    draw,
                    seed: draw_seed,
                    train_positives: set.positives.len(),
                    train_negatives: set.negatives.len(),
                    selected_epoch,
                    validation_f1,
                    test: metrics,
                    predictions,
                },
                model,
            ))
        })
        .collect::<Result<_>>()?;
    let (draws, models): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let scores: Vec<f64> = draws.iter().map(|d: &DrawResult| d.test.f1).collect();
    let (mean_f1, std_f1) = mean_std(&scores);
    let f_data = test.truth.iter().filter(|&&t| t).count() as f64 / test.truth.len() as f64;
    let report = EvalReport {
        config: cfg.clone(),
        test_ids: test.ids,
        test_truth: test.truth,
        f_data,
        mean_f1,
        std_f1,
        draws,
        baselines: Baselines {
            random: trivial_baseline_f1(f_data, 0.5)?,
            all_positive: trivial_baseline_f1(f_data, 1.0)?,
        },
    };
    Ok((report, models))
}

/// Runs one train/test configuration over all balanced draws.
pub fn run_task(
    cfg: &TaskConfig,
    labels: &[ClipLabel],
    features: &FeatureMap,
) -> Result<EvalReport> {
    run_task_with_models(cfg, labels, features).map(|(r, _)| r)
}

/// Table-shaped CSV: one row per (model, training negatives), one column
/// per test composition, cells `mean (std)`, then the two trivial baselines.
pub fn table_csv(reports: &[EvalReport]) -> String {
    let cols = [TestNegatives::En, TestNegatives::EnHn];
    let mut rows: BTreeMap<(String, String), [Option<String>; 2]> = BTreeMap::new();
    let mut order = Vec::new();
    let mut f_data: [Option<f64>; 2] = [None, None];
    for r in reports {
        let key = (
            r.config.model.to_string(),
            r.config.train_negatives.to_string(),
        );
        if !rows.contains_key(&key) {
            order.push(key.clone());
        }
        let col = cols
            .iter()
            .position(|c| *c == r.config.test_negatives)
            .expect("two columns");
        rows.entry(key).or_default()[col] = Some(format!("{:.4} ({:.4})", r.mean_f1, r.std_f1));
        f_data[col].get_or_insert(r.f_data);
    }
    let mut out = String::from("model,train,test EN vs S,test EN+HN vs S\n");
    let cell = |c: &Option<String>| c.clone().unwrap_or_default();
    for key in &order {
        let r = &rows[key];
        out.push_str(&format!(
            "{},{} vs S,{},{}\n",
            key.0,
            key.1,
            cell(&r[0]),
            cell(&r[1])
        ));
    }
    for (name, rate) in [("random", 0.5), ("all-positive", 1.0)] {
        let c: Vec<String> = f_data
            .iter()
            .map(|f| {
                f.and_then(|f| trivial_baseline_f1(f, rate).ok())
                    .map(|v| format!("{v:.4}"))
                    .unwrap_or_default()
            })
            .collect();
        out.push_str(&format!("{name},,{},{}\n", c[0], c[1]));
    }
    out
}

/// Clips of a leave-movies-out split.
#[derive(Debug, Clone, PartialEq)]
pub struct MovieSplit {
    pub train: Vec<ClipLabel>,
    pub validation: Vec<ClipLabel>,
    pub test: Vec<ClipLabel>,
}

/// Sends every clip of `test_film` to test, of `val_film` to validation,
/// and all others to train.
pub fn leave_movies_out(
    labels: &[ClipLabel],
    test_film: &str,
    val_film: &str,
) -> Result<MovieSplit> {
    if test_film == val_film {
        return Err(Error::FilmOverlap(test_film.to_owned()));
    }
    let mut split = MovieSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for l in labels {
        let side = if l.film_id == test_film {
            &mut split.test
        } else if l.film_id == val_film {
            &mut split.validation
        } else {
            &mut split.train
        };
        side.push(l.clone());
    }
    for (film, side) in [(test_film, &split.test), (val_film, &split.validation)] {
        if side.is_empty() {
            return Err(Error::EmptyFilm(film.to_owned()));
        }
    }
    if split.train.is_empty() {
        return Err(Error::NoTrainData);
    }
    Ok(split)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MovieRow {
    pub validation_film: String,
    /// Draw kept by validation F1.
    pub selected_draw: usize,
    pub validation_f1: f64,
    /// `None` when the test film has no positive clip.
    pub test_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MovieReport {
    pub test_film: String,
    pub rows: Vec<MovieRow>,
    pub mean_f1: Option<f64>,
    pub std_f1: Option<f64>,
}

fn split_ids(labels: &[ClipLabel], levels: &[ObjLevel]) -> Vec<String> {
    labels
        .iter()
        .filter(|l| levels.contains(&l.level))
        .map(|l| l.clip_id.clone())
        .collect()
}

/// Holds out `test_film`, and for each other film used as validation, keeps
/// the draw with the best validation F1 and scores it on the test film.
/// Mean and std are over validation films.
pub fn evaluate_left_out_movie(
    cfg: &TaskConfig,
    labels: &[ClipLabel],
    features: &FeatureMap,
    test_film: &str,
) -> Result<MovieReport> {
    check_task_labels(labels)?;
    let films: BTreeSet<&str> = labels.iter().map(|l| l.film_id.as_str()).collect();
    if !films.contains(test_film) {
        return Err(Error::EmptyFilm(test_film.to_owned()));
    }
    let train_level = cfg.train_negatives.level();
    let film_seed = seed::derive(cfg.seed, &[seed::hash_str(test_film)]);
    let rows: Vec<MovieRow> = films
        .iter()
        .filter(|f| **f != test_film)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&&val_film| {
            let split = leave_movies_out(labels, test_film, val_film)?;
            let test = EvalSet::build(
                features,
                &split_ids(&split.test, &[ObjLevel::S]),
                &split_ids(&split.test, cfg.test_negatives.levels()),
            )?;
            let val = EvalSet::build(
                features,
                &split_ids(&split.validation, &[ObjLevel::S]),
                &split_ids(&split.validation, &[train_level]),
            )?;
            let row_seed = seed::derive(film_seed, &[seed::hash_str(val_film)]);
            let sets = balanced_train_sets(
                &split_ids(&split.train, &[ObjLevel::S]),
                &split_ids(&split.train, &[train_level]),
                seed::derive(row_seed, &[u64::MAX]),
            )?;
            let mut best: Option<(f64, usize, TrainedModel)> = None;
            for (draw, set) in sets.iter().enumerate() {
                let (model, score, _) = train_draw(
                    cfg,
                    features,
                    set,
                    &val,
                    seed::derive(row_seed, &[draw as u64]),
                )?;
                if best.as_ref().is_none_or(|(b, _, _)| score > *b) {
                    best = Some((score, draw, model));
                }
            }
            let (validation_f1, selected_draw, model) = best.expect("at least one draw");
            let test_f1 = if test.truth.iter().any(|&t| t) {
                Some(f1(&model.predict_rows(&test.x), &test.truth)?.f1)
            } else {
                None
            };
            Ok(MovieRow {
                validation_film: val_film.to_owned(),
                selected_draw,
                validation_f1,
                test_f1,
            })
        })
        .collect::<Result<_>>()?;
    let scores: Vec<f64> = rows.iter().filter_map(|r| r.test_f1).collect();
    let (mean_f1, std_f1) = if scores.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&scores);
        (Some(m), Some(s))
    };
    Ok(MovieReport {
        test_film: test_film.to_owned(),
        rows,
        mean_f1,
        std_f1,
    })
}

/// Factor names in descriptor order: the 8 concepts, then `S`, `HN`, `EN`.
pub const FACTOR_NAMES: [&str; 11] = [
    "TypeOfShot",
    "Look",
    "Body",
    "Posture",
    "Clothing",
    "Appearance",
    "ExpressionOfEmotion",
    "Activity",
    "S",
    "HN",
    "EN",
];

/// One-hot clip descriptor: concept indicators then level indicators.
pub fn factor_descriptor(label: &ClipLabel) -> [f64; 11] {
    let mut d = [0.0; 11];
    for c in &label.concepts {
        d[c.index()] = 1.0;
    }
    let slot = match label.level {
        ObjLevel::S => Some(8),
        ObjLevel::HN => Some(9),
        ObjLevel::EN => Some(10),
        ObjLevel::NS => None,
    };
    if let Some(i) = slot {
        d[i] = 1.0;
    }
    d
}

/// Logistic-regression weights of each factor on per-clip success; a
/// positive weight means the factor contributes to correct classification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorWeights {
    pub weights: [f64; 11],
    pub intercept: f64,
}

impl FactorWeights {
    pub fn get(&self, name: &str) -> Option<f64> {
        FACTOR_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.weights[i])
    }

    pub fn concept(&self, c: Concept) -> f64 {
        self.weights[c.index()]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("factor,weight\n");
        for (name, w) in FACTOR_NAMES.iter().zip(&self.weights) {
            out.push_str(&format!("{name},{w}\n"));
        }
        out
    }
}

/// Regresses per-clip success (`prediction == (level == S)`) on the factor
/// descriptor.
pub fn error_factor_analysis(
    labels: &[ClipLabel],
    predictions: &[bool],
    l2: f64,
) -> Result<FactorWeights> {
    if labels.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            found: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let success: Vec<bool> = labels
        .iter()
        .zip(predictions)
        .map(|(l, &p)| p == (l.level == ObjLevel::S))
        .collect();
    if success.iter().all(|&s| s) {
        return Err(Error::DegenerateTarget("every prediction is correct"));
    }
    if success.iter().all(|&s| !s) {
        return Err(Error::DegenerateTarget("every prediction is wrong"));
    }
    let x: Vec<Vec<f64>> = labels
        .iter()
        .map(|l| factor_descriptor(l).to_vec())
        .collect();
    let model = train_logreg(&x, &success, &LogregConfig::new(l2))?;
    Ok(FactorWeights {
        weights: model.weights.try_into().expect("11 factors"),
        intercept: model.bias,
    })
}
