//! Subcommand drivers. Each one reads and validates all inputs first, then
//! computes, then writes its outputs through a [`Run`].

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use obygaze::agreement::{self, GammaConfig};
use obygaze::annotation::{self, ClipLabel, ObjLevel};
use obygaze::cbm::{self, CavConfig, ConceptVector, NegativeMode, PcbmKind};
use obygaze::embedding::{self, EmbeddingTable};
use obygaze::fusion::{self, OverlapBasis, ProjectionConfig};
use obygaze::harness::{
    self, EvalReport, FeatureMap, ModelKind, TaskConfig, TestNegatives, TrainNegatives,
    TrainedModel,
};
use obygaze::models::{ModelDocument, Payload};
use obygaze::synth::{self, SynthConfig};
use obygaze::{seed, stats, Error};

use crate::config::{self, pick, pick_list, FileConfig};
use crate::run::{in_file, read_bytes, read_text, CliError, CliResult, Run};
use crate::{Cli, Command};

pub fn dispatch(cli: Cli) -> CliResult<()> {
    let file = config::load(cli.global.config.as_deref())?;
    let jobs = cli.global.jobs.or(file.jobs);
    if let Some(jobs) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    }
    let out = cli
        .global
        .out
        .clone()
        .or_else(|| file.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let ctx = Ctx {
        seed_flag: cli.global.seed,
        file,
        out,
        jobs,
    };
    match cli.command {
        Command::Fuse(a) => fuse(&ctx, a),
        Command::Sweep(a) => sweep(&ctx, a),
        Command::Gamma(a) => gamma(&ctx, a),
        Command::Stats(a) => stats_cmd(&ctx, a),
        Command::Cav(a) => cav(&ctx, a),
        Command::Pcbm(a) => pcbm(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Error(a) => error(&ctx, a),
        Command::Synth(a) => synth_cmd(&ctx, a),
    }
}

struct Ctx {
    seed_flag: Option<u64>,
    file: FileConfig,
    out: PathBuf,
    jobs: Option<usize>,
}

impl Ctx {
    /// Flag, then config file, then `OBY_SEED`.
    fn seed(&self) -> CliResult<u64> {
        if let Some(s) = self.seed_flag.or(self.file.seed) {
            return Ok(s);
        }
        match std::env::var("OBY_SEED") {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|e| CliError::Usage(format!("OBY_SEED={v:?}: {e}"))),
            Err(_) => Err(CliError::Usage(
                "this command is stochastic: pass --seed, set `seed` in the config, or export OBY_SEED".into(),
            )),
        }
    }

    fn run(&self, command: &'static str) -> CliResult<Run> {
        let mut run = Run::new(command, self.out.clone())?;
        run.set("out", self.out.display().to_string());
        run.set("jobs", self.jobs);
        Ok(run)
    }
}

fn parse_basis(s: &str) -> CliResult<OverlapBasis> {
    match s {
        "clip" => Ok(OverlapBasis::ClipDuration),
        "span" => Ok(OverlapBasis::SpanDuration),
        _ => Err(CliError::Usage(format!(
            "basis must be `clip` or `span`, got {s:?}"
        ))),
    }
}

/// Level list where `none` stands for the empty set.
fn parse_levels(names: &[String]) -> CliResult<BTreeSet<ObjLevel>> {
    if names.iter().any(|n| n == "none") {
        return Ok(BTreeSet::new());
    }
    names
        .iter()
        .map(|n| config::parse_with("level", n))
        .collect()
}

fn level_names(levels: &BTreeSet<ObjLevel>) -> Vec<&'static str> {
    levels.iter().map(|l| l.as_str()).collect()
}

fn load_spans_and_clips(
    run: &mut Run,
    annotations: &Path,
    clips: &Path,
) -> CliResult<(
    Vec<annotation::SpanAnnotation>,
    Vec<annotation::ClipDelimitation>,
)> {
    let (a_text, c_text) = (read_text(annotations)?, read_text(clips)?);
    run.input(annotations);
    run.input(clips);
    let spans = in_file(annotations, annotation::parse_annotations(&a_text))?;
    let clips_v = in_file(clips, annotation::parse_clip_index(&c_text))?;
    Ok((spans, clips_v))
}

fn fuse(ctx: &Ctx, a: crate::FuseArgs) -> CliResult<()> {
    let sec = &ctx.file.fuse;
    let threshold = pick(a.threshold, sec.threshold, 0.2);
    let basis_name = pick(a.basis, sec.basis.clone(), "clip".into());
    let cfg = ProjectionConfig {
        overlap_threshold: threshold,
        overlap_basis: parse_basis(&basis_name)?,
    };
    let mut run = ctx.run("fuse")?;
    run.set("threshold", threshold);
    run.set("basis", &basis_name);
    let (spans, clips) = load_spans_and_clips(&mut run, &a.annotations, &a.clips)?;
    let fused = fusion::fuse(&spans, &clips, &cfg)?;
    for f in &fused.unannotated_films {
        eprintln!("warning: film {f} has no annotation; its clips are labelled EN");
    }
    for f in &fused.films_without_clips {
        eprintln!("warning: film {f} has spans but no clips; ignored");
    }
    run.write("merged.jsonl", annotation::serialize_labels(&fused.merged))?;
    run.write(
        "projections.jsonl",
        annotation::serialize_labels(&fused.projections),
    )?;
    run.finish()
}

fn sweep(ctx: &Ctx, a: crate::SweepArgs) -> CliResult<()> {
    let sec = &ctx.file.sweep;
    let thresholds = pick_list(
        a.thresholds,
        sec.thresholds.clone(),
        vec![0.1, 0.2, 0.3, 0.4],
    );
    let basis_name = pick(a.basis, sec.basis.clone(), "clip".into());
    let basis = parse_basis(&basis_name)?;
    let mut run = ctx.run("sweep")?;
    run.set("thresholds", &thresholds);
    run.set("basis", &basis_name);
    let (spans, clips) = load_spans_and_clips(&mut run, &a.annotations, &a.clips)?;
    let rows = fusion::sweep_thresholds(&spans, &clips, &thresholds, basis)?;
    run.write("sweep.csv", fusion::sweep_csv(&rows))?;
    run.finish()
}

/// Reads projection files. An annotator name found in several files is
/// suffixed with `#<file number>` so each file stays a distinct annotator.
fn load_projections(run: &mut Run, paths: &[PathBuf]) -> CliResult<Vec<ClipLabel>> {
    let texts = paths
        .iter()
        .map(|p| read_text(p))
        .collect::<CliResult<Vec<_>>>()?;
    let mut per_file = Vec::new();
    for (p, t) in paths.iter().zip(&texts) {
        run.input(p);
        per_file.push(in_file(p, annotation::parse_labels(t))?);
    }
    let mut files_of: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (i, labels) in per_file.iter().enumerate() {
        for l in labels {
            for name in &l.annotators {
                files_of.entry(name.clone()).or_default().insert(i);
            }
        }
    }
    let mut out = Vec::new();
    for (i, labels) in per_file.into_iter().enumerate() {
        for mut l in labels {
            l.annotators = l
                .annotators
                .into_iter()
                .map(|n| {
                    if files_of[&n].len() > 1 {
                        format!("{n}#{}", i + 1)
                    } else {
                        n
                    }
                })
                .collect();
            out.push(l);
        }
    }
    Ok(out)
}

fn gamma(ctx: &Ctx, a: crate::GammaArgs) -> CliResult<()> {
    let sec = &ctx.file.gamma;
    let base = ctx.seed()?;
    let n_null = pick(a.n_null, sec.n_null, 62);
    let excluded = parse_levels(&pick_list(a.exclude, sec.exclude.clone(), vec![]))?;
    let cfg = GammaConfig {
        n_null,
        seed: base,
        excluded_levels: excluded.clone(),
        ..Default::default()
    };
    let mut run = ctx.run("gamma")?;
    run.set("seed", base);
    run.set("n_null", n_null);
    run.set("exclude", level_names(&excluded));
    let labels = load_projections(&mut run, &a.projections)?;
    let films = agreement::sequences_from_projections(&labels)?;
    for (film, seqs) in &films {
        if seqs.len() < 2 {
            eprintln!("film {film} has a single annotator");
        }
        let names: Vec<&String> = seqs.keys().collect();
        for (i, x) in names.iter().enumerate() {
            for y in &names[i + 1..] {
                let path = [seed::hash_str(film), seed::hash_str(x), seed::hash_str(y)];
                run.seed(format!("{film}/{x}|{y}"), seed::derive(base, &path));
            }
        }
        if names.len() > 2 {
            run.seed(
                format!("{film}/*"),
                seed::derive(base, &[seed::hash_str(film)]),
            );
        }
    }
    let report = agreement::gamma_per_film_and_average(&films, &cfg)?;
    run.write("gamma.csv", agreement::report_csv(&report))?;
    run.finish()
}

fn stats_cmd(ctx: &Ctx, a: crate::StatsArgs) -> CliResult<()> {
    let drop = parse_levels(&pick_list(
        a.drop,
        ctx.file.stats.drop.clone(),
        vec!["NS".into()],
    ))?;
    let mut run = ctx.run("stats")?;
    run.set("drop", level_names(&drop));
    let text = read_text(&a.labels)?;
    let proj_text = a.projections.as_deref().map(read_text).transpose()?;
    run.input(&a.labels);
    let labels = in_file(&a.labels, annotation::parse_labels(&text))?;
    let summary = stats::summarize(&labels)?;
    run.write("stats.csv", stats::summary_csv(&summary))?;

    let fractions = stats::task_class_fractions(&labels, &drop)?;
    let mut csv = String::from("level,fraction\n");
    for (level, f) in &fractions {
        csv.push_str(&format!("{level},{f}\n"));
    }
    run.write("fractions.csv", csv)?;

    if let (Some(path), Some(text)) = (&a.projections, proj_text) {
        run.input(path);
        let proj = in_file(path, annotation::parse_labels(&text))?;
        let trend = stats::per_annotator_trend(&proj)?;
        let mut csv = String::from("annotator,HN,NS,S,non_decreasing\n");
        for (name, t) in &trend {
            let cell = |l: ObjLevel| t.means.get(&l).map(|m| m.to_string()).unwrap_or_default();
            csv.push_str(&format!(
                "{name},{},{},{},{}\n",
                cell(ObjLevel::HN),
                cell(ObjLevel::NS),
                cell(ObjLevel::S),
                t.non_decreasing
            ));
        }
        run.write("trend.csv", csv)?;
    }
    run.finish()
}

fn load_labels_and_embeddings(
    run: &mut Run,
    labels: &Path,
    emb: &Path,
) -> CliResult<(Vec<ClipLabel>, EmbeddingTable)> {
    let text = read_text(labels)?;
    let bytes = read_bytes(emb)?;
    run.input(labels);
    run.input(emb);
    let labels_v = in_file(labels, annotation::parse_labels(&text))?;
    let table = in_file(emb, embedding::load_embeddings(&bytes))?;
    Ok((labels_v, table))
}

fn load_cavs(run: &mut Run, path: &Path) -> CliResult<Vec<ConceptVector>> {
    let text = read_text(path)?;
    run.input(path);
    match in_file(path, ModelDocument::from_json(&text))?.payload {
        Payload::Cavs(cavs) => Ok(cavs),
        _ => Err(
            Error::ModelFormat(format!("{} does not hold concept vectors", path.display())).into(),
        ),
    }
}

fn cav(ctx: &Ctx, a: crate::CavArgs) -> CliResult<()> {
    let sec = &ctx.file.cav;
    let base = ctx.seed()?;
    let mode_name = pick(a.negatives, sec.negatives.clone(), "en-only".into());
    let mode: NegativeMode = config::parse_with("negatives", &mode_name)?;
    let defaults = CavConfig::default();
    let cfg = CavConfig {
        folds: pick(a.folds, sec.folds, defaults.folds),
        cv_folds: pick(a.cv_folds, sec.cv_folds, defaults.cv_folds),
        c_grid: pick_list(a.c_grid, sec.c_grid.clone(), defaults.c_grid),
        seed: base,
    };
    let mut run = ctx.run("cav")?;
    run.set("seed", base);
    run.set("negatives", &mode_name);
    run.set("folds", cfg.folds);
    run.set("cv_folds", cfg.cv_folds);
    run.set("c_grid", &cfg.c_grid);
    let (labels, emb) = load_labels_and_embeddings(&mut run, &a.labels, &a.embeddings)?;
    for c in obygaze::annotation::Concept::ALL {
        run.seed(format!("cav/{c}"), seed::derive(base, &[c.index() as u64]));
    }
    let cavs = cbm::fit_all_cavs(&emb, &labels, mode, &cfg)?;
    let scores = cbm::score_table(&emb, &cavs)?;
    run.write("cav_f1.csv", cbm::cav_csv(&cavs))?;
    run.write(
        "cavs.json",
        ModelDocument::new(Payload::Cavs(cavs)).to_json(),
    )?;
    run.write("scores.csv", cbm::scores_csv(&scores))?;
    run.finish()
}

fn slug(cfg: &TaskConfig) -> String {
    let train = match cfg.train_negatives {
        TrainNegatives::En => "en",
        TrainNegatives::Hn => "hn",
    };
    let test = match cfg.test_negatives {
        TestNegatives::En => "en",
        TestNegatives::EnHn => "en-hn",
    };
    format!("train-{train}_test-{test}")
}

/// Index of the draw with the best validation F1, first on ties.
fn best_draw(report: &EvalReport) -> usize {
    let mut best = 0;
    for (i, d) in report.draws.iter().enumerate() {
        if d.validation_f1 > report.draws[best].validation_f1 {
            best = i;
        }
    }
    best
}

fn predictions_csv(report: &EvalReport) -> String {
    let preds = &report.draws[best_draw(report)].predictions;
    let mut out = String::from("clip_id,truth,prediction\n");
    for ((id, t), p) in report.test_ids.iter().zip(&report.test_truth).zip(preds) {
        out.push_str(&format!("{id},{},{}\n", u8::from(*t), u8::from(*p)));
    }
    out
}

fn reports_json(reports: &[EvalReport]) -> String {
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
    s.push('\n');
    s
}

fn log_draw_seeds(run: &mut Run, prefix: &str, report: &EvalReport) {
    for d in &report.draws {
        run.seed(
            format!("{prefix}/{}/draw{}", slug(&report.config), d.draw),
            d.seed,
        );
    }
}

fn pcbm(ctx: &Ctx, a: crate::PcbmArgs) -> CliResult<()> {
    let sec = &ctx.file.pcbm;
    let base = ctx.seed()?;
    let kinds = pick_list(a.kinds, sec.kinds.clone(), vec!["dt".into(), "lr".into()]);
    let kinds = kinds
        .iter()
        .map(|k| match k.as_str() {
            "dt" => Ok(PcbmKind::Dt),
            "lr" => Ok(PcbmKind::Lr),
            _ => Err(CliError::Usage(format!(
                "PCBM kind must be `dt` or `lr`, got {k:?}"
            ))),
        })
        .collect::<CliResult<Vec<_>>>()?;
    let proto = TaskConfig::new(
        TrainNegatives::En,
        TestNegatives::En,
        ModelKind::PcbmDt,
        base,
    );
    let depth = pick(a.depth, sec.depth, proto.tree_max_depth);
    let report_depth = pick(a.report_depth, sec.report_depth, 4);
    let l2 = pick(a.l2, sec.l2, proto.logreg_l2);
    let folds = pick(a.folds, sec.folds, proto.folds);
    let mut run = ctx.run("pcbm")?;
    run.set("seed", base);
    run.set(
        "kinds",
        kinds
            .iter()
            .map(|k| format!("{k:?}").to_lowercase())
            .collect::<Vec<_>>(),
    );
    run.set("depth", depth);
    run.set("report_depth", report_depth);
    run.set("l2", l2);
    run.set("folds", folds);
    let (labels, emb) = load_labels_and_embeddings(&mut run, &a.labels, &a.embeddings)?;
    let cavs = load_cavs(&mut run, &a.cavs)?;
    let scores = cbm::score_table(&emb, &cavs)?;

    let mut reports = Vec::new();
    for kind in kinds {
        let (model_kind, name) = match kind {
            PcbmKind::Dt => (ModelKind::PcbmDt, "pcbm-dt"),
            PcbmKind::Lr => (ModelKind::PcbmLr, "pcbm-lr"),
        };
        for mut task in TaskConfig::grid(model_kind, base) {
            task.tree_max_depth = depth;
            task.logreg_l2 = l2;
            task.folds = folds;
            let (model, report) = cbm::train_pcbm(&scores, &labels, kind, &task)?;
            log_draw_seeds(&mut run, name, &report);
            let tag = format!("{name}_{}", slug(&task));
            let payload = match &model {
                TrainedModel::Tree(t) => {
                    run.write(
                        &format!("{tag}.tree.txt"),
                        cbm::export_tree_report(t, &cbm::concept_names(), report_depth),
                    )?;
                    Payload::Tree(t.clone())
                }
                TrainedModel::Linear(m) => Payload::Linear(m.clone()),
                _ => unreachable!("PCBM trains trees and linear models"),
            };
            run.write(
                &format!("{tag}.model.json"),
                ModelDocument::new(payload).to_json(),
            )?;
            reports.push(report);
        }
    }
    run.write("pcbm.csv", harness::table_csv(&reports))?;
    run.write("pcbm_reports.json", reports_json(&reports))?;
    run.finish()
}

fn parse_list<T>(what: &str, names: &[String], all: &[T]) -> CliResult<Vec<T>>
where
    T: std::str::FromStr<Err = String> + Copy + PartialEq,
{
    if names.is_empty() {
        return Ok(all.to_vec());
    }
    let chosen: Vec<T> = names
        .iter()
        .map(|n| config::parse_with(what, n))
        .collect::<CliResult<_>>()?;
    Ok(all.iter().copied().filter(|v| chosen.contains(v)).collect())
}

fn eval(ctx: &Ctx, a: crate::EvalArgs) -> CliResult<()> {
    let sec = &ctx.file.eval;
    let base = ctx.seed()?;
    let model_name = pick(a.model, sec.model.clone(), "mlp".into());
    let model: ModelKind = config::parse_with("model", &model_name)?;
    let trains = parse_list(
        "train",
        &pick_list(a.train, sec.train.clone(), vec![]),
        &[TrainNegatives::En, TrainNegatives::Hn],
    )?;
    let tests = parse_list(
        "test",
        &pick_list(a.test, sec.test.clone(), vec![]),
        &[TestNegatives::En, TestNegatives::EnHn],
    )?;
    let proto = TaskConfig::new(TrainNegatives::En, TestNegatives::En, model, base);
    let task = TaskConfig {
        mlp_epochs: pick(a.epochs, sec.epochs, proto.mlp_epochs),
        mlp_lr: pick(a.lr, sec.lr, proto.mlp_lr),
        mlp_batch: pick(a.batch, sec.batch, proto.mlp_batch),
        folds: pick(a.folds, sec.folds, proto.folds),
        tree_max_depth: pick(a.depth, sec.depth, proto.tree_max_depth),
        logreg_l2: pick(a.l2, sec.l2, proto.logreg_l2),
        ..proto
    };
    let leave_movies_out = pick(
        a.leave_movies_out.then_some(true),
        sec.leave_movies_out,
        false,
    );
    let needs_cavs = matches!(model, ModelKind::PcbmDt | ModelKind::PcbmLr);
    if needs_cavs && a.cavs.is_none() {
        return Err(CliError::Usage(format!("model {model} needs --cavs")));
    }

    let mut run = ctx.run("eval")?;
    run.set("seed", base);
    run.set("model", model.to_string());
    run.set(
        "train",
        trains.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
    );
    run.set(
        "test",
        tests.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
    );
    run.set("epochs", task.mlp_epochs);
    run.set("lr", task.mlp_lr);
    run.set("batch", task.mlp_batch);
    run.set("folds", task.folds);
    run.set("depth", task.tree_max_depth);
    run.set("l2", task.logreg_l2);
    run.set("leave_movies_out", leave_movies_out);
    let (labels, emb) = load_labels_and_embeddings(&mut run, &a.labels, &a.embeddings)?;
    let features: FeatureMap = match &a.cavs {
        Some(path) if needs_cavs => {
            let cavs = load_cavs(&mut run, path)?;
            cbm::score_features(&cbm::score_table(&emb, &cavs)?)
        }
        _ => harness::embedding_features(&emb),
    };

    let mut configs = Vec::new();
    for &train in &trains {
        for &test in &tests {
            configs.push(TaskConfig {
                train_negatives: train,
                test_negatives: test,
                ..task.clone()
            });
        }
    }
    let mut reports = Vec::new();
    for cfg in &configs {
        let report = harness::run_task(cfg, &labels, &features)?;
        log_draw_seeds(&mut run, "eval", &report);
        run.write(
            &format!("predictions/{}.csv", slug(cfg)),
            predictions_csv(&report),
        )?;
        reports.push(report);
    }
    run.write("table.csv", harness::table_csv(&reports))?;
    run.write("reports.json", reports_json(&reports))?;

    if leave_movies_out {
        let films: BTreeSet<&str> = labels.iter().map(|l| l.film_id.as_str()).collect();
        let mut rows = String::from(
            "train,test,test_film,validation_film,selected_draw,validation_f1,test_f1\n",
        );
        let mut summary = String::from("train,test,test_film,mean_f1,std_f1\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for cfg in &configs {
            for film in &films {
                let r = harness::evaluate_left_out_movie(cfg, &labels, &features, film)?;
                let (tr, te) = (cfg.train_negatives, cfg.test_negatives);
                for row in &r.rows {
                    rows.push_str(&format!(
                        "{tr},{te},{film},{},{},{},{}\n",
                        row.validation_film,
                        row.selected_draw,
                        row.validation_f1,
                        opt(row.test_f1)
                    ));
                }
                summary.push_str(&format!(
                    "{tr},{te},{film},{},{}\n",
                    opt(r.mean_f1),
                    opt(r.std_f1)
                ));
            }
        }
        run.write("movies.csv", rows)?;
        run.write("movies_summary.csv", summary)?;
    }
    run.finish()
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

/// Reads `clip_id` and `prediction` columns of a predictions CSV.
fn read_predictions(path: &Path, text: &str) -> CliResult<Vec<(String, bool)>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let malformed = |line: usize, reason: String| {
        eprintln!("error in {}", path.display());
        CliError::Core(Error::MalformedRecord { line, reason })
    };
    let Some((_, header)) = lines.next() else {
        return Err(malformed(1, "missing header".into()));
    };
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| cols.iter().position(|c| *c == name);
    let (Some(id_col), Some(pred_col)) = (find("clip_id"), find("prediction")) else {
        return Err(malformed(
            1,
            "header needs clip_id and prediction columns".into(),
        ));
    };
    let mut out = Vec::new();
    for (i, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let (Some(id), Some(p)) = (
            cells.get(id_col),
            cells.get(pred_col).and_then(|p| parse_bool(p)),
        ) else {
            return Err(malformed(
                i + 1,
                format!("expected clip_id and a 0/1 prediction in {line:?}"),
            ));
        };
        out.push((id.trim().to_owned(), p));
    }
    Ok(out)
}

fn error(ctx: &Ctx, a: crate::ErrorArgs) -> CliResult<()> {
    let l2 = pick(a.l2, ctx.file.error.l2, 0.1);
    let mut run = ctx.run("error")?;
    run.set("l2", l2);
    let text = read_text(&a.labels)?;
    let pred_text = read_text(&a.predictions)?;
    run.input(&a.labels);
    run.input(&a.predictions);
    let labels = in_file(&a.labels, annotation::parse_labels(&text))?;
    let preds = read_predictions(&a.predictions, &pred_text)?;
    let by_id: BTreeMap<&str, &ClipLabel> =
        labels.iter().map(|l| (l.clip_id.as_str(), l)).collect();
    let mut joined = Vec::with_capacity(preds.len());
    let mut flags = Vec::with_capacity(preds.len());
    for (id, p) in &preds {
        let l = by_id
            .get(id.as_str())
            .ok_or_else(|| Error::Shape(format!("prediction for clip {id} has no label")))?;
        joined.push((*l).clone());
        flags.push(*p);
    }
    let weights = harness::error_factor_analysis(&joined, &flags, l2)?;
    let mut csv = weights.to_csv();
    csv.push_str(&format!("intercept,{}\n", weights.intercept));
    run.write("factors.csv", csv)?;
    run.finish()
}

fn synth_cmd(ctx: &Ctx, a: crate::SynthArgs) -> CliResult<()> {
    let sec = &ctx.file.synth;
    let base = ctx.seed()?;
    let preset = pick(a.preset, sec.preset.clone(), "default".into());
    let format = pick(a.format, sec.format.clone(), "bin".into());
    if format != "bin" && format != "csv" {
        return Err(CliError::Usage(format!(
            "format must be `bin` or `csv`, got {format:?}"
        )));
    }
    let mut cfg = match preset.as_str() {
        "default" | "hn-failure" | "independent-failure" => SynthConfig::with_seed(base),
        "linear-oracle" => SynthConfig::linear_oracle(base),
        "entangled" => SynthConfig::entangled(base),
        _ => return Err(CliError::Usage(format!("unknown preset {preset:?}"))),
    };
    cfg.films = pick(a.films, sec.films, cfg.films);
    cfg.clips_per_film = pick(a.clips_per_film, sec.clips_per_film, cfg.clips_per_film);
    cfg.dim = pick(a.dim, sec.dim, cfg.dim);
    let mut run = ctx.run("synth")?;
    run.set("seed", base);
    run.set("preset", &preset);
    run.set("films", cfg.films);
    run.set("clips_per_film", cfg.clips_per_film);
    run.set("dim", cfg.dim);
    run.set("format", &format);

    if preset.ends_with("-failure") {
        let n = cfg.films * cfg.clips_per_film;
        let (labels, preds) = if preset == "hn-failure" {
            synth::hn_failure_fixture(base, n)?
        } else {
            synth::independent_failure_fixture(base, n, 0.5)?
        };
        let mut csv = String::from("clip_id,truth,prediction\n");
        for (l, p) in labels.iter().zip(&preds) {
            csv.push_str(&format!(
                "{},{},{}\n",
                l.clip_id,
                u8::from(l.level == ObjLevel::S),
                u8::from(*p)
            ));
        }
        run.write("labels.jsonl", annotation::serialize_labels(&labels))?;
        run.write("predictions.csv", csv)?;
        return run.finish();
    }
    let bundle = synth::generate(&cfg)?;
    run.write(
        "annotations.jsonl",
        annotation::serialize_annotations(&bundle.spans),
    )?;
    run.write("clips.csv", annotation::serialize_clip_index(&bundle.clips))?;
    run.write("labels.jsonl", annotation::serialize_labels(&bundle.labels))?;
    if format == "bin" {
        run.write("embeddings.bin", bundle.embeddings.to_binary())?;
    } else {
        run.write("embeddings.csv", bundle.embeddings.to_csv())?;
    }
    run.finish()
}
