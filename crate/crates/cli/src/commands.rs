//! Subcommand bodies.

use std::fs;
use std::path::{Path, PathBuf};

use gazeperc_core::codec::{
    attach_ratings, image_id_from_path, read_embeddings_from, read_gaze_csv_from, read_label_map_from,
    read_ratings_jsonl_from, write_embeddings_to, write_events_csv_to,
};
use gazeperc_core::{
    aoi_time_share, export_features_csv, fixation_heatmap, write_aoi_csv, EventSet, FeatureRow, FeatureVector,
    PatchEmbeddingSet, SemanticLabelMap, Trial,
};
use gazeperc_nn::{read_checkpoint_from, Model};
use gazeperc_pipeline::{
    ablate_all, accuracy, attribute, macro_f1, process_trial, quota_sample, run, run_baseline, split_dataset, to_json,
    write_run_dir, Ablation, BaselineKind, Corpus, GazeRepr, RunPlan, ScoreRow, Split, Training,
};
use gazeperc_stats::analysis_report;
use gazeperc_synth::{describe_ground_truth, write_ground_truth, SynthDataset};
use serde::Serialize;

use crate::error::{invalid, CliError, Result};
use crate::manifest::{Inputs, RunManifest};
use crate::settings::Settings;
use crate::{Command, Common, DataArgs};

/// An output directory that must start out empty; every write stays inside it.
struct RunDir {
    root: PathBuf,
}

impl RunDir {
    fn create(root: &Path) -> Result<Self> {
        if root.exists() {
            let mut entries = fs::read_dir(root).map_err(|e| CliError::io(root, e))?;
            if entries.next().is_some() {
                return invalid(format!("run directory {} is not empty", root.display()));
            }
        }
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn subdir(&self, name: &str) -> Result<PathBuf> {
        let p = self.path(name);
        fs::create_dir_all(&p).map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))
    }

    fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<()> {
        self.write(name, &to_json(value)?)
    }
}

struct Ctx {
    settings: Settings,
    inputs: Inputs,
    out: RunDir,
}

pub(crate) fn execute(command: Command, argv: Vec<String>) -> Result<()> {
    let subcommand = command.name();
    let common = match &command {
        Command::Detect { common, .. }
        | Command::Features { common, .. }
        | Command::Aoi { common, .. }
        | Command::Stats { common, .. }
        | Command::Tokenize { common, .. }
        | Command::Train { common, .. }
        | Command::Eval { common, .. }
        | Command::Baseline { common, .. }
        | Command::Ablate { common, .. }
        | Command::Attribute { common, .. }
        | Command::Synth { common }
        | Command::Sample { common, .. }
        | Command::Pipeline { common, .. } => common.clone(),
    };
    let mut ctx = start(&common)?;
    match command {
        Command::Detect { data, .. } => detect(&mut ctx, &data),
        Command::Features { data, .. } => features(&mut ctx, &data),
        Command::Aoi { data, .. } => aoi(&mut ctx, &data),
        Command::Stats { data, .. } => stats(&mut ctx, &data),
        Command::Tokenize { data, .. } => tokenize(&mut ctx, &data),
        Command::Train { data, .. } => train(&mut ctx, &data, None),
        Command::Eval { data, checkpoint, .. } => eval(&mut ctx, &data, &checkpoint),
        Command::Baseline { data, kind, .. } => train(&mut ctx, &data, Some(kind)),
        Command::Ablate { data, .. } => {
            if ctx.settings.model.ablation == Ablation::None {
                return invalid("ablate needs --ablation zero_gaze or shuffle_scene");
            }
            train(&mut ctx, &data, None)
        }
        Command::Attribute { data, checkpoint, .. } => attribute_cmd(&mut ctx, &data, &checkpoint),
        Command::Synth { .. } => synth(&mut ctx),
        Command::Sample { scores, .. } => sample(&mut ctx, &scores),
        Command::Pipeline { data, synth_default, .. } => pipeline(&mut ctx, &data, synth_default),
    }?;
    let manifest = RunManifest {
        subcommand: subcommand.to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        seed: ctx.settings.seed,
        args: argv,
        config: ctx.settings.clone(),
        inputs: ctx.inputs.digests.clone(),
    };
    ctx.out.json("manifest.json", &manifest)
}

fn start(common: &Common) -> Result<Ctx> {
    let mut inputs = Inputs::default();
    let file = match &common.overrides.config {
        Some(p) => Some((p.as_path(), inputs.read(p)?)),
        None => None,
    };
    let settings = Settings::resolve(file.as_ref().map(|(p, b)| (*p, b.as_slice())), &common.overrides)?;
    let out = RunDir::create(&common.out)?;
    Ok(Ctx { settings, inputs, out })
}

// ---------------------------------------------------------------------------
// Input loading
// ---------------------------------------------------------------------------

impl DataArgs {
    fn part(&self, explicit: &Option<PathBuf>, name: &str) -> Option<PathBuf> {
        explicit.clone().or_else(|| self.data.as_ref().map(|d| d.join(name)))
    }

    fn gaze_path(&self) -> Result<PathBuf> {
        self.part(&self.gaze, "gaze.csv").ok_or_else(|| CliError::Validation("need --gaze or --data".into()))
    }

    fn ratings_path(&self) -> Option<PathBuf> {
        self.part(&self.ratings, "ratings.jsonl")
    }

    /// Scene directories are optional inside `--data`, required when named.
    fn scene_dir(&self, explicit: &Option<PathBuf>, name: &str) -> Option<PathBuf> {
        match explicit {
            Some(p) => Some(p.clone()),
            None => self.data.as_ref().map(|d| d.join(name)).filter(|p| p.is_dir()),
        }
    }
}

fn load_trials(ctx: &mut Ctx, data: &DataArgs, need_ratings: bool) -> Result<Vec<Trial>> {
    let gaze = data.gaze_path()?;
    let bytes = ctx.inputs.read(&gaze)?;
    let mut trials = read_gaze_csv_from(&bytes[..], &ctx.settings.corpus.display)?;
    match data.ratings_path() {
        Some(p) => {
            let records = read_ratings_jsonl_from(&ctx.inputs.read(&p)?[..])?;
            attach_ratings(&mut trials, &records)?;
        }
        None if need_ratings => return invalid("need --ratings or --data"),
        None => {}
    }
    Ok(trials)
}

fn load_maps(ctx: &mut Ctx, data: &DataArgs) -> Result<Vec<SemanticLabelMap>> {
    let Some(dir) = data.scene_dir(&data.labels, "labels") else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for p in ctx.inputs.list(&dir, "pgm")? {
        let bytes = ctx.inputs.read(&p)?;
        out.push(read_label_map_from(&bytes[..], image_id_from_path(&p)?)?);
    }
    Ok(out)
}

fn load_embeddings(ctx: &mut Ctx, data: &DataArgs) -> Result<Vec<PatchEmbeddingSet>> {
    let Some(dir) = data.scene_dir(&data.embeddings, "embeddings") else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for p in ctx.inputs.list(&dir, "gpemb")? {
        let bytes = ctx.inputs.read(&p)?;
        out.push(read_embeddings_from(&bytes[..], image_id_from_path(&p)?)?);
    }
    Ok(out)
}

fn load_corpus(ctx: &mut Ctx, data: &DataArgs) -> Result<Corpus> {
    let trials = load_trials(ctx, data, true)?;
    let mut corpus = Corpus::new(ctx.settings.corpus)?;
    for t in &trials {
        corpus.ingest(t);
    }
    for m in load_maps(ctx, data)? {
        corpus.add_map(m);
    }
    for e in load_embeddings(ctx, data)? {
        corpus.add_embeddings(e);
    }
    finish_corpus(ctx, corpus)
}

fn finish_corpus(ctx: &Ctx, corpus: Corpus) -> Result<Corpus> {
    if !corpus.excluded.is_empty() {
        let mut text = corpus.excluded.join("\n");
        text.push('\n');
        ctx.out.write("excluded.txt", text.as_bytes())?;
    }
    if corpus.trials.is_empty() {
        return invalid("no usable trials");
    }
    Ok(corpus)
}

/// Events and features for every usable trial, rated or not.
fn process_all(ctx: &Ctx, trials: &[Trial]) -> Result<Vec<(usize, EventSet, FeatureVector)>> {
    let mut out = Vec::new();
    let mut excluded = String::new();
    for (i, t) in trials.iter().enumerate() {
        match process_trial(t, &ctx.settings.corpus) {
            Ok((events, features)) => out.push((i, events, features)),
            Err(reason) => excluded.push_str(&format!("{}/{}: {reason}\n", t.image_id, t.subject_id)),
        }
    }
    if !excluded.is_empty() {
        ctx.out.write("excluded.txt", excluded.as_bytes())?;
    }
    Ok(out)
}

fn plan(s: &Settings) -> RunPlan {
    RunPlan {
        variant: s.model.variant,
        repr: s.model.repr,
        dimension: s.model.dimension,
        ablation: s.model.ablation,
        n_seeds: s.n_seeds,
        split_seed: s.seed,
        arch: s.model.arch,
        train: s.train.clone(),
    }
}

fn read_model(ctx: &mut Ctx, path: &Path) -> Result<Model> {
    let bytes = ctx.inputs.read(path)?;
    Ok(read_checkpoint_from(&bytes[..])?)
}

/// The gaze representation a checkpoint was trained on, from its input width.
fn repr_of(model: &Model, fallback: GazeRepr) -> Result<GazeRepr> {
    if !model.spec.variant.has_gaze() {
        return Ok(fallback);
    }
    GazeRepr::ALL.into_iter().find(|r| r.width() == model.spec.gaze_width).ok_or_else(|| {
        CliError::Validation(format!("checkpoint gaze width {} matches no representation", model.spec.gaze_width))
    })
}

fn test_indices(ctx: &Ctx, corpus: &Corpus) -> Result<Vec<usize>> {
    let split = split_dataset(&corpus.image_ids(), ctx.settings.seed)?;
    Ok((0..corpus.trials.len()).filter(|&i| split.get(&corpus.trials[i].image_id) == Some(Split::Test)).collect())
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn detect(ctx: &mut Ctx, data: &DataArgs) -> Result<()> {
    let trials = load_trials(ctx, data, false)?;
    let done = process_all(ctx, &trials)?;
    let mut buf = Vec::new();
    write_events_csv_to(&mut buf, done.iter().map(|(i, e, _)| (trials[*i].image_id.as_str(), trials[*i].subject_id.as_str(), e)))?;
    ctx.out.write("events.csv", &buf)
}

fn write_features(ctx: &Ctx, rows: Vec<FeatureRow<'_>>) -> Result<()> {
    let mut buf = Vec::new();
    export_features_csv(&mut buf, rows)?;
    ctx.out.write("features.csv", &buf)
}

fn features(ctx: &mut Ctx, data: &DataArgs) -> Result<()> {
    let trials = load_trials(ctx, data, false)?;
    let done = process_all(ctx, &trials)?;
    let levels = |t: &Trial| t.ratings.map(|r| gazeperc_core::Dimension::ALL.map(|d| r.level(d).index()));
    write_features(
        ctx,
        done.iter()
            .map(|(i, _, f)| FeatureRow {
                image_id: &trials[*i].image_id,
                subject_id: &trials[*i].subject_id,
                features: f,
                levels: levels(&trials[*i]),
            })
            .collect(),
    )?;
    let c = &ctx.settings.corpus;
    let dir = ctx.out.subdir("heatmaps")?;
    let sigma = c.display.deg_to_px(c.heatmap_sigma_deg);
    for (i, events, _) in &done {
        let t = &trials[*i];
        let h = fixation_heatmap(&events.fixations, &c.display, sigma, c.heatmap_size, c.heatmap_size);
        let id = format!("{}__{}", t.image_id, t.subject_id);
        let set = PatchEmbeddingSet::new(id.clone(), h.rows, h.cols, 1, h.data)?;
        let mut buf = Vec::new();
        write_embeddings_to(&mut buf, &set)?;
        let p = dir.join(format!("{id}.gpemb"));
        fs::write(&p, buf).map_err(|e| CliError::io(&p, e))?;
    }
    Ok(())
}

fn aoi(ctx: &mut Ctx, data: &DataArgs) -> Result<()> {
    let trials = load_trials(ctx, data, false)?;
    let maps: std::collections::BTreeMap<String, SemanticLabelMap> =
        load_maps(ctx, data)?.into_iter().map(|m| (m.image_id.clone(), m)).collect();
    if maps.is_empty() {
        return invalid("aoi needs label maps (--labels or --data with labels/)");
    }
    let done = process_all(ctx, &trials)?;
    let mut shares = Vec::with_capacity(done.len());
    for (i, events, _) in &done {
        let t = &trials[*i];
        let map = maps
            .get(&t.image_id)
            .ok_or_else(|| CliError::Validation(format!("no label map for image '{}'", t.image_id)))?;
        shares.push((t, aoi_time_share(&events.fixations, map, &ctx.settings.corpus.display)));
    }
    let mut buf = Vec::new();
    write_aoi_csv(&mut buf, shares.iter().map(|(t, s)| (t.image_id.as_str(), t.subject_id.as_str(), s)))?;
    ctx.out.write("aoi.csv", &buf)
}

fn write_stats(ctx: &Ctx, corpus: &Corpus) -> Result<()> {
    let s = &ctx.settings.stats;
    let report = analysis_report(&corpus.analysis_trials(), s.alpha_level, s.n_boot, ctx.settings.seed)?;
    let mut buf = Vec::new();
    report.write_tests_csv(&mut buf).map_err(|e| CliError::io(ctx.out.path("stats.csv"), e))?;
    ctx.out.write("stats.csv", &buf)?;
    ctx.out.json("plot.json", &report.plot_json())?;
    ctx.out.json("report.json", &report)
}

fn stats(ctx: &mut Ctx, data: &DataArgs) -> Result<()> {
    let corpus = load_corpus(ctx, data)?;
    write_stats(ctx, &corpus)
}

fn tokenize(ctx: &mut Ctx, data: &DataArgs) -> Result<()> {
    let corpus = load_corpus(ctx, data)?;
    let m = &ctx.settings.model;
    let seqs = corpus.inputs(m.variant, m.repr, m.dimension)?;
    let seqs = ablate_all(&seqs, m.ablation, ctx.settings.seed);
    let mut buf = Vec::new();
    for s in &seqs {
        let rows: Vec<&[f64]> = (0..s.len()).map(|i| s.row(i)).collect();
        let line = serde_json::json!({
            "image_id": s.meta.image_id,
            "subject_id": s.meta.subject_id,
            "dimension": s.meta.dimension,
            "label": s.label,
            "gaze_width": s.gaze_width,
            "width": s.width,
            "mask": s.mask,
            "tokens": rows,
        });
        serde_json::to_writer(&mut buf, &line)?;
        buf.push(b'\n');
    }
    ctx.out.write("tokens.jsonl", &buf)
}

fn write_training(ctx: &Ctx, training: &Training) -> Result<()> {
    write_run_dir(&ctx.out.root, &ctx.settings, training)?;
    Ok(())
}

fn train(ctx: &mut Ctx, data: &DataArgs, baseline: Option<BaselineKind>) -> Result<()> {
    let corpus = load_corpus(ctx, data)?;
    if let Some(kind) = baseline {
        ctx.settings.model.variant = kind.variant();
    }
    let p = plan(&ctx.settings);
    let training = match baseline {
        Some(kind) => run_baseline(&corpus, kind, &p)?,
        None => run(&corpus, &p)?,
    };
    write_training(ctx, &training)
}

#[derive(Debug, Serialize)]
struct EvalReport {
    variant: gazeperc_nn::Variant,
    dimension: gazeperc_core::Dimension,
    ablation: Ablation,
    n_test: usize,
    macro_f1: f64,
    accuracy: f64,
    confusion: gazeperc_pipeline::Confusion,
}

fn eval_model(ctx: &Ctx, corpus: &Corpus, model: &Model) -> Result<EvalReport> {
    let m = &ctx.settings.model;
    let repr = repr_of(model, m.repr)?;
    let seqs = corpus.inputs(model.spec.variant, repr, m.dimension)?;
    let seqs = ablate_all(&seqs, m.ablation, ctx.settings.seed);
    let test: Vec<_> = test_indices(ctx, corpus)?.into_iter().map(|i| &seqs[i]).collect();
    if test.is_empty() {
        return invalid("test split is empty");
    }
    let c = gazeperc_pipeline::evaluate(model, &test)?;
    Ok(EvalReport {
        variant: model.spec.variant,
        dimension: m.dimension,
        ablation: m.ablation,
        n_test: test.len(),
        macro_f1: macro_f1(&c)?,
        accuracy: accuracy(&c)?,
        confusion: c,
    })
}

fn eval(ctx: &mut Ctx, data: &DataArgs, checkpoint: &Path) -> Result<()> {
    let model = read_model(ctx, checkpoint)?;
    let corpus = load_corpus(ctx, data)?;
    let report = eval_model(ctx, &corpus, &model)?;
    ctx.out.json("metrics.json", &report)
}

fn attribute_model(ctx: &Ctx, corpus: &Corpus, model: &Model) -> Result<gazeperc_pipeline::AttributionSummary> {
    let m = &ctx.settings.model;
    let repr = repr_of(model, m.repr)?;
    let seqs = corpus.inputs(model.spec.variant, repr, m.dimension)?;
    let mut picked = test_indices(ctx, corpus)?;
    picked.truncate(ctx.settings.attribute.max_trials);
    Ok(attribute(corpus, model, &seqs, &picked, ctx.settings.attribute.steps)?)
}

fn attribute_cmd(ctx: &mut Ctx, data: &DataArgs, checkpoint: &Path) -> Result<()> {
    let model = read_model(ctx, checkpoint)?;
    let corpus = load_corpus(ctx, data)?;
    let summary = attribute_model(ctx, &corpus, &model)?;
    ctx.out.json("attribution.json", &summary)
}

fn synth(ctx: &mut Ctx) -> Result<()> {
    let ds = SynthDataset::build(&ctx.settings.synth)?;
    ds.write(&ctx.out.root)?;
    let summary = describe_ground_truth(&ds.truths, &ds.config.rating_thresholds());
    ctx.out.json("ground_truth_summary.json", &summary)
}

fn sample(ctx: &mut Ctx, scores: &Path) -> Result<()> {
    let bytes = ctx.inputs.read(scores)?;
    let mut rdr = csv::Reader::from_reader(&bytes[..]);
    let header = rdr.headers().map_err(|e| CliError::Validation(format!("{}: {e}", scores.display())))?.clone();
    if header.get(0) != Some("image_id") || header.len() < 2 {
        return invalid(format!("{}: expected image_id followed by score columns", scores.display()));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Validation(format!("{}: {e}", scores.display())))?;
        let mut cells = rec.iter();
        let image_id = cells.next().unwrap_or_default().to_owned();
        let scores_row = cells
            .map(|c| match c.trim() {
                "" => Ok(None),
                v => v.parse::<f64>().map(Some).map_err(|_| {
                    CliError::Validation(format!("{} line {}: bad score '{v}'", scores.display(), line + 2))
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(ScoreRow { image_id, scores: scores_row });
    }
    let s = &ctx.settings.sample;
    let picked = quota_sample(&rows, header.len() - 1, s.bins, s.per_bin, ctx.settings.seed)?;
    for w in &picked.warnings {
        eprintln!("warning: {w}");
    }
    ctx.out.json("sample.json", &picked)
}

fn pipeline(ctx: &mut Ctx, data: &DataArgs, synth_default: bool) -> Result<()> {
    let has_data = data.data.is_some() || data.gaze.is_some();
    let corpus = match (synth_default, has_data) {
        (true, true) => return invalid("--synth-default and dataset paths are exclusive"),
        (false, false) => return invalid("pipeline needs --synth-default or a dataset (--data or --gaze)"),
        (true, false) => {
            let ds = SynthDataset::build(&ctx.settings.synth)?;
            let gt = ctx.out.path("ground_truth.jsonl");
            write_ground_truth(&gt, &ds.truths)?;
            ctx.out.json("ground_truth_summary.json", &describe_ground_truth(&ds.truths, &ds.config.rating_thresholds()))?;
            let mut corpus = Corpus::new(ctx.settings.corpus)?;
            for t in ds.trials() {
                corpus.ingest(&t);
            }
            for img in &ds.images {
                corpus.add_map(img.map.clone());
                corpus.add_embeddings(img.embeddings.clone());
            }
            finish_corpus(ctx, corpus)?
        }
        (false, true) => load_corpus(ctx, data)?,
    };

    let mut events = Vec::new();
    write_events_csv_to(&mut events, corpus.trials.iter().map(|t| (t.image_id.as_str(), t.subject_id.as_str(), &t.events)))?;
    ctx.out.write("events.csv", &events)?;
    write_features(
        ctx,
        corpus
            .trials
            .iter()
            .map(|t| FeatureRow {
                image_id: &t.image_id,
                subject_id: &t.subject_id,
                features: &t.features,
                levels: Some(gazeperc_core::Dimension::ALL.map(|d| t.level(d).index())),
            })
            .collect(),
    )?;
    write_stats(ctx, &corpus)?;

    let training = run(&corpus, &plan(&ctx.settings))?;
    write_training(ctx, &training)?;

    // evaluate the checkpoint as written, not the in-memory model
    let ckpt = ctx.out.path("checkpoint.gpnn");
    let bytes = fs::read(&ckpt).map_err(|e| CliError::io(&ckpt, e))?;
    let model = read_checkpoint_from(&bytes[..])?;
    ctx.out.json("eval.json", &eval_model(ctx, &corpus, &model)?)?;
    if !model.spec.variant.is_mlp() {
        ctx.out.json("attribution.json", &attribute_model(ctx, &corpus, &model)?)?;
    }
    Ok(())
}
