//! Training and evaluation harness: seeded epochs, best-validation model
//! selection and mean ± std over seeds.

use gazeperc_core::{Dimension, TokenSequence};
use gazeperc_nn::{lr_at, AdamW, Batch, Model, ModelSpec, TrainConfig, Variant};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ablate::Ablation;
use crate::error::{invalid, PipelineError, Result};
use crate::metrics::{accuracy, confusion, macro_f1, Confusion, MeanStd};
use crate::split::{Split, SplitAssignment};
use crate::tokens::GazeRepr;

const EVAL_BATCH: usize = 256;

/// Sequences grouped by split. Training sequences are ordered by
/// (image id, subject id).
#[derive(Debug, Clone)]
pub struct SplitData<'a> {
    pub train: Vec<&'a TokenSequence>,
    pub val: Vec<&'a TokenSequence>,
    pub test: Vec<&'a TokenSequence>,
}

impl<'a> SplitData<'a> {
    pub fn new(seqs: &'a [TokenSequence], split: &SplitAssignment) -> Result<Self> {
        let mut data = SplitData { train: Vec::new(), val: Vec::new(), test: Vec::new() };
        for s in seqs {
            match split.get(&s.meta.image_id) {
                Some(Split::Train) => data.train.push(s),
                Some(Split::Val) => data.val.push(s),
                Some(Split::Test) => data.test.push(s),
                None => return invalid(format!("image '{}' has no split", s.meta.image_id)),
            }
        }
        data.train.sort_by(|a, b| (&a.meta.image_id, &a.meta.subject_id).cmp(&(&b.meta.image_id, &b.meta.subject_id)));
        if data.train.is_empty() || data.val.is_empty() || data.test.is_empty() {
            return invalid(format!(
                "every split needs trials (train {}, val {}, test {})",
                data.train.len(),
                data.val.len(),
                data.test.len()
            ));
        }
        Ok(data)
    }
}

/// Argmax class per sequence; ties go to the lower class index.
pub fn predict(model: &Model, seqs: &[&TokenSequence]) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(seqs.len());
    for chunk in seqs.chunks(EVAL_BATCH) {
        let logits = model.logits(&Batch::from_sequences(chunk)?)?;
        for row in logits.data.chunks(model.spec.n_classes) {
            let best = row.iter().enumerate().fold(0, |b, (i, &v)| if v > row[b] { i } else { b });
            out.push(best);
        }
    }
    Ok(out)
}

pub fn evaluate(model: &Model, seqs: &[&TokenSequence]) -> Result<Confusion> {
    let pred = predict(model, seqs)?;
    let truth: Vec<usize> = seqs.iter().map(|s| s.label.index()).collect();
    Ok(confusion(&truth, &pred))
}

/// One optimizer step of the training log. The validation score is filled
/// on the last step of each epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub seed: u64,
    pub epoch: usize,
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    pub val_macro_f1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub metrics: SeedMetrics,
    /// Parameters from the best validation epoch.
    pub model: Model,
    pub log: Vec<LogRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    /// 1-based epoch the test metrics come from.
    pub best_epoch: usize,
    pub val_macro_f1: f64,
    pub test_macro_f1: f64,
    pub test_accuracy: f64,
    pub confusion: Confusion,
}

/// Trains one model with `config.seed` and scores the best-validation
/// parameters on the test split.
pub fn train_seed(data: &SplitData<'_>, spec: &ModelSpec, config: &TrainConfig) -> Result<SeedOutcome> {
    config.validate()?;
    let mut model = Model::new(spec.clone(), config.seed)?;
    let mut opt = AdamW::new(&model.params, config.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = data.train.len();
    let spe = n.div_ceil(config.batch_size);
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = Vec::with_capacity(spe * config.epochs);
    let mut best: Option<(f64, usize, Model)> = None;
    let mut step = 0;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for idx in order.chunks(config.batch_size) {
            let seqs: Vec<&TokenSequence> = idx.iter().map(|&i| data.train[i]).collect();
            let batch = Batch::from_sequences(&seqs)?;
            let (loss, grads) = model.loss_and_grads(&batch, config.label_smoothing)?;
            if !loss.is_finite() {
                return Err(PipelineError::NonFiniteLoss { epoch, step, loss });
            }
            let lr = lr_at(step, spe, config);
            opt.step(&mut model.params, &grads, lr)?;
            log.push(LogRow { seed: config.seed, epoch, step, lr, loss, val_macro_f1: None });
            step += 1;
        }
        let val = macro_f1(&evaluate(&model, &data.val)?)?;
        log.last_mut().expect("at least one step per epoch").val_macro_f1 = Some(val);
        // strict improvement keeps the earlier epoch on ties
        if best.as_ref().map_or(true, |(b, _, _)| val > *b) {
            best = Some((val, epoch, model.clone()));
        }
    }
    let (val_macro_f1, best_epoch, model) = best.expect("epochs > 0");
    let c = evaluate(&model, &data.test)?;
    let metrics = SeedMetrics {
        seed: config.seed,
        best_epoch,
        val_macro_f1,
        test_macro_f1: macro_f1(&c)?,
        test_accuracy: accuracy(&c)?,
        confusion: c,
    };
    Ok(SeedOutcome { metrics, model, log })
}

/// What a run was trained on, echoed into its result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunTag {
    pub dimension: Dimension,
    pub ablation: Ablation,
    /// Gaze token representation, for variants with a gaze half.
    pub repr: Option<GazeRepr>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub variant: Variant,
    pub dimension: Dimension,
    pub ablation: Ablation,
    pub repr: Option<GazeRepr>,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Test Macro-F1 in percent over seeds.
    pub macro_f1: MeanStd,
    pub accuracy: MeanStd,
    pub seeds: Vec<SeedMetrics>,
    pub model: ModelSpec,
    pub train: TrainConfig,
}

#[derive(Debug, Clone)]
pub struct Training {
    pub result: RunResult,
    pub runs: Vec<SeedOutcome>,
}

/// Repeats [`train_seed`] for seeds `config.seed .. config.seed + n_seeds`.
pub fn train_eval(
    data: &SplitData<'_>,
    spec: &ModelSpec,
    config: &TrainConfig,
    n_seeds: usize,
    tag: RunTag,
) -> Result<Training> {
    if n_seeds == 0 {
        return invalid("n_seeds must be positive");
    }
    let runs = (0..n_seeds as u64)
        .map(|i| train_seed(data, spec, &TrainConfig { seed: config.seed.wrapping_add(i), ..config.clone() }))
        .collect::<Result<Vec<_>>>()?;
    let seeds: Vec<SeedMetrics> = runs.iter().map(|r| r.metrics.clone()).collect();
    let result = RunResult {
        variant: spec.variant,
        dimension: tag.dimension,
        ablation: tag.ablation,
        repr: if spec.variant.has_gaze() { tag.repr } else { None },
        n_train: data.train.len(),
        n_val: data.val.len(),
        n_test: data.test.len(),
        macro_f1: MeanStd::of(&seeds.iter().map(|s| s.test_macro_f1).collect::<Vec<_>>()),
        accuracy: MeanStd::of(&seeds.iter().map(|s| s.test_accuracy).collect::<Vec<_>>()),
        seeds,
        model: spec.clone(),
        train: config.clone(),
    };
    Ok(Training { result, runs })
}
