//! Finite-difference gradient checking and toy inputs for every variant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{Batch, Model, ModelSpec, Variant, AOI_VOCAB};

/// Gradients smaller than this are compared on an absolute scale.
pub const GRADCHECK_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub n_checked: usize,
}

/// Compares every analytic parameter gradient of the mean cross-entropy with
/// a central difference of step `h`. Relative error is
/// `|a - n| / max(|a|, |n|, GRADCHECK_FLOOR)`.
pub fn finite_difference_check(model: &Model, batch: &Batch, h: f64) -> Result<GradCheck> {
    let (_, grads) = model.loss_and_grads(batch, 0.0)?;
    let mut probe = model.clone();
    let mut worst = GradCheck { max_rel_err: 0.0, worst_param: String::new(), n_checked: 0 };
    for (pi, g) in grads.iter().enumerate() {
        for i in 0..g.len() {
            let orig = probe.params[pi].value.data[i];
            probe.params[pi].value.data[i] = orig + h;
            let up = probe.loss_and_grads(batch, 0.0)?.0;
            probe.params[pi].value.data[i] = orig - h;
            let down = probe.loss_and_grads(batch, 0.0)?.0;
            probe.params[pi].value.data[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let err = (g[i] - numeric).abs() / g[i].abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
            if err > worst.max_rel_err {
                worst.max_rel_err = err;
                worst.worst_param = format!("{}[{i}]", probe.params[pi].name);
            }
            worst.n_checked += 1;
        }
    }
    Ok(worst)
}

/// Tiny spec of a variant: `d_model` 8, 2 heads, 8 head units, patch
/// embeddings of width 3 and a 4×4 heatmap.
pub fn toy_spec(variant: Variant) -> ModelSpec {
    let (g, s) = match variant {
        Variant::GazeOnly => (4, 0),
        Variant::GazeAoi => (4, 1),
        Variant::GazePatch => (4, 4),
        Variant::AoiSeq => (0, 1),
        Variant::PatchSeq => (0, 4),
        Variant::AoiComposition => (0, gazeperc_core::N_CATEGORIES),
        Variant::ImageOnly | Variant::GazeWeightedPool => (0, 3),
        Variant::HeatmapMlp => (0, 16),
    };
    let mut spec = ModelSpec::new(variant, g, s).resized(1, 2, 8);
    if variant == Variant::GazeOnly {
        spec.n_layers = 2;
    }
    spec.head_hidden = 8;
    spec
}

/// Random batch that fits `spec`. Sequence variants get `len` positions and
/// the last sequence has only its first position valid.
pub fn toy_batch(spec: &ModelSpec, n_seq: usize, len: usize, seed: u64) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = if spec.variant.is_mlp() { 1 } else { len };
    let width = spec.token_width();
    let mut tokens = Vec::with_capacity(n_seq * len * width);
    let mut mask = Vec::with_capacity(n_seq * len);
    for b in 0..n_seq {
        for l in 0..len {
            let valid = l == 0 || b + 1 < n_seq;
            mask.push(valid);
            for c in 0..width {
                let is_id = matches!(spec.variant, Variant::GazeAoi | Variant::AoiSeq) && c == spec.gaze_width;
                let is_flag = matches!(spec.variant, Variant::GazePatch | Variant::PatchSeq) && c + 1 == width;
                tokens.push(if is_id {
                    rng.gen_range(0..AOI_VOCAB) as f64
                } else if is_flag {
                    (rng.gen::<f64>() < 0.3) as u8 as f64
                } else {
                    rng.gen_range(-1.0..1.0)
                });
            }
        }
    }
    let labels = (0..n_seq).map(|_| rng.gen_range(0..spec.n_classes)).collect();
    Batch { batch: n_seq, len, width, tokens, mask, labels }
}
