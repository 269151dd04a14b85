//! Model variants: pre-norm transformer encoders over token sequences and
//! small MLPs over fixed-width vectors.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use gazeperc_core::{TokenSequence, NONE_CATEGORY};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, NnError, Result};
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

/// Number of AOI ids an embedding table must cover (19 classes + "none").
pub const AOI_VOCAB: usize = NONE_CATEGORY as usize + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    GazeOnly,
    GazeAoi,
    GazePatch,
    AoiSeq,
    PatchSeq,
    AoiComposition,
    ImageOnly,
    HeatmapMlp,
    GazeWeightedPool,
}

impl Variant {
    pub const ALL: [Variant; 9] = [
        Variant::GazeOnly,
        Variant::GazeAoi,
        Variant::GazePatch,
        Variant::AoiSeq,
        Variant::PatchSeq,
        Variant::AoiComposition,
        Variant::ImageOnly,
        Variant::HeatmapMlp,
        Variant::GazeWeightedPool,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::GazeOnly => "gaze_only",
            Variant::GazeAoi => "gaze_aoi",
            Variant::GazePatch => "gaze_patch",
            Variant::AoiSeq => "aoi_seq",
            Variant::PatchSeq => "patch_seq",
            Variant::AoiComposition => "aoi_composition",
            Variant::ImageOnly => "image_only",
            Variant::HeatmapMlp => "heatmap_mlp",
            Variant::GazeWeightedPool => "gaze_weighted_pool",
        }
    }

    /// Single-vector variants classified by an MLP rather than an encoder.
    pub fn is_mlp(self) -> bool {
        matches!(self, Variant::AoiComposition | Variant::ImageOnly | Variant::HeatmapMlp | Variant::GazeWeightedPool)
    }

    pub fn has_gaze(self) -> bool {
        matches!(self, Variant::GazeOnly | Variant::GazeAoi | Variant::GazePatch)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == norm || format!("{v:?}").to_ascii_lowercase() == norm)
            .ok_or_else(|| NnError::Spec(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub n_classes: usize,
    pub head_hidden: usize,
    /// Raw gaze columns per token.
    pub gaze_width: usize,
    /// Raw scene columns per token: 1 for an AOI id, `E + 1` for a patch
    /// embedding plus its off-image flag, or the full input width of an MLP variant.
    pub scene_width: usize,
}

impl ModelSpec {
    /// Default architecture for a variant: the gaze-only encoder has 2 layers
    /// at width 128, fusion and scene encoders 1 layer at width 256.
    pub fn new(variant: Variant, gaze_width: usize, scene_width: usize) -> Self {
        let (n_layers, d_model) = match variant {
            Variant::GazeOnly => (2, 128),
            v if v.is_mlp() => (0, 256),
            _ => (1, 256),
        };
        Self {
            variant,
            n_layers,
            n_heads: 4,
            d_model,
            d_ff: 4 * d_model,
            max_len: gazeperc_core::MAX_SEQ_LEN,
            n_classes: 3,
            head_hidden: 64,
            gaze_width,
            scene_width,
        }
    }

    /// Same variant and input widths with a different backbone size.
    pub fn resized(mut self, n_layers: usize, n_heads: usize, d_model: usize) -> Self {
        self.n_layers = if self.variant.is_mlp() { 0 } else { n_layers };
        self.n_heads = n_heads;
        self.d_model = d_model;
        self.d_ff = 4 * d_model;
        self
    }

    pub fn token_width(&self) -> usize {
        self.gaze_width + self.scene_width
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NnError::Spec(m));
        if self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return bad(format!("d_model {} not divisible by n_heads {}", self.d_model, self.n_heads));
        }
        if self.n_classes < 2 || self.head_hidden == 0 || self.max_len == 0 {
            return bad("n_classes, head_hidden and max_len must be positive".into());
        }
        let v = self.variant;
        let (g, s) = (self.gaze_width, self.scene_width);
        let ok = match v {
            Variant::GazeOnly => g > 0 && s == 0,
            Variant::GazeAoi => g > 0 && s == 1,
            Variant::GazePatch => g > 0 && s >= 2,
            Variant::AoiSeq => g == 0 && s == 1,
            Variant::PatchSeq => g == 0 && s >= 2,
            _ => g == 0 && s > 0,
        };
        if !ok {
            return bad(format!("{v}: gaze_width {g} and scene_width {s} do not fit the variant"));
        }
        if matches!(v, Variant::GazeAoi | Variant::GazePatch) && self.d_model % 2 != 0 {
            return bad(format!("{v}: d_model must be even to split between gaze and scene"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

/// Weight initialisation. Biases and layer-norm shifts start at 0 and
/// layer-norm scales at 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    pub std: f64,
    /// Start the final head layer at zero (uniform initial predictions).
    pub zero_head: bool,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { std: 0.02, zero_head: true }
    }
}

/// Padded batch of token sequences: `tokens` is `[batch * len, width]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub batch: usize,
    pub len: usize,
    pub width: usize,
    pub tokens: Vec<f64>,
    pub mask: Vec<bool>,
    pub labels: Vec<usize>,
}

impl Batch {
    /// Pads every sequence to the longest one in the batch.
    pub fn from_sequences(seqs: &[&TokenSequence]) -> Result<Self> {
        let Some(first) = seqs.first() else {
            return Err(NnError::InvalidArgument("empty batch".into()));
        };
        let width = first.width;
        let len = seqs.iter().map(|s| s.len()).max().unwrap_or(0).max(1);
        let mut tokens = vec![0.0; seqs.len() * len * width];
        let mut mask = vec![false; seqs.len() * len];
        for (b, s) in seqs.iter().enumerate() {
            if s.width != width {
                return Err(shape_err("Batch::from_sequences", width, s.width));
            }
            tokens[b * len * width..][..s.tokens.len()].copy_from_slice(&s.tokens);
            mask[b * len..][..s.mask.len()].copy_from_slice(&s.mask);
        }
        let labels = seqs.iter().map(|s| s.label.index()).collect();
        Ok(Self { batch: seqs.len(), len, width, tokens, mask, labels })
    }

    fn columns(&self, from: usize, to: usize) -> Tensor {
        let n = self.batch * self.len;
        let mut data = Vec::with_capacity(n * (to - from));
        for row in self.tokens.chunks(self.width) {
            data.extend_from_slice(&row[from..to]);
        }
        Tensor { shape: vec![n, to - from], data }
    }

    fn ids(&self, col: usize) -> Result<Vec<usize>> {
        self.tokens
            .chunks(self.width)
            .map(|row| {
                let v = row[col];
                if v >= 0.0 && v < AOI_VOCAB as f64 && v.fract() == 0.0 {
                    Ok(v as usize)
                } else {
                    Err(NnError::InvalidArgument(format!("AOI id {v} outside 0..{AOI_VOCAB}")))
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub params: Vec<Param>,
    index: HashMap<String, usize>,
}

/// Graph handles for every parameter, in [`Model::params`] order.
#[derive(Debug, Clone)]
pub struct ParamVars(pub Vec<Var>);

fn truncated_normal(rng: &mut ChaCha8Rng, std: f64, n: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, std).expect("finite std");
    (0..n)
        .map(|_| loop {
            let v: f64 = normal.sample(rng);
            if v.abs() <= 2.0 * std {
                break v;
            }
        })
        .collect()
}

impl Model {
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        Self::with_init(spec, seed, InitConfig::default())
    }

    pub fn with_init(spec: ModelSpec, seed: u64, init: InitConfig) -> Result<Self> {
        spec.validate()?;
        let mut b = Builder { rng: ChaCha8Rng::seed_from_u64(seed), std: init.std, params: Vec::new() };
        let d = spec.d_model;
        let (g, s) = (spec.gaze_width, spec.scene_width);
        match spec.variant {
            Variant::GazeOnly => b.linear("input", g, d, false),
            Variant::GazeAoi => {
                b.linear("input.gaze", g, d / 2, false);
                b.weight("input.aoi.w", AOI_VOCAB, d / 2, false);
            }
            Variant::GazePatch => {
                b.linear("input.gaze", g, d / 2, false);
                b.linear("input.scene", s, d / 2, false);
            }
            Variant::AoiSeq => b.weight("input.aoi.w", AOI_VOCAB, d, false),
            _ => b.linear("input", s, d, false),
        }
        if !spec.variant.is_mlp() {
            b.weight("pos", spec.max_len, d, false);
            for l in 0..spec.n_layers {
                b.layer_norm(&format!("blocks.{l}.ln1"), d);
                b.linear(&format!("blocks.{l}.attn.qkv"), d, 3 * d, false);
                b.linear(&format!("blocks.{l}.attn.out"), d, d, false);
                b.layer_norm(&format!("blocks.{l}.ln2"), d);
                b.linear(&format!("blocks.{l}.ff1"), d, spec.d_ff, false);
                b.linear(&format!("blocks.{l}.ff2"), spec.d_ff, d, false);
            }
            b.layer_norm("final_ln", d);
        }
        b.linear("head.0", d, spec.head_hidden, false);
        b.linear("head.1", spec.head_hidden, spec.n_classes, init.zero_head);
        Ok(Self::from_params(spec, b.params))
    }

    pub(crate) fn from_params(spec: ModelSpec, params: Vec<Param>) -> Self {
        let index = params.iter().enumerate().map(|(i, p)| (p.name.clone(), i)).collect();
        Self { spec, params, index }
    }

    pub fn param(&self, name: &str) -> Option<&Param> {
        self.index.get(name).map(|&i| &self.params[i])
    }

    pub fn n_parameters(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Registers every parameter as a differentiable leaf.
    pub fn bind(&self, g: &mut Graph) -> ParamVars {
        ParamVars(self.params.iter().map(|p| g.leaf(p.value.clone())).collect())
    }

    fn p(&self, pv: &ParamVars, name: &str) -> Var {
        pv.0[self.index[name]]
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        let spec = &self.spec;
        if batch.width != spec.token_width() {
            return Err(shape_err("forward (token width)", spec.token_width(), batch.width));
        }
        if spec.variant.is_mlp() && batch.len != 1 {
            return Err(shape_err("forward (MLP variants take one token)", 1, batch.len));
        }
        if batch.len > spec.max_len {
            return Err(shape_err("forward (sequence length)", spec.max_len, batch.len));
        }
        for b in 0..batch.batch {
            if !batch.mask[b * batch.len..(b + 1) * batch.len].iter().any(|&m| m) {
                return Err(NnError::InvalidArgument(format!("sequence {b} of the batch has no valid token")));
            }
        }
        Ok(())
    }

    /// Input stage: raw token columns to `[batch * len, d_model]`.
    pub fn embed(&self, g: &mut Graph, pv: &ParamVars, batch: &Batch) -> Result<Var> {
        self.check_batch(batch)?;
        let gw = self.spec.gaze_width;
        let w = batch.width;
        let lin = |g: &mut Graph, name: &str, x: Var| g.linear(x, self.p(pv, &format!("{name}.w")), self.p(pv, &format!("{name}.b")));
        match self.spec.variant {
            Variant::GazeAoi => {
                let x = g.constant(batch.columns(0, gw));
                let gaze = lin(g, "input.gaze", x)?;
                let scene = g.embedding(self.p(pv, "input.aoi.w"), batch.ids(gw)?)?;
                g.concat_cols(gaze, scene)
            }
            Variant::GazePatch => {
                let x = g.constant(batch.columns(0, gw));
                let gaze = lin(g, "input.gaze", x)?;
                let s = g.constant(batch.columns(gw, w));
                let scene = lin(g, "input.scene", s)?;
                g.concat_cols(gaze, scene)
            }
            Variant::AoiSeq => g.embedding(self.p(pv, "input.aoi.w"), batch.ids(0)?),
            _ => {
                let x = g.constant(batch.columns(0, w));
                lin(g, "input", x)
            }
        }
    }

    /// Everything after the input stage; returns logits `[batch, n_classes]`.
    pub fn encode(&self, g: &mut Graph, pv: &ParamVars, h: Var, batch: &Batch) -> Result<Var> {
        let p = |name: String| self.p(pv, &name);
        let pooled = if self.spec.variant.is_mlp() {
            g.gelu(h)
        } else {
            let mut h = g.add_positional(h, p("pos".into()), batch.len)?;
            for l in 0..self.spec.n_layers {
                let pre = format!("blocks.{l}");
                let x = g.layer_norm(h, p(format!("{pre}.ln1.g")), p(format!("{pre}.ln1.b")))?;
                let qkv = g.linear(x, p(format!("{pre}.attn.qkv.w")), p(format!("{pre}.attn.qkv.b")))?;
                let a = g.attention(qkv, &batch.mask, batch.batch, batch.len, self.spec.n_heads)?;
                let a = g.linear(a, p(format!("{pre}.attn.out.w")), p(format!("{pre}.attn.out.b")))?;
                h = g.add(h, a)?;
                let x = g.layer_norm(h, p(format!("{pre}.ln2.g")), p(format!("{pre}.ln2.b")))?;
                let f = g.linear(x, p(format!("{pre}.ff1.w")), p(format!("{pre}.ff1.b")))?;
                let f = g.gelu(f);
                let f = g.linear(f, p(format!("{pre}.ff2.w")), p(format!("{pre}.ff2.b")))?;
                h = g.add(h, f)?;
            }
            let h = g.layer_norm(h, p("final_ln.g".into()), p("final_ln.b".into()))?;
            g.mean_pool(h, &batch.mask, batch.len)?
        };
        let z = g.linear(pooled, p("head.0.w".into()), p("head.0.b".into()))?;
        let z = g.gelu(z);
        g.linear(z, p("head.1.w".into()), p("head.1.b".into()))
    }

    pub fn forward(&self, g: &mut Graph, pv: &ParamVars, batch: &Batch) -> Result<Var> {
        let h = self.embed(g, pv, batch)?;
        self.encode(g, pv, h, batch)
    }

    /// Logits without recording gradients for later use.
    pub fn logits(&self, batch: &Batch) -> Result<Tensor> {
        let mut g = Graph::new();
        let pv = ParamVars(self.params.iter().map(|p| g.constant(p.value.clone())).collect());
        let out = self.forward(&mut g, &pv, batch)?;
        Ok(g.value(out).clone())
    }

    /// Mean cross-entropy loss and per-parameter gradients for one batch.
    pub fn loss_and_grads(&self, batch: &Batch, smoothing: f64) -> Result<(f64, Vec<Vec<f64>>)> {
        let mut g = Graph::new();
        let pv = self.bind(&mut g);
        let logits = self.forward(&mut g, &pv, batch)?;
        let loss = g.cross_entropy(logits, &batch.labels, smoothing)?;
        g.backward(loss)?;
        let grads = pv
            .0
            .iter()
            .zip(&self.params)
            .map(|(&v, p)| g.grad(v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; p.value.len()]))
            .collect();
        Ok((g.value(loss).data[0], grads))
    }
}

struct Builder {
    rng: ChaCha8Rng,
    std: f64,
    params: Vec<Param>,
}

impl Builder {
    fn weight(&mut self, name: &str, rows: usize, cols: usize, zero: bool) {
        let data = if zero { vec![0.0; rows * cols] } else { truncated_normal(&mut self.rng, self.std, rows * cols) };
        self.params.push(Param { name: name.to_owned(), value: Tensor { shape: vec![rows, cols], data } });
    }

    fn linear(&mut self, prefix: &str, i: usize, o: usize, zero: bool) {
        self.weight(&format!("{prefix}.w"), i, o, zero);
        self.params.push(Param { name: format!("{prefix}.b"), value: Tensor::zeros(vec![1, o]) });
    }

    fn layer_norm(&mut self, prefix: &str, d: usize) {
        self.params.push(Param { name: format!("{prefix}.g"), value: Tensor { shape: vec![1, d], data: vec![1.0; d] } });
        self.params.push(Param { name: format!("{prefix}.b"), value: Tensor::zeros(vec![1, d]) });
    }
}
