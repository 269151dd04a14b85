//! Resolved run configuration: defaults, overlaid by an optional JSON
//! config file, overlaid by command-line flags.

use std::path::Path;

use clap::Args;
use gazeperc_core::Dimension;
use gazeperc_nn::{ModelSpec, TrainConfig, Variant};
use gazeperc_pipeline::{Ablation, Arch, CorpusConfig, GazeRepr};
use gazeperc_synth::SynthConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{invalid, CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub variant: Variant,
    pub repr: GazeRepr,
    pub dimension: Dimension,
    pub ablation: Ablation,
    /// Overrides the variant's default backbone when set.
    pub arch: Option<Arch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSettings {
    pub alpha_level: f64,
    /// Bootstrap replicates for the agreement intervals.
    pub n_boot: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSettings {
    pub steps: usize,
    /// Test-split trials attributed, taken in corpus order.
    pub max_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSettings {
    pub bins: usize,
    pub per_bin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    /// Seeds the generator, the split, training and the bootstrap.
    pub seed: u64,
    pub corpus: CorpusConfig,
    pub model: ModelSettings,
    pub train: TrainConfig,
    pub n_seeds: usize,
    pub stats: StatsSettings,
    pub attribute: AttributeSettings,
    pub sample: SampleSettings,
    pub synth: SynthConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: 0,
            corpus: CorpusConfig::default(),
            model: ModelSettings {
                variant: Variant::GazeAoi,
                repr: GazeRepr::XyDurSacc,
                dimension: Dimension::Safe,
                ablation: Ablation::None,
                arch: None,
            },
            train: TrainConfig::default(),
            n_seeds: 5,
            stats: StatsSettings { alpha_level: 0.05, n_boot: 1000 },
            attribute: AttributeSettings { steps: 256, max_trials: 50 },
            sample: SampleSettings { bins: 10, per_bin: 80 },
            synth: SynthConfig::default(),
        }
    }
}

/// Flags that override individual settings.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON file with any subset of the settings
    #[arg(long, value_name = "FILE")]
    pub config: Option<std::path::PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,

    /// I-DT dispersion threshold in degrees of visual angle
    #[arg(long, value_name = "DEG")]
    pub idt_threshold_deg: Option<f64>,
    #[arg(long, value_name = "MS")]
    pub idt_min_duration_ms: Option<f64>,
    /// Largest sample gap inside one fixation
    #[arg(long, value_name = "MS")]
    pub idt_max_gap_ms: Option<f64>,
    #[arg(long, value_name = "RATIO")]
    pub min_valid_ratio: Option<f64>,
    /// Side of the square grid used for fixation entropy
    #[arg(long, value_name = "N")]
    pub entropy_grid: Option<usize>,
    /// Side of the square patch grid
    #[arg(long, value_name = "N")]
    pub patch_grid: Option<usize>,
    #[arg(long, value_name = "DEG")]
    pub heatmap_sigma_deg: Option<f64>,
    #[arg(long, value_name = "N")]
    pub heatmap_size: Option<usize>,

    /// gaze_only, gaze_aoi, gaze_patch, aoi_seq, patch_seq, aoi_composition,
    /// image_only, gaze_weighted_pool or heatmap_mlp
    #[arg(long)]
    pub variant: Option<Variant>,
    /// xy, xy+dur or xy+dur+sacc
    #[arg(long)]
    pub repr: Option<GazeRepr>,
    /// wealthy, safe or boring
    #[arg(long)]
    pub dimension: Option<Dimension>,
    /// none, zero_gaze or shuffle_scene
    #[arg(long)]
    pub ablation: Option<Ablation>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub d_model: Option<usize>,

    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub warmup_epochs: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub label_smoothing: Option<f64>,
    #[arg(long)]
    pub n_seeds: Option<usize>,

    #[arg(long)]
    pub alpha_level: Option<f64>,
    #[arg(long)]
    pub n_boot: Option<usize>,
    /// Integrated-gradients steps
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub max_trials: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub per_bin: Option<usize>,

    #[arg(long)]
    pub n_images: Option<usize>,
    #[arg(long)]
    pub n_subjects: Option<usize>,
    #[arg(long)]
    pub raters: Option<usize>,
    #[arg(long)]
    pub w_scene: Option<f64>,
    #[arg(long)]
    pub w_gaze: Option<f64>,
    #[arg(long)]
    pub noise_std: Option<f64>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl Overrides {
    fn apply(&self, s: &mut Settings) {
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        let c = &mut s.corpus;
        if let Some(deg) = self.idt_threshold_deg {
            c.idt.dispersion_threshold_px = c.display.deg_to_px(deg);
        }
        set(&mut c.idt.min_duration_ms, self.idt_min_duration_ms);
        set(&mut c.idt.max_gap_ms, self.idt_max_gap_ms);
        set(&mut c.min_valid_ratio, self.min_valid_ratio);
        if let Some(n) = self.entropy_grid {
            c.feature_grid.grid_rows = n;
            c.feature_grid.grid_cols = n;
        }
        if let Some(n) = self.patch_grid {
            c.patch_grid.grid_rows = n;
            c.patch_grid.grid_cols = n;
            s.synth.patch_grid = c.patch_grid;
        }
        set(&mut c.heatmap_sigma_deg, self.heatmap_sigma_deg);
        set(&mut c.heatmap_size, self.heatmap_size);

        let m = &mut s.model;
        set(&mut m.variant, self.variant);
        set(&mut m.repr, self.repr);
        set(&mut m.dimension, self.dimension);
        set(&mut m.ablation, self.ablation);
        if self.layers.is_some() || self.heads.is_some() || self.d_model.is_some() {
            let mut arch = m.arch.unwrap_or_else(|| {
                let d = ModelSpec::new(m.variant, 1, 1);
                Arch { n_layers: d.n_layers, n_heads: d.n_heads, d_model: d.d_model }
            });
            set(&mut arch.n_layers, self.layers);
            set(&mut arch.n_heads, self.heads);
            set(&mut arch.d_model, self.d_model);
            m.arch = Some(arch);
        }

        let t = &mut s.train;
        set(&mut t.epochs, self.epochs);
        set(&mut t.peak_lr, self.lr);
        set(&mut t.batch_size, self.batch_size);
        set(&mut t.warmup_epochs, self.warmup_epochs);
        set(&mut t.weight_decay, self.weight_decay);
        set(&mut t.label_smoothing, self.label_smoothing);
        set(&mut s.n_seeds, self.n_seeds);

        set(&mut s.stats.alpha_level, self.alpha_level);
        set(&mut s.stats.n_boot, self.n_boot);
        set(&mut s.attribute.steps, self.steps);
        set(&mut s.attribute.max_trials, self.max_trials);
        set(&mut s.sample.bins, self.bins);
        set(&mut s.sample.per_bin, self.per_bin);

        let g = &mut s.synth;
        set(&mut g.n_images, self.n_images);
        set(&mut g.n_subjects, self.n_subjects);
        set(&mut g.raters_per_image, self.raters);
        set(&mut g.w_scene, self.w_scene);
        set(&mut g.w_gaze, self.w_gaze);
        set(&mut g.noise_std, self.noise_std);
    }
}

/// Overlays `over` onto `base`. Objects merge key by key; anything else
/// replaces. Keys absent from `base` are rejected.
fn merge(base: &mut Value, over: Value, path: &str) -> Result<()> {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                let here = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v, &here)?,
                    None => return invalid(format!("unknown config key '{here}'")),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}

impl Settings {
    /// Defaults, then the config file (already read), then the flags.
    pub fn resolve(config_file: Option<(&Path, &[u8])>, flags: &Overrides) -> Result<Settings> {
        let mut s = Settings::default();
        if let Some((path, bytes)) = config_file {
            let over: Value = serde_json::from_slice(bytes)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            let mut base = serde_json::to_value(&s)?;
            merge(&mut base, over, "")?;
            s = serde_json::from_value(base).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        }
        flags.apply(&mut s);
        s.train.seed = s.seed;
        s.synth.seed = s.seed;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.synth.validate()?;
        if self.n_seeds == 0 {
            return invalid("n_seeds must be positive");
        }
        if !(self.stats.alpha_level > 0.0 && self.stats.alpha_level < 1.0) {
            return invalid("alpha_level must lie in (0, 1)");
        }
        if self.attribute.steps == 0 {
            return invalid("attribution steps must be positive");
        }
        if let Some(a) = self.model.arch {
            if a.n_heads == 0 || a.d_model == 0 || a.d_model % a.n_heads != 0 {
                return invalid(format!("d_model {} must be a positive multiple of heads {}", a.d_model, a.n_heads));
            }
        }
        Ok(())
    }
}
