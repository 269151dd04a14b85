//! Seeded synthetic datasets with a known latent structure.
//!
//! Each image carries a consensus latent `μ` per dimension that shapes its
//! class composition. Each trial draws a deviation `δ` that tilts where the
//! viewer looks, how long they dwell and how far they jump. The rating latent
//! is `z = w_scene·μ + w_gaze·Δ + bias + ε` with `Δ_k = sign_k·δ`, quantised
//! to a 5-point score.

mod config;
mod error;
mod gaze;
mod scene;
mod truth;

use std::fs;
use std::path::Path;

use gazeperc_core::codec::{
    write_embeddings, write_gaze_csv_to, write_label_map, write_ratings_jsonl, RatingRecord,
};
use gazeperc_core::{PatchEmbeddingSet, Ratings, SemanticLabelMap, Trial, N_CATEGORIES};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub use config::{GazeCoupling, SynthConfig};
pub use error::{Result, SynthError};
pub use gaze::PlannedFixation;
pub use scene::{is_attention, SynthImage, ATTENTION_SHARE, BASE_LOGITS, LOADINGS, VALENCE};
pub use truth::{
    describe_ground_truth, ks_normal, mutual_information, pearson, quantize, tertiles,
    write_ground_truth, GroundTruthSummary, TrialTruth,
};

use gaze::TrialStyle;

/// Independent random streams, so images and trials can be built in any order.
fn stream(seed: u64, kind: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((kind << 48) | index);
    rng
}

const GLOBAL: u64 = 1;
const IMAGE: u64 = 2;
const TRIAL: u64 = 3;
const SAMPLES: u64 = 4;

/// A generated dataset. Trials keep only their fixation plan; samples are
/// rendered on demand by [`SynthDataset::trial`].
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub config: SynthConfig,
    pub images: Vec<SynthImage>,
    pub truths: Vec<TrialTruth>,
    pub plans: Vec<Vec<PlannedFixation>>,
}

impl SynthDataset {
    pub fn build(config: &SynthConfig) -> Result<Self> {
        config.validate()?;
        let mut global = stream(config.seed, GLOBAL, 0);
        let protos = scene::prototypes(config, &mut global);
        let bias_dist = Normal::new(0.0, config.subject_bias_std).expect("validated");
        let subject_bias: Vec<[f64; 3]> = (0..config.n_subjects)
            .map(|_| std::array::from_fn(|_| bias_dist.sample(&mut global)))
            .collect();
        let thresholds = config.rating_thresholds();

        let mut images = Vec::with_capacity(config.n_images);
        let mut truths = Vec::with_capacity(config.n_trials());
        let mut plans = Vec::with_capacity(config.n_trials());
        for i in 0..config.n_images {
            let mut rng = stream(config.seed, IMAGE, i as u64);
            let mut image = scene::make_image(config, i, &protos, &mut rng)?;
            let mut raters =
                sample(&mut rng, config.n_subjects, config.raters_per_image).into_vec();
            raters.sort_unstable();
            for (slot, &subject) in raters.iter().enumerate() {
                let mut rng = stream(
                    config.seed,
                    TRIAL,
                    (i * config.raters_per_image + slot) as u64,
                );
                let delta: f64 = StandardNormal.sample(&mut rng);
                let eps: [f64; 3] = std::array::from_fn(|_| config.noise_std * rng.sample_normal());
                let style = TrialStyle {
                    delta,
                    duration_offset: config.coupling.trial_noise_std * rng.sample_normal(),
                    amplitude_offset: config.coupling.trial_noise_std * rng.sample_normal(),
                };
                let plan = gaze::plan_fixations(
                    &image,
                    &style,
                    &config.coupling,
                    &config.display,
                    &mut rng,
                );
                let gaze_delta = config.gaze_sign.map(|s| s * delta);
                let z: [f64; 3] = std::array::from_fn(|k| {
                    config.w_scene * image.mu[k]
                        + config.w_gaze * gaze_delta[k]
                        + subject_bias[subject][k]
                        + eps[k]
                });
                truths.push(TrialTruth {
                    image_id: image.image_id.clone(),
                    subject_id: subject_id(subject),
                    mu: image.mu,
                    delta,
                    gaze_delta,
                    subject_bias: subject_bias[subject],
                    eps,
                    z,
                    ratings: z.map(|v| quantize(v, &thresholds)),
                    gaze_summary: gaze::gaze_summary(&plan),
                });
                plans.push(plan);
            }
            // only needed for planning, and large
            image.class_pixels = Vec::new();
            images.push(image);
        }
        Ok(Self {
            config: config.clone(),
            images,
            truths,
            plans,
        })
    }

    pub fn n_trials(&self) -> usize {
        self.truths.len()
    }

    pub fn image(&self, trial: usize) -> &SynthImage {
        &self.images[trial / self.config.raters_per_image]
    }

    /// Renders trial `i` with its ratings attached.
    pub fn trial(&self, i: usize) -> Trial {
        let cfg = &self.config;
        let mut rng = stream(cfg.seed, SAMPLES, i as u64);
        let samples = gaze::render_samples(
            &self.plans[i],
            &cfg.display,
            cfg.dropouts_per_trial,
            &mut rng,
        );
        let t = &self.truths[i];
        let [w, s, b] = t.ratings;
        Trial {
            image_id: t.image_id.clone(),
            subject_id: t.subject_id.clone(),
            ratings: Some(Ratings::new(w, s, b).expect("quantised ratings are in 1..=5")),
            samples,
            display_w_px: cfg.display.width_px,
            display_h_px: cfg.display.height_px,
        }
    }

    pub fn trials(&self) -> impl Iterator<Item = Trial> + '_ {
        (0..self.n_trials()).map(|i| self.trial(i))
    }

    pub fn rating_records(&self) -> Vec<RatingRecord> {
        self.truths
            .iter()
            .map(|t| RatingRecord {
                image_id: t.image_id.clone(),
                subject_id: t.subject_id.clone(),
                wealthy: t.ratings[0],
                safe: t.ratings[1],
                boring: t.ratings[2],
            })
            .collect()
    }

    /// Per-image pixel fractions, in image order.
    pub fn compositions(&self) -> Vec<[f64; N_CATEGORIES]> {
        self.images.iter().map(|i| *i.composition()).collect()
    }

    /// Writes `gaze.csv`, `ratings.jsonl`, `labels/<id>.pgm`,
    /// `embeddings/<id>.gpemb`, `ground_truth.jsonl` and `synth_config.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("labels"))?;
        fs::create_dir_all(dir.join("embeddings"))?;
        let mut gaze = std::io::BufWriter::new(fs::File::create(dir.join("gaze.csv"))?);
        // one trial at a time keeps memory flat; the header comes from the first
        let mut first = true;
        for trial in self.trials() {
            let mut buf = Vec::new();
            write_gaze_csv_to(&mut buf, std::slice::from_ref(&trial))?;
            let body = if first {
                &buf[..]
            } else {
                &buf[buf.iter().position(|&b| b == b'\n').map_or(0, |p| p + 1)..]
            };
            std::io::Write::write_all(&mut gaze, body)?;
            first = false;
        }
        std::io::Write::flush(&mut gaze)?;
        write_ratings_jsonl(&dir.join("ratings.jsonl"), &self.rating_records())?;
        for img in &self.images {
            write_label_map(
                &dir.join("labels").join(format!("{}.pgm", img.image_id)),
                &img.map,
            )?;
            write_embeddings(
                &dir.join("embeddings")
                    .join(format!("{}.gpemb", img.image_id)),
                &img.embeddings,
            )?;
        }
        truth::write_ground_truth(&dir.join("ground_truth.jsonl"), &self.truths)?;
        fs::write(
            dir.join("synth_config.json"),
            serde_json::to_vec_pretty(&self.config)?,
        )?;
        Ok(())
    }
}

fn subject_id(i: usize) -> String {
    format!("s{i:03}")
}

trait NormalExt {
    fn sample_normal(&mut self) -> f64;
}

impl NormalExt for ChaCha8Rng {
    fn sample_normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }
}

/// Everything at once: rendered trials, label maps, embeddings and ground truth.
pub fn generate(
    config: &SynthConfig,
) -> Result<(
    Vec<Trial>,
    Vec<SemanticLabelMap>,
    Vec<PatchEmbeddingSet>,
    Vec<TrialTruth>,
)> {
    let ds = SynthDataset::build(config)?;
    let trials = ds.trials().collect();
    let maps = ds.images.iter().map(|i| i.map.clone()).collect();
    let embeddings = ds.images.iter().map(|i| i.embeddings.clone()).collect();
    Ok((trials, maps, embeddings, ds.truths))
}
