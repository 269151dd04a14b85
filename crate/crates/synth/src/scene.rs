//! Synthetic stimuli: class composition driven by the consensus latents,
//! a block-mosaic label map realising it, and patch embeddings derived
//! from the map.
//!
//! Categories come in two groups. Scene categories carry `μ` through their
//! area. Attention categories share a fixed area budget and carry the gaze
//! valence, so where and how long people look is independent of `μ`.

use gazeperc_core::{PatchEmbeddingSet, SemanticLabelMap, N_CATEGORIES};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::SynthConfig;
use crate::error::Result;

/// Baseline log-odds of each category's area. Attention categories (marked)
/// are apportioned within their own budget.
pub const BASE_LOGITS: [f64; N_CATEGORIES] = [
    1.0,  // road
    0.3,  // sidewalk
    1.2,  // building
    -0.5, // wall
    -0.7, // fence
    -0.3, // pole *
    -2.5, // traffic light
    -0.5, // traffic sign *
    0.8,  // vegetation
    -0.3, // terrain
    1.0,  // sky
    0.2,  // person *
    -2.5, // rider
    0.6,  // car *
    -0.4, // truck *
    -2.0, // bus
    -3.0, // train
    -2.5, // motorcycle
    -0.6, // bicycle *
];

/// Change in a category's log-odds per unit of each dimension's `μ`
/// (wealthy, safe, boring). Zero on attention categories.
pub const LOADINGS: [[f64; 3]; N_CATEGORIES] = [
    [-0.2, 0.0, 0.4],  // road
    [0.3, 0.4, -0.1],  // sidewalk
    [0.3, 0.0, 0.0],   // building
    [-0.4, -0.5, 0.5], // wall
    [-0.2, -0.4, 0.2], // fence
    [0.0, 0.0, 0.0],   // pole
    [0.0, 0.1, -0.1],  // traffic light
    [0.0, 0.0, 0.0],   // traffic sign
    [0.8, 0.6, -0.5],  // vegetation
    [0.2, 0.0, 0.1],   // terrain
    [0.0, 0.0, 0.6],   // sky
    [0.0, 0.0, 0.0],   // person
    [0.0, 0.0, -0.2],  // rider
    [0.0, 0.0, 0.0],   // car
    [0.0, 0.0, 0.0],   // truck
    [0.0, 0.0, -0.1],  // bus
    [0.0, 0.0, 0.0],   // train
    [-0.1, -0.1, 0.0], // motorcycle
    [0.0, 0.0, 0.0],   // bicycle
];

/// How a positive deviation `δ` pulls gaze towards, and lengthens dwell on,
/// each category. Non-zero exactly on the attention categories.
pub const VALENCE: [f64; N_CATEGORIES] = [
    0.0, 0.0, 0.0, 0.0, 0.0,  // road .. fence
    -0.4, // pole
    0.0,  // traffic light
    0.4,  // traffic sign
    0.0, 0.0, 0.0,  // vegetation, terrain, sky
    1.0,  // person
    0.0,  // rider
    -0.7, // car
    -1.0, // truck
    0.0, 0.0, 0.0, // bus, train, motorcycle
    0.7, // bicycle
];

/// Fraction of the map's blocks given to attention categories.
pub const ATTENTION_SHARE: f64 = 0.3;

pub fn is_attention(category: usize) -> bool {
    VALENCE[category] != 0.0
}

/// Composition jitter not explained by the latents.
const COMPOSITION_NOISE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    pub image_id: String,
    /// Consensus latent per dimension (wealthy, safe, boring).
    pub mu: [f64; 3],
    pub map: SemanticLabelMap,
    pub embeddings: PatchEmbeddingSet,
    /// Pixel indices of each category, for sampling fixation targets.
    pub(crate) class_pixels: Vec<Vec<u32>>,
    pub(crate) composition: [f64; N_CATEGORIES],
}

impl SynthImage {
    pub fn composition(&self) -> &[f64; N_CATEGORIES] {
        &self.composition
    }
}

/// Largest-remainder apportionment of `total` units to the given weights.
fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let short = total - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

/// Random `embed_dim × N_CATEGORIES` matrix mapping class histograms to embeddings.
pub(crate) fn prototypes(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let scale = 1.0 / (cfg.embed_dim as f64).sqrt();
    (0..cfg.embed_dim * N_CATEGORIES)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

pub(crate) fn make_image(
    cfg: &SynthConfig,
    index: usize,
    protos: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<SynthImage> {
    let image_id = format!("img{index:05}");
    let mu: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let logits: Vec<f64> = (0..N_CATEGORIES)
        .map(|c| {
            let load: f64 = LOADINGS[c].iter().zip(&mu).map(|(l, m)| l * m).sum();
            BASE_LOGITS[c] + load + COMPOSITION_NOISE * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();

    let (bw, bh) = (cfg.map_width / cfg.block_px, cfg.map_height / cfg.block_px);
    let n_attention = (ATTENTION_SHARE * (bw * bh) as f64).round() as usize;
    let budget = |attention: bool, total: usize| {
        let group = |c: usize| is_attention(c) == attention;
        let max = (0..N_CATEGORIES)
            .filter(|&c| group(c))
            .map(|c| logits[c])
            .fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = (0..N_CATEGORIES)
            .map(|c| {
                if group(c) {
                    (logits[c] - max).exp()
                } else {
                    0.0
                }
            })
            .collect();
        apportion(&w, total)
    };
    let scene = budget(false, bw * bh - n_attention);
    let attention = budget(true, n_attention);
    let mut blocks: Vec<u8> = (0..N_CATEGORIES)
        .flat_map(|c| std::iter::repeat(c as u8).take(scene[c] + attention[c]))
        .collect();
    blocks.shuffle(rng);

    let (w, h) = (cfg.map_width, cfg.map_height);
    let mut labels = vec![0u8; w * h];
    for (i, l) in labels.iter_mut().enumerate() {
        let (col, row) = (i % w, i / w);
        *l = blocks[(row / cfg.block_px) * bw + col / cfg.block_px];
    }
    let mut class_pixels = vec![Vec::new(); N_CATEGORIES];
    for (i, &l) in labels.iter().enumerate() {
        class_pixels[l as usize].push(i as u32);
    }
    let map = SemanticLabelMap::new(image_id.clone(), w, h, labels)?;
    let composition = map.composition();
    let embeddings = embed(cfg, &map, protos, rng)?;
    Ok(SynthImage {
        image_id,
        mu,
        map,
        embeddings,
        class_pixels,
        composition,
    })
}

fn embed(
    cfg: &SynthConfig,
    map: &SemanticLabelMap,
    protos: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<PatchEmbeddingSet> {
    let g = cfg.patch_grid;
    let e = cfg.embed_dim;
    let noise = rand_distr::Normal::new(0.0, cfg.embed_noise_std).expect("validated noise");
    let mut data = Vec::with_capacity(g.n_patches() * e);
    for pr in 0..g.grid_rows {
        let (r0, r1) = (
            pr * map.height / g.grid_rows,
            (pr + 1) * map.height / g.grid_rows,
        );
        for pc in 0..g.grid_cols {
            let (c0, c1) = (
                pc * map.width / g.grid_cols,
                (pc + 1) * map.width / g.grid_cols,
            );
            let mut hist = [0.0; N_CATEGORIES];
            for row in r0..r1 {
                for col in c0..c1 {
                    hist[map.get(col, row) as usize] += 1.0;
                }
            }
            let n = ((r1 - r0) * (c1 - c0)) as f64;
            for k in 0..e {
                let v: f64 = (0..N_CATEGORIES)
                    .map(|c| protos[k * N_CATEGORIES + c] * hist[c] / n)
                    .sum();
                data.push(v + noise.sample(rng));
            }
        }
    }
    Ok(PatchEmbeddingSet::new(
        map.image_id.clone(),
        g.grid_rows,
        g.grid_cols,
        e,
        data,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn apportion_sums_and_tracks_weights() {
        let c = apportion(&[1.0, 1.0, 2.0], 10);
        assert_eq!(c.iter().sum::<usize>(), 10);
        assert_eq!(c[2], 5);
        assert_eq!(apportion(&[0.2, 0.3, 0.5], 176).iter().sum::<usize>(), 176);
    }

    #[test]
    fn attention_budget_is_fixed() {
        let cfg = SynthConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = prototypes(&cfg, &mut rng);
        for i in 0..20 {
            let img = make_image(&cfg, i, &p, &mut rng).unwrap();
            let share: f64 = (0..N_CATEGORIES)
                .filter(|&c| is_attention(c))
                .map(|c| img.composition()[c])
                .sum();
            assert!((share - 53.0 / 176.0).abs() < 1e-12, "{share}");
        }
        for c in 0..N_CATEGORIES {
            assert!(!is_attention(c) || LOADINGS[c] == [0.0; 3]);
        }
    }

    #[test]
    fn image_composition_matches_map() {
        let cfg = SynthConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = prototypes(&cfg, &mut rng);
        let img = make_image(&cfg, 3, &p, &mut rng).unwrap();
        assert_eq!(img.image_id, "img00003");
        assert_eq!(&img.map.composition(), img.composition());
        let total: usize = img.class_pixels.iter().map(Vec::len).sum();
        assert_eq!(total, cfg.map_width * cfg.map_height);
        assert_eq!(img.embeddings.n_patches(), 196);
    }
}
