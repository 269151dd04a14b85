//! Input ablations of fused sequences.

use std::fmt;
use std::str::FromStr;

use gazeperc_core::TokenSequence;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    None,
    /// Replace the gaze half of every token with zeros.
    ZeroGaze,
    /// Permute the scene halves across the valid positions of a trial.
    ShuffleScene,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [Ablation::None, Ablation::ZeroGaze, Ablation::ShuffleScene];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::None => "none",
            Ablation::ZeroGaze => "zero_gaze",
            Ablation::ShuffleScene => "shuffle_scene",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s.replace('-', "_"))
            .ok_or_else(|| PipelineError::Validation(format!("unknown ablation '{s}' (none, zero_gaze, shuffle_scene)")))
    }
}

/// Applies `mode` to one sequence. `seed` only matters for the shuffle.
pub fn ablate(seq: &TokenSequence, mode: Ablation, seed: u64) -> TokenSequence {
    let mut out = seq.clone();
    let (gw, w) = (seq.gaze_width, seq.width);
    match mode {
        Ablation::None => {}
        Ablation::ZeroGaze => {
            for i in 0..out.len() {
                out.row_mut(i)[..gw].iter_mut().for_each(|v| *v = 0.0);
            }
        }
        Ablation::ShuffleScene => {
            let valid: Vec<usize> = (0..seq.len()).filter(|&i| seq.mask[i]).collect();
            let mut perm = valid.clone();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            for (&dst, &src) in valid.iter().zip(&perm) {
                out.row_mut(dst)[gw..w].copy_from_slice(&seq.row(src)[gw..w]);
            }
        }
    }
    out
}

/// Applies `mode` to every sequence; sequence `i` shuffles with its own
/// stream derived from `seed`.
pub fn ablate_all(seqs: &[TokenSequence], mode: Ablation, seed: u64) -> Vec<TokenSequence> {
    seqs.iter()
        .enumerate()
        .map(|(i, s)| ablate(s, mode, seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64)))
        .collect()
}
