//! Core data model for gaze-guided urban perception modeling.
//!
//! This crate owns every artifact-wide data object (gaze samples, trials,
//! events, scene representations, token sequences), the on-disk codecs for
//! them, and the per-trial signal processing that turns raw samples into
//! fixation events, scanpath features and scene associations.

pub mod codec;
pub mod display;
pub mod error;
pub mod events;
pub mod features;
pub mod scene;
pub mod types;

pub use display::DisplayConfig;
pub use error::{CoreError, Result};
pub use events::{detect_fixations, EventSet, IdtParams};
pub use features::{compute_features, export_features_csv, fixation_heatmap, FeatureConfig, FeatureRow, FeatureVector, Heatmap};
pub use scene::{aoi_at, aoi_time_share, patch_index, write_aoi_csv, AoiShares, PatchGridConfig};
pub use types::*;
