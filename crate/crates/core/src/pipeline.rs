//! Per-video stage drivers: proposals from decoded frames and scores from
//! looked-up embeddings.

use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::artifacts::{ArtifactError, EmbeddingIndex};
use crate::features::{self, FeatureError, FrameManifest};
use crate::scoring::{keyscore, ScoreBreakdown, ScoreError, Weights};
use crate::stacfp::{self, ProposalSet, StacfpError};

#[derive(Debug, Error)]
pub enum StageError {
    #[error("video {video_id}: {source}")]
    Feature {
        video_id: String,
        #[source]
        source: FeatureError,
    },
    #[error("video {video_id}: {source}")]
    Clustering {
        video_id: String,
        #[source]
        source: StacfpError,
    },
    #[error("video {video_id}: {source}")]
    Artifact {
        video_id: String,
        #[source]
        source: ArtifactError,
    },
    #[error("video {video_id}: {source}")]
    Scoring {
        video_id: String,
        #[source]
        source: ScoreError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProposeConfig {
    pub gamma_time: f64,
    /// `None` picks [`features::default_step`] per video.
    pub step: Option<usize>,
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
    pub bins: usize,
}

impl Default for ProposeConfig {
    fn default() -> Self {
        Self {
            gamma_time: features::DEFAULT_GAMMA_TIME,
            step: None,
            k_min: stacfp::DEFAULT_K_MIN,
            k_max: stacfp::DEFAULT_K_MAX,
            seed: 42,
            bins: features::DEFAULT_BINS,
        }
    }
}

/// Samples, featurizes and clusters one video. Relative image paths are
/// resolved against `image_root`.
pub fn propose_video(
    manifest: &FrameManifest,
    image_root: Option<&Path>,
    config: &ProposeConfig,
) -> Result<ProposalSet<f64>, StageError> {
    let video_id = manifest.video_id.clone();
    let feat = |source| StageError::Feature {
        video_id: video_id.clone(),
        source,
    };
    let step = config
        .step
        .unwrap_or_else(|| features::default_step(manifest.len()));
    let sampled = features::sample_frames(manifest, step).map_err(feat)?;
    let histograms = sampled
        .entries
        .par_iter()
        .map(|e| {
            let img = features::load_rgb(&sampled.resolve_image(e, image_root))?;
            features::hsv_histogram::<f64>(&img, config.bins)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(feat)?;
    let st = features::st_features(histograms, config.gamma_time).map_err(feat)?;
    stacfp::propose(&sampled, &st, config.k_min, config.k_max, config.seed).map_err(|source| {
        StageError::Clustering {
            video_id: video_id.clone(),
            source,
        }
    })
}

/// KeyScore breakdowns for the given frames of one video.
pub fn score_video(
    index: &EmbeddingIndex,
    video_id: &str,
    frame_indices: &[u64],
    weights: &Weights<f64>,
) -> Result<Vec<ScoreBreakdown<f64>>, StageError> {
    let set = index
        .embedding_set::<f64>(video_id, frame_indices)
        .map_err(|source| StageError::Artifact {
            video_id: video_id.to_string(),
            source,
        })?;
    keyscore(&set, weights).map_err(|source| StageError::Scoring {
        video_id: video_id.to_string(),
        source,
    })
}
