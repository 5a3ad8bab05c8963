//! Frame manifests and the spatio-temporal clustering features built from
//! them: per-channel HSV histograms with a scaled timestamp appended.

use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub const DEFAULT_BINS: usize = 16;
pub const DEFAULT_GAMMA_TIME: f64 = 10.0;
/// Upper bound on frames entering clustering under the default step.
pub const DEFAULT_MAX_SAMPLED: usize = 256;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("image has zero width or height")]
    EmptyImage,
    #[error("cannot read image {path}: {source}")]
    UnreadableImage {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("need at least 2 bins per channel, got {0}")]
    TooFewBins(usize),
    #[error("position {index} out of range for {len} sampled frames")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("gamma_time must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("sampling step must be at least 1")]
    ZeroStep,
    #[error("manifest for {video_id} is invalid: {reason}")]
    InvalidManifest { video_id: String, reason: String },
}

pub type Result<T, E = FeatureError> = std::result::Result<T, E>;

/// One line of a frame manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub image_path: String,
}

/// The ordered sampled frames of a single video.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameManifest {
    pub video_id: String,
    pub entries: Vec<FrameEntry>,
}

impl FrameManifest {
    /// Validates ordering: at least one entry, strictly increasing frame
    /// indices, non-decreasing non-negative timestamps.
    pub fn new(video_id: impl Into<String>, entries: Vec<FrameEntry>) -> Result<Self> {
        let video_id = video_id.into();
        let invalid = |reason: String| FeatureError::InvalidManifest {
            video_id: video_id.clone(),
            reason,
        };
        if entries.is_empty() {
            return Err(invalid("no frames".into()));
        }
        for e in &entries {
            if !(e.timestamp_s.is_finite() && e.timestamp_s >= 0.0) {
                return Err(invalid(format!(
                    "frame {} has timestamp {}",
                    e.frame_index, e.timestamp_s
                )));
            }
        }
        for w in entries.windows(2) {
            if w[1].frame_index <= w[0].frame_index {
                return Err(invalid(format!(
                    "frame_index {} follows {}",
                    w[1].frame_index, w[0].frame_index
                )));
            }
            if w[1].timestamp_s < w[0].timestamp_s {
                return Err(invalid(format!(
                    "timestamp decreases at frame {}",
                    w[1].frame_index
                )));
            }
        }
        Ok(Self { video_id, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn frame_indices(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.frame_index).collect()
    }

    /// Image path of an entry, resolved against `base` when relative.
    pub fn resolve_image(&self, entry: &FrameEntry, base: Option<&Path>) -> PathBuf {
        let p = Path::new(&entry.image_path);
        match base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        }
    }
}

/// Keeps positions 0, step, 2·step, … of the manifest.
pub fn sample_frames(manifest: &FrameManifest, step: usize) -> Result<FrameManifest> {
    if step == 0 {
        return Err(FeatureError::ZeroStep);
    }
    Ok(FrameManifest {
        video_id: manifest.video_id.clone(),
        entries: manifest.entries.iter().step_by(step).cloned().collect(),
    })
}

/// Smallest step that keeps at most [`DEFAULT_MAX_SAMPLED`] frames.
pub fn default_step(total: usize) -> usize {
    total.div_ceil(DEFAULT_MAX_SAMPLED).max(1)
}

/// Decodes a PNG/JPEG frame to 8-bit RGB, dropping any alpha channel.
pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|source| FeatureError::UnreadableImage {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(img.to_rgb8())
}

/// RGB (0–255) to HSV with hue in degrees `[0, 360)` and s, v in `[0, 1]`.
pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let (r, g, b) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

#[inline]
fn bin_of(x: f64, range: f64, bins: usize) -> usize {
    ((x / range * bins as f64).floor() as usize).min(bins - 1)
}

/// H, S and V histograms concatenated (`3 · bins` components), L1-normalized
/// over the whole vector.
pub fn hsv_histogram<T: Scalar>(frame: &RgbImage, bins: usize) -> Result<Vec<T>> {
    if bins < 2 {
        return Err(FeatureError::TooFewBins(bins));
    }
    if frame.width() == 0 || frame.height() == 0 {
        return Err(FeatureError::EmptyImage);
    }
    let mut counts = vec![0u64; 3 * bins];
    for px in frame.pixels() {
        let (h, s, v) = rgb_to_hsv(px[0], px[1], px[2]);
        counts[bin_of(h, 360.0, bins)] += 1;
        counts[bins + bin_of(s, 1.0, bins)] += 1;
        counts[2 * bins + bin_of(v, 1.0, bins)] += 1;
    }
    let total = (3 * frame.width() as u64 * frame.height() as u64) as f64;
    Ok(counts
        .into_iter()
        .map(|c| T::lit(c as f64 / total))
        .collect())
}

/// `i / (n - 1)`, or 0 for a single-frame video.
pub fn normalized_timestamp<T: Scalar>(i: usize, n: usize) -> Result<T> {
    if i >= n {
        return Err(FeatureError::IndexOutOfRange { index: i, len: n });
    }
    if n == 1 {
        return Ok(T::zero());
    }
    Ok(T::from_usize_lossy(i) / T::from_usize_lossy(n - 1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatioTemporalVector<T> {
    pub visual: Vec<T>,
    pub temporal: T,
    pub combined: Vec<T>,
}

pub fn build_st_vector<T: Scalar>(
    visual: Vec<T>,
    t: T,
    gamma_time: T,
) -> Result<SpatioTemporalVector<T>> {
    if gamma_time.is_nan() || gamma_time <= T::zero() {
        return Err(FeatureError::NonPositiveGamma(gamma_time.to_f64_lossy()));
    }
    let temporal = gamma_time * t;
    let mut combined = Vec::with_capacity(visual.len() + 1);
    combined.extend_from_slice(&visual);
    combined.push(temporal);
    Ok(SpatioTemporalVector {
        visual,
        temporal,
        combined,
    })
}

/// Spatio-temporal vectors for already-computed histograms, one per sampled
/// frame in order.
pub fn st_features<T: Scalar>(
    histograms: Vec<Vec<T>>,
    gamma_time: T,
) -> Result<Vec<SpatioTemporalVector<T>>> {
    let n = histograms.len();
    histograms
        .into_iter()
        .enumerate()
        .map(|(i, h)| build_st_vector(h, normalized_timestamp(i, n)?, gamma_time))
        .collect()
}
