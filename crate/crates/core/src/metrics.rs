//! Evaluation arithmetic: frame reduction, retrieval recall and keyframe F1.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use image::RgbImage;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::embedding::{cosine, mean_pool, Embedding, EmbeddingError, EmbeddingSet};
use crate::features::{hsv_histogram, FeatureError, DEFAULT_BINS};
use crate::scalar::Scalar;
use crate::selection::SelectionResult;

pub const DEFAULT_N_UFP: u32 = 8;
pub const DEFAULT_F1_THRESHOLD: f64 = 0.8;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("reference frame count must be positive, got {0}")]
    NonPositiveReference(f64),
    #[error("selected frame count must be non-negative, got {0}")]
    NegativeSelection(f64),
    #[error("no inputs to evaluate")]
    EmptyInput,
    #[error("empty frame set")]
    EmptySet,
    #[error("no ground truth for {0:?}")]
    MissingGroundTruth(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("threshold {0} not in (0, 1]")]
    BadThreshold(f64),
    #[error("frame {0} is not part of the embedding set")]
    UnknownFrame(u64),
    #[error("similarity matrix is {rows}x{cols} but has {found} values in a row")]
    RaggedMatrix {
        rows: usize,
        cols: usize,
        found: usize,
    },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

/// `1 - n_sel / n_ref`.
pub fn frr<T: Scalar>(n_sel: T, n_ref: T) -> Result<T> {
    if n_ref.is_nan() || n_ref <= T::zero() {
        return Err(MetricsError::NonPositiveReference(n_ref.to_f64_lossy()));
    }
    if n_sel < T::zero() {
        return Err(MetricsError::NegativeSelection(n_sel.to_f64_lossy()));
    }
    Ok(T::one() - n_sel / n_ref)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionReport {
    pub asf: f64,
    pub frr_ufp: f64,
    pub frr_avg: f64,
    pub n_ufp: u32,
    pub n_avg: f64,
    pub n_videos: usize,
}

impl ReductionReport {
    pub fn from_asf(asf: f64, n_videos: usize, n_ufp: u32, n_avg: f64) -> Result<Self> {
        Ok(Self {
            asf,
            frr_ufp: frr(asf, n_ufp as f64)?,
            frr_avg: frr(asf, n_avg)?,
            n_ufp,
            n_avg,
            n_videos,
        })
    }
}

/// Mean selected frames per video and both reduction rates.
pub fn reduction_report(
    selections: &[SelectionResult],
    n_ufp: u32,
    n_avg: f64,
) -> Result<ReductionReport> {
    if selections.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let total: usize = selections.iter().map(|s| s.selected.len()).sum();
    ReductionReport::from_asf(
        total as f64 / selections.len() as f64,
        selections.len(),
        n_ufp,
        n_avg,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    /// Caption queries ranked against videos.
    T2V,
    /// Video queries ranked against captions.
    V2T,
}

/// Caption-by-video cosine similarities.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<T> {
    row_ids: Vec<String>,
    col_ids: Vec<String>,
    values: Vec<Vec<T>>,
}

fn unique(ids: &[String]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(MetricsError::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

impl<T: Scalar> SimilarityMatrix<T> {
    pub fn new(row_ids: Vec<String>, col_ids: Vec<String>, values: Vec<Vec<T>>) -> Result<Self> {
        unique(&row_ids)?;
        unique(&col_ids)?;
        if values.len() != row_ids.len() {
            return Err(MetricsError::RaggedMatrix {
                rows: row_ids.len(),
                cols: col_ids.len(),
                found: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|r| r.len() != col_ids.len()) {
            return Err(MetricsError::RaggedMatrix {
                rows: row_ids.len(),
                cols: col_ids.len(),
                found: bad.len(),
            });
        }
        Ok(Self {
            row_ids,
            col_ids,
            values,
        })
    }

    /// Rows are texts, columns videos; ids come from the embeddings.
    pub fn from_embeddings(texts: &[Embedding<T>], videos: &[Embedding<T>]) -> Result<Self> {
        let values = texts
            .par_iter()
            .map(|t| {
                videos
                    .iter()
                    .map(|v| cosine(t, v))
                    .collect::<Result<Vec<T>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(
            texts.iter().map(|t| t.id().to_string()).collect(),
            videos.iter().map(|v| v.id().to_string()).collect(),
            values,
        )
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[String] {
        &self.col_ids
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row][col]
    }
}

/// One-to-one text/video pairing used as retrieval ground truth.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pairing {
    text_to_video: BTreeMap<String, String>,
    video_to_text: BTreeMap<String, String>,
}

impl Pairing {
    pub fn new(pairs: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut p = Pairing::default();
        for (text, video) in pairs {
            if p.text_to_video.contains_key(&text) {
                return Err(MetricsError::DuplicateId(text));
            }
            if p.video_to_text.contains_key(&video) {
                return Err(MetricsError::DuplicateId(video));
            }
            p.text_to_video.insert(text.clone(), video.clone());
            p.video_to_text.insert(video, text);
        }
        Ok(p)
    }

    pub fn video_for(&self, text: &str) -> Option<&str> {
        self.text_to_video.get(text).map(String::as_str)
    }

    pub fn text_for(&self, video: &str) -> Option<&str> {
        self.video_to_text.get(video).map(String::as_str)
    }
}

/// Zero-based rank of `target` among `candidates`, by descending score with
/// ties broken by ascending id.
fn rank_of<T: Scalar>(scores: &[T], ids: &[String], target: usize) -> usize {
    let ts = scores[target];
    scores
        .iter()
        .zip(ids)
        .enumerate()
        .filter(|&(j, (&s, id))| {
            j != target
                && match s.partial_cmp(&ts) {
                    Some(Ordering::Greater) => true,
                    Some(Ordering::Equal) => id < &ids[target],
                    _ => false,
                }
        })
        .count()
}

/// Percentage of queries whose paired item ranks in the top `k`.
pub fn recall_at_k<T: Scalar>(
    sim: &SimilarityMatrix<T>,
    pairing: &Pairing,
    k: usize,
    direction: Direction,
) -> Result<f64> {
    if k == 0 {
        return Err(MetricsError::ZeroK);
    }
    let col_pos: BTreeMap<&str, usize> = sim
        .col_ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let row_pos: BTreeMap<&str, usize> = sim
        .row_ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let missing = |id: &str| MetricsError::MissingGroundTruth(id.to_string());
    let (queries, hits) = match direction {
        Direction::T2V => {
            let mut hits = 0;
            for (r, id) in sim.row_ids.iter().enumerate() {
                let gt = pairing.video_for(id).ok_or_else(|| missing(id))?;
                let c = *col_pos.get(gt).ok_or_else(|| missing(gt))?;
                if rank_of(&sim.values[r], &sim.col_ids, c) < k {
                    hits += 1;
                }
            }
            (sim.row_ids.len(), hits)
        }
        Direction::V2T => {
            let mut hits = 0;
            let mut column = vec![T::zero(); sim.row_ids.len()];
            for (c, id) in sim.col_ids.iter().enumerate() {
                let gt = pairing.text_for(id).ok_or_else(|| missing(id))?;
                let r = *row_pos.get(gt).ok_or_else(|| missing(gt))?;
                for (slot, row) in column.iter_mut().zip(&sim.values) {
                    *slot = row[c];
                }
                if rank_of(&column, &sim.row_ids, r) < k {
                    hits += 1;
                }
            }
            (sim.col_ids.len(), hits)
        }
    };
    if queries == 0 {
        return Err(MetricsError::EmptyInput);
    }
    Ok(100.0 * hits as f64 / queries as f64)
}

/// Sum of element-wise minima of two histograms.
pub fn histogram_intersection<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x.min(y)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct F1Report {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matches: usize,
}

/// Greedy one-to-one matching of selected against ground-truth histograms.
///
/// Pairs are visited by descending intersection (ties by selected, then
/// ground-truth position) and accepted while both sides are free and the
/// similarity reaches `threshold`.
pub fn keyframe_f1_histograms<T: Scalar>(
    selected: &[Vec<T>],
    ground_truth: &[Vec<T>],
    threshold: f64,
) -> Result<F1Report> {
    if selected.is_empty() || ground_truth.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(MetricsError::BadThreshold(threshold));
    }
    let mut pairs: Vec<(f64, usize, usize)> =
        Vec::with_capacity(selected.len() * ground_truth.len());
    for (i, s) in selected.iter().enumerate() {
        for (j, g) in ground_truth.iter().enumerate() {
            pairs.push((histogram_intersection(s, g).to_f64_lossy(), i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_sel = vec![false; selected.len()];
    let mut used_gt = vec![false; ground_truth.len()];
    let mut matches = 0;
    for (sim, i, j) in pairs {
        if sim < threshold {
            break;
        }
        if !used_sel[i] && !used_gt[j] {
            used_sel[i] = true;
            used_gt[j] = true;
            matches += 1;
        }
    }
    let precision = matches as f64 / selected.len() as f64;
    let recall = matches as f64 / ground_truth.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(F1Report {
        precision,
        recall,
        f1,
        matches,
    })
}

/// Keyframe F1 over decoded frames, using default-bin HSV histograms.
pub fn keyframe_f1(
    selected: &[RgbImage],
    ground_truth: &[RgbImage],
    threshold: f64,
) -> Result<F1Report> {
    let hist = |imgs: &[RgbImage]| -> Result<Vec<Vec<f64>>> {
        imgs.iter()
            .map(|i| Ok(hsv_histogram(i, DEFAULT_BINS)?))
            .collect()
    };
    keyframe_f1_histograms(&hist(selected)?, &hist(ground_truth)?, threshold)
}

/// Mean-pooled video embedding over the selected frames.
pub fn video_embedding_from_selection<T: Scalar>(
    set: &EmbeddingSet<T>,
    selected: &[u64],
) -> Result<Embedding<T>> {
    if selected.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let frames = selected
        .iter()
        .map(|&f| {
            set.position_of(f)
                .map(|p| set.frames()[p].clone())
                .ok_or(MetricsError::UnknownFrame(f))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_pool(&frames)?)
}
