//! Caption-aware frame scoring.
//!
//! Each frame gets three raw signals against its video and caption:
//! semantic similarity `cos(f_i, t)`, temporal representativeness
//! `cos(f_i, v)` and drop impact `cos(v, t) - cos(v_without_i, t)`. Each
//! signal is min–max normalized within the video and the three are mixed
//! with weights that sum to one. Ablations are just weight vectors with
//! zeros in them.

use serde::Serialize;
use thiserror::Error;

use crate::embedding::{cosine, Embedding, EmbeddingError, EmbeddingSet, MeanPooling, Pooling};
use crate::scalar::Scalar;

pub const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("weights must sum to 1, got {sum}")]
    WeightSum { sum: f64 },
    #[error("weights must be non-negative and finite, got ({alpha}, {beta}, {gamma})")]
    InvalidWeight { alpha: f64, beta: f64, gamma: f64 },
}

pub type Result<T, E = ScoreError> = std::result::Result<T, E>;

/// Mixing weights for the semantic, temporal and drop signals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Weights<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
}

impl<T: Scalar> Weights<T> {
    pub fn new(alpha: T, beta: T, gamma: T) -> Result<Self> {
        let ok = |w: T| w.is_finite() && w >= T::zero();
        if !(ok(alpha) && ok(beta) && ok(gamma)) {
            return Err(ScoreError::InvalidWeight {
                alpha: alpha.to_f64_lossy(),
                beta: beta.to_f64_lossy(),
                gamma: gamma.to_f64_lossy(),
            });
        }
        let sum = alpha + beta + gamma;
        // f32 cannot resolve 1e-9 around 1
        let tol = T::lit(WEIGHT_SUM_TOL).max(T::epsilon() * T::lit(4.0));
        if (sum - T::one()).abs() > tol {
            return Err(ScoreError::WeightSum {
                sum: sum.to_f64_lossy(),
            });
        }
        Ok(Self { alpha, beta, gamma })
    }

    pub fn equal() -> Self {
        let third = T::one() / T::lit(3.0);
        Self {
            alpha: third,
            beta: third,
            gamma: third,
        }
    }

    pub fn semantic_only() -> Self {
        Self {
            alpha: T::one(),
            beta: T::zero(),
            gamma: T::zero(),
        }
    }

    pub fn temporal_only() -> Self {
        Self {
            alpha: T::zero(),
            beta: T::one(),
            gamma: T::zero(),
        }
    }

    pub fn drop_only() -> Self {
        Self {
            alpha: T::zero(),
            beta: T::zero(),
            gamma: T::one(),
        }
    }

    fn combine(&self, sem: T, temp: T, drop: T) -> T {
        self.alpha * sem + self.beta * temp + self.gamma * drop
    }
}

impl<T: Scalar> Default for Weights<T> {
    fn default() -> Self {
        Self::equal()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreBreakdown<T> {
    pub frame_index: u64,
    pub s_sem_raw: T,
    pub s_temp_raw: T,
    pub s_drop_raw: T,
    pub s_sem: T,
    pub s_temp: T,
    pub s_drop: T,
    pub combined: T,
}

/// Raw per-frame signals in frame order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawScores<T> {
    pub semantic: Vec<T>,
    pub temporal: Vec<T>,
    pub drop: Vec<T>,
}

pub fn semantic_scores<T: Scalar>(set: &EmbeddingSet<T>) -> Result<Vec<T>> {
    semantic_of(set.frames(), set.caption())
}

pub fn temporal_scores<T: Scalar>(set: &EmbeddingSet<T>) -> Result<Vec<T>> {
    temporal_of(set.frames(), &MeanPooling)
}

pub fn drop_scores<T: Scalar>(set: &EmbeddingSet<T>) -> Result<Vec<T>> {
    drop_of(set.frames(), set.caption(), &MeanPooling)
}

fn semantic_of<T: Scalar>(frames: &[Embedding<T>], caption: &Embedding<T>) -> Result<Vec<T>> {
    Ok(frames
        .iter()
        .map(|f| cosine(f, caption))
        .collect::<Result<_, _>>()?)
}

fn temporal_of<T: Scalar>(frames: &[Embedding<T>], pooling: &impl Pooling<T>) -> Result<Vec<T>> {
    let video = pooling.pool(frames)?;
    Ok(frames
        .iter()
        .map(|f| cosine(f, &video))
        .collect::<Result<_, _>>()?)
}

fn drop_of<T: Scalar>(
    frames: &[Embedding<T>],
    caption: &Embedding<T>,
    pooling: &impl Pooling<T>,
) -> Result<Vec<T>> {
    if frames.len() < 2 {
        return Err(EmbeddingError::TooFewFrames(frames.len()).into());
    }
    let base = cosine(&pooling.pool(frames)?, caption)?;
    pooling
        .pool_each_excluded(frames)?
        .iter()
        .map(|without| Ok(base - cosine(without, caption)?))
        .collect()
}

/// `(x - min) / (max - min)`; a constant list maps to all zeros.
pub fn minmax_normalize<T: Scalar>(raw: &[T]) -> Vec<T> {
    let Some(&first) = raw.first() else {
        return Vec::new();
    };
    let (lo, hi) = raw
        .iter()
        .fold((first, first), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let span = hi - lo;
    if span > T::zero() {
        raw.iter().map(|&x| (x - lo) / span).collect()
    } else {
        vec![T::zero(); raw.len()]
    }
}

/// Raw signals for frames given as a slice, with an explicit pooler.
pub fn raw_scores<T: Scalar>(
    frames: &[Embedding<T>],
    caption: &Embedding<T>,
    pooling: &impl Pooling<T>,
) -> Result<RawScores<T>> {
    Ok(RawScores {
        semantic: semantic_of(frames, caption)?,
        temporal: temporal_of(frames, pooling)?,
        drop: drop_of(frames, caption, pooling)?,
    })
}

/// Scores `frames` (labelled by `frame_indices`) against `caption`.
///
/// A single frame scores 1.0 on every normalized component.
pub fn score_frames<T: Scalar>(
    frames: &[Embedding<T>],
    frame_indices: &[u64],
    caption: &Embedding<T>,
    weights: &Weights<T>,
    pooling: &impl Pooling<T>,
) -> Result<Vec<ScoreBreakdown<T>>> {
    if frames.len() != frame_indices.len() {
        return Err(EmbeddingError::MisalignedIndices {
            frames: frames.len(),
            indices: frame_indices.len(),
        }
        .into());
    }
    match frames {
        [] => Err(EmbeddingError::EmptySet.into()),
        [only] => {
            let s_sem_raw = cosine(only, caption)?;
            Ok(vec![ScoreBreakdown {
                frame_index: frame_indices[0],
                s_sem_raw,
                s_temp_raw: T::one(),
                s_drop_raw: T::zero(),
                s_sem: T::one(),
                s_temp: T::one(),
                s_drop: T::one(),
                combined: T::one(),
            }])
        }
        _ => {
            let raw = raw_scores(frames, caption, pooling)?;
            let sem = minmax_normalize(&raw.semantic);
            let temp = minmax_normalize(&raw.temporal);
            let drop = minmax_normalize(&raw.drop);
            Ok((0..frames.len())
                .map(|i| ScoreBreakdown {
                    frame_index: frame_indices[i],
                    s_sem_raw: raw.semantic[i],
                    s_temp_raw: raw.temporal[i],
                    s_drop_raw: raw.drop[i],
                    s_sem: sem[i],
                    s_temp: temp[i],
                    s_drop: drop[i],
                    combined: weights
                        .combine(sem[i], temp[i], drop[i])
                        .max(T::zero())
                        .min(T::one()),
                })
                .collect())
        }
    }
}

/// Scores every frame of `set` with mean pooling.
pub fn keyscore<T: Scalar>(
    set: &EmbeddingSet<T>,
    weights: &Weights<T>,
) -> Result<Vec<ScoreBreakdown<T>>> {
    score_frames(
        set.frames(),
        set.frame_indices(),
        set.caption(),
        weights,
        &MeanPooling,
    )
}
