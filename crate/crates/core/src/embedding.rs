//! Unit-norm embeddings and the pooling primitives built on them.
//!
//! An [`Embedding`] is always L2-normalized: the only ways to build one go
//! through [`l2_normalize`] or [`Embedding::from_unit`], which checks the
//! norm. That makes [`cosine`] a plain clamped dot product.

use thiserror::Error;

use crate::scalar::{dot, Scalar};

/// Norms at or below this are treated as a zero vector.
pub const ZERO_NORM_EPS: f64 = 1e-12;
/// Allowed deviation from unit norm for vectors that claim to be normalized.
pub const UNIT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("vector has zero length (norm <= {ZERO_NORM_EPS:e})")]
    ZeroVector,
    #[error("embedding has no components")]
    EmptyVector,
    #[error("embedding contains a non-finite component at position {0}")]
    NonFinite(usize),
    #[error("embedding norm {norm} is not within {UNIT_NORM_TOL:e} of 1")]
    NotNormalized { norm: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cannot pool an empty set of embeddings")]
    EmptySet,
    #[error("leave-one-out pooling needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("index {index} out of range for {len} frames")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("frame set has {frames} embeddings but {indices} frame indices")]
    MisalignedIndices { frames: usize, indices: usize },
}

pub type Result<T, E = EmbeddingError> = std::result::Result<T, E>;

/// A unit-norm embedding with an opaque label.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<T> {
    id: String,
    values: Vec<T>,
}

impl<T: Scalar> Embedding<T> {
    /// Wraps a vector that is already unit length.
    pub fn from_unit(id: impl Into<String>, values: Vec<T>) -> Result<Self> {
        check_finite(&values)?;
        let norm = norm(&values).to_f64_lossy();
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(EmbeddingError::NotNormalized { norm });
        }
        Ok(Self {
            id: id.into(),
            values,
        })
    }

    /// Normalizes `values` and labels the result.
    pub fn normalized(id: impl Into<String>, values: &[T]) -> Result<Self> {
        Ok(l2_normalize(values)?.with_id(id))
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

fn check_finite<T: Scalar>(values: &[T]) -> Result<()> {
    if values.is_empty() {
        return Err(EmbeddingError::EmptyVector);
    }
    match values.iter().position(|v| !v.is_finite()) {
        Some(pos) => Err(EmbeddingError::NonFinite(pos)),
        None => Ok(()),
    }
}

fn norm<T: Scalar>(values: &[T]) -> T {
    dot(values, values).sqrt()
}

/// Scales `v` to unit L2 norm.
pub fn l2_normalize<T: Scalar>(v: &[T]) -> Result<Embedding<T>> {
    check_finite(v)?;
    let n = norm(v);
    if n <= T::lit(ZERO_NORM_EPS) {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok(Embedding {
        id: String::new(),
        values: v.iter().map(|&x| x / n).collect(),
    })
}

/// Cosine similarity of two unit vectors, clamped to `[-1, 1]`.
pub fn cosine<T: Scalar>(a: &Embedding<T>, b: &Embedding<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let c = dot(&a.values, &b.values);
    Ok(c.max(-T::one()).min(T::one()))
}

fn check_dims<T: Scalar>(frames: &[Embedding<T>]) -> Result<usize> {
    let first = frames.first().ok_or(EmbeddingError::EmptySet)?;
    let dim = first.dim();
    for f in &frames[1..] {
        if f.dim() != dim {
            return Err(EmbeddingError::DimensionMismatch {
                expected: dim,
                found: f.dim(),
            });
        }
    }
    Ok(dim)
}

fn sum_of<'a, T: Scalar>(dim: usize, frames: impl Iterator<Item = &'a Embedding<T>>) -> Vec<T> {
    let mut acc = vec![T::zero(); dim];
    for f in frames {
        for (a, &x) in acc.iter_mut().zip(&f.values) {
            *a += x;
        }
    }
    acc
}

fn mean_normalized<T: Scalar>(mut sum: Vec<T>, count: usize) -> Result<Embedding<T>> {
    let n = T::from_usize_lossy(count);
    sum.iter_mut().for_each(|x| *x /= n);
    l2_normalize(&sum)
}

/// Component-wise mean of the frames, re-normalized to unit length.
pub fn mean_pool<T: Scalar>(frames: &[Embedding<T>]) -> Result<Embedding<T>> {
    let dim = check_dims(frames)?;
    mean_normalized(sum_of(dim, frames.iter()), frames.len())
}

/// Mean pool of `frames` with element `index` removed.
pub fn leave_one_out_pool<T: Scalar>(
    frames: &[Embedding<T>],
    index: usize,
) -> Result<Embedding<T>> {
    if frames.len() < 2 {
        return Err(EmbeddingError::TooFewFrames(frames.len()));
    }
    if index >= frames.len() {
        return Err(EmbeddingError::IndexOutOfRange {
            index,
            len: frames.len(),
        });
    }
    let dim = check_dims(frames)?;
    let kept = frames
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != index)
        .map(|(_, f)| f);
    mean_normalized(sum_of(dim, kept), frames.len() - 1)
}

/// Strategy for collapsing frame embeddings into a single video embedding.
///
/// Mean pooling is the only implementation shipped here. A caption-guided
/// attention pooler would slot in behind the same trait.
pub trait Pooling<T: Scalar>: Sync {
    fn pool(&self, frames: &[Embedding<T>]) -> Result<Embedding<T>>;

    /// Pools every leave-one-out subset, in frame order.
    fn pool_each_excluded(&self, frames: &[Embedding<T>]) -> Result<Vec<Embedding<T>>> {
        if frames.len() < 2 {
            return Err(EmbeddingError::TooFewFrames(frames.len()));
        }
        (0..frames.len())
            .map(|i| {
                let rest: Vec<_> = frames
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, f)| f.clone())
                    .collect();
                self.pool(&rest)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MeanPooling;

impl<T: Scalar> Pooling<T> for MeanPooling {
    fn pool(&self, frames: &[Embedding<T>]) -> Result<Embedding<T>> {
        mean_pool(frames)
    }

    // Subtracts each frame from the running total instead of re-summing,
    // O(N·D) rather than O(N²·D).
    fn pool_each_excluded(&self, frames: &[Embedding<T>]) -> Result<Vec<Embedding<T>>> {
        if frames.len() < 2 {
            return Err(EmbeddingError::TooFewFrames(frames.len()));
        }
        let dim = check_dims(frames)?;
        let total = sum_of(dim, frames.iter());
        frames
            .iter()
            .map(|f| {
                let rest: Vec<T> = total.iter().zip(&f.values).map(|(&s, &x)| s - x).collect();
                mean_normalized(rest, frames.len() - 1)
            })
            .collect()
    }
}

/// Frame embeddings of one video plus its caption embedding.
///
/// `frame_indices[i]` is the manifest frame index of `frames[i]`.
#[derive(Debug, Clone)]
pub struct EmbeddingSet<T> {
    frames: Vec<Embedding<T>>,
    frame_indices: Vec<u64>,
    caption: Embedding<T>,
}

impl<T: Scalar> EmbeddingSet<T> {
    pub fn new(
        frames: Vec<Embedding<T>>,
        frame_indices: Vec<u64>,
        caption: Embedding<T>,
    ) -> Result<Self> {
        if frames.len() != frame_indices.len() {
            return Err(EmbeddingError::MisalignedIndices {
                frames: frames.len(),
                indices: frame_indices.len(),
            });
        }
        let dim = check_dims(&frames)?;
        if caption.dim() != dim {
            return Err(EmbeddingError::DimensionMismatch {
                expected: dim,
                found: caption.dim(),
            });
        }
        Ok(Self {
            frames,
            frame_indices,
            caption,
        })
    }

    /// Frame indices default to 0..N.
    pub fn from_frames(frames: Vec<Embedding<T>>, caption: Embedding<T>) -> Result<Self> {
        let indices = (0..frames.len() as u64).collect();
        Self::new(frames, indices, caption)
    }

    pub fn frames(&self) -> &[Embedding<T>] {
        &self.frames
    }

    pub fn frame_indices(&self) -> &[u64] {
        &self.frame_indices
    }

    pub fn caption(&self) -> &Embedding<T> {
        &self.caption
    }

    pub fn dim(&self) -> usize {
        self.caption.dim()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Position of `frame_index` within the set.
    pub fn position_of(&self, frame_index: u64) -> Option<usize> {
        self.frame_indices.iter().position(|&f| f == frame_index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(v: &[f64]) -> Embedding<f64> {
        l2_normalize(v).unwrap()
    }

    fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Embedding<f64> {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        unit(&v)
    }

    #[test]
    fn normalize_three_four() {
        let e = unit(&[3.0, 4.0]);
        assert!((e.values()[0] - 0.6).abs() < 1e-12);
        assert!((e.values()[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn normalize_zero_vector_fails() {
        assert_eq!(
            l2_normalize(&[0.0f64, 0.0]),
            Err(EmbeddingError::ZeroVector)
        );
        assert_eq!(l2_normalize::<f64>(&[]), Err(EmbeddingError::EmptyVector));
        assert_eq!(
            l2_normalize(&[1.0, f64::NAN]),
            Err(EmbeddingError::NonFinite(1))
        );
    }

    #[test]
    fn normalize_random_64_dim_has_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v: Vec<f64> = (0..64).map(|_| rng.random_range(-5.0..5.0)).collect();
        let e = unit(&v);
        let recomputed: f64 = e.values().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((recomputed - 1.0).abs() < 1e-6);
        // direction preserved
        let ratio = v[0] / e.values()[0];
        for (a, b) in v.iter().zip(e.values()) {
            assert!((a / b - ratio).abs() < 1e-9);
        }
    }

    #[test]
    fn from_unit_rejects_non_unit() {
        assert!(matches!(
            Embedding::from_unit("x", vec![1.0f64, 1.0]),
            Err(EmbeddingError::NotNormalized { .. })
        ));
        assert!(Embedding::from_unit("x", vec![0.6f64, 0.8]).is_ok());
    }

    #[test]
    fn cosine_examples() {
        let a = unit(&[0.6, 0.8]);
        let b = unit(&[0.8, 0.6]);
        assert!((cosine(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!((cosine(&a, &b).unwrap() - 0.96).abs() < 1e-12);
        let e1 = unit(&[1.0, 0.0]);
        let e2 = unit(&[0.0, 1.0]);
        assert_eq!(cosine(&e1, &e2).unwrap(), 0.0);
        let c = unit(&[1.0, 0.0, 0.0]);
        assert_eq!(
            cosine(&e1, &c),
            Err(EmbeddingError::DimensionMismatch {
                expected: 2,
                found: 3
            })
        );
    }

    #[test]
    fn mean_pool_examples() {
        let f = unit(&[0.3, -0.2, 0.9]);
        assert_eq!(
            mean_pool(std::slice::from_ref(&f)).unwrap().values(),
            f.values()
        );
        let e1 = unit(&[1.0, 0.0]);
        let p = mean_pool(&[e1.clone(), e1.clone(), e1.clone()]).unwrap();
        assert!((p.values()[0] - 1.0).abs() < 1e-12);
        let p = mean_pool(&[unit(&[1.0, 0.0]), unit(&[0.0, 1.0])]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((p.values()[0] - h).abs() < 1e-9 && (p.values()[1] - h).abs() < 1e-9);
    }

    #[test]
    fn mean_pool_errors() {
        assert_eq!(mean_pool::<f64>(&[]), Err(EmbeddingError::EmptySet));
        let a = unit(&[1.0, 0.0]);
        let b = unit(&[-1.0, 0.0]);
        assert_eq!(mean_pool(&[a, b]), Err(EmbeddingError::ZeroVector));
    }

    #[test]
    fn leave_one_out_examples() {
        let a = unit(&[1.0, 2.0]);
        let b = unit(&[-3.0, 1.0]);
        let p = leave_one_out_pool(&[a.clone(), a.clone(), b], 2).unwrap();
        for (x, y) in p.values().iter().zip(a.values()) {
            assert!((x - y).abs() < 1e-12);
        }
        let p = leave_one_out_pool(&[unit(&[1.0, 0.0]), unit(&[0.0, 1.0])], 0).unwrap();
        assert_eq!(p.values(), &[0.0, 1.0]);
    }

    #[test]
    fn leave_one_out_errors() {
        let a = unit(&[1.0, 0.0]);
        assert_eq!(
            leave_one_out_pool(std::slice::from_ref(&a), 0),
            Err(EmbeddingError::TooFewFrames(1))
        );
        assert_eq!(
            leave_one_out_pool(&[a.clone(), a], 2),
            Err(EmbeddingError::IndexOutOfRange { index: 2, len: 2 })
        );
    }

    #[test]
    fn leave_one_out_matches_from_scratch_pool() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let frames: Vec<_> = (0..5).map(|_| random_unit(&mut rng, 16)).collect();
        // oracle: explicit mean over the survivors, normalized by hand
        let survivors: Vec<&Embedding<f64>> = frames
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != 3)
            .map(|(_, f)| f)
            .collect();
        let mut mean = vec![0.0; 16];
        for f in &survivors {
            for (m, x) in mean.iter_mut().zip(f.values()) {
                *m += x / survivors.len() as f64;
            }
        }
        let n = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
        let got = leave_one_out_pool(&frames, 3).unwrap();
        for (g, m) in got.values().iter().zip(&mean) {
            assert!((g - m / n).abs() < 1e-6);
        }
    }

    #[test]
    fn embedding_set_validates_dimensions() {
        let a = unit(&[1.0, 0.0]);
        let c = unit(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            EmbeddingSet::from_frames(vec![a.clone()], c),
            Err(EmbeddingError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            EmbeddingSet::new(vec![a.clone()], vec![0, 1], a.clone()),
            Err(EmbeddingError::MisalignedIndices { .. })
        ));
        assert!(matches!(
            EmbeddingSet::from_frames(vec![], a),
            Err(EmbeddingError::EmptySet)
        ));
    }

    #[test]
    fn works_in_f32() {
        let e = l2_normalize(&[3.0f32, 4.0]).unwrap();
        assert!((cosine(&e, &e).unwrap() - 1.0).abs() < 1e-6);
    }

    fn arb_frames() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..8).prop_flat_map(|dim| {
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, dim), 2..64)
        })
    }

    proptest! {
        #[test]
        fn cosine_self_is_one_and_symmetric((a, b) in (1usize..32).prop_flat_map(|d| (
            prop::collection::vec(-10.0f64..10.0, d),
            prop::collection::vec(-10.0f64..10.0, d),
        ))) {
            let (Ok(a), Ok(b)) = (l2_normalize(&a), l2_normalize(&b)) else { return Ok(()) };
            prop_assert!((cosine(&a, &a).unwrap() - 1.0).abs() <= 1e-6);
            prop_assert!((cosine(&a, &b).unwrap() - cosine(&b, &a).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn leave_one_out_equals_pool_without(raw in arb_frames()) {
            let frames: Vec<_> = raw.iter().filter_map(|v| l2_normalize(v).ok()).collect();
            prop_assume!(frames.len() >= 2);
            let fast = MeanPooling.pool_each_excluded(&frames);
            for i in 0..frames.len() {
                let rest: Vec<_> = frames.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, f)| f.clone()).collect();
                let expected = mean_pool(&rest);
                let got = leave_one_out_pool(&frames, i);
                match (&expected, &got) {
                    (Ok(e), Ok(g)) => {
                        for (x, y) in e.values().iter().zip(g.values()) {
                            prop_assert!((x - y).abs() <= 1e-6);
                        }
                    }
                    (Err(_), Err(_)) => {}
                    _ => prop_assert!(false, "oracle and implementation disagree on failure"),
                }
                if let (Ok(e), Ok(fast)) = (&expected, &fast) {
                    for (x, y) in e.values().iter().zip(fast[i].values()) {
                        prop_assert!((x - y).abs() <= 1e-6);
                    }
                }
            }
        }

        #[test]
        fn pooling_copies_returns_original(v in prop::collection::vec(-1.0f64..1.0, 1..16), n in 1usize..20) {
            let Ok(x) = l2_normalize(&v) else { return Ok(()) };
            let pooled = mean_pool(&vec![x.clone(); n]).unwrap();
            for (a, b) in pooled.values().iter().zip(x.values()) {
                prop_assert!((a - b).abs() <= 1e-6);
            }
        }
    }
}
