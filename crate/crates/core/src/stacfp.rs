//! Spatio-temporal adaptive clustering frame proposals.
//!
//! Frames are clustered with k-means over their spatio-temporal vectors;
//! the number of clusters is the silhouette maximizer over a k range and one
//! representative frame (nearest to its centroid) is proposed per cluster.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::features::{FrameManifest, SpatioTemporalVector};
use crate::scalar::{euclidean, squared_distance, Scalar};

pub const MAX_ITERATIONS: usize = 100;
pub const CONVERGENCE_TOL: f64 = 1e-6;
pub const DEFAULT_K_MIN: usize = 2;
pub const DEFAULT_K_MAX: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StacfpError {
    #[error("no points to cluster")]
    EmptyInput,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("k = {k} exceeds the number of points ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("point {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("{labels} labels given for {points} points")]
    LabelCountMismatch { points: usize, labels: usize },
    #[error("silhouette is undefined for a single cluster")]
    SingleCluster,
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("invalid k range [{k_min}, {k_max}] for {n} points")]
    RangeInvalid {
        k_min: usize,
        k_max: usize,
        n: usize,
    },
    #[error("{features} feature vectors for {frames} manifest frames")]
    MisalignedFeatures { frames: usize, features: usize },
}

pub type Result<T, E = StacfpError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult<T> {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<T>>,
    pub inertia: T,
    pub iterations: usize,
    /// Mean silhouette, filled in by [`select_k`].
    pub silhouette: Option<T>,
}

impl<T> ClusteringResult<T> {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProposalSet<T> {
    pub video_id: String,
    /// Manifest frame indices, ascending.
    pub frame_indices: Vec<u64>,
    pub k_star: usize,
    /// Distance of each proposal to its cluster centroid, aligned with
    /// `frame_indices`.
    pub per_cluster_distance: Vec<T>,
    /// `None` for the degenerate passthrough (fewer than 3 frames).
    pub silhouette: Option<T>,
}

fn check_points<T: Scalar>(points: &[Vec<T>]) -> Result<usize> {
    let dim = points.first().ok_or(StacfpError::EmptyInput)?.len();
    for (index, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(StacfpError::DimensionMismatch {
                index,
                expected: dim,
                found: p.len(),
            });
        }
    }
    Ok(dim)
}

fn nearest<T: Scalar>(point: &[T], centroids: &[Vec<T>]) -> (usize, T) {
    let mut best = (0, squared_distance(point, &centroids[0]));
    for (c, centroid) in centroids.iter().enumerate().skip(1) {
        let d = squared_distance(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_pp_init<T: Scalar>(points: &[Vec<T>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)].clone());
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centroids[0]).to_f64_lossy())
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && r < w {
                    chosen = i;
                    break;
                }
                r -= w;
            }
            // rounding can run r past the end; fall back to the last
            // point with non-zero weight
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].clone();
        for (w, p) in d2.iter_mut().zip(points) {
            *w = w.min(squared_distance(p, &c).to_f64_lossy());
        }
        centroids.push(c);
    }
    centroids
}

// Moves the point farthest from its centroid (taken from a cluster with more
// than one member) into each empty cluster.
fn repair_empty<T: Scalar>(points: &[Vec<T>], assignments: &mut [usize], centroids: &mut [Vec<T>]) {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &a in assignments.iter() {
        sizes[a] += 1;
    }
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let mut far: Option<(usize, T)> = None;
        for (i, p) in points.iter().enumerate() {
            let a = assignments[i];
            if sizes[a] < 2 {
                continue;
            }
            let d = squared_distance(p, &centroids[a]);
            if far.is_none_or(|(_, best)| d > best) {
                far = Some((i, d));
            }
        }
        if let Some((i, _)) = far {
            sizes[assignments[i]] -= 1;
            assignments[i] = c;
            sizes[c] = 1;
            centroids[c] = points[i].clone();
        }
    }
}

fn means<T: Scalar>(points: &[Vec<T>], assignments: &[usize], k: usize, dim: usize) -> Vec<Vec<T>> {
    let mut sums = vec![vec![T::zero(); dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, &x) in sums[a].iter_mut().zip(p) {
            *s += x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        let n = T::from_usize_lossy(c.max(1));
        s.iter_mut().for_each(|x| *x /= n);
    }
    sums
}

/// Lloyd's algorithm from a seeded k-means++ initialization.
///
/// Stops when no centroid moves by more than [`CONVERGENCE_TOL`] or after
/// [`MAX_ITERATIONS`] rounds. Identical inputs and seed give identical
/// output.
pub fn kmeans<T: Scalar>(points: &[Vec<T>], k: usize, seed: u64) -> Result<ClusteringResult<T>> {
    let dim = check_points(points)?;
    if k == 0 {
        return Err(StacfpError::ZeroK);
    }
    if k > points.len() {
        return Err(StacfpError::KTooLarge { k, n: points.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp_init(points, k, &mut rng);
    let mut assignments = vec![0usize; points.len()];
    let tol = T::lit(CONVERGENCE_TOL);
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        for (a, p) in assignments.iter_mut().zip(points) {
            *a = nearest(p, &centroids).0;
        }
        repair_empty(points, &mut assignments, &mut centroids);
        let updated = means(points, &assignments, k, dim);
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| euclidean(a, b))
            .fold(T::zero(), T::max);
        centroids = updated;
        if shift < tol {
            break;
        }
    }
    let inertia = points
        .iter()
        .zip(&assignments)
        .map(|(p, &a)| squared_distance(p, &centroids[a]))
        .sum();
    Ok(ClusteringResult {
        k,
        assignments,
        centroids,
        inertia,
        iterations,
        silhouette: None,
    })
}

/// Mean silhouette coefficient under Euclidean distance.
///
/// Singleton clusters score 0, as does any point with `a = b = 0`.
pub fn silhouette<T: Scalar>(points: &[Vec<T>], labels: &[usize]) -> Result<T> {
    check_points(points)?;
    let n = points.len();
    if labels.len() != n {
        return Err(StacfpError::LabelCountMismatch {
            points: n,
            labels: labels.len(),
        });
    }
    if n < 3 {
        return Err(StacfpError::TooFewPoints(n));
    }
    let mut ids = BTreeMap::new();
    for &l in labels {
        let next = ids.len();
        ids.entry(l).or_insert(next);
    }
    let k = ids.len();
    if k < 2 {
        return Err(StacfpError::SingleCluster);
    }
    let cluster: Vec<usize> = labels.iter().map(|l| ids[l]).collect();
    let mut sizes = vec![0usize; k];
    for &c in &cluster {
        sizes[c] += 1;
    }

    let mut total = T::zero();
    let mut dist_sums = vec![T::zero(); k];
    for i in 0..n {
        dist_sums.iter_mut().for_each(|s| *s = T::zero());
        for j in 0..n {
            if i != j {
                dist_sums[cluster[j]] += euclidean(&points[i], &points[j]);
            }
        }
        let own = cluster[i];
        if sizes[own] == 1 {
            continue;
        }
        let a = dist_sums[own] / T::from_usize_lossy(sizes[own] - 1);
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| dist_sums[c] / T::from_usize_lossy(sizes[c]))
            .fold(T::infinity(), T::min);
        let denom = a.max(b);
        if denom > T::zero() {
            total += (b - a) / denom;
        }
    }
    Ok(total / T::from_usize_lossy(n))
}

/// Runs k-means for each k in `[k_min, k_max]` and keeps the silhouette
/// maximizer; ties go to the smaller k.
pub fn select_k<T: Scalar>(
    points: &[Vec<T>],
    k_min: usize,
    k_max: usize,
    seed: u64,
) -> Result<(usize, ClusteringResult<T>)> {
    let n = points.len();
    if n < 3 {
        return Err(StacfpError::TooFewPoints(n));
    }
    if k_min < 2 || k_min > k_max || k_max > n - 1 {
        return Err(StacfpError::RangeInvalid { k_min, k_max, n });
    }
    check_points(points)?;
    let runs: Vec<ClusteringResult<T>> = (k_min..=k_max)
        .into_par_iter()
        .map(|k| {
            let mut run = kmeans(points, k, seed)?;
            run.silhouette = Some(silhouette(points, &run.assignments)?);
            Ok(run)
        })
        .collect::<Result<_>>()?;
    let mut best: Option<ClusteringResult<T>> = None;
    for run in runs {
        let better = match &best {
            None => true,
            Some(b) => run.silhouette > b.silhouette,
        };
        if better {
            best = Some(run);
        }
    }
    let best = best.expect("k range is non-empty");
    Ok((best.k, best))
}

/// Effective k range for `n` frames: `k_max` is capped at `n - 1` and
/// `k_min` follows it down. Returns `None` when clustering is skipped
/// (fewer than 3 frames).
pub fn effective_k_range(n: usize, k_min: usize, k_max: usize) -> Result<Option<(usize, usize)>> {
    if k_min < 2 || k_min > k_max {
        return Err(StacfpError::RangeInvalid { k_min, k_max, n });
    }
    if n < 3 {
        return Ok(None);
    }
    let hi = k_max.min(n - 1);
    Ok(Some((k_min.min(hi), hi)))
}

/// One representative frame per silhouette-selected cluster.
///
/// With fewer than 3 frames every frame is returned as its own proposal.
pub fn propose<T: Scalar>(
    manifest: &FrameManifest,
    features: &[SpatioTemporalVector<T>],
    k_min: usize,
    k_max: usize,
    seed: u64,
) -> Result<ProposalSet<T>> {
    if features.len() != manifest.len() {
        return Err(StacfpError::MisalignedFeatures {
            frames: manifest.len(),
            features: features.len(),
        });
    }
    let Some((lo, hi)) = effective_k_range(features.len(), k_min, k_max)? else {
        return Ok(ProposalSet {
            video_id: manifest.video_id.clone(),
            frame_indices: manifest.frame_indices(),
            k_star: manifest.len(),
            per_cluster_distance: vec![T::zero(); manifest.len()],
            silhouette: None,
        });
    };
    let points: Vec<Vec<T>> = features.iter().map(|f| f.combined.clone()).collect();
    let (k_star, clustering) = select_k(&points, lo, hi, seed)?;

    let mut reps: Vec<Option<(usize, T)>> = vec![None; k_star];
    for (i, (p, &c)) in points.iter().zip(&clustering.assignments).enumerate() {
        let d = euclidean(p, &clustering.centroids[c]);
        if reps[c].is_none_or(|(_, best)| d < best) {
            reps[c] = Some((i, d));
        }
    }
    let mut chosen: Vec<(u64, T)> = reps
        .into_iter()
        .map(|r| {
            let (i, d) = r.expect("every cluster is non-empty");
            (manifest.entries[i].frame_index, d)
        })
        .collect();
    chosen.sort_by_key(|&(f, _)| f);
    Ok(ProposalSet {
        video_id: manifest.video_id.clone(),
        frame_indices: chosen.iter().map(|&(f, _)| f).collect(),
        k_star,
        per_cluster_distance: chosen.iter().map(|&(_, d)| d).collect(),
        silhouette: clustering.silhouette,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_st_vector, FrameEntry};
    use rand_distr::{Distribution, Normal};

    fn blobs(
        centers: &[Vec<f64>],
        per: usize,
        sigma: f64,
        seed: u64,
    ) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..per {
                pts.push(
                    center
                        .iter()
                        .map(|&x| x + normal.sample(&mut rng))
                        .collect(),
                );
                labels.push(c);
            }
        }
        (pts, labels)
    }

    // All-pairs reference, written independently of `silhouette`.
    fn silhouette_reference(points: &[Vec<f64>], labels: &[usize]) -> f64 {
        let dist = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let clusters: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
        let mut s = 0.0;
        for i in 0..points.len() {
            let mates: Vec<usize> = (0..points.len())
                .filter(|&j| j != i && labels[j] == labels[i])
                .collect();
            if mates.is_empty() {
                continue;
            }
            let a = mates
                .iter()
                .map(|&j| dist(&points[i], &points[j]))
                .sum::<f64>()
                / mates.len() as f64;
            let b = clusters
                .iter()
                .filter(|&&c| c != labels[i])
                .map(|&c| {
                    let members: Vec<usize> =
                        (0..points.len()).filter(|&j| labels[j] == c).collect();
                    members
                        .iter()
                        .map(|&j| dist(&points[i], &points[j]))
                        .sum::<f64>()
                        / members.len() as f64
                })
                .fold(f64::INFINITY, f64::min);
            if a.max(b) > 0.0 {
                s += (b - a) / a.max(b);
            }
        }
        s / points.len() as f64
    }

    #[test]
    fn single_point_single_cluster() {
        let r = kmeans(&[vec![1.5f64, -2.0]], 1, 0).unwrap();
        assert_eq!(r.assignments, vec![0]);
        assert_eq!(r.centroids, vec![vec![1.5, -2.0]]);
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn two_blobs_split_by_group() {
        let mut far = vec![0.0; 4];
        far[0] = 100.0;
        let centers = vec![vec![0.0; 4], far];
        let (pts, truth) = blobs(&centers, 5, 0.1, 3);
        let r = kmeans(&pts, 2, 42).unwrap();
        // nearest-blob-center oracle
        for (i, p) in pts.iter().enumerate() {
            let oracle = if squared_distance(p, &centers[0]) < squared_distance(p, &centers[1]) {
                0
            } else {
                1
            };
            assert_eq!(oracle, truth[i]);
            assert_eq!(r.assignments[i] == r.assignments[0], oracle == truth[0]);
        }
    }

    #[test]
    fn kmeans_is_deterministic_and_centroids_are_means() {
        let (pts, _) = blobs(
            &[vec![0.0, 0.0], vec![5.0, 5.0], vec![0.0, 9.0]],
            10,
            1.0,
            9,
        );
        let a = kmeans(&pts, 3, 17).unwrap();
        let b = kmeans(&pts, 3, 17).unwrap();
        assert_eq!(a, b);
        for c in 0..3 {
            let members: Vec<&Vec<f64>> = pts
                .iter()
                .zip(&a.assignments)
                .filter(|(_, &l)| l == c)
                .map(|(p, _)| p)
                .collect();
            assert!(!members.is_empty());
            for d in 0..2 {
                let mean = members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64;
                assert!((mean - a.centroids[c][d]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn kmeans_errors() {
        assert_eq!(kmeans::<f64>(&[], 1, 0), Err(StacfpError::EmptyInput));
        assert_eq!(
            kmeans(&[vec![0.0f64]], 2, 0),
            Err(StacfpError::KTooLarge { k: 2, n: 1 })
        );
        assert_eq!(kmeans(&[vec![0.0f64]], 0, 0), Err(StacfpError::ZeroK));
        assert!(matches!(
            kmeans(&[vec![0.0f64], vec![1.0, 2.0]], 1, 0),
            Err(StacfpError::DimensionMismatch { index: 1, .. })
        ));
    }

    #[test]
    fn identical_points_fill_every_cluster() {
        let pts = vec![vec![0.5f64, 0.5]; 6];
        for k in 1..=6 {
            let r = kmeans(&pts, k, 1).unwrap();
            assert!(r.cluster_sizes().iter().all(|&s| s > 0), "k={k}");
        }
    }

    #[test]
    fn silhouette_two_tight_pairs() {
        let pts = vec![
            vec![0.0f64, 0.0],
            vec![0.1, 0.0],
            vec![100.0, 0.0],
            vec![100.1, 0.0],
        ];
        let s = silhouette(&pts, &[0, 0, 1, 1]).unwrap();
        // a = 0.1, b = 100 or 100.1 ± 0.05 for each point
        assert!(s >= 0.99);
        assert!((s - silhouette_reference(&pts, &[0, 0, 1, 1])).abs() < 1e-12);
    }

    #[test]
    fn silhouette_identical_points_is_zero() {
        let pts = vec![vec![3.0f64]; 5];
        assert_eq!(silhouette(&pts, &[0, 1, 0, 1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn silhouette_matches_reference_on_six_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels = [0, 1, 0, 1, 1, 0];
        assert!(
            (silhouette(&pts, &labels).unwrap() - silhouette_reference(&pts, &labels)).abs() < 1e-9
        );
    }

    #[test]
    fn silhouette_singleton_contributes_zero() {
        let pts = vec![vec![0.0f64], vec![1.0], vec![10.0]];
        let s = silhouette(&pts, &[0, 0, 1]).unwrap();
        assert!((s - silhouette_reference(&pts, &[0, 0, 1])).abs() < 1e-12);
    }

    #[test]
    fn silhouette_errors() {
        let pts = vec![vec![0.0f64]; 4];
        assert_eq!(
            silhouette(&pts, &[0, 0, 0, 0]),
            Err(StacfpError::SingleCluster)
        );
        assert_eq!(
            silhouette(&pts[..2], &[0, 1]),
            Err(StacfpError::TooFewPoints(2))
        );
        assert!(matches!(
            silhouette(&pts, &[0, 1]),
            Err(StacfpError::LabelCountMismatch { .. })
        ));
    }

    #[test]
    fn select_k_recovers_planted_blobs() {
        let (pts, _) = blobs(
            &[vec![0.0, 0.0], vec![50.0, 0.0], vec![0.0, 50.0]],
            20,
            0.5,
            1,
        );
        assert_eq!(select_k(&pts, 2, 8, 42).unwrap().0, 3);
        let (pts, _) = blobs(&[vec![0.0, 0.0], vec![30.0, 30.0]], 20, 0.5, 2);
        assert_eq!(select_k(&pts, 2, 4, 42).unwrap().0, 2);
    }

    #[test]
    fn select_k_identical_points_tie_breaks_to_smallest() {
        let pts = vec![vec![1.0f64, 1.0]; 10];
        let (k, r) = select_k(&pts, 2, 4, 0).unwrap();
        assert_eq!(k, 2);
        assert_eq!(r.silhouette, Some(0.0));
    }

    #[test]
    fn select_k_errors() {
        let pts = vec![vec![0.0f64]; 5];
        assert_eq!(
            select_k(&pts[..2], 2, 2, 0).unwrap_err(),
            StacfpError::TooFewPoints(2)
        );
        assert!(matches!(
            select_k(&pts, 1, 3, 0),
            Err(StacfpError::RangeInvalid { .. })
        ));
        assert!(matches!(
            select_k(&pts, 3, 2, 0),
            Err(StacfpError::RangeInvalid { .. })
        ));
        assert!(matches!(
            select_k(&pts, 2, 5, 0),
            Err(StacfpError::RangeInvalid { .. })
        ));
    }

    fn manifest(n: usize) -> FrameManifest {
        let entries = (0..n)
            .map(|i| FrameEntry {
                frame_index: (i * 3) as u64,
                timestamp_s: i as f64,
                image_path: String::new(),
            })
            .collect();
        FrameManifest::new("vid", entries).unwrap()
    }

    fn as_features(points: &[Vec<f64>]) -> Vec<SpatioTemporalVector<f64>> {
        points
            .iter()
            .map(|p| {
                let (last, visual) = p.split_last().unwrap();
                build_st_vector(visual.to_vec(), *last, 1.0).unwrap()
            })
            .collect()
    }

    #[test]
    fn propose_single_frame_passthrough() {
        let m = manifest(1);
        let f = as_features(&[vec![0.5, 0.0]]);
        let p = propose(&m, &f, 2, 10, 42).unwrap();
        assert_eq!(p.frame_indices, vec![0]);
        assert_eq!(p.k_star, 1);
        assert_eq!(p.silhouette, None);
    }

    #[test]
    fn propose_two_blobs_one_from_each() {
        let (pts, truth) = blobs(&[vec![0.0, 0.0, 0.0], vec![40.0, 0.0, 10.0]], 6, 0.3, 4);
        let m = manifest(pts.len());
        let p = propose(&m, &as_features(&pts), 2, 10, 42).unwrap();
        assert_eq!(p.k_star, 2);
        let blob_of = |f: u64| truth[(f / 3) as usize];
        assert_ne!(blob_of(p.frame_indices[0]), blob_of(p.frame_indices[1]));
        assert!(p.frame_indices.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn representative_is_nearest_to_centroid() {
        let (pts, _) = blobs(&[vec![0.0, 0.0], vec![8.0, 1.0], vec![3.0, 9.0]], 7, 1.5, 8);
        let m = manifest(pts.len());
        let p = propose(&m, &as_features(&pts), 2, 6, 5).unwrap();
        let (lo, hi) = effective_k_range(pts.len(), 2, 6).unwrap().unwrap();
        let (_, clustering) = select_k(&pts, lo, hi, 5).unwrap();
        for (f, d) in p.frame_indices.iter().zip(&p.per_cluster_distance) {
            let i = (f / 3) as usize;
            let c = clustering.assignments[i];
            for (j, q) in pts.iter().enumerate() {
                if clustering.assignments[j] == c {
                    assert!(*d <= euclidean(q, &clustering.centroids[c]) + 1e-12);
                }
            }
        }
        // bijection between clusters and proposals
        let mut labels: Vec<usize> = p
            .frame_indices
            .iter()
            .map(|f| clustering.assignments[(f / 3) as usize])
            .collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), p.k_star);
    }

    #[test]
    fn propose_rejects_misaligned_features() {
        let m = manifest(4);
        let f = as_features(&[vec![0.0, 0.0]]);
        assert!(matches!(
            propose(&m, &f, 2, 3, 0),
            Err(StacfpError::MisalignedFeatures { .. })
        ));
    }

    #[test]
    fn temporal_weight_separates_identical_visuals() {
        let n = 24;
        let visual = vec![0.5, 0.5];
        let with_gamma = |g: f64| -> Vec<Vec<f64>> {
            (0..n)
                .map(|i| {
                    let mut v = visual.clone();
                    v.push(g * i as f64 / (n - 1) as f64);
                    v
                })
                .collect()
        };
        let (k_flat, r_flat) = select_k(&with_gamma(0.0), 2, 8, 42).unwrap();
        assert_eq!(r_flat.silhouette, Some(0.0));
        assert_eq!(k_flat, 2);
        let (k_time, r_time) = select_k(&with_gamma(20.0), 2, 8, 42).unwrap();
        assert!(k_time >= k_flat);
        assert!(r_time.silhouette.unwrap() > 0.0);
    }
}
