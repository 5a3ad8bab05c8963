use keyscore_core::embedding::{l2_normalize, Embedding, EmbeddingSet};
use keyscore_core::features::{build_st_vector, FrameEntry, FrameManifest};
use keyscore_core::scoring::{drop_scores, keyscore, temporal_scores, Weights};
use keyscore_core::stacfp::{propose, select_k};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

fn gaussian_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn orthogonal_to(rng: &mut ChaCha8Rng, axis: &[f64]) -> Vec<f64> {
    let v = gaussian_unit(rng, axis.len());
    let p: f64 = v.iter().zip(axis).map(|(a, b)| a * b).sum();
    let w: Vec<f64> = v.iter().zip(axis).map(|(a, b)| a - p * b).collect();
    let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    w.into_iter().map(|x| x / n).collect()
}

fn emb(v: &[f64]) -> Embedding<f64> {
    l2_normalize(v).unwrap()
}

fn argmax_by_index(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[test]
fn duplicating_the_aligned_frame_shrinks_its_drop_impact() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..50 {
        let dim = 16;
        let caption = gaussian_unit(&mut rng, dim);
        let noise = rng.random_range(1..8);
        let mut frames: Vec<Embedding<f64>> = (0..noise)
            .map(|_| emb(&orthogonal_to(&mut rng, &caption)))
            .collect();
        let j = rng.random_range(0..=frames.len());
        frames.insert(j, emb(&caption));
        let set = EmbeddingSet::from_frames(frames.clone(), emb(&caption)).unwrap();
        let before = drop_scores(&set).unwrap()[j];

        frames.push(emb(&caption));
        let dup = EmbeddingSet::from_frames(frames.clone(), emb(&caption)).unwrap();
        let after = drop_scores(&dup).unwrap();
        let last = frames.len() - 1;
        assert!(
            after[j].abs() <= before.abs() + 1e-9,
            "{} vs {}",
            after[j],
            before
        );
        assert!(after[last].abs() <= before.abs() + 1e-9);
    }
}

#[test]
fn single_signal_weights_pick_the_single_signal_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let n = rng.random_range(2..12);
        let frames: Vec<_> = (0..n).map(|_| emb(&gaussian_unit(&mut rng, 8))).collect();
        let set = EmbeddingSet::from_frames(frames, emb(&gaussian_unit(&mut rng, 8))).unwrap();
        for (w, pick) in [
            (Weights::semantic_only(), 0usize),
            (Weights::temporal_only(), 1),
            (Weights::drop_only(), 2),
        ] {
            let scores = keyscore(&set, &w).unwrap();
            let raw: Vec<f64> = scores
                .iter()
                .map(|s| [s.s_sem_raw, s.s_temp_raw, s.s_drop_raw][pick])
                .collect();
            let combined: Vec<f64> = scores.iter().map(|s| s.combined).collect();
            assert_eq!(argmax_by_index(&combined), argmax_by_index(&raw));
        }
    }
}

#[test]
fn identical_frames_have_zero_drop_and_unit_temporal() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for n in 2..20 {
        let f = emb(&gaussian_unit(&mut rng, 24));
        let set = EmbeddingSet::from_frames(vec![f; n], emb(&gaussian_unit(&mut rng, 24))).unwrap();
        assert!(drop_scores(&set).unwrap().iter().all(|d| d.abs() <= 1e-9));
        assert!(temporal_scores(&set)
            .unwrap()
            .iter()
            .all(|t| (t - 1.0).abs() <= 1e-6));
    }
}

#[test]
fn f32_and_f64_scoring_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let raw: Vec<Vec<f64>> = (0..6).map(|_| gaussian_unit(&mut rng, 12)).collect();
    let cap = gaussian_unit(&mut rng, 12);
    let s64 = EmbeddingSet::from_frames(raw.iter().map(|v| emb(v)).collect(), emb(&cap)).unwrap();
    let to32 = |v: &[f64]| l2_normalize(&v.iter().map(|&x| x as f32).collect::<Vec<_>>()).unwrap();
    let s32 = EmbeddingSet::from_frames(raw.iter().map(|v| to32(v)).collect(), to32(&cap)).unwrap();
    let a = keyscore(&s64, &Weights::equal()).unwrap();
    let b = keyscore(&s32, &Weights::equal()).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x.s_sem_raw - y.s_sem_raw as f64).abs() < 1e-5);
        assert!((x.s_drop_raw - y.s_drop_raw as f64).abs() < 1e-4);
    }
}

fn manifest(n: usize) -> FrameManifest {
    FrameManifest::new(
        "blobs",
        (0..n)
            .map(|i| FrameEntry {
                frame_index: i as u64,
                timestamp_s: i as f64,
                image_path: String::new(),
            })
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn proposals_are_deterministic(seed in 0u64..10_000, n in 3usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let feats: Vec<_> = (0..n)
            .map(|i| build_st_vector(vec![normal.sample(&mut rng), normal.sample(&mut rng)], i as f64 / (n - 1) as f64, 10.0).unwrap())
            .collect();
        let m = manifest(n);
        let a = propose(&m, &feats, 2, 10, seed).unwrap();
        let b = propose(&m, &feats, 2, 10, seed).unwrap();
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
        prop_assert_eq!(a.frame_indices.len(), a.k_star);
        let mut uniq = a.frame_indices.clone();
        uniq.dedup();
        prop_assert_eq!(uniq.len(), a.k_star);
    }

    #[test]
    fn select_k_result_is_internally_consistent(seed in 0u64..10_000, n in 3usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
        let (k, r) = select_k(&pts, 2, n - 1, seed).unwrap();
        prop_assert_eq!(k, r.k);
        prop_assert!(r.cluster_sizes().iter().all(|&s| s > 0));
        let s = r.silhouette.unwrap();
        prop_assert!((-1.0..=1.0).contains(&s));
    }
}
