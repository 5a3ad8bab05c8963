//! JSONL records exchanged between pipeline stages, and lookup of frame and
//! caption embeddings by key.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::container::{read_container, write_atomic, ContainerError, EmbeddingContainer};
use crate::embedding::{Embedding, EmbeddingError, EmbeddingSet};
use crate::features::{FeatureError, FrameEntry, FrameManifest};
use crate::scalar::Scalar;
use crate::scoring::{ScoreBreakdown, Weights};
use crate::selection::{SelectionResult, Strategy};
use crate::stacfp::ProposalSet;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Container {
        path: PathBuf,
        #[source]
        source: ContainerError,
    },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("embedding {key:?}: {source}")]
    Embedding {
        key: String,
        #[source]
        source: EmbeddingError,
    },
    #[error("no embedding for key {0:?}")]
    MissingEmbedding(String),
    #[error("embedding key {0:?} appears in more than one container")]
    DuplicateKey(String),
    #[error("containers disagree on dimension: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("video {0:?} appears more than once")]
    DuplicateVideo(String),
}

pub type Result<T, E = ArtifactError> = std::result::Result<T, E>;

pub fn frame_key(video_id: &str, frame_index: u64) -> String {
    format!("{video_id}#{frame_index}")
}

pub fn caption_key(video_id: &str) -> String {
    format!("{video_id}#cap")
}

/// Parses every non-blank line of a JSONL file.
pub fn read_jsonl<R: DeserializeOwned>(path: &Path) -> Result<Vec<R>> {
    let text = fs::read_to_string(path).map_err(|source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| ArtifactError::Json {
                path: path.to_path_buf(),
                line: i + 1,
                source,
            })
        })
        .collect()
}

pub fn to_jsonl<R: Serialize>(records: &[R]) -> String {
    let mut out = String::new();
    for r in records {
        let line = serde_json::to_string(r).expect("records serialize");
        let _ = writeln!(out, "{line}");
    }
    out
}

/// Atomically writes records, one JSON object per line.
pub fn write_jsonl<R: Serialize>(path: &Path, records: &[R]) -> Result<()> {
    write_atomic(path, to_jsonl(records).as_bytes()).map_err(|source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestLine {
    pub video_id: String,
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub image_path: String,
}

/// Groups manifest lines by video, in order of first appearance.
pub fn manifests_from_lines(lines: Vec<ManifestLine>) -> Result<Vec<FrameManifest>> {
    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<FrameEntry>> = HashMap::new();
    for l in lines {
        let entry = FrameEntry {
            frame_index: l.frame_index,
            timestamp_s: l.timestamp_s,
            image_path: l.image_path,
        };
        grouped
            .entry(l.video_id.clone())
            .or_insert_with(|| {
                order.push(l.video_id.clone());
                Vec::new()
            })
            .push(entry);
    }
    order
        .into_iter()
        .map(|v| {
            let entries = grouped.remove(&v).expect("grouped above");
            Ok(FrameManifest::new(v, entries)?)
        })
        .collect()
}

pub fn read_manifests(path: &Path) -> Result<Vec<FrameManifest>> {
    manifests_from_lines(read_jsonl(path)?)
}

pub fn manifest_lines(manifest: &FrameManifest) -> Vec<ManifestLine> {
    manifest
        .entries
        .iter()
        .map(|e| ManifestLine {
            video_id: manifest.video_id.clone(),
            frame_index: e.frame_index,
            timestamp_s: e.timestamp_s,
            image_path: e.image_path.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub video_id: String,
    pub k_star: usize,
    pub frame_indices: Vec<u64>,
    pub silhouette: Option<f64>,
    pub seed: u64,
}

impl ProposalRecord {
    pub fn new<T: Scalar>(p: &ProposalSet<T>, seed: u64) -> Self {
        Self {
            video_id: p.video_id.clone(),
            k_star: p.k_star,
            frame_indices: p.frame_indices.clone(),
            silhouette: p.silhouette.map(Scalar::to_f64_lossy),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightsRecord {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub s_sem: f64,
    pub s_temp: f64,
    pub s_drop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScoreRecord {
    pub frame_index: u64,
    pub s_sem: f64,
    pub s_temp: f64,
    pub s_drop: f64,
    pub combined: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<RawRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub video_id: String,
    pub seed: u64,
    pub weights: WeightsRecord,
    pub frames: Vec<FrameScoreRecord>,
}

impl ScoreRecord {
    pub fn new<T: Scalar>(
        video_id: &str,
        weights: &Weights<T>,
        scores: &[ScoreBreakdown<T>],
        emit_raw: bool,
        seed: u64,
    ) -> Self {
        Self {
            video_id: video_id.to_string(),
            seed,
            weights: WeightsRecord {
                alpha: weights.alpha.to_f64_lossy(),
                beta: weights.beta.to_f64_lossy(),
                gamma: weights.gamma.to_f64_lossy(),
            },
            frames: scores
                .iter()
                .map(|s| FrameScoreRecord {
                    frame_index: s.frame_index,
                    s_sem: s.s_sem.to_f64_lossy(),
                    s_temp: s.s_temp.to_f64_lossy(),
                    s_drop: s.s_drop.to_f64_lossy(),
                    combined: s.combined.to_f64_lossy(),
                    raw: emit_raw.then(|| RawRecord {
                        s_sem: s.s_sem_raw.to_f64_lossy(),
                        s_temp: s.s_temp_raw.to_f64_lossy(),
                        s_drop: s.s_drop_raw.to_f64_lossy(),
                    }),
                })
                .collect(),
        }
    }

    /// Rebuilds breakdowns from the file; raw values are zero unless they
    /// were emitted.
    pub fn breakdowns(&self) -> Vec<ScoreBreakdown<f64>> {
        self.frames
            .iter()
            .map(|f| {
                let raw = f.raw.unwrap_or(RawRecord {
                    s_sem: 0.0,
                    s_temp: 0.0,
                    s_drop: 0.0,
                });
                ScoreBreakdown {
                    frame_index: f.frame_index,
                    s_sem_raw: raw.s_sem,
                    s_temp_raw: raw.s_temp,
                    s_drop_raw: raw.s_drop,
                    s_sem: f.s_sem,
                    s_temp: f.s_temp,
                    s_drop: f.s_drop,
                    combined: f.combined,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub video_id: String,
    #[serde(flatten)]
    pub strategy: Strategy,
    pub selected: Vec<u64>,
    #[serde(default)]
    pub n_candidates: usize,
    pub seed: u64,
}

impl SelectionRecord {
    pub fn new(s: &SelectionResult, seed: u64) -> Self {
        Self {
            video_id: s.video_id.clone(),
            strategy: s.strategy,
            selected: s.selected.clone(),
            n_candidates: s.n_candidates,
            seed,
        }
    }

    pub fn to_result(&self) -> SelectionResult {
        SelectionResult {
            video_id: self.video_id.clone(),
            selected: self.selected.clone(),
            strategy: self.strategy,
            n_candidates: self.n_candidates,
        }
    }
}

/// Ground-truth caption/video pairing line for retrieval evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub text_id: String,
    pub video_id: String,
}

/// Embeddings from one or more containers, addressable by key.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingIndex {
    dimension: Option<usize>,
    vectors: HashMap<String, Vec<f32>>,
}

impl EmbeddingIndex {
    pub fn add(&mut self, container: EmbeddingContainer) -> Result<()> {
        if !container.is_empty() {
            match self.dimension {
                Some(d) if d != container.dimension => {
                    return Err(ArtifactError::DimensionMismatch(d, container.dimension));
                }
                _ => self.dimension = Some(container.dimension),
            }
        }
        for (id, v) in container.ids.into_iter().zip(container.vectors) {
            if self.vectors.contains_key(&id) {
                return Err(ArtifactError::DuplicateKey(id));
            }
            self.vectors.insert(id, v);
        }
        Ok(())
    }

    pub fn load(paths: &[PathBuf]) -> Result<Self> {
        let mut index = Self::default();
        for p in paths {
            let c = read_container(p).map_err(|source| ArtifactError::Container {
                path: p.clone(),
                source,
            })?;
            index.add(c)?;
        }
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn raw(&self, key: &str) -> Option<&[f32]> {
        self.vectors.get(key).map(Vec::as_slice)
    }

    /// Looks up `key` and re-normalizes it in the target precision.
    pub fn embedding<T: Scalar>(&self, key: &str) -> Result<Embedding<T>> {
        let raw = self
            .raw(key)
            .ok_or_else(|| ArtifactError::MissingEmbedding(key.to_string()))?;
        let values: Vec<T> = raw.iter().map(|&x| T::lit(x as f64)).collect();
        Embedding::normalized(key, &values).map_err(|source| ArtifactError::Embedding {
            key: key.to_string(),
            source,
        })
    }

    /// Frame embeddings for `frame_indices` of `video_id` plus its caption.
    pub fn embedding_set<T: Scalar>(
        &self,
        video_id: &str,
        frame_indices: &[u64],
    ) -> Result<EmbeddingSet<T>> {
        let frames = frame_indices
            .iter()
            .map(|&f| self.embedding(&frame_key(video_id, f)))
            .collect::<Result<Vec<_>>>()?;
        let caption = self.embedding(&caption_key(video_id))?;
        EmbeddingSet::new(frames, frame_indices.to_vec(), caption).map_err(|source| {
            ArtifactError::Embedding {
                key: video_id.to_string(),
                source,
            }
        })
    }
}
