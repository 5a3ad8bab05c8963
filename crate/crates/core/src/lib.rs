//! Keyframe selection for video–language models.
//!
//! Two stages: spatio-temporal clustering proposes a compact, temporally
//! spread set of candidate frames ([`stacfp`]), then caption-aware scoring
//! ranks them by semantic alignment, representativeness and drop impact
//! ([`scoring`]). [`selection`] turns scores into keyframes and [`metrics`]
//! holds the evaluation arithmetic.
//!
//! The numeric modules are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common choices.

pub mod artifacts;
pub mod container;
pub mod embedding;
pub mod features;
pub mod metrics;
pub mod pipeline;
pub mod scalar;
pub mod scoring;
pub mod selection;
pub mod stacfp;

pub use embedding::{
    cosine, l2_normalize, leave_one_out_pool, mean_pool, Embedding, EmbeddingError, EmbeddingSet,
    MeanPooling, Pooling,
};
pub use features::{FrameEntry, FrameManifest, SpatioTemporalVector};
pub use scalar::Scalar;
pub use scoring::{keyscore, ScoreBreakdown, Weights};
pub use selection::{SelectionResult, Strategy};
pub use stacfp::{ClusteringResult, ProposalSet};

pub type Embedding32 = Embedding<f32>;
pub type Embedding64 = Embedding<f64>;
pub type EmbeddingSet32 = EmbeddingSet<f32>;
pub type EmbeddingSet64 = EmbeddingSet<f64>;
pub type Weights32 = Weights<f32>;
pub type Weights64 = Weights<f64>;
pub type ScoreBreakdown32 = ScoreBreakdown<f32>;
pub type ScoreBreakdown64 = ScoreBreakdown<f64>;
pub type SpatioTemporalVector64 = SpatioTemporalVector<f64>;
pub type ClusteringResult64 = ClusteringResult<f64>;
pub type ProposalSet64 = ProposalSet<f64>;
