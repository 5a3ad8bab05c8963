//! Turning per-frame scores into a keyframe set.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::scoring::ScoreBreakdown;

pub const DEFAULT_FRAC_MAX: f64 = 0.8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("no scored frames to select from")]
    EmptyInput,
    #[error("bad parameter for {strategy}: {reason}")]
    BadParameter {
        strategy: &'static str,
        reason: String,
    },
    #[error("unknown selection strategy {0:?}")]
    UnknownStrategy(String),
}

pub type Result<T, E = SelectionError> = std::result::Result<T, E>;

/// Selection rule applied to the combined score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", content = "params", rename_all = "snake_case")]
pub enum Strategy {
    TopK {
        k: usize,
    },
    /// Keep `combined >= tau`.
    Absolute {
        tau: f64,
    },
    /// Keep `combined >= mean + lambda * std` (population std).
    MeanStd {
        lambda: f64,
    },
    /// Keep `combined >= rho * max`.
    FracMax {
        rho: f64,
    },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::TopK { .. } => "top_k",
            Strategy::Absolute { .. } => "absolute",
            Strategy::MeanStd { .. } => "mean_std",
            Strategy::FracMax { .. } => "frac_max",
        }
    }

    /// Builds a strategy from its name and single numeric parameter.
    pub fn from_name(name: &str, param: f64) -> Result<Self> {
        let s = match name {
            "top_k" => {
                if !(param >= 1.0 && param.fract() == 0.0) {
                    return Err(SelectionError::BadParameter {
                        strategy: "top_k",
                        reason: format!("k must be a positive integer, got {param}"),
                    });
                }
                Strategy::TopK { k: param as usize }
            }
            "absolute" => Strategy::Absolute { tau: param },
            "mean_std" => Strategy::MeanStd { lambda: param },
            "frac_max" => Strategy::FracMax { rho: param },
            other => return Err(SelectionError::UnknownStrategy(other.to_string())),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| {
            Err(SelectionError::BadParameter {
                strategy: self.name(),
                reason,
            })
        };
        match *self {
            Strategy::TopK { k: 0 } => bad("k must be at least 1".into()),
            Strategy::Absolute { tau } if !(0.0..=1.0).contains(&tau) => {
                bad(format!("tau {tau} not in [0, 1]"))
            }
            Strategy::MeanStd { lambda } if !lambda.is_finite() => {
                bad(format!("lambda {lambda} is not finite"))
            }
            Strategy::FracMax { rho } if !(rho > 0.0 && rho <= 1.0) => {
                bad(format!("rho {rho} not in (0, 1]"))
            }
            _ => Ok(()),
        }
    }
}

impl Default for Strategy {
    fn default() -> Self {
        Strategy::FracMax {
            rho: DEFAULT_FRAC_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub video_id: String,
    /// Ascending frame indices.
    pub selected: Vec<u64>,
    pub strategy: Strategy,
    pub n_candidates: usize,
}

// Descending score, then ascending frame index.
fn rank_order<T: Scalar>(a: &ScoreBreakdown<T>, b: &ScoreBreakdown<T>) -> Ordering {
    b.combined
        .partial_cmp(&a.combined)
        .unwrap_or(Ordering::Equal)
        .then(a.frame_index.cmp(&b.frame_index))
}

fn argmax<T: Scalar>(scores: &[ScoreBreakdown<T>]) -> u64 {
    scores
        .iter()
        .min_by(|a, b| rank_order(a, b))
        .map(|s| s.frame_index)
        .expect("non-empty scores")
}

fn finish(
    video_id: &str,
    mut selected: Vec<u64>,
    strategy: Strategy,
    n_candidates: usize,
) -> SelectionResult {
    selected.sort_unstable();
    SelectionResult {
        video_id: video_id.to_string(),
        selected,
        strategy,
        n_candidates,
    }
}

/// The `k` highest combined scores.
pub fn select_top_k<T: Scalar>(
    video_id: &str,
    scores: &[ScoreBreakdown<T>],
    k: usize,
) -> Result<SelectionResult> {
    let strategy = Strategy::TopK { k };
    strategy.validate()?;
    if scores.is_empty() {
        return Err(SelectionError::EmptyInput);
    }
    let mut ranked: Vec<&ScoreBreakdown<T>> = scores.iter().collect();
    ranked.sort_by(|a, b| rank_order(a, b));
    let selected = ranked.iter().take(k).map(|s| s.frame_index).collect();
    Ok(finish(video_id, selected, strategy, scores.len()))
}

/// Applies a threshold rule; the top-scoring frame is kept if nothing else
/// passes. When every frame has the same combined score there is nothing to
/// threshold and only that fallback frame is returned.
pub fn select_threshold<T: Scalar>(
    video_id: &str,
    scores: &[ScoreBreakdown<T>],
    strategy: Strategy,
) -> Result<SelectionResult> {
    strategy.validate()?;
    if scores.is_empty() {
        return Err(SelectionError::EmptyInput);
    }
    let values: Vec<f64> = scores.iter().map(|s| s.combined.to_f64_lossy()).collect();
    if let Strategy::TopK { k } = strategy {
        return select_top_k(video_id, scores, k);
    }
    if values.iter().all(|&v| v == values[0]) {
        return Ok(finish(
            video_id,
            vec![argmax(scores)],
            strategy,
            scores.len(),
        ));
    }
    let cut = match strategy {
        Strategy::TopK { .. } => unreachable!("handled above"),
        Strategy::Absolute { tau } => tau,
        Strategy::MeanStd { lambda } => {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            mean + lambda * var.sqrt()
        }
        Strategy::FracMax { rho } => rho * values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    };
    let mut selected: Vec<u64> = scores
        .iter()
        .zip(&values)
        .filter(|(_, &v)| v >= cut)
        .map(|(s, _)| s.frame_index)
        .collect();
    if selected.is_empty() {
        selected.push(argmax(scores));
    }
    Ok(finish(video_id, selected, strategy, scores.len()))
}

/// Dispatches on the strategy.
pub fn select<T: Scalar>(
    video_id: &str,
    scores: &[ScoreBreakdown<T>],
    strategy: Strategy,
) -> Result<SelectionResult> {
    select_threshold(video_id, scores, strategy)
}
