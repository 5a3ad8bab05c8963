use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use keyscore_core::artifacts::{
    read_jsonl, read_manifests, write_jsonl, EmbeddingIndex, PairRecord, ProposalRecord,
    ScoreRecord, SelectionRecord,
};
use keyscore_core::container::{read_container, write_atomic, write_container, EmbeddingContainer};
use keyscore_core::features::{self, FrameManifest};
use keyscore_core::metrics::{
    self, keyframe_f1_histograms, recall_at_k, reduction_report, Direction, F1Report, Pairing,
    ReductionReport, SimilarityMatrix,
};
use keyscore_core::pipeline::{propose_video, score_video, ProposeConfig};
use keyscore_core::scoring::Weights;
use keyscore_core::selection::{self, Strategy};
use keyscore_core::{stacfp, Embedding};

#[derive(Debug, Parser)]
#[command(
    name = "keyscore",
    version,
    about = "Keyframe proposal, scoring and evaluation"
)]
pub struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cluster sampled frames and write one proposal set per video.
    Propose(ProposeArgs),
    /// Score frames against their caption.
    Score(ScoreArgs),
    /// Pick keyframes from a scores file.
    Select(SelectArgs),
    /// Recall@K between video and caption embeddings.
    EvalRetrieval(EvalRetrievalArgs),
    /// Average selected frames and frame reduction rates.
    EvalReduction(EvalReductionArgs),
    /// Histogram-matching keyframe F1 against ground-truth frames.
    EvalF1(EvalF1Args),
    /// propose → score → select → reduction report in one go.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
struct ClusterOpts {
    #[arg(long, default_value_t = features::DEFAULT_GAMMA_TIME)]
    gamma_time: f64,
    /// Sampling step; defaults to ceil(frames / 256) per video.
    #[arg(long)]
    step: Option<usize>,
    #[arg(long, default_value_t = stacfp::DEFAULT_K_MIN)]
    k_min: usize,
    #[arg(long, default_value_t = stacfp::DEFAULT_K_MAX)]
    k_max: usize,
    #[arg(long, default_value_t = features::DEFAULT_BINS)]
    bins: usize,
}

#[derive(Debug, Args)]
struct WeightOpts {
    #[arg(long, default_value_t = 1.0 / 3.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    gamma: f64,
    /// Include raw (unnormalized) scores in the output.
    #[arg(long)]
    emit_raw: bool,
}

#[derive(Debug, Args)]
struct StrategyOpts {
    /// top_k, absolute, mean_std or frac_max.
    #[arg(long, default_value = "frac_max")]
    strategy: String,
    #[arg(long, default_value_t = selection::DEFAULT_FRAC_MAX)]
    param: f64,
}

#[derive(Debug, Args)]
struct ProposeArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    cluster: ClusterOpts,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Embedding container(s) holding frame and caption vectors.
    #[arg(long, required = true, num_args = 1..)]
    embeddings: Vec<PathBuf>,
    #[arg(long)]
    manifest: PathBuf,
    /// Restrict scoring to proposed frames.
    #[arg(long)]
    proposals: Option<PathBuf>,
    #[command(flatten)]
    weights: WeightOpts,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[arg(long)]
    scores: PathBuf,
    #[command(flatten)]
    strategy: StrategyOpts,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalRetrievalArgs {
    #[arg(long)]
    video_embeddings: PathBuf,
    #[arg(long)]
    text_embeddings: PathBuf,
    /// JSONL lines of {"text_id": ..., "video_id": ...}.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
    k: Vec<usize>,
}

#[derive(Debug, Args)]
struct EvalReductionArgs {
    #[arg(long)]
    selections: PathBuf,
    #[arg(long, default_value_t = metrics::DEFAULT_N_UFP)]
    n_ufp: u32,
    #[arg(long)]
    n_avg: f64,
}

#[derive(Debug, Args)]
struct EvalF1Args {
    #[arg(long)]
    selected_manifest: PathBuf,
    #[arg(long)]
    gt_manifest: PathBuf,
    #[arg(long, default_value_t = metrics::DEFAULT_F1_THRESHOLD)]
    threshold: f64,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    embeddings: Vec<PathBuf>,
    #[command(flatten)]
    cluster: ClusterOpts,
    #[command(flatten)]
    weights: WeightOpts,
    #[command(flatten)]
    strategy: StrategyOpts,
    #[arg(long, default_value_t = metrics::DEFAULT_N_UFP)]
    n_ufp: u32,
    /// Reference frame count; defaults to the mean manifest length.
    #[arg(long)]
    n_avg: Option<f64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Reduction report path; stage artifacts are written beside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage {
        subcommand: &'static str,
        message: String,
    },
    Stage {
        stage: &'static str,
        source: anyhow::Error,
    },
}

type CliResult<T = ()> = Result<T, CliError>;

trait StageContext<T> {
    fn stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> StageContext<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|e| CliError::Stage {
            stage,
            source: e.into(),
        })
    }
}

fn require_files(subcommand: &'static str, paths: &[(&str, &Path)]) -> CliResult {
    for (flag, p) in paths {
        if !p.is_file() {
            return Err(CliError::Usage {
                subcommand,
                message: format!("--{flag}: no such file {}", p.display()),
            });
        }
    }
    Ok(())
}

fn parent_dir(p: &Path) -> Option<&Path> {
    p.parent().filter(|d| !d.as_os_str().is_empty())
}

pub fn run(cli: Cli) -> CliResult {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().stage("setup")?;
    pool.install(|| match cli.command {
        Command::Propose(a) => cmd_propose(a),
        Command::Score(a) => cmd_score(a),
        Command::Select(a) => cmd_select(a),
        Command::EvalRetrieval(a) => cmd_eval_retrieval(a),
        Command::EvalReduction(a) => cmd_eval_reduction(a),
        Command::EvalF1(a) => cmd_eval_f1(a),
        Command::Pipeline(a) => cmd_pipeline(a),
    })
}

fn propose_config(c: &ClusterOpts, seed: u64) -> ProposeConfig {
    ProposeConfig {
        gamma_time: c.gamma_time,
        step: c.step,
        k_min: c.k_min,
        k_max: c.k_max,
        seed,
        bins: c.bins,
    }
}

fn run_propose(
    manifests: &[FrameManifest],
    image_root: Option<&Path>,
    config: &ProposeConfig,
) -> anyhow::Result<Vec<ProposalRecord>> {
    if config.step == Some(0) {
        bail!("--step must be at least 1");
    }
    manifests
        .par_iter()
        .map(|m| {
            Ok(ProposalRecord::new(
                &propose_video(m, image_root, config)?,
                config.seed,
            ))
        })
        .collect()
}

fn cmd_propose(a: ProposeArgs) -> CliResult {
    require_files("propose", &[("manifest", &a.manifest)])?;
    let manifests = read_manifests(&a.manifest).stage("propose")?;
    let config = propose_config(&a.cluster, a.seed);
    let records = run_propose(&manifests, parent_dir(&a.manifest), &config).stage("propose")?;
    write_jsonl(&a.out, &records).stage("propose")
}

fn weights(w: &WeightOpts) -> anyhow::Result<Weights<f64>> {
    Ok(Weights::new(w.alpha, w.beta, w.gamma)?)
}

/// Frames to score per video: proposals when given, otherwise the whole
/// manifest.
fn frames_to_score(
    manifests: &[FrameManifest],
    proposals: Option<&[ProposalRecord]>,
) -> anyhow::Result<Vec<(String, Vec<u64>)>> {
    match proposals {
        None => Ok(manifests
            .iter()
            .map(|m| (m.video_id.clone(), m.frame_indices()))
            .collect()),
        Some(props) => {
            let by_video: BTreeMap<&str, &ProposalRecord> =
                props.iter().map(|p| (p.video_id.as_str(), p)).collect();
            manifests
                .iter()
                .map(|m| {
                    let p = by_video
                        .get(m.video_id.as_str())
                        .ok_or_else(|| anyhow!("no proposals for video {}", m.video_id))?;
                    Ok((m.video_id.clone(), p.frame_indices.clone()))
                })
                .collect()
        }
    }
}

fn run_score(
    index: &EmbeddingIndex,
    targets: &[(String, Vec<u64>)],
    w: &Weights<f64>,
    emit_raw: bool,
    seed: u64,
) -> anyhow::Result<Vec<ScoreRecord>> {
    targets
        .par_iter()
        .map(|(video, frames)| {
            Ok(ScoreRecord::new(
                video,
                w,
                &score_video(index, video, frames, w)?,
                emit_raw,
                seed,
            ))
        })
        .collect()
}

fn cmd_score(a: ScoreArgs) -> CliResult {
    let mut files: Vec<(&str, &Path)> = vec![("manifest", &a.manifest)];
    files.extend(a.embeddings.iter().map(|p| ("embeddings", p.as_path())));
    if let Some(p) = &a.proposals {
        files.push(("proposals", p));
    }
    require_files("score", &files)?;
    let w = weights(&a.weights).stage("score")?;
    let manifests = read_manifests(&a.manifest).stage("score")?;
    let proposals: Option<Vec<ProposalRecord>> = a
        .proposals
        .as_deref()
        .map(read_jsonl)
        .transpose()
        .stage("score")?;
    let targets = frames_to_score(&manifests, proposals.as_deref()).stage("score")?;
    let index = EmbeddingIndex::load(&a.embeddings).stage("score")?;
    let records = run_score(&index, &targets, &w, a.weights.emit_raw, a.seed).stage("score")?;
    write_jsonl(&a.out, &records).stage("score")
}

fn run_select(scores: &[ScoreRecord], strategy: Strategy) -> anyhow::Result<Vec<SelectionRecord>> {
    scores
        .iter()
        .map(|s| {
            let r = selection::select(&s.video_id, &s.breakdowns(), strategy)
                .with_context(|| format!("video {}", s.video_id))?;
            Ok(SelectionRecord::new(&r, s.seed))
        })
        .collect()
}

fn cmd_select(a: SelectArgs) -> CliResult {
    require_files("select", &[("scores", &a.scores)])?;
    let strategy = Strategy::from_name(&a.strategy.strategy, a.strategy.param).stage("select")?;
    let scores: Vec<ScoreRecord> = read_jsonl(&a.scores).stage("select")?;
    let records = run_select(&scores, strategy).stage("select")?;
    write_jsonl(&a.out, &records).stage("select")
}

fn print_json(value: &impl Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

#[derive(Serialize)]
struct RecallEntry {
    k: usize,
    recall: f64,
}

#[derive(Serialize)]
struct RetrievalReport {
    n_texts: usize,
    n_videos: usize,
    t2v: Vec<RecallEntry>,
    v2t: Vec<RecallEntry>,
}

fn embeddings_of(c: EmbeddingContainer) -> anyhow::Result<Vec<Embedding<f64>>> {
    c.ids
        .iter()
        .zip(&c.vectors)
        .map(|(id, v)| {
            let v: Vec<f64> = v.iter().map(|&x| x as f64).collect();
            Embedding::normalized(id.clone(), &v).with_context(|| format!("embedding {id}"))
        })
        .collect()
}

fn cmd_eval_retrieval(a: EvalRetrievalArgs) -> CliResult {
    require_files(
        "eval-retrieval",
        &[
            ("video-embeddings", &a.video_embeddings),
            ("text-embeddings", &a.text_embeddings),
            ("pairs", &a.pairs),
        ],
    )?;
    let run = || -> anyhow::Result<RetrievalReport> {
        let videos = embeddings_of(read_container(&a.video_embeddings)?)?;
        let texts = embeddings_of(read_container(&a.text_embeddings)?)?;
        let pairs: Vec<PairRecord> = read_jsonl(&a.pairs)?;
        let pairing = Pairing::new(pairs.into_iter().map(|p| (p.text_id, p.video_id)))?;
        let sim = SimilarityMatrix::from_embeddings(&texts, &videos)?;
        let recall = |dir| -> anyhow::Result<Vec<RecallEntry>> {
            a.k.iter()
                .map(|&k| {
                    Ok(RecallEntry {
                        k,
                        recall: recall_at_k(&sim, &pairing, k, dir)?,
                    })
                })
                .collect()
        };
        Ok(RetrievalReport {
            n_texts: texts.len(),
            n_videos: videos.len(),
            t2v: recall(Direction::T2V)?,
            v2t: recall(Direction::V2T)?,
        })
    };
    let report = run().stage("eval-retrieval")?;
    print_json(&report).stage("eval-retrieval")
}

fn cmd_eval_reduction(a: EvalReductionArgs) -> CliResult {
    require_files("eval-reduction", &[("selections", &a.selections)])?;
    let records: Vec<SelectionRecord> = read_jsonl(&a.selections).stage("eval-reduction")?;
    let results: Vec<_> = records.iter().map(SelectionRecord::to_result).collect();
    let report = reduction_report(&results, a.n_ufp, a.n_avg).stage("eval-reduction")?;
    print_json(&report).stage("eval-reduction")
}

#[derive(Serialize)]
struct VideoF1 {
    video_id: String,
    #[serde(flatten)]
    report: F1Report,
}

#[derive(Serialize)]
struct F1Summary {
    threshold: f64,
    mean_precision: f64,
    mean_recall: f64,
    mean_f1: f64,
    videos: Vec<VideoF1>,
}

fn manifest_histograms(m: &FrameManifest, root: Option<&Path>) -> anyhow::Result<Vec<Vec<f64>>> {
    m.entries
        .par_iter()
        .map(|e| {
            let img = features::load_rgb(&m.resolve_image(e, root))?;
            Ok(features::hsv_histogram(&img, features::DEFAULT_BINS)?)
        })
        .collect()
}

fn cmd_eval_f1(a: EvalF1Args) -> CliResult {
    require_files(
        "eval-f1",
        &[
            ("selected-manifest", &a.selected_manifest),
            ("gt-manifest", &a.gt_manifest),
        ],
    )?;
    let run = || -> anyhow::Result<F1Summary> {
        let selected = read_manifests(&a.selected_manifest)?;
        let gt = read_manifests(&a.gt_manifest)?;
        let by_video: BTreeMap<&str, &FrameManifest> =
            selected.iter().map(|m| (m.video_id.as_str(), m)).collect();
        if selected.len() != gt.len() {
            bail!(
                "{} selected videos vs {} ground-truth videos",
                selected.len(),
                gt.len()
            );
        }
        let videos = gt
            .iter()
            .map(|g| {
                let s = by_video
                    .get(g.video_id.as_str())
                    .ok_or_else(|| anyhow!("no selected frames for video {}", g.video_id))?;
                let sh = manifest_histograms(s, parent_dir(&a.selected_manifest))?;
                let gh = manifest_histograms(g, parent_dir(&a.gt_manifest))?;
                Ok(VideoF1 {
                    video_id: g.video_id.clone(),
                    report: keyframe_f1_histograms(&sh, &gh, a.threshold)?,
                })
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        let n = videos.len() as f64;
        let mean = |f: fn(&F1Report) -> f64| videos.iter().map(|v| f(&v.report)).sum::<f64>() / n;
        Ok(F1Summary {
            threshold: a.threshold,
            mean_precision: mean(|r| r.precision),
            mean_recall: mean(|r| r.recall),
            mean_f1: mean(|r| r.f1),
            videos,
        })
    };
    let report = run().stage("eval-f1")?;
    print_json(&report).stage("eval-f1")
}

#[derive(Serialize)]
struct PipelineReport {
    seed: u64,
    #[serde(flatten)]
    reduction: ReductionReport,
}

fn artifact_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "pipeline".into());
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn pooled_videos(
    index: &EmbeddingIndex,
    selections: &[SelectionRecord],
) -> anyhow::Result<EmbeddingContainer> {
    let mut ids = Vec::with_capacity(selections.len());
    let mut rows = Vec::with_capacity(selections.len());
    for s in selections {
        let set = index.embedding_set::<f64>(&s.video_id, &s.selected)?;
        let v = metrics::video_embedding_from_selection(&set, &s.selected)?;
        ids.push(s.video_id.clone());
        rows.push(v.values().iter().map(|&x| x as f32).collect());
    }
    Ok(EmbeddingContainer::from_rows(ids, rows)?)
}

fn cmd_pipeline(a: PipelineArgs) -> CliResult {
    let mut files: Vec<(&str, &Path)> = vec![("manifest", &a.manifest)];
    files.extend(a.embeddings.iter().map(|p| ("embeddings", p.as_path())));
    require_files("pipeline", &files)?;
    let w = weights(&a.weights).stage("score")?;
    let strategy = Strategy::from_name(&a.strategy.strategy, a.strategy.param).stage("select")?;

    let manifests = read_manifests(&a.manifest).stage("propose")?;
    let config = propose_config(&a.cluster, a.seed);
    let proposals = run_propose(&manifests, parent_dir(&a.manifest), &config).stage("propose")?;
    write_jsonl(&artifact_path(&a.out, "proposals.jsonl"), &proposals).stage("propose")?;

    let index = EmbeddingIndex::load(&a.embeddings).stage("score")?;
    let targets = frames_to_score(&manifests, Some(&proposals)).stage("score")?;
    let scores = run_score(&index, &targets, &w, a.weights.emit_raw, a.seed).stage("score")?;
    write_jsonl(&artifact_path(&a.out, "scores.jsonl"), &scores).stage("score")?;

    let selections = run_select(&scores, strategy).stage("select")?;
    write_jsonl(&artifact_path(&a.out, "selection.jsonl"), &selections).stage("select")?;
    let pooled = pooled_videos(&index, &selections).stage("select")?;
    write_container(&artifact_path(&a.out, "video.ksec"), &pooled).stage("select")?;

    let n_avg = a.n_avg.unwrap_or_else(|| {
        manifests.iter().map(FrameManifest::len).sum::<usize>() as f64 / manifests.len() as f64
    });
    let results: Vec<_> = selections.iter().map(SelectionRecord::to_result).collect();
    let reduction = reduction_report(&results, a.n_ufp, n_avg).stage("report")?;
    let report = PipelineReport {
        seed: a.seed,
        reduction,
    };
    let text = serde_json::to_string_pretty(&report).stage("report")? + "\n";
    write_atomic(&a.out, text.as_bytes()).stage("report")?;
    print!("{text}");
    Ok(())
}
