//! End-to-end query processing: extract, retrieve, match, prompt, segment, score.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::compute_metrics;
use super::report::{EvalReport, ImageRecord};
use crate::backend::{select_best, Backend, ScoredMask};
use crate::correspondence::{match_constrained, Candidates, MatchConfig};
use crate::error::{Error, Result};
use crate::memory_bank::{global_descriptor, MemoryBank, Retrieved};
use crate::prompt::{generate_prompts, select_bg, BgMode, PromptPolicy, PromptSet};
use crate::tensor_io::{downsample_to_layout, BinaryMask, FeatureGrid, Pixel};

#[derive(Debug, Clone, PartialEq)]
pub struct QueryItem {
    pub id: String,
    pub image: PathBuf,
    pub gt: BinaryMask,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub matching: MatchConfig,
    pub policy: PromptPolicy,
    /// Worker threads for per-image parallelism.
    #[serde(skip)]
    pub jobs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            matching: MatchConfig::default(),
            policy: PromptPolicy::default(),
            jobs: 1,
        }
    }
}

/// Query features and their global descriptor.
#[derive(Debug, Clone)]
pub struct QueryFeatures {
    pub features: FeatureGrid,
    pub descriptor: Vec<f32>,
}

impl QueryFeatures {
    pub fn extract(backend: &dyn Backend, image: &Path) -> Result<Self> {
        let features = backend.extract_features(image)?;
        let descriptor = global_descriptor(&features)?;
        Ok(Self {
            features,
            descriptor,
        })
    }
}

/// Retrieval and thresholded matches for one query; independent of the prompt policy.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub retrieved: Retrieved,
    pub candidates: Candidates,
}

pub fn prepare(query: &QueryFeatures, bank: &MemoryBank, matching: &MatchConfig) -> Result<Prepared> {
    let retrieved = bank.nearest(&query.descriptor)?;
    let exemplar = &retrieved.entry;
    let labels = downsample_to_layout(&exemplar.mask, exemplar.features.layout())?;
    let candidates = match_constrained(&query.features, &exemplar.features, &labels, matching)?;
    Ok(Prepared {
        retrieved,
        candidates,
    })
}

#[derive(Debug, Clone)]
pub struct Segmentation {
    pub prompts: PromptSet,
    pub candidates: Vec<ScoredMask>,
    pub prediction: BinaryMask,
}

pub fn finish(
    prepared: &Prepared,
    image: &Path,
    backend: &dyn Backend,
    policy: &PromptPolicy,
) -> Result<Segmentation> {
    let prompts = generate_prompts(&prepared.candidates.fg, &prepared.candidates.bg, policy)?;
    let candidates = backend.segment(image, &prompts)?;
    let prediction = select_best(&candidates)?.clone();
    Ok(Segmentation {
        prompts,
        candidates,
        prediction,
    })
}

/// Full single-image run, for callers that want every intermediate.
pub fn segment_image(
    image: &Path,
    bank: &MemoryBank,
    backend: &dyn Backend,
    config: &PipelineConfig,
) -> Result<(Prepared, Segmentation)> {
    let query = QueryFeatures::extract(backend, image)?;
    let prepared = prepare(&query, bank, &config.matching)?;
    let seg = finish(&prepared, image, backend, &config.policy)?;
    Ok((prepared, seg))
}

/// BG points the all-negatives policy would emit for this query.
pub fn would_be_negatives(prepared: &Prepared, prompts: &PromptSet) -> Vec<Pixel> {
    let fg = prompts.foreground().next().copied();
    select_bg(&prepared.candidates.bg, BgMode::All, fg.as_ref())
        .into_iter()
        .map(|p| p.pixel())
        .collect()
}

pub(crate) fn record(query: &QueryItem, outcome: Result<(&Prepared, Segmentation)>) -> ImageRecord {
    let (prepared, seg) = match outcome {
        Ok(v) => v,
        Err(e) => return ImageRecord::failed(&query.id, e.to_string()),
    };
    let m = match compute_metrics(&seg.prediction, &query.gt) {
        Ok(m) => m,
        Err(e) => return ImageRecord::failed(&query.id, e.to_string()),
    };
    let leaked = would_be_negatives(prepared, &seg.prompts)
        .into_iter()
        .any(|p| seg.prediction.contains(p));
    ImageRecord {
        id: query.id.clone(),
        iou_fg: m.iou_fg,
        iou_bg: m.iou_bg,
        miou: m.miou,
        mpa: m.mpa,
        acc: m.acc,
        exemplar: Some(prepared.retrieved.entry.id.clone()),
        retrieval_similarity: Some(prepared.retrieved.similarity),
        fg_candidates: prepared.candidates.fg.len(),
        bg_candidates: prepared.candidates.bg.len(),
        prompts: Some(seg.prompts),
        leaked: Some(leaked),
        failure: None,
    }
}

/// Runs `f` on a pool of `jobs` threads.
pub(crate) fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

pub(crate) fn config_snapshot(
    backend: &dyn Backend,
    bank: &MemoryBank,
    config: &PipelineConfig,
) -> serde_json::Value {
    serde_json::json!({
        "backend": backend.descriptor(),
        "matching": config.matching,
        "policy": config.policy,
        "bank_size": bank.len(),
    })
}

/// Evaluates every query against `bank`. Per-image failures are recorded
/// with zero scores and do not stop the run.
pub fn run_pipeline(
    queries: &[QueryItem],
    bank: &MemoryBank,
    backend: &dyn Backend,
    config: &PipelineConfig,
) -> Result<EvalReport> {
    if queries.is_empty() {
        return Err(Error::EmptyInput("no query images".into()));
    }
    let records = with_jobs(config.jobs, || {
        queries
            .par_iter()
            .map(|q| {
                let prepared = QueryFeatures::extract(backend, &q.image)
                    .and_then(|qf| prepare(&qf, bank, &config.matching));
                match prepared {
                    Ok(p) => {
                        let seg = finish(&p, &q.image, backend, &config.policy);
                        record(q, seg.map(|s| (&p, s)))
                    }
                    Err(e) => ImageRecord::failed(&q.id, e.to_string()),
                }
            })
            .collect::<Vec<_>>()
    })?;
    Ok(EvalReport::from_records(
        config_snapshot(backend, bank, config),
        records,
    ))
}
