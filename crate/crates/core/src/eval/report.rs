use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use crate::prompt::PromptSet;

/// Outcome of one query image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub iou_fg: f64,
    pub iou_bg: f64,
    pub miou: f64,
    pub mpa: f64,
    pub acc: f64,
    /// Retrieved exemplar id.
    pub exemplar: Option<String>,
    pub retrieval_similarity: Option<f32>,
    pub fg_candidates: usize,
    pub bg_candidates: usize,
    pub prompts: Option<PromptSet>,
    /// Whether the prediction covers any point that the all-negatives policy
    /// would have placed.
    pub leaked: Option<bool>,
    /// Set when the image could not be segmented; all scores are then 0.
    pub failure: Option<String>,
}

impl ImageRecord {
    pub fn failed(id: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            iou_fg: 0.0,
            iou_bg: 0.0,
            miou: 0.0,
            mpa: 0.0,
            acc: 0.0,
            exemplar: None,
            retrieval_similarity: None,
            fg_candidates: 0,
            bg_candidates: 0,
            prompts: None,
            leaked: None,
            failure: Some(reason.into()),
        }
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            iou_fg: self.iou_fg,
            iou_bg: self.iou_bg,
            miou: self.miou,
            mpa: self.mpa,
            acc: self.acc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub miou: f64,
    pub mpa: f64,
    pub acc: f64,
    pub images: usize,
    pub failures: usize,
    pub leakage_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: serde_json::Value,
    pub per_image: Vec<ImageRecord>,
    pub aggregate: Aggregate,
}

impl EvalReport {
    /// Sorts records by id and averages them in that order.
    pub fn from_records(config: serde_json::Value, mut per_image: Vec<ImageRecord>) -> Self {
        per_image.sort_by(|a, b| a.id.cmp(&b.id));
        let n = per_image.len();
        let mean = |f: fn(&ImageRecord) -> f64| {
            if n == 0 {
                0.0
            } else {
                per_image.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let aggregate = Aggregate {
            miou: mean(|r| r.miou),
            mpa: mean(|r| r.mpa),
            acc: mean(|r| r.acc),
            images: n,
            failures: per_image.iter().filter(|r| r.failure.is_some()).count(),
            leakage_failures: per_image.iter().filter(|r| r.leaked == Some(true)).count(),
        };
        Self {
            config,
            per_image,
            aggregate,
        }
    }

    /// Aligned per-image table followed by the aggregate row.
    pub fn to_table(&self) -> String {
        let width = self
            .per_image
            .iter()
            .map(|r| r.id.len())
            .max()
            .unwrap_or(0)
            .max("mean".len());
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}  note",
            "id", "iou_fg", "iou_bg", "mIoU", "mPA", "Acc"
        );
        for r in &self.per_image {
            let note = match (&r.failure, r.leaked) {
                (Some(f), _) => format!("FAILED: {f}"),
                (None, Some(true)) => "leak".to_string(),
                _ => String::new(),
            };
            let _ = writeln!(
                out,
                "{:<width$}  {:>7.4}  {:>7.4}  {:>7.4}  {:>7.4}  {:>7.4}  {}",
                r.id, r.iou_fg, r.iou_bg, r.miou, r.mpa, r.acc, note
            );
        }
        let a = &self.aggregate;
        let _ = writeln!(
            out,
            "{:<width$}  {:>7}  {:>7}  {:>7.4}  {:>7.4}  {:>7.4}  {} images, {} failures, {} leaks",
            "mean", "", "", a.miou, a.mpa, a.acc, a.images, a.failures, a.leakage_failures
        );
        out
    }
}

/// One row per configuration: label, aggregate scores, failure counts.
pub fn render_comparison(rows: &[(String, &EvalReport)]) -> String {
    let width = rows
        .iter()
        .map(|(l, _)| l.len())
        .max()
        .unwrap_or(0)
        .max("config".len());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>7}  {:>7}  {:>7}  {:>8}  {:>5}",
        "config", "mIoU", "mPA", "Acc", "failures", "leaks"
    );
    for (label, r) in rows {
        let a = &r.aggregate;
        let _ = writeln!(
            out,
            "{:<width$}  {:>7.4}  {:>7.4}  {:>7.4}  {:>8}  {:>5}",
            label, a.miou, a.mpa, a.acc, a.failures, a.leakage_failures
        );
    }
    out
}
