//! Point-prompt generation: one positive anchor plus negative points.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::correspondence::MatchCandidate;
use crate::error::{Error, Result};
use crate::tensor_io::Pixel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum PointLabel {
    Background,
    Foreground,
}

impl From<PointLabel> for u8 {
    fn from(l: PointLabel) -> u8 {
        match l {
            PointLabel::Background => 0,
            PointLabel::Foreground => 1,
        }
    }
}

impl TryFrom<u8> for PointLabel {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            0 => Ok(PointLabel::Background),
            1 => Ok(PointLabel::Foreground),
            other => Err(format!("point label must be 0 or 1, got {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PointPrompt {
    pub x: u32,
    pub y: u32,
    pub label: PointLabel,
}

impl PointPrompt {
    pub fn foreground(p: Pixel) -> Self {
        Self {
            x: p.x,
            y: p.y,
            label: PointLabel::Foreground,
        }
    }

    pub fn background(p: Pixel) -> Self {
        Self {
            x: p.x,
            y: p.y,
            label: PointLabel::Background,
        }
    }

    pub fn pixel(&self) -> Pixel {
        Pixel::new(self.x, self.y)
    }
}

/// Ordered prompt set: the FG anchor first, then BG points in selection order.
///
/// Serializes as `{ "points": [ { "x", "y", "label" } ] }`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub points: Vec<PointPrompt>,
}

impl PromptSet {
    pub fn foreground(&self) -> impl Iterator<Item = &PointPrompt> {
        self.points
            .iter()
            .filter(|p| p.label == PointLabel::Foreground)
    }

    pub fn background(&self) -> impl Iterator<Item = &PointPrompt> {
        self.points
            .iter()
            .filter(|p| p.label == PointLabel::Background)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks the single-anchor invariant and that every point lies in `height x width`.
    pub fn validate(&self, height: u32, width: u32) -> Result<()> {
        let n_fg = self.foreground().count();
        if n_fg != 1 {
            return Err(Error::Prompt(format!(
                "expected exactly one foreground point, found {n_fg}"
            )));
        }
        if let Some(p) = self.points.iter().find(|p| p.x >= width || p.y >= height) {
            return Err(Error::Prompt(format!(
                "point ({}, {}) outside {width}x{height} image",
                p.x, p.y
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FgStrategy {
    /// Highest-similarity candidate.
    #[default]
    MostConfident,
    /// Candidate nearest the spatial centroid of all candidates (1-means).
    KMeansRepresentative,
}

impl FromStr for FgStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "most-confident" | "most_confident" => Ok(FgStrategy::MostConfident),
            "kmeans" | "k-means" | "kmeans-representative" => {
                Ok(FgStrategy::KMeansRepresentative)
            }
            other => Err(Error::Config(format!("unknown FG strategy {other:?}"))),
        }
    }
}

/// How many negative points to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BgMode {
    /// Every candidate above threshold.
    #[default]
    All,
    /// The `n` most similar candidates (`n >= 1`).
    TopN(usize),
    /// No negatives: the FG anchor alone.
    Disabled,
}

impl BgMode {
    pub fn top_n(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("TopN count must be >= 1".into()));
        }
        Ok(BgMode::TopN(n))
    }
}

impl fmt::Display for BgMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BgMode::All => f.write_str("all"),
            BgMode::TopN(n) => write!(f, "top{n}"),
            BgMode::Disabled => f.write_str("none"),
        }
    }
}

impl FromStr for BgMode {
    type Err = Error;

    /// `all`, `none`, or a count; `0` means [`BgMode::Disabled`].
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" | "n" => Ok(BgMode::All),
            "none" => Ok(BgMode::Disabled),
            other => match other.parse::<usize>() {
                Ok(0) => Ok(BgMode::Disabled),
                Ok(n) => Ok(BgMode::TopN(n)),
                Err(_) => Err(Error::Config(format!("invalid BG mode {other:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PromptPolicy {
    pub fg_strategy: FgStrategy,
    pub bg_mode: BgMode,
}

/// Picks the positive anchor.
pub fn select_fg(candidates: &[MatchCandidate], strategy: FgStrategy) -> Result<PointPrompt> {
    let first = candidates.first().ok_or(Error::NoForeground)?;
    let chosen = match strategy {
        FgStrategy::MostConfident => candidates.iter().fold(first, |best, c| {
            if c.similarity > best.similarity
                || (c.similarity == best.similarity && c.query_patch < best.query_patch)
            {
                c
            } else {
                best
            }
        }),
        FgStrategy::KMeansRepresentative => {
            let n = candidates.len() as f64;
            let cx = candidates.iter().map(|c| f64::from(c.point.x)).sum::<f64>() / n;
            let cy = candidates.iter().map(|c| f64::from(c.point.y)).sum::<f64>() / n;
            let dist2 = |c: &MatchCandidate| {
                let dx = f64::from(c.point.x) - cx;
                let dy = f64::from(c.point.y) - cy;
                dx * dx + dy * dy
            };
            candidates.iter().fold(first, |best, c| {
                let (dc, db) = (dist2(c), dist2(best));
                let better = dc < db
                    || (dc == db
                        && (c.similarity > best.similarity
                            || (c.similarity == best.similarity
                                && c.query_patch < best.query_patch)));
                if better {
                    c
                } else {
                    best
                }
            })
        }
    };
    Ok(PointPrompt::foreground(chosen.point))
}

/// Picks negatives. Candidates sitting exactly on the FG anchor are dropped
/// before `TopN` truncation.
pub fn select_bg(
    candidates: &[MatchCandidate],
    mode: BgMode,
    fg: Option<&PointPrompt>,
) -> Vec<PointPrompt> {
    let fg_pixel = fg.map(PointPrompt::pixel);
    let mut pool: Vec<&MatchCandidate> = candidates
        .iter()
        .filter(|c| Some(c.point) != fg_pixel)
        .collect();
    let picked: Vec<&MatchCandidate> = match mode {
        BgMode::Disabled => Vec::new(),
        BgMode::All => {
            pool.sort_by_key(|c| c.query_patch);
            pool
        }
        BgMode::TopN(n) => {
            pool.sort_by(|a, b| {
                b.similarity
                    .total_cmp(&a.similarity)
                    .then(a.query_patch.cmp(&b.query_patch))
            });
            pool.truncate(n);
            pool
        }
    };
    if picked.is_empty() {
        log::debug!("prompt set has no background points; leakage is not constrained");
    }
    picked
        .into_iter()
        .map(|c| PointPrompt::background(c.point))
        .collect()
}

/// Joins the anchor and negatives, enforcing the no-conflict invariant.
pub fn build_prompt_set(fg: PointPrompt, bg: Vec<PointPrompt>) -> Result<PromptSet> {
    if fg.label != PointLabel::Foreground {
        return Err(Error::Invariant("anchor point is not labeled foreground".into()));
    }
    let mut seen: HashSet<Pixel> = HashSet::with_capacity(bg.len() + 1);
    seen.insert(fg.pixel());
    let mut points = Vec::with_capacity(bg.len() + 1);
    points.push(fg);
    for p in bg {
        if p.label != PointLabel::Background {
            return Err(Error::Invariant("negative point is not labeled background".into()));
        }
        if p.pixel() == fg.pixel() {
            return Err(Error::Invariant(format!(
                "pixel ({}, {}) labeled both foreground and background",
                p.x, p.y
            )));
        }
        if seen.insert(p.pixel()) {
            points.push(p);
        }
    }
    Ok(PromptSet { points })
}

/// `select_fg` → `select_bg` → `build_prompt_set`.
pub fn generate_prompts(
    fg_candidates: &[MatchCandidate],
    bg_candidates: &[MatchCandidate],
    policy: &PromptPolicy,
) -> Result<PromptSet> {
    let fg = select_fg(fg_candidates, policy.fg_strategy)?;
    let bg = select_bg(bg_candidates, policy.bg_mode, Some(&fg));
    build_prompt_set(fg, bg)
}
