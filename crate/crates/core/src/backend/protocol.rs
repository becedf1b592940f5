//! Wire types of the model-runner bridge.
//!
//! One JSON object per line in each direction, strictly alternating:
//!
//! ```text
//! -> {"op":"extract","image":"/data/q.png"}
//! <- {"ok":true,"features":"/tmp/run/q.msfg"}
//! -> {"op":"segment","image":"/data/q.png","points":[{"x":120,"y":88,"label":1}]}
//! <- {"ok":true,"masks":[{"png":"/tmp/run/m0.png","score":0.93}]}
//! <- {"ok":false,"error":"..."}
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::prompt::PointPrompt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Request {
    Extract {
        image: PathBuf,
    },
    Segment {
        image: PathBuf,
        points: Vec<PointPrompt>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRef {
    pub png: PathBuf,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masks: Option<Vec<MaskRef>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}
