use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_io::BinaryMask;

/// Two-class segmentation scores for one prediction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub iou_fg: f64,
    pub iou_bg: f64,
    pub miou: f64,
    pub mpa: f64,
    pub acc: f64,
}

/// IoU per class, their mean, per-class pixel accuracy averaged over the
/// classes present in `gt`, and overall pixel accuracy.
///
/// A class absent from both masks has IoU 1.
pub fn compute_metrics(pred: &BinaryMask, gt: &BinaryMask) -> Result<Metrics> {
    if pred.dims() != gt.dims() {
        return Err(Error::dim_mismatch(
            "prediction vs ground truth",
            format!("{:?}", gt.dims()),
            format!("{:?}", pred.dims()),
        ));
    }
    if gt.data().is_empty() {
        return Err(Error::EmptyInput("masks have zero pixels".into()));
    }
    // confusion[gt][pred], index 1 = foreground
    let mut confusion = [[0u64; 2]; 2];
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        confusion[usize::from(g)][usize::from(p)] += 1;
    }
    let total: u64 = confusion.iter().flatten().sum();
    let mut iou = [0.0f64; 2];
    let mut pa_sum = 0.0;
    let mut classes_in_gt = 0u32;
    for c in 0..2 {
        let inter = confusion[c][c];
        let gt_c = confusion[c][0] + confusion[c][1];
        let pred_c = confusion[0][c] + confusion[1][c];
        let union = gt_c + pred_c - inter;
        iou[c] = if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        };
        if gt_c > 0 {
            pa_sum += inter as f64 / gt_c as f64;
            classes_in_gt += 1;
        }
    }
    let correct = confusion[0][0] + confusion[1][1];
    Ok(Metrics {
        iou_fg: iou[1],
        iou_bg: iou[0],
        miou: (iou[0] + iou[1]) / 2.0,
        mpa: pa_sum / f64::from(classes_in_gt),
        acc: correct as f64 / total as f64,
    })
}
