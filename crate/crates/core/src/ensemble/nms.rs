use std::cmp::Ordering;

use super::{InstancePrediction, IouKind};
use crate::error::Result;
use crate::mask::{box_iou, mask_iou};

/// Suppression ranking: confidence descending, then larger mask, then
/// `(model_id, category_id, counts)` ascending. Total, so fusion output does
/// not depend on input order.
pub fn rank_order(a: &InstancePrediction, b: &InstancePrediction) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then_with(|| b.mask.area().cmp(&a.mask.area()))
        .then_with(|| a.model_id.cmp(&b.model_id))
        .then_with(|| a.category_id.cmp(&b.category_id))
        .then_with(|| a.mask.counts().cmp(b.mask.counts()))
}

pub fn overlap(a: &InstancePrediction, b: &InstancePrediction, kind: IouKind) -> Result<f64> {
    match kind {
        IouKind::Box => Ok(box_iou(&a.bbox, &b.bbox)),
        IouKind::Mask => mask_iou(&a.mask, &b.mask),
    }
}

/// Greedy suppression over items already in rank order: item `i` survives iff
/// `iou(k, i) < iou_threshold` for every earlier survivor `k`. Returns the
/// surviving indices.
pub fn greedy_suppression(
    len: usize,
    iou_threshold: f64,
    mut iou: impl FnMut(usize, usize) -> Result<f64>,
) -> Result<Vec<usize>> {
    let mut kept: Vec<usize> = Vec::with_capacity(len);
    'candidates: for i in 0..len {
        for &k in &kept {
            if iou(k, i)? >= iou_threshold {
                continue 'candidates;
            }
        }
        kept.push(i);
    }
    Ok(kept)
}

/// Class-agnostic NMS: predictions are ranked with [`rank_order`] and then
/// greedily suppressed against every survivor, whatever its class.
pub fn agnostic_nms(
    mut predictions: Vec<InstancePrediction>,
    iou_threshold: f64,
    kind: IouKind,
) -> Result<Vec<InstancePrediction>> {
    predictions.sort_by(rank_order);
    let keep = greedy_suppression(predictions.len(), iou_threshold, |a, b| {
        overlap(&predictions[a], &predictions[b], kind)
    })?;
    let mut slots: Vec<Option<InstancePrediction>> = predictions.into_iter().map(Some).collect();
    Ok(keep.into_iter().map(|i| slots[i].take().expect("index kept once")).collect())
}
