use super::TruthInstance;
use crate::dataset::CategoryId;
use crate::ensemble::{InstancePrediction, IouKind};
use crate::error::Result;
use crate::mask::{box_iou, mask_iou, BinaryMask, BoundingBox};

/// Anything that can be matched against ground truth.
pub trait Scored {
    fn category(&self) -> CategoryId;
    fn mask(&self) -> &BinaryMask;
    fn bbox(&self) -> &BoundingBox;
}

impl Scored for InstancePrediction {
    fn category(&self) -> CategoryId {
        self.category_id()
    }

    fn mask(&self) -> &BinaryMask {
        InstancePrediction::mask(self)
    }

    fn bbox(&self) -> &BoundingBox {
        InstancePrediction::bbox(self)
    }
}

impl<S: Scored> Scored for &S {
    fn category(&self) -> CategoryId {
        (**self).category()
    }

    fn mask(&self) -> &BinaryMask {
        (**self).mask()
    }

    fn bbox(&self) -> &BoundingBox {
        (**self).bbox()
    }
}

impl Scored for TruthInstance {
    fn category(&self) -> CategoryId {
        self.category_id
    }

    fn mask(&self) -> &BinaryMask {
        &self.mask
    }

    fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }
}

pub(crate) fn iou_of(a: &impl Scored, b: &impl Scored, kind: IouKind) -> Result<f64> {
    match kind {
        IouKind::Box => Ok(box_iou(a.bbox(), b.bbox())),
        IouKind::Mask => mask_iou(a.mask(), b.mask()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchMode {
    /// A prediction may only match ground truth of its own category.
    SameCategory,
    /// Any category may match; used for confusion matrices.
    AnyCategory,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    /// `(prediction index, truth index, iou)`
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_predictions: Vec<usize>,
    pub unmatched_truths: Vec<usize>,
}

/// Greedy matching for one image. Predictions must already be in confidence
/// order; each takes the unmatched eligible truth of highest IoU at or above
/// `iou_threshold` (ties to the lower truth index).
pub fn match_instances<P: Scored, T: Scored>(
    preds: &[P],
    truths: &[T],
    iou_threshold: f64,
    kind: IouKind,
    mode: MatchMode,
) -> Result<MatchResult> {
    let mut taken = vec![false; truths.len()];
    let mut result = MatchResult::default();
    for (pi, p) in preds.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (ti, t) in truths.iter().enumerate() {
            if taken[ti] || (mode == MatchMode::SameCategory && t.category() != p.category()) {
                continue;
            }
            let iou = iou_of(p, t, kind)?;
            if iou >= iou_threshold && best.is_none_or(|(_, b)| iou > b) {
                best = Some((ti, iou));
            }
        }
        match best {
            Some((ti, iou)) => {
                taken[ti] = true;
                result.pairs.push((pi, ti, iou));
            }
            None => result.unmatched_predictions.push(pi),
        }
    }
    result.unmatched_truths = (0..truths.len()).filter(|&t| !taken[t]).collect();
    Ok(result)
}
