//! Evaluation: pixel dice, COCO-style mAP50-95 and background-aware confusion matrices.

mod confusion;
mod dice;
mod map;
mod matching;
mod report;

use std::collections::BTreeMap;

use crate::dataset::{AnnotationSet, CategoryId, ImageId};
use crate::error::Result;
use crate::mask::{mask_to_bbox, BinaryMask, BoundingBox};

pub use confusion::{confusion_matrix, ConfusionMatrix, BACKGROUND};
pub use dice::{evaluate_dice, DiceAggregation, DiceScores};
pub use map::{average_precision, mean_ap_50_95, MapScores, IOU_THRESHOLDS, RECALL_POINTS};
pub use matching::{match_instances, MatchMode, MatchResult, Scored};
pub use report::{compare_reports, ConfusionSection, DiceSection, MapSection, MetricsReport, ReportDelta};

/// A ground-truth instance with its rasterized mask.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthInstance {
    pub category_id: CategoryId,
    pub mask: BinaryMask,
    pub bbox: BoundingBox,
}

impl TruthInstance {
    pub fn new(category_id: CategoryId, mask: BinaryMask) -> Result<Self> {
        let bbox = mask_to_bbox(&mask)?;
        Ok(TruthInstance {
            category_id,
            mask,
            bbox,
        })
    }

    /// Instances of every image in `data`, keyed by image id. Annotations that
    /// rasterize to no pixels cannot be matched and are skipped.
    pub fn from_annotations(data: &AnnotationSet) -> Result<BTreeMap<ImageId, Vec<TruthInstance>>> {
        let mut out: BTreeMap<ImageId, Vec<TruthInstance>> =
            data.images().iter().map(|i| (i.id, Vec::new())).collect();
        for ann in data.annotations() {
            let mask = data.annotation_mask(ann)?;
            if mask.is_empty() {
                continue;
            }
            out.entry(ann.image_id)
                .or_default()
                .push(TruthInstance::new(ann.category_id, mask)?);
        }
        Ok(out)
    }
}
