//! Fusion of several models' predictions.
//!
//! Classwise masks are fused by per-pixel majority vote, category by
//! category. Instance lists are pooled across models and pruned with
//! class-agnostic non-maximum suppression.

mod io;
mod nms;
mod vote;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{AnnotationSet, CategoryId, ImageId};
use crate::error::{Error, Result};
use crate::mask::{mask_to_bbox, BinaryMask, BoundingBox};

pub use io::{
    parse_bundle, read_bundle, read_submission, submission_csv, write_bundle, write_classwise,
    write_instances,
    ClasswiseRecord, PredictionRecord, ENSEMBLE_MODEL_ID,
};
pub use nms::{agnostic_nms, greedy_suppression, overlap, rank_order};
pub use vote::{flatten_classwise, majority_vote_classwise, LabelMap};

/// One detected layout element.
#[derive(Debug, Clone, PartialEq)]
pub struct InstancePrediction {
    image_id: ImageId,
    category_id: CategoryId,
    confidence: f64,
    mask: BinaryMask,
    bbox: BoundingBox,
    model_id: String,
}

impl InstancePrediction {
    /// Fails on an out-of-range confidence or an empty mask.
    pub fn new(
        image_id: ImageId,
        category_id: CategoryId,
        confidence: f64,
        mask: BinaryMask,
        model_id: impl Into<String>,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidConfig(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        let bbox = mask_to_bbox(&mask)?;
        Ok(InstancePrediction {
            image_id,
            category_id,
            confidence,
            mask,
            bbox,
            model_id: model_id.into(),
        })
    }

    pub fn image_id(&self) -> ImageId {
        self.image_id
    }

    pub fn category_id(&self) -> CategoryId {
        self.category_id
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn mask(&self) -> &BinaryMask {
        &self.mask
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }
}

/// All predictions of one model over an image set.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBundle {
    pub model_id: String,
    pub predictions: Vec<InstancePrediction>,
}

impl PredictionBundle {
    pub fn image_ids(&self) -> impl Iterator<Item = ImageId> + '_ {
        self.predictions.iter().map(|p| p.image_id)
    }
}

/// Per-category masks over one image grid. Categories may overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct ClasswiseMaskSet {
    pub image_id: ImageId,
    pub height: usize,
    pub width: usize,
    pub masks: BTreeMap<CategoryId, BinaryMask>,
}

/// Grid of one image, as needed for classwise fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageGrid {
    pub id: ImageId,
    pub height: usize,
    pub width: usize,
}

impl ImageGrid {
    pub fn all(data: &AnnotationSet) -> Vec<ImageGrid> {
        data.images()
            .iter()
            .map(|i| ImageGrid {
                id: i.id,
                height: i.height,
                width: i.width,
            })
            .collect()
    }

    /// Grids inferred from prediction masks, for when no corpus is at hand.
    pub fn from_bundles(bundles: &[PredictionBundle]) -> Result<Vec<ImageGrid>> {
        let mut grids: BTreeMap<ImageId, (usize, usize)> = BTreeMap::new();
        for p in bundles.iter().flat_map(|b| &b.predictions) {
            let dims = p.mask.dims();
            match grids.insert(p.image_id, dims) {
                Some(prev) if prev != dims => {
                    return Err(Error::DimensionMismatch {
                        left: prev,
                        right: dims,
                    })
                }
                _ => {}
            }
        }
        Ok(grids
            .into_iter()
            .map(|(id, (height, width))| ImageGrid { id, height, width })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IouKind {
    #[default]
    Box,
    Mask,
}

impl std::str::FromStr for IouKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(IouKind::Box),
            "mask" => Ok(IouKind::Mask),
            other => Err(Error::InvalidConfig(format!("unknown iou kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub confidence_threshold: f64,
    pub iou_threshold: f64,
    /// Minimum votes for a pixel; `None` means `ceil(M / 2)` for `M` models.
    #[serde(default)]
    pub vote_quorum: Option<usize>,
    #[serde(default)]
    pub iou_kind: IouKind,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            confidence_threshold: 0.25,
            iou_threshold: 0.7,
            vote_quorum: None,
            iou_kind: IouKind::Box,
        }
    }
}

impl EnsembleConfig {
    pub fn with_thresholds(confidence: f64, iou: f64) -> Self {
        EnsembleConfig {
            confidence_threshold: confidence,
            iou_threshold: iou,
            ..Self::default()
        }
    }

    /// Quorum for `models` voters.
    pub fn quorum(&self, models: usize) -> Result<usize> {
        let q = self.vote_quorum.unwrap_or(models.div_ceil(2));
        if q == 0 || q > models {
            return Err(Error::InvalidConfig(format!(
                "vote quorum {q} outside [1, {models}]"
            )));
        }
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("confidence_threshold", self.confidence_threshold),
            ("iou_threshold", self.iou_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Keeps predictions with `confidence >= threshold`, in order.
pub fn filter_by_confidence(bundle: &PredictionBundle, threshold: f64) -> PredictionBundle {
    PredictionBundle {
        model_id: bundle.model_id.clone(),
        predictions: bundle
            .predictions
            .iter()
            .filter(|p| p.confidence >= threshold)
            .cloned()
            .collect(),
    }
}

/// Pools every model's confident predictions per image and suppresses overlaps
/// regardless of class. Survivors keep their original fields.
pub fn fuse_instancewise(
    bundles: &[PredictionBundle],
    config: &EnsembleConfig,
) -> Result<BTreeMap<ImageId, Vec<InstancePrediction>>> {
    config.validate()?;
    let mut pooled: BTreeMap<ImageId, Vec<InstancePrediction>> = BTreeMap::new();
    for bundle in bundles {
        for p in filter_by_confidence(bundle, config.confidence_threshold).predictions {
            pooled.entry(p.image_id).or_default().push(p);
        }
    }
    pooled
        .into_iter()
        .map(|(id, preds)| {
            agnostic_nms(preds, config.iou_threshold, config.iou_kind).map(|kept| (id, kept))
        })
        .collect()
}

/// Confidence-filters each model, then votes per pixel with the configured quorum.
///
/// The output covers every image in `images` and every category predicted by
/// any model anywhere.
pub fn fuse_classwise(
    bundles: &[PredictionBundle],
    config: &EnsembleConfig,
    images: &[ImageGrid],
) -> Result<Vec<ClasswiseMaskSet>> {
    config.validate()?;
    if bundles.is_empty() {
        return Err(Error::InvalidConfig("classwise fusion needs at least one bundle".into()));
    }
    let quorum = config.quorum(bundles.len())?;
    let known: std::collections::HashSet<ImageId> = images.iter().map(|g| g.id).collect();
    if let Some(id) = bundles.iter().flat_map(|b| b.image_ids()).find(|id| !known.contains(id)) {
        return Err(Error::UnknownImage(id));
    }
    let categories: Vec<CategoryId> = {
        let mut c: Vec<_> = bundles
            .iter()
            .flat_map(|b| b.predictions.iter().map(|p| p.category_id))
            .collect();
        c.sort_unstable();
        c.dedup();
        c
    };
    let filtered: Vec<PredictionBundle> = bundles
        .iter()
        .map(|b| filter_by_confidence(b, config.confidence_threshold))
        .collect();
    images
        .iter()
        .map(|grid| vote::vote_image(&filtered, *grid, quorum, &categories))
        .collect()
}

/// Classwise masks from the union of each category's instances; no voting.
pub fn classwise_union(
    instances: &BTreeMap<ImageId, Vec<InstancePrediction>>,
    images: &[ImageGrid],
    categories: &[CategoryId],
) -> Result<Vec<ClasswiseMaskSet>> {
    images
        .iter()
        .map(|grid| {
            let preds = instances.get(&grid.id).map(Vec::as_slice).unwrap_or(&[]);
            let masks = categories
                .iter()
                .map(|&c| {
                    BinaryMask::union_all(
                        grid.height,
                        grid.width,
                        preds.iter().filter(|p| p.category_id == c).map(|p| &p.mask),
                    )
                    .map(|m| (c, m))
                })
                .collect::<Result<_>>()?;
            Ok(ClasswiseMaskSet {
                image_id: grid.id,
                height: grid.height,
                width: grid.width,
                masks,
            })
        })
        .collect()
}
