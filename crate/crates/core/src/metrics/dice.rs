use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{AnnotationSet, CategoryId, ImageId};
use crate::ensemble::ClasswiseMaskSet;
use crate::error::{Error, Result};
use crate::mask::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiceAggregation {
    /// Dice per (image, category); mean over images, then over categories.
    #[default]
    Macro,
    /// Pixel counts pooled over images per category, and over everything overall.
    Micro,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiceScores {
    pub overall: f64,
    pub per_category: BTreeMap<CategoryId, f64>,
}

fn ratio(intersection: u64, total: u64) -> f64 {
    if total == 0 {
        1.0
    } else {
        2.0 * intersection as f64 / total as f64
    }
}

/// Pixel dice of predicted classwise masks against each category's union of
/// ground-truth masks, over every image of `truth` and every vocabulary
/// category. Images or categories missing from `preds` count as empty.
pub fn evaluate_dice(
    preds: &[ClasswiseMaskSet],
    truth: &AnnotationSet,
    aggregation: DiceAggregation,
) -> Result<DiceScores> {
    let mut by_image: BTreeMap<ImageId, &ClasswiseMaskSet> = BTreeMap::new();
    for set in preds {
        let img = truth.image(set.image_id).ok_or(Error::UnknownImage(set.image_id))?;
        if (set.height, set.width) != (img.height, img.width) {
            return Err(Error::DimensionMismatch {
                left: (img.height, img.width),
                right: (set.height, set.width),
            });
        }
        by_image.insert(set.image_id, set);
    }

    let ncat = truth.categories().len();
    // per category: sum of per-image dice, pooled intersection, pooled total
    let mut dice_sum = vec![0.0f64; ncat];
    let mut pooled = vec![(0u64, 0u64); ncat];
    for img in truth.images() {
        let truth_masks = truth.category_masks(img.id)?;
        for (ci, cat) in truth.categories().iter().enumerate() {
            let t = &truth_masks[&cat.id];
            let empty;
            let p = match by_image.get(&img.id).and_then(|s| s.masks.get(&cat.id)) {
                Some(m) => m,
                None => {
                    empty = BinaryMask::empty(img.height, img.width)?;
                    &empty
                }
            };
            let inter = p.intersection_area(t)?;
            let total = p.area() + t.area();
            dice_sum[ci] += ratio(inter, total);
            pooled[ci].0 += inter;
            pooled[ci].1 += total;
        }
    }

    let nimg = truth.images().len().max(1) as f64;
    let per_category: BTreeMap<CategoryId, f64> = truth
        .categories()
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let v = match aggregation {
                DiceAggregation::Macro => dice_sum[ci] / nimg,
                DiceAggregation::Micro => ratio(pooled[ci].0, pooled[ci].1),
            };
            (c.id, v)
        })
        .collect();
    let overall = match aggregation {
        _ if ncat == 0 => 1.0,
        DiceAggregation::Macro => per_category.values().sum::<f64>() / ncat as f64,
        DiceAggregation::Micro => {
            let (i, t) = pooled.iter().fold((0, 0), |(a, b), &(i, t)| (a + i, b + t));
            ratio(i, t)
        }
    };
    Ok(DiceScores {
        overall,
        per_category,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Annotation, ImageInfo, Segmentation};
    use crate::ensemble::test_support::rect_mask;
    use crate::mask::RleJson;

    fn truth_with(masks: &[(u64, BinaryMask)]) -> AnnotationSet {
        let images = vec![ImageInfo {
            id: 1,
            file_name: "a.png".into(),
            height: 4,
            width: 4,
            provenance: None,
        }];
        let annotations = masks
            .iter()
            .enumerate()
            .map(|(i, (cat, m))| Annotation {
                id: i as u64,
                image_id: 1,
                category_id: *cat,
                segmentation: Segmentation::Rle(RleJson::from(m)),
                provenance: None,
            })
            .collect();
        AnnotationSet::new(images, AnnotationSet::layout_categories(), annotations).unwrap()
    }

    fn set(masks: &[(u64, BinaryMask)]) -> ClasswiseMaskSet {
        ClasswiseMaskSet {
            image_id: 1,
            height: 4,
            width: 4,
            masks: masks.iter().cloned().collect(),
        }
    }

    #[test]
    fn perfect_prediction() {
        let gt = [(1, rect_mask(4, 4, 0, 0, 2, 2)), (3, rect_mask(4, 4, 2, 2, 4, 4))];
        let d = evaluate_dice(&[set(&gt)], &truth_with(&gt), DiceAggregation::Macro).unwrap();
        assert_eq!(d.overall, 1.0);
    }

    #[test]
    fn empty_prediction_scores_zero_where_truth_exists() {
        let gt: Vec<_> = (1..=4).map(|c| (c, rect_mask(4, 4, 0, 0, c as usize, 1))).collect();
        let d = evaluate_dice(&[], &truth_with(&gt), DiceAggregation::Macro).unwrap();
        assert!(d.per_category.values().all(|&v| v == 0.0));
        assert_eq!(d.overall, 0.0);
    }

    #[test]
    fn half_overlap_fixture() {
        let gt = [(1, rect_mask(4, 4, 0, 0, 2, 2))];
        let pr = [(1, rect_mask(4, 4, 0, 1, 2, 3))];
        let d = evaluate_dice(&[set(&pr)], &truth_with(&gt), DiceAggregation::Macro).unwrap();
        assert_eq!(d.per_category[&1], 0.5);
        assert_eq!(d.per_category[&2], 1.0);
        assert_eq!(d.overall, 0.875);
    }

    #[test]
    fn micro_pools_pixels() {
        let gt = [(1, rect_mask(4, 4, 0, 0, 2, 2))];
        let pr = [(1, rect_mask(4, 4, 0, 1, 2, 3))];
        let d = evaluate_dice(&[set(&pr)], &truth_with(&gt), DiceAggregation::Micro).unwrap();
        assert_eq!(d.per_category[&1], 0.5);
        assert_eq!(d.overall, 0.5);
    }

    #[test]
    fn unknown_image_and_dimension_errors() {
        let gt = [(1, rect_mask(4, 4, 0, 0, 2, 2))];
        let mut s = set(&gt);
        s.image_id = 5;
        assert!(matches!(
            evaluate_dice(&[s], &truth_with(&gt), DiceAggregation::Macro),
            Err(Error::UnknownImage(5))
        ));
        let mut s = set(&[]);
        s.height = 3;
        assert!(evaluate_dice(&[s], &truth_with(&gt), DiceAggregation::Macro).is_err());
    }
}
