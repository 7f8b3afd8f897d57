use std::collections::{BTreeMap, BTreeSet};

use super::matching::{match_instances, MatchMode};
use super::TruthInstance;
use crate::dataset::{CategoryId, ImageId};
use crate::ensemble::{InstancePrediction, IouKind};
use crate::error::{Error, Result};

pub const IOU_THRESHOLDS: [f64; 10] = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];
pub const RECALL_POINTS: usize = 101;

#[derive(Debug, Clone, PartialEq)]
pub struct MapScores {
    pub map: f64,
    /// AP averaged over the IoU thresholds, for categories with ground truth.
    pub per_category: BTreeMap<CategoryId, f64>,
}

/// 101-point interpolated AP. `hits` are true-positive flags of detections
/// already sorted by descending score; `positives` is the ground-truth count.
pub fn average_precision(hits: &[bool], positives: usize) -> f64 {
    if positives == 0 {
        return 0.0;
    }
    let mut precision = Vec::with_capacity(hits.len());
    let mut recall = Vec::with_capacity(hits.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &hit in hits {
        if hit {
            tp += 1;
        } else {
            fp += 1;
        }
        precision.push(tp as f64 / (tp + fp) as f64);
        recall.push(tp as f64 / positives as f64);
    }
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let mut total = 0.0;
    for j in 0..RECALL_POINTS {
        let r = j as f64 / (RECALL_POINTS - 1) as f64;
        let idx = recall.partition_point(|&x| x < r);
        if idx < precision.len() {
            total += precision[idx];
        }
    }
    total / RECALL_POINTS as f64
}

/// COCO-style mAP averaged over IoU thresholds 0.50:0.05:0.95, then over the
/// categories that have ground truth. No detection cap per image.
pub fn mean_ap_50_95(
    preds: &BTreeMap<ImageId, Vec<InstancePrediction>>,
    truths: &BTreeMap<ImageId, Vec<TruthInstance>>,
    kind: IouKind,
) -> Result<MapScores> {
    if let Some(id) = preds.keys().find(|id| !truths.contains_key(id)) {
        return Err(Error::UnknownImage(*id));
    }
    let categories: BTreeSet<CategoryId> = truths
        .values()
        .flatten()
        .map(|t| t.category_id)
        .collect();
    let mut per_category = BTreeMap::new();
    for &cat in &categories {
        // per image: this category's detections in rank order and its truths
        let mut images = Vec::new();
        let mut positives = 0usize;
        for (id, image_truths) in truths {
            let t: Vec<&TruthInstance> = image_truths.iter().filter(|t| t.category_id == cat).collect();
            let mut d: Vec<&InstancePrediction> = preds
                .get(id)
                .map(|v| v.iter().filter(|p| p.category_id() == cat).collect())
                .unwrap_or_default();
            d.sort_by(|a, b| b.confidence().total_cmp(&a.confidence()));
            positives += t.len();
            images.push((t, d));
        }
        let mut ap_sum = 0.0;
        for &threshold in &IOU_THRESHOLDS {
            // (score, hit) in image order, then stably sorted by score
            let mut scored: Vec<(f64, bool)> = Vec::new();
            for (t, d) in &images {
                let m = match_instances(d, t, threshold, kind, MatchMode::SameCategory)?;
                let mut hit = vec![false; d.len()];
                for &(pi, _, _) in &m.pairs {
                    hit[pi] = true;
                }
                scored.extend(d.iter().zip(hit).map(|(p, h)| (p.confidence(), h)));
            }
            scored.sort_by(|a, b| b.0.total_cmp(&a.0));
            let hits: Vec<bool> = scored.iter().map(|s| s.1).collect();
            ap_sum += average_precision(&hits, positives);
        }
        per_category.insert(cat, ap_sum / IOU_THRESHOLDS.len() as f64);
    }
    let map = if per_category.is_empty() {
        0.0
    } else {
        per_category.values().sum::<f64>() / per_category.len() as f64
    };
    Ok(MapScores { map, per_category })
}
