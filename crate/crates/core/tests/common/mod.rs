//! Reference implementations used as test oracles. They work on dense
//! bitmaps and straightforward loops and share no code with the library
//! paths they check.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use layout_ensemble::dataset::{CategoryId, ImageId};
use layout_ensemble::ensemble::{InstancePrediction, PredictionBundle};
use layout_ensemble::mask::{decode_rle, encode_rle, BinaryMask, Bitmap};
use layout_ensemble::metrics::TruthInstance;
use rand::Rng;

pub fn random_bitmap(rng: &mut impl Rng, h: usize, w: usize, density: f64) -> Bitmap {
    let bits = (0..h * w).map(|_| rng.gen_bool(density)).collect();
    Bitmap::from_rows(h, w, bits).unwrap()
}

/// Random union of up to three rectangles; never empty.
pub fn random_blob(rng: &mut impl Rng, h: usize, w: usize) -> Bitmap {
    let mut b = Bitmap::new(h, w).unwrap();
    for _ in 0..rng.gen_range(1..=3) {
        let (r0, c0) = (rng.gen_range(0..h), rng.gen_range(0..w));
        let (r1, c1) = (rng.gen_range(r0 + 1..=h), rng.gen_range(c0 + 1..=w));
        for r in r0..r1 {
            for c in c0..c1 {
                b.set(r, c, true);
            }
        }
    }
    b
}

pub fn dense(m: &BinaryMask) -> Bitmap {
    decode_rle(m).unwrap()
}

pub fn rect(h: usize, w: usize, r0: usize, c0: usize, r1: usize, c1: usize) -> BinaryMask {
    let mut b = Bitmap::new(h, w).unwrap();
    for r in r0..r1 {
        for c in c0..c1 {
            b.set(r, c, true);
        }
    }
    encode_rle(&b)
}

pub fn count(b: &Bitmap) -> u64 {
    b.bits().iter().filter(|&&x| x).count() as u64
}

pub fn overlap_count(a: &Bitmap, b: &Bitmap) -> u64 {
    a.bits().iter().zip(b.bits()).filter(|(x, y)| **x && **y).count() as u64
}

/// Pixel IoU; 0 when both are empty.
pub fn naive_mask_iou(a: &Bitmap, b: &Bitmap) -> f64 {
    let inter = overlap_count(a, b);
    let union = count(a) + count(b) - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Pixel dice; 1 when both are empty.
pub fn naive_dice(a: &Bitmap, b: &Bitmap) -> f64 {
    let total = count(a) + count(b);
    if total == 0 {
        1.0
    } else {
        2.0 * overlap_count(a, b) as f64 / total as f64
    }
}

/// Tight box `(row0, col0, row1, col1)` of the set pixels, half-open.
pub fn extent(b: &Bitmap) -> (usize, usize, usize, usize) {
    let (mut r0, mut c0, mut r1, mut c1) = (usize::MAX, usize::MAX, 0, 0);
    for r in 0..b.height() {
        for c in 0..b.width() {
            if b.get(r, c) {
                r0 = r0.min(r);
                c0 = c0.min(c);
                r1 = r1.max(r + 1);
                c1 = c1.max(c + 1);
            }
        }
    }
    (r0, c0, r1, c1)
}

pub fn naive_box_iou(a: &Bitmap, b: &Bitmap) -> f64 {
    let (ar0, ac0, ar1, ac1) = extent(a);
    let (br0, bc0, br1, bc1) = extent(b);
    let ih = ar1.min(br1).saturating_sub(ar0.max(br0)) as u64;
    let iw = ac1.min(bc1).saturating_sub(ac0.max(bc0)) as u64;
    let inter = ih * iw;
    let area = |r0: usize, c0: usize, r1: usize, c1: usize| ((r1 - r0) * (c1 - c0)) as u64;
    let union = area(ar0, ac0, ar1, ac1) + area(br0, bc0, br1, bc1) - inter;
    inter as f64 / union as f64
}

pub fn naive_iou(a: &Bitmap, b: &Bitmap, use_mask: bool) -> f64 {
    if use_mask {
        naive_mask_iou(a, b)
    } else {
        naive_box_iou(a, b)
    }
}

/// Even-odd crossing test at the centre of pixel `(row, col)`.
pub fn pnpoly(vertices: &[(f64, f64)], row: usize, col: usize) -> bool {
    let (px, py) = (col as f64 + 0.5, row as f64 + 0.5);
    let mut inside = false;
    let mut j = vertices.len() - 1;
    for i in 0..vertices.len() {
        let (xi, yi) = vertices[i];
        let (xj, yj) = vertices[j];
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Classic NMS: repeatedly take the top-ranked remaining prediction and drop
/// everything overlapping it at or above the threshold.
pub fn brute_force_nms(preds: &[InstancePrediction], threshold: f64, use_mask: bool) -> Vec<InstancePrediction> {
    let bitmaps: Vec<Bitmap> = preds.iter().map(|p| dense(p.mask())).collect();
    let mut remaining: Vec<usize> = (0..preds.len()).collect();
    let mut kept = Vec::new();
    while !remaining.is_empty() {
        let key = |i: usize| {
            let p = &preds[i];
            (
                std::cmp::Reverse(ordered(p.confidence())),
                std::cmp::Reverse(count(&bitmaps[i])),
                p.model_id().to_owned(),
                p.category_id(),
                p.mask().counts().to_vec(),
            )
        };
        let (pos, &top) = remaining
            .iter()
            .enumerate()
            .min_by_key(|(_, &i)| key(i))
            .unwrap();
        remaining.remove(pos);
        remaining.retain(|&i| naive_iou(&bitmaps[top], &bitmaps[i], use_mask) < threshold);
        kept.push(preds[top].clone());
    }
    kept
}

/// Total order on non-negative finite floats.
fn ordered(x: f64) -> u64 {
    x.to_bits()
}

/// Per-pixel vote counting over every confident instance of each model.
pub fn dense_vote(
    bundles: &[PredictionBundle],
    image: ImageId,
    h: usize,
    w: usize,
    confidence: f64,
    quorum: usize,
) -> BTreeMap<CategoryId, Bitmap> {
    let categories: BTreeSet<CategoryId> = bundles
        .iter()
        .flat_map(|b| b.predictions.iter().map(|p| p.category_id()))
        .collect();
    let mut out = BTreeMap::new();
    for cat in categories {
        let mut votes = vec![0usize; h * w];
        for b in bundles {
            let mut covered = vec![false; h * w];
            for p in &b.predictions {
                if p.image_id() == image && p.category_id() == cat && p.confidence() >= confidence {
                    let d = dense(p.mask());
                    for (c, bit) in covered.iter_mut().zip(d.bits()) {
                        *c |= *bit;
                    }
                }
            }
            for (v, c) in votes.iter_mut().zip(&covered) {
                *v += usize::from(*c);
            }
        }
        let bits = votes.iter().map(|&v| v >= quorum).collect();
        out.insert(cat, Bitmap::from_rows(h, w, bits).unwrap());
    }
    out
}

/// Greedy matching in the given prediction order, using dense IoU.
pub fn brute_force_matching(
    preds: &[(CategoryId, Bitmap)],
    truths: &[(CategoryId, Bitmap)],
    threshold: f64,
    use_mask: bool,
    same_category: bool,
) -> Vec<(usize, usize)> {
    let mut taken = vec![false; truths.len()];
    let mut pairs = Vec::new();
    for (pi, (pc, pm)) in preds.iter().enumerate() {
        let candidates: Vec<(usize, f64)> = truths
            .iter()
            .enumerate()
            .filter(|(ti, (tc, _))| !taken[*ti] && (!same_category || tc == pc))
            .map(|(ti, (_, tm))| (ti, naive_iou(pm, tm, use_mask)))
            .filter(|(_, iou)| *iou >= threshold)
            .collect();
        // highest IoU, lowest index among equals
        let best = candidates
            .iter()
            .fold(None::<(usize, f64)>, |acc, &(ti, iou)| match acc {
                Some((_, b)) if b >= iou => acc,
                _ => Some((ti, iou)),
            });
        if let Some((ti, _)) = best {
            taken[ti] = true;
            pairs.push((pi, ti));
        }
    }
    pairs
}

/// COCO mAP50-95 by direct enumeration: for every recall level, the best
/// precision among all ranks reaching it.
pub fn enumerated_map(
    preds: &BTreeMap<ImageId, Vec<InstancePrediction>>,
    truths: &BTreeMap<ImageId, Vec<TruthInstance>>,
    use_mask: bool,
) -> f64 {
    let thresholds = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];
    let categories: BTreeSet<CategoryId> = truths.values().flatten().map(|t| t.category_id).collect();
    let mut per_category = Vec::new();
    for &cat in &categories {
        let positives = truths.values().flatten().filter(|t| t.category_id == cat).count();
        // detections in image order, then stably by descending score
        let mut dets: Vec<(ImageId, &InstancePrediction)> = Vec::new();
        for id in truths.keys() {
            let mut d: Vec<&InstancePrediction> = preds
                .get(id)
                .map(|v| v.iter().filter(|p| p.category_id() == cat).collect())
                .unwrap_or_default();
            d.sort_by(|a, b| b.confidence().total_cmp(&a.confidence()));
            dets.extend(d.into_iter().map(|p| (*id, p)));
        }
        dets.sort_by(|a, b| b.1.confidence().total_cmp(&a.1.confidence()));
        let mut ap_sum = 0.0;
        for &thr in &thresholds {
            let mut taken: BTreeMap<(ImageId, usize), bool> = BTreeMap::new();
            let mut hits = Vec::new();
            for (id, p) in &dets {
                let pm = dense(p.mask());
                let mut best: Option<(usize, f64)> = None;
                for (ti, t) in truths[id].iter().enumerate() {
                    if t.category_id != cat || taken.contains_key(&(*id, ti)) {
                        continue;
                    }
                    let iou = naive_iou(&pm, &dense(&t.mask), use_mask);
                    if iou >= thr && best.is_none_or(|(_, b)| iou > b) {
                        best = Some((ti, iou));
                    }
                }
                if let Some((ti, _)) = best {
                    taken.insert((*id, ti), true);
                }
                hits.push(best.is_some());
            }
            let mut curve = Vec::new();
            let mut tp = 0usize;
            for (k, &hit) in hits.iter().enumerate() {
                tp += usize::from(hit);
                curve.push((tp as f64 / positives as f64, tp as f64 / (k + 1) as f64));
            }
            let mut total = 0.0;
            for j in 0..101 {
                let r = j as f64 / 100.0;
                let best = curve
                    .iter()
                    .filter(|(rec, _)| *rec >= r)
                    .map(|(_, prec)| *prec)
                    .fold(None::<f64>, |acc, p| Some(acc.map_or(p, |a| a.max(p))));
                total += best.unwrap_or(0.0);
            }
            ap_sum += total / 101.0;
        }
        per_category.push(ap_sum / thresholds.len() as f64);
    }
    if per_category.is_empty() {
        0.0
    } else {
        per_category.iter().sum::<f64>() / per_category.len() as f64
    }
}
