use std::collections::BTreeMap;

use super::{ClasswiseMaskSet, ImageGrid, PredictionBundle};
use crate::dataset::CategoryId;
use crate::error::{Error, Result};
use crate::mask::encode_column_major;

/// Per-category, per-pixel count of models covering the pixel, column-major.
fn vote_counts(
    bundles: &[PredictionBundle],
    grid: ImageGrid,
    category: CategoryId,
) -> Result<Vec<u16>> {
    let n = grid.height * grid.width;
    let mut votes = vec![0u16; n];
    let mut covered = vec![false; n];
    for bundle in bundles {
        covered.iter_mut().for_each(|c| *c = false);
        let mut any = false;
        for p in bundle
            .predictions
            .iter()
            .filter(|p| p.image_id == grid.id && p.category_id == category)
        {
            if p.mask.dims() != (grid.height, grid.width) {
                return Err(Error::DimensionMismatch {
                    left: (grid.height, grid.width),
                    right: p.mask.dims(),
                });
            }
            for (start, end) in p.mask.runs() {
                covered[start..end].iter_mut().for_each(|c| *c = true);
                any = true;
            }
        }
        if any {
            for (v, &c) in votes.iter_mut().zip(&covered) {
                *v += u16::from(c);
            }
        }
    }
    Ok(votes)
}

pub(crate) fn vote_image(
    bundles: &[PredictionBundle],
    grid: ImageGrid,
    quorum: usize,
    categories: &[CategoryId],
) -> Result<ClasswiseMaskSet> {
    let mut masks = BTreeMap::new();
    for &cat in categories {
        let votes = vote_counts(bundles, grid, cat)?;
        let dense: Vec<bool> = votes.iter().map(|&v| usize::from(v) >= quorum).collect();
        masks.insert(cat, encode_column_major(grid.height, grid.width, &dense));
    }
    Ok(ClasswiseMaskSet {
        image_id: grid.id,
        height: grid.height,
        width: grid.width,
        masks,
    })
}

fn categories_on(bundles: &[PredictionBundle], image: u64) -> Vec<CategoryId> {
    let mut cats: Vec<CategoryId> = bundles
        .iter()
        .flat_map(|b| &b.predictions)
        .filter(|p| p.image_id == image)
        .map(|p| p.category_id)
        .collect();
    cats.sort_unstable();
    cats.dedup();
    cats
}

/// A pixel of category `c` is set iff at least `quorum` models have a
/// prediction of class `c` covering it. Categories are voted independently.
///
/// Callers filter by confidence first; every prediction here votes.
pub fn majority_vote_classwise(
    bundles: &[PredictionBundle],
    image: ImageGrid,
    quorum: usize,
) -> Result<ClasswiseMaskSet> {
    if bundles.is_empty() || quorum == 0 || quorum > bundles.len() {
        return Err(Error::InvalidConfig(format!(
            "quorum {quorum} invalid for {} bundles",
            bundles.len()
        )));
    }
    vote_image(bundles, image, quorum, &categories_on(bundles, image.id))
}

/// One label per pixel, row-major; `None` is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<Option<CategoryId>>,
}

impl LabelMap {
    pub fn get(&self, row: usize, col: usize) -> Option<CategoryId> {
        self.labels[row * self.width + col]
    }
}

/// Single-label export of the vote: among categories reaching `quorum` at a
/// pixel, the one with most votes wins, ties to the lowest category id.
pub fn flatten_classwise(
    bundles: &[PredictionBundle],
    image: ImageGrid,
    quorum: usize,
) -> Result<LabelMap> {
    if bundles.is_empty() || quorum == 0 || quorum > bundles.len() {
        return Err(Error::InvalidConfig(format!(
            "quorum {quorum} invalid for {} bundles",
            bundles.len()
        )));
    }
    let (h, w) = (image.height, image.width);
    let mut best: Vec<Option<(u16, CategoryId)>> = vec![None; h * w];
    for cat in categories_on(bundles, image.id) {
        let votes = vote_counts(bundles, image, cat)?;
        for (idx, &v) in votes.iter().enumerate() {
            if usize::from(v) < quorum {
                continue;
            }
            let (col, row) = (idx / h, idx % h);
            let slot = &mut best[row * w + col];
            // categories arrive ascending, so only a strictly larger vote wins
            if slot.is_none_or(|(bv, _)| v > bv) {
                *slot = Some((v, cat));
            }
        }
    }
    Ok(LabelMap {
        height: h,
        width: w,
        labels: best.into_iter().map(|b| b.map(|(_, c)| c)).collect(),
    })
}
