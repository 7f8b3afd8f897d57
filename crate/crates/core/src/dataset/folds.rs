use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AnnotationSet, ImageId};
use crate::error::{Error, Result};

/// Image and per-category annotation counts of one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldStats {
    pub images: usize,
    /// Indexed like the corpus category vocabulary.
    pub per_category: Vec<usize>,
}

/// Assignment of every image to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    seed: u64,
    assignment: BTreeMap<ImageId, usize>,
    category_names: Vec<String>,
    stats: Vec<FoldStats>,
}

#[derive(Serialize, Deserialize)]
struct FoldPlanFile {
    k: usize,
    seed: u64,
    assignment: BTreeMap<ImageId, usize>,
}

impl FoldPlan {
    /// Validates an explicit assignment against `data` and tallies per-fold stats.
    pub fn from_assignment(
        data: &AnnotationSet,
        k: usize,
        seed: u64,
        assignment: BTreeMap<ImageId, usize>,
    ) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidFoldCount {
                k,
                images: data.images().len(),
            });
        }
        for img in data.images() {
            match assignment.get(&img.id) {
                Some(&f) if f < k => {}
                Some(&f) => return Err(Error::FoldOutOfRange { val_fold: f, k }),
                None => return Err(Error::UnassignedImage { image_id: img.id }),
            }
        }
        if let Some(extra) = assignment.keys().find(|id| data.image(**id).is_none()) {
            return Err(Error::UnknownImage(*extra));
        }
        let ncat = data.categories().len();
        let mut stats = vec![
            FoldStats {
                images: 0,
                per_category: vec![0; ncat],
            };
            k
        ];
        for &f in assignment.values() {
            stats[f].images += 1;
        }
        for ann in data.annotations() {
            let f = assignment[&ann.image_id];
            let c = data.category_index(ann.category_id).expect("validated");
            stats[f].per_category[c] += 1;
        }
        Ok(FoldPlan {
            k,
            seed,
            assignment,
            category_names: data.categories().iter().map(|c| c.name.clone()).collect(),
            stats,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn assignment(&self) -> &BTreeMap<ImageId, usize> {
        &self.assignment
    }

    pub fn fold_of(&self, image: ImageId) -> Option<usize> {
        self.assignment.get(&image).copied()
    }

    pub fn stats(&self) -> &[FoldStats] {
        &self.stats
    }

    pub fn category_names(&self) -> &[String] {
        &self.category_names
    }

    /// Image ids of one fold, ascending.
    pub fn images_in(&self, fold: usize) -> Vec<ImageId> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(&id, _)| id)
            .collect()
    }

    /// `{"k": .., "seed": .., "assignment": {image_id: fold}}`
    pub fn to_json(&self) -> String {
        let file = FoldPlanFile {
            k: self.k,
            seed: self.seed,
            assignment: self.assignment.clone(),
        };
        serde_json::to_string_pretty(&file).expect("fold plans always serialize")
    }

    /// Parses a plan file and re-derives its stats from `data`.
    pub fn from_json(text: &str, data: &AnnotationSet) -> Result<Self> {
        let file: FoldPlanFile =
            serde_json::from_str(text).map_err(|e| Error::json("fold plan", e))?;
        Self::from_assignment(data, file.k, file.seed, file.assignment)
    }
}

/// Splits images into `k` folds, keeping each image's annotations together and
/// balancing per-category proportions.
///
/// Images are shuffled with `seed`, then ordered by how large a share of any
/// single category they carry (largest first). Each image goes to the fold
/// furthest below its target for the image's dominant category; ties prefer
/// the fold with fewer images, then the lower index.
pub fn stratified_group_kfold(data: &AnnotationSet, k: usize, seed: u64) -> Result<FoldPlan> {
    let n = data.images().len();
    if k < 2 || k > n {
        return Err(Error::InvalidFoldCount { k, images: n });
    }
    let ncat = data.categories().len();
    let index: BTreeMap<ImageId, usize> = data
        .images()
        .iter()
        .enumerate()
        .map(|(i, img)| (img.id, i))
        .collect();
    let mut per_image = vec![vec![0usize; ncat]; n];
    let mut global = vec![0usize; ncat];
    for ann in data.annotations() {
        let c = data.category_index(ann.category_id).expect("validated");
        per_image[index[&ann.image_id]][c] += 1;
        global[c] += 1;
    }

    // (share of the dominant category, dominant category)
    let dominant: Vec<Option<(f64, usize)>> = per_image
        .iter()
        .map(|counts| {
            let mut best: Option<(f64, usize)> = None;
            for (c, &cnt) in counts.iter().enumerate() {
                if cnt == 0 {
                    continue;
                }
                let share = cnt as f64 / global[c] as f64;
                if best.is_none_or(|(s, _)| share > s) {
                    best = Some((share, c));
                }
            }
            best
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.sort_by(|&a, &b| {
        let sa = dominant[a].map_or(0.0, |d| d.0);
        let sb = dominant[b].map_or(0.0, |d| d.0);
        sb.total_cmp(&sa)
    });

    let targets: Vec<f64> = global.iter().map(|&g| g as f64 / k as f64).collect();
    let mut fold_counts = vec![vec![0usize; ncat]; k];
    let mut fold_sizes = vec![0usize; k];
    let mut slot = vec![0usize; n];

    for (pos, &img) in order.iter().enumerate() {
        let remaining = n - pos;
        let empty: Vec<usize> = (0..k).filter(|&f| fold_sizes[f] == 0).collect();
        let fold = if !empty.is_empty() && remaining <= empty.len() {
            empty[0]
        } else {
            match dominant[img] {
                Some((_, c)) => {
                    let deficit = |f: usize| (targets[c] - fold_counts[f][c] as f64) / targets[c];
                    (0..k)
                        .min_by(|&a, &b| {
                            deficit(b)
                                .total_cmp(&deficit(a))
                                .then(fold_sizes[a].cmp(&fold_sizes[b]))
                                .then(a.cmp(&b))
                        })
                        .expect("k >= 2")
                }
                None => (0..k)
                    .min_by_key(|&f| (fold_sizes[f], f))
                    .expect("k >= 2"),
            }
        };
        slot[img] = fold;
        fold_sizes[fold] += 1;
        for (c, &cnt) in per_image[img].iter().enumerate() {
            fold_counts[fold][c] += cnt;
        }
    }

    let assignment = data
        .images()
        .iter()
        .enumerate()
        .map(|(i, img)| (img.id, slot[i]))
        .collect();
    FoldPlan::from_assignment(data, k, seed, assignment)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldRow {
    pub fold: usize,
    pub images: usize,
    pub per_category: Vec<usize>,
}

/// Per-fold distribution table: images followed by one column per category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldReport {
    pub categories: Vec<String>,
    pub rows: Vec<FoldRow>,
}

impl FoldReport {
    pub fn totals(&self) -> FoldRow {
        let mut total = FoldRow {
            fold: self.rows.len(),
            images: 0,
            per_category: vec![0; self.categories.len()],
        };
        for row in &self.rows {
            total.images += row.images;
            for (t, v) in total.per_category.iter_mut().zip(&row.per_category) {
                *t += v;
            }
        }
        total
    }
}

impl fmt::Display for FoldReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>4} {:>8}", "fold", "images")?;
        for name in &self.categories {
            write!(f, " {:>10}", name)?;
        }
        writeln!(f)?;
        for row in &self.rows {
            write!(f, "{:>4} {:>8}", row.fold, row.images)?;
            for v in &row.per_category {
                write!(f, " {:>10}", v)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub fn fold_report(plan: &FoldPlan) -> FoldReport {
    FoldReport {
        categories: plan.category_names.clone(),
        rows: plan
            .stats
            .iter()
            .enumerate()
            .map(|(fold, s)| FoldRow {
                fold,
                images: s.images,
                per_category: s.per_category.clone(),
            })
            .collect(),
    }
}

/// Training and validation corpora for one held-out fold.
///
/// Training gets every other fold's originals plus the supplied degraded
/// copies; validation holds only originals. A degraded copy whose original
/// sits in the validation fold is rejected.
pub fn select_training_view(
    data: &AnnotationSet,
    plan: &FoldPlan,
    val_fold: usize,
    augmented: Option<&AnnotationSet>,
) -> Result<(AnnotationSet, AnnotationSet)> {
    if val_fold >= plan.k {
        return Err(Error::FoldOutOfRange {
            val_fold,
            k: plan.k,
        });
    }
    for img in data.images() {
        if plan.fold_of(img.id).is_none() {
            return Err(Error::UnassignedImage { image_id: img.id });
        }
    }
    let train = data.subset(|img| plan.fold_of(img.id) != Some(val_fold));
    let val = data.subset(|img| plan.fold_of(img.id) == Some(val_fold));
    let Some(aug) = augmented else {
        return Ok((train, val));
    };
    let by_image = aug.annotations_by_image();
    for img in aug.images() {
        let original = img
            .provenance
            .or_else(|| by_image.get(&img.id).and_then(|anns| anns[0].provenance))
            .ok_or(Error::MissingProvenance(img.id))?;
        let fold = plan
            .fold_of(original)
            .ok_or(Error::UnknownImage(original))?;
        if fold == val_fold {
            return Err(Error::ValidationLeak {
                augmented_id: img.id,
                original_id: original,
                val_fold,
            });
        }
    }
    Ok((train.merge(aug)?, val))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Annotation, ImageInfo, Segmentation};
    use crate::mask::RleJson;

    fn rle() -> Segmentation {
        Segmentation::Rle(RleJson {
            size: [2, 2],
            counts: vec![0, 4],
        })
    }

    fn image(id: u64, provenance: Option<u64>) -> ImageInfo {
        ImageInfo {
            id,
            file_name: format!("{id}.png"),
            height: 2,
            width: 2,
            provenance,
        }
    }

    /// `n` images each carrying one paragraph and one text box.
    fn balanced(n: u64) -> AnnotationSet {
        let images = (0..n).map(|i| image(i, None)).collect();
        let annotations = (0..n)
            .flat_map(|i| {
                [1, 2].map(|c| Annotation {
                    id: i * 10 + c,
                    image_id: i,
                    category_id: c,
                    segmentation: rle(),
                    provenance: None,
                })
            })
            .collect();
        AnnotationSet::new(images, AnnotationSet::layout_categories(), annotations).unwrap()
    }

    fn augmented_copies(data: &AnnotationSet, ids: &[u64]) -> AnnotationSet {
        let images = ids.iter().map(|&i| image(1000 + i, Some(i))).collect();
        let annotations = data
            .annotations()
            .iter()
            .filter(|a| ids.contains(&a.image_id))
            .map(|a| Annotation {
                id: a.id + 100_000,
                image_id: a.image_id + 1000,
                provenance: Some(a.image_id),
                ..a.clone()
            })
            .collect();
        AnnotationSet::new(images, data.categories().to_vec(), annotations).unwrap()
    }

    #[test]
    fn balanced_corpus_gives_equal_folds() {
        let plan = stratified_group_kfold(&balanced(8), 4, 3).unwrap();
        for s in plan.stats() {
            assert_eq!(s.images, 2);
            assert_eq!(s.per_category, vec![2, 2, 0, 0]);
        }
        let report = fold_report(&plan);
        assert_eq!(report.rows.len(), 4);
        for row in &report.rows {
            assert_eq!((row.images, row.per_category.clone()), (2, vec![2, 2, 0, 0]));
        }
    }

    #[test]
    fn too_many_folds() {
        assert!(matches!(
            stratified_group_kfold(&balanced(3), 5, 0),
            Err(Error::InvalidFoldCount { k: 5, images: 3 })
        ));
        assert!(stratified_group_kfold(&balanced(3), 1, 0).is_err());
    }

    #[test]
    fn report_totals_match_corpus() {
        let data = balanced(13);
        let plan = stratified_group_kfold(&data, 4, 9).unwrap();
        let report = fold_report(&plan);
        assert!(report.rows.iter().all(|r| r.images > 0));
        let total = report.totals();
        assert_eq!(total.images, 13);
        assert_eq!(total.per_category, vec![13, 13, 0, 0]);
    }

    #[test]
    fn no_empty_fold_with_minimal_images() {
        let data = balanced(4);
        let plan = stratified_group_kfold(&data, 4, 1).unwrap();
        assert!(plan.stats().iter().all(|s| s.images == 1));
    }

    #[test]
    fn plan_json_round_trip() {
        let data = balanced(8);
        let plan = stratified_group_kfold(&data, 4, 7).unwrap();
        let text = plan.to_json();
        assert!(text.contains("\"assignment\""));
        assert_eq!(FoldPlan::from_json(&text, &data).unwrap(), plan);
    }

    #[test]
    fn training_view_without_augmentation() {
        let data = balanced(8);
        let plan = stratified_group_kfold(&data, 4, 7).unwrap();
        let (train, val) = select_training_view(&data, &plan, 0, None).unwrap();
        assert_eq!(val.images().len(), 2);
        assert_eq!(train.images().len(), 6);
        assert!(train.images().iter().all(|i| plan.fold_of(i.id) != Some(0)));
        assert!(val.images().iter().all(|i| plan.fold_of(i.id) == Some(0)));
    }

    #[test]
    fn augmented_copy_of_validation_image_is_a_leak() {
        let data = balanced(8);
        let plan = stratified_group_kfold(&data, 4, 7).unwrap();
        let leaked = plan.images_in(0)[0];
        let aug = augmented_copies(&data, &[leaked]);
        assert!(matches!(
            select_training_view(&data, &plan, 0, Some(&aug)),
            Err(Error::ValidationLeak { original_id, .. }) if original_id == leaked
        ));
    }

    #[test]
    fn augmented_training_view_doubles_train_folds() {
        let data = balanced(12);
        let plan = stratified_group_kfold(&data, 4, 7).unwrap();
        let train_ids: Vec<u64> = [0, 1, 3].iter().flat_map(|&f| plan.images_in(f)).collect();
        let aug = augmented_copies(&data, &train_ids);
        let (train, val) = select_training_view(&data, &plan, 2, Some(&aug)).unwrap();
        assert_eq!(train.images().len(), 2 * train_ids.len());
        assert_eq!(val.images().len(), plan.images_in(2).len());
        assert!(val.images().iter().all(|i| i.provenance.is_none()));
    }

    #[test]
    fn augmented_without_provenance_is_rejected() {
        let data = balanced(8);
        let plan = stratified_group_kfold(&data, 4, 7).unwrap();
        let aug = AnnotationSet::new(
            vec![image(500, None)],
            data.categories().to_vec(),
            vec![],
        )
        .unwrap();
        assert!(matches!(
            select_training_view(&data, &plan, 1, Some(&aug)),
            Err(Error::MissingProvenance(500))
        ));
    }
}
