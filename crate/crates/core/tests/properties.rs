mod common;

use std::collections::{BTreeMap, BTreeSet};

use image::{GrayImage, Luma};
use layout_ensemble::dataset::{
    fold_report, stratified_group_kfold, Annotation, AnnotationSet, FoldPlan, ImageInfo, Segmentation,
};
use layout_ensemble::degrade::{
    apply_pipeline_keyed, morphological_close, morphological_open, pepper, salt, DegradationConfig,
};
use layout_ensemble::ensemble::{fuse_instancewise, overlap, EnsembleConfig, IouKind};
use layout_ensemble::metrics::{confusion_matrix, TruthInstance};
use layout_ensemble::synthetic::{layout_count_corpus, synthetic_corpus, SyntheticOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus_from_counts(counts: &[[usize; 4]]) -> AnnotationSet {
    let square = vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    for (i, per_cat) in counts.iter().enumerate() {
        let id = i as u64 + 1;
        images.push(ImageInfo { id, file_name: format!("{id}.png"), height: 4, width: 4, provenance: None });
        for (c, &n) in per_cat.iter().enumerate() {
            for _ in 0..n {
                annotations.push(Annotation {
                    id: annotations.len() as u64 + 1,
                    image_id: id,
                    category_id: c as u64 + 1,
                    segmentation: Segmentation::Polygons(vec![square.clone()]),
                    provenance: None,
                });
            }
        }
    }
    AnnotationSet::new(images, AnnotationSet::layout_categories(), annotations).unwrap()
}

fn counts_strategy() -> impl Strategy<Value = Vec<[usize; 4]>> {
    proptest::collection::vec(
        (0..6usize, 0..6usize, 0..2usize, 0..2usize).prop_map(|(a, b, c, d)| [a, b, c, d]),
        2..60,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn folds_partition_the_images(counts in counts_strategy(), k in 2..6usize, seed in any::<u64>()) {
        let data = corpus_from_counts(&counts);
        prop_assume!(k <= counts.len());
        let plan = stratified_group_kfold(&data, k, seed).unwrap();
        prop_assert_eq!(plan.assignment().len(), counts.len());
        prop_assert!(plan.assignment().values().all(|&f| f < k));
        let report = fold_report(&plan);
        prop_assert!(report.rows.iter().all(|r| r.images > 0));
        let totals = report.totals();
        prop_assert_eq!(totals.images, counts.len());
        for c in 0..4 {
            prop_assert_eq!(totals.per_category[c], counts.iter().map(|x| x[c]).sum::<usize>());
        }
        // stats agree with the assignment
        for (fold, row) in report.rows.iter().enumerate() {
            prop_assert_eq!(row.images, plan.images_in(fold).len());
        }
        prop_assert_eq!(&stratified_group_kfold(&data, k, seed).unwrap(), &plan);
        let back = FoldPlan::from_json(&plan.to_json(), &data).unwrap();
        prop_assert_eq!(back, plan);
    }

    #[test]
    fn open_and_close_are_idempotent(
        (w, h, pixels) in (1..20u32, 1..20u32).prop_flat_map(|(w, h)| {
            (Just(w), Just(h), proptest::collection::vec(any::<u8>(), (w * h) as usize))
        }),
        radius in 0..3usize,
    ) {
        let img = GrayImage::from_raw(w, h, pixels).unwrap();
        let opened = morphological_open(&img, radius);
        prop_assert_eq!(morphological_open(&opened, radius), opened.clone());
        let closed = morphological_close(&img, radius);
        prop_assert_eq!(morphological_close(&closed, radius), closed);
        // anti-extensive and extensive
        prop_assert!(opened.pixels().zip(img.pixels()).all(|(o, i)| o[0] <= i[0]));
        prop_assert!(morphological_close(&img, radius).pixels().zip(img.pixels()).all(|(c, i)| c[0] >= i[0]));
    }
}

#[test]
fn stratification_beats_random_assignment() {
    let data = layout_count_corpus(1000, 3).unwrap();
    let plan = stratified_group_kfold(&data, 4, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let random: BTreeMap<u64, usize> = data.images().iter().map(|i| (i.id, rng.gen_range(0..4))).collect();
    let random = FoldPlan::from_assignment(&data, 4, 3, random).unwrap();
    let spread = |p: &FoldPlan| -> Vec<f64> {
        let rows = fold_report(p).rows;
        (0..4)
            .map(|c| {
                let shares: Vec<f64> = rows
                    .iter()
                    .map(|r| r.per_category[c] as f64 / r.per_category.iter().sum::<usize>() as f64)
                    .collect();
                shares.iter().cloned().fold(f64::MIN, f64::max) - shares.iter().cloned().fold(f64::MAX, f64::min)
            })
            .collect()
    };
    for (s, r) in spread(&plan).iter().zip(spread(&random)) {
        assert!(*s <= r, "{s} > {r}");
    }
}

#[test]
fn balanced_input_gives_equal_folds() {
    let data = corpus_from_counts(&[[1, 1, 0, 0]; 8]);
    let plan = stratified_group_kfold(&data, 4, 0).unwrap();
    for row in fold_report(&plan).rows {
        assert_eq!((row.images, row.per_category.clone()), (2, vec![2, 2, 0, 0]));
    }
    assert!(stratified_group_kfold(&corpus_from_counts(&[[1, 0, 0, 0]; 3]), 5, 0).is_err());
}

fn gray(w: u32, h: u32, v: u8) -> GrayImage {
    GrayImage::from_pixel(w, h, Luma([v]))
}

/// Counts of flipped pixels lie within four binomial standard deviations.
#[test]
fn salt_and_pepper_counts_are_binomial() {
    let img = gray(64, 64, 128);
    let n: f64 = 64.0 * 64.0;
    for fraction in [0.01, 0.05, 0.2] {
        let sd = (n * fraction * (1.0 - fraction)).sqrt();
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = salt(&img, fraction, &mut rng).pixels().filter(|p| p[0] == 255).count() as f64;
            let p = pepper(&img, fraction, &mut rng).pixels().filter(|p| p[0] == 0).count() as f64;
            for got in [s, p] {
                assert!((got - n * fraction).abs() <= 4.0 * sd, "fraction {fraction} seed {seed}: {got}");
            }
        }
    }
}

#[test]
fn pipeline_is_byte_deterministic_and_keyed() {
    let page = &synthetic_corpus(&SyntheticOptions { images: 1, ..Default::default() }).unwrap().pages[0];
    let cfg = DegradationConfig { seed: 9, ..Default::default() };
    let a = apply_pipeline_keyed(page, &cfg, 4).unwrap();
    let b = apply_pipeline_keyed(page, &cfg, 4).unwrap();
    assert_eq!(a.image.as_raw(), b.image.as_raw());
    assert_eq!(a.applied, b.applied);
    let others: BTreeSet<Vec<u8>> = (0..8)
        .map(|key| apply_pipeline_keyed(page, &cfg, key).unwrap().image.into_raw())
        .collect();
    assert!(others.len() > 1);
}

#[test]
fn nms_survivors_form_an_antichain() {
    let corpus = synthetic_corpus(&SyntheticOptions::default()).unwrap();
    for kind in [IouKind::Box, IouKind::Mask] {
        let cfg = EnsembleConfig { iou_kind: kind, ..EnsembleConfig::default() };
        for kept in fuse_instancewise(&corpus.bundles, &cfg).unwrap().values() {
            for (i, a) in kept.iter().enumerate() {
                for b in &kept[i + 1..] {
                    assert!(overlap(a, b, kind).unwrap() < 0.7);
                }
            }
        }
    }
}

#[test]
fn confusion_columns_sum_to_one() {
    let corpus = synthetic_corpus(&SyntheticOptions::default()).unwrap();
    let truths = TruthInstance::from_annotations(&corpus.annotations).unwrap();
    for bundle in &corpus.bundles {
        let mut preds: BTreeMap<u64, Vec<_>> = BTreeMap::new();
        for p in &bundle.predictions {
            preds.entry(p.image_id()).or_default().push(p.clone());
        }
        let m = confusion_matrix(&preds, &truths, corpus.annotations.categories(), 0.5, 0.25, IouKind::Mask).unwrap();
        let n = m.labels.len();
        let norm = m.normalized();
        for (j, _) in m.labels.iter().enumerate() {
            let raw: u64 = m.counts.iter().map(|row| row[j]).sum();
            let sum: f64 = norm.iter().map(|row| row[j]).sum();
            if raw > 0 {
                assert!((sum - 1.0).abs() < 1e-9);
            } else {
                assert_eq!(sum, 0.0);
            }
        }
        assert_eq!(norm.len(), n);
    }
}
