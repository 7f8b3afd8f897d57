//! The whole pipeline on the bundled fixture: split, degrade the training
//! folds, fuse the five bundles, tune and evaluate on the validation fold.
//!
//! `cargo run --example end_to_end [-- <out dir>]`

use std::path::{Path, PathBuf};

use layout_ensemble::dataset::{
    fold_report, load_annotations, select_training_view, stratified_group_kfold,
};
use layout_ensemble::degrade::{degrade_fold, DegradationConfig, FreshIds};
use layout_ensemble::ensemble::{
    fuse_classwise, fuse_instancewise, read_bundle, EnsembleConfig, ImageGrid, PredictionBundle,
};
use layout_ensemble::metrics::MetricsReport;
use layout_ensemble::tuner::{tune, ObjectiveKind, TunerState};

fn main() -> layout_ensemble::Result<()> {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("layout-ensemble-end-to-end"));

    let data = load_annotations(fixture.join("annotations.json"))?;
    let plan = stratified_group_kfold(&data, 4, 7)?;
    print!("{}", fold_report(&plan));

    let ids = FreshIds::after(&data);
    let mut augmented = None;
    for fold in 1..plan.k() {
        let part = data.subset(|img| plan.fold_of(img.id) == Some(fold));
        let cfg = DegradationConfig { seed: 7, ..Default::default() };
        let done = degrade_fold(&part, &fixture.join("images"), &cfg, &out.join(format!("fold_{fold}")), ids)?;
        augmented = Some(match augmented {
            None => done.annotations,
            Some(acc) => done.annotations.merge(&acc)?,
        });
    }
    let (train, val) = select_training_view(&data, &plan, 0, augmented.as_ref())?;
    println!("train {} images (with degraded copies), validation {}", train.images().len(), val.images().len());

    let bundles: Vec<PredictionBundle> = (0..5)
        .map(|m| read_bundle(&fixture.join(format!("bundles/model_{m}.json"))))
        .collect::<layout_ensemble::Result<_>>()?;
    let on_val: Vec<PredictionBundle> = bundles
        .iter()
        .map(|b| PredictionBundle {
            model_id: b.model_id.clone(),
            predictions: b
                .predictions
                .iter()
                .filter(|p| val.image(p.image_id()).is_some())
                .cloned()
                .collect(),
        })
        .collect();

    let mut state = TunerState::new(7, 16)?;
    let best = tune(&mut state, &on_val, &val, ObjectiveKind::ClasswiseDice, &EnsembleConfig::default())?;
    println!("tuned thresholds ({:.3}, {:.3})", best.confidence, best.iou);

    let config = best.apply(&EnsembleConfig::default());
    let classwise = fuse_classwise(&on_val, &config, &ImageGrid::all(&val))?;
    let instances = fuse_instancewise(&on_val, &config)?;
    print!("{}", MetricsReport::evaluate(&instances, &classwise, &val)?);
    Ok(())
}
