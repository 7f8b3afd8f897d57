//! Score fused predictions: dice, mask and box mAP50-95 and the
//! background-aware confusion matrix, then diff against a single model.

use layout_ensemble::ensemble::{fuse_classwise, fuse_instancewise, EnsembleConfig, ImageGrid};
use layout_ensemble::metrics::{compare_reports, MetricsReport};
use layout_ensemble::synthetic::{synthetic_corpus, SyntheticOptions};

fn main() -> layout_ensemble::Result<()> {
    let corpus = synthetic_corpus(&SyntheticOptions::default())?;
    let truth = &corpus.annotations;
    let grids = ImageGrid::all(truth);
    let config = EnsembleConfig::default();

    let score = |bundles: &[_]| -> layout_ensemble::Result<MetricsReport> {
        let classwise = fuse_classwise(bundles, &config, &grids)?;
        let instances = fuse_instancewise(bundles, &config)?;
        MetricsReport::evaluate(&instances, &classwise, truth)
    };
    let ensemble = score(&corpus.bundles)?;
    let single = score(&corpus.bundles[..1])?;

    println!("ensemble\n{ensemble}");
    println!("ensemble minus model_0\n{}", compare_reports(&ensemble, &single)?);
    print!("{}", ensemble.confusion_csv());
    Ok(())
}
