//! Fuse five noisy model bundles by per-pixel voting and by class-agnostic
//! NMS, and compare the voted dice with each model alone.

use layout_ensemble::ensemble::{
    fuse_classwise, fuse_instancewise, submission_csv, EnsembleConfig, ImageGrid,
};
use layout_ensemble::metrics::{evaluate_dice, DiceAggregation};
use layout_ensemble::synthetic::{synthetic_corpus, SyntheticOptions};

fn main() -> layout_ensemble::Result<()> {
    let corpus = synthetic_corpus(&SyntheticOptions::default())?;
    let grids = ImageGrid::all(&corpus.annotations);
    let config = EnsembleConfig::default();

    for bundle in &corpus.bundles {
        let alone = fuse_classwise(std::slice::from_ref(bundle), &config, &grids)?;
        let dice = evaluate_dice(&alone, &corpus.annotations, DiceAggregation::Macro)?;
        println!("{:<10} dice {:.4}", bundle.model_id, dice.overall);
    }
    let voted = fuse_classwise(&corpus.bundles, &config, &grids)?;
    let dice = evaluate_dice(&voted, &corpus.annotations, DiceAggregation::Macro)?;
    println!("{:<10} dice {:.4}", "vote 3/5", dice.overall);

    let kept = fuse_instancewise(&corpus.bundles, &config)?;
    let pooled: usize = corpus.bundles.iter().map(|b| b.predictions.len()).sum();
    println!(
        "NMS at IoU {} kept {} of {pooled} pooled instances",
        config.iou_threshold,
        kept.values().map(Vec::len).sum::<usize>()
    );
    let csv = submission_csv(&voted);
    println!("submission: {} rows", csv.lines().count() - 1);
    Ok(())
}
