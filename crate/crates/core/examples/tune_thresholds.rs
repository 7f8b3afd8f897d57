//! Bayesian optimization of the confidence and IoU thresholds, first on an
//! analytic objective and then on the synthetic validation set.

use layout_ensemble::ensemble::EnsembleConfig;
use layout_ensemble::synthetic::{synthetic_corpus, SyntheticOptions};
use layout_ensemble::tuner::{tune, tune_with, ObjectiveKind, TunerState};

fn main() -> layout_ensemble::Result<()> {
    let mut quadratic = TunerState::new(1, 40)?;
    let best = tune_with(&mut quadratic, |t| {
        Ok(1.0 - (t.confidence - 0.3).powi(2) - (t.iou - 0.6).powi(2))
    })?;
    println!(
        "quadratic: best ({:.4}, {:.4}) value {:.6}",
        best.confidence,
        best.iou,
        quadratic.best().unwrap().objective
    );
    if let Some(h) = quadratic.hyperparameters() {
        println!("  length scales {:.3?}, noise {:.2e}", h.length_scales, h.noise_variance);
    }

    let corpus = synthetic_corpus(&SyntheticOptions::default())?;
    for kind in [ObjectiveKind::ClasswiseDice, ObjectiveKind::InstanceMap] {
        let mut state = TunerState::new(1, 24)?;
        let best = tune(&mut state, &corpus.bundles, &corpus.annotations, kind, &EnsembleConfig::default())?;
        println!(
            "{kind:?}: best ({:.3}, {:.3}) objective {:.4}",
            best.confidence,
            best.iou,
            state.best().unwrap().objective
        );
    }
    println!("last evaluations on the quadratic:\n{}", tail(&quadratic, 5));
    Ok(())
}

fn tail(state: &TunerState, n: usize) -> String {
    let trace = state.trace();
    trace[trace.len().saturating_sub(n)..]
        .iter()
        .map(|t| format!("{:>3} ({:.3}, {:.3}) -> {:.6}", t.iteration, t.confidence, t.iou, t.objective))
        .collect::<Vec<_>>()
        .join("\n")
}
