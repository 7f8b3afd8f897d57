//! Bayesian optimization of the (confidence, IoU) threshold pair.

mod acquisition;
mod gp;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{AnnotationSet, CategoryId, ImageId};
use crate::ensemble::{
    classwise_union, fuse_classwise, fuse_instancewise, EnsembleConfig, ImageGrid, IouKind,
    PredictionBundle,
};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_dice, mean_ap_50_95, DiceAggregation, TruthInstance};

pub use acquisition::{expected_improvement, latin_hypercube, shifted_halton, EXPLORATION, SCAN_POINTS};
pub use gp::{gp_fit, matern52, GpHyperparameters, GpPosterior, NOISE_FLOOR};

pub const INITIAL_DESIGN: usize = 8;
pub const DEFAULT_BUDGET: usize = 40;
/// Points closer than this in every coordinate count as the same point.
pub const DUPLICATE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPair {
    pub confidence: f64,
    pub iou: f64,
}

impl ThresholdPair {
    pub fn new(confidence: f64, iou: f64) -> Result<Self> {
        for (name, v) in [("confidence", confidence), ("iou", iou)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} threshold {v} outside [0, 1]")));
            }
        }
        Ok(ThresholdPair { confidence, iou })
    }

    fn from_point(p: [f64; 2]) -> Self {
        ThresholdPair {
            confidence: p[0],
            iou: p[1],
        }
    }

    pub fn as_point(&self) -> [f64; 2] {
        [self.confidence, self.iou]
    }

    /// `base` with these thresholds substituted.
    pub fn apply(&self, base: &EnsembleConfig) -> EnsembleConfig {
        EnsembleConfig {
            confidence_threshold: self.confidence,
            iou_threshold: self.iou,
            ..*base
        }
    }
}

/// One objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub confidence: f64,
    pub iou: f64,
    pub objective: f64,
    pub iteration: usize,
}

impl TracePoint {
    pub fn thresholds(&self) -> ThresholdPair {
        ThresholdPair::from_point([self.confidence, self.iou])
    }
}

#[derive(Debug, Clone)]
pub struct TunerState {
    seed: u64,
    budget: usize,
    trace: Vec<TracePoint>,
    hyperparameters: Option<GpHyperparameters>,
}

impl TunerState {
    pub fn new(seed: u64, budget: usize) -> Result<Self> {
        if budget < INITIAL_DESIGN {
            return Err(Error::InvalidConfig(format!(
                "budget {budget} is below the initial design of {INITIAL_DESIGN}"
            )));
        }
        Ok(TunerState {
            seed,
            budget,
            trace: Vec::new(),
            hyperparameters: None,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn trace(&self) -> &[TracePoint] {
        &self.trace
    }

    /// Surrogate hyperparameters from the latest fit, if any.
    pub fn hyperparameters(&self) -> Option<&GpHyperparameters> {
        self.hyperparameters.as_ref()
    }

    /// Highest objective so far; the earliest wins ties.
    pub fn best(&self) -> Option<&TracePoint> {
        self.trace
            .iter()
            .reduce(|a, b| if b.objective > a.objective { b } else { a })
    }

    pub fn is_evaluated(&self, p: ThresholdPair) -> bool {
        self.trace.iter().any(|t| {
            (t.confidence - p.confidence).abs() < DUPLICATE_TOLERANCE
                && (t.iou - p.iou).abs() < DUPLICATE_TOLERANCE
        })
    }

    pub fn record(&mut self, p: ThresholdPair, objective: f64) -> Result<()> {
        let iteration = self.trace.len();
        if iteration >= self.budget {
            return Err(Error::BudgetExhausted(self.budget));
        }
        if !objective.is_finite() {
            return Err(Error::Objective {
                iteration,
                message: format!("non-finite value {objective}"),
            });
        }
        if self.is_evaluated(p) {
            return Err(Error::InvalidConfig(format!(
                "({}, {}) was already evaluated",
                p.confidence, p.iou
            )));
        }
        self.trace.push(TracePoint {
            confidence: p.confidence,
            iou: p.iou,
            objective,
            iteration,
        });
        Ok(())
    }

    pub fn trace_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.trace).map_err(|e| Error::json("tuner trace", e))
    }
}

/// The next point to evaluate: the seeded Latin-hypercube design first, then
/// the expected-improvement maximizer of a freshly fitted surrogate.
pub fn propose_next(state: &mut TunerState) -> Result<ThresholdPair> {
    let n = state.trace.len();
    if n >= state.budget {
        return Err(Error::BudgetExhausted(state.budget));
    }
    let candidates = if n < INITIAL_DESIGN {
        latin_hypercube(INITIAL_DESIGN, state.seed)
            .into_iter()
            .skip(n)
            .collect()
    } else {
        let points: Vec<([f64; 2], f64)> =
            state.trace.iter().map(|t| ([t.confidence, t.iou], t.objective)).collect();
        let gp = gp_fit(&points, state.hyperparameters.as_ref())?;
        state.hyperparameters = Some(*gp.hyperparameters());
        let best = state.best().map_or(0.0, |b| b.objective);
        let mut rng = ChaCha8Rng::seed_from_u64(state.seed);
        rng.set_stream(n as u64);
        acquisition::ranked_candidates(&gp, best, &mut rng)
    };
    candidates
        .into_iter()
        .map(ThresholdPair::from_point)
        .find(|p| !state.is_evaluated(*p))
        .ok_or_else(|| Error::InvalidConfig("no unevaluated candidate left".into()))
}

/// Spends the remaining budget on `objective` and returns the best point.
///
/// On failure the trace evaluated so far stays in `state`.
pub fn tune_with<F>(state: &mut TunerState, mut objective: F) -> Result<ThresholdPair>
where
    F: FnMut(ThresholdPair) -> Result<f64>,
{
    while state.trace.len() < state.budget {
        let iteration = state.trace.len();
        let p = propose_next(state)?;
        let value = objective(p).map_err(|e| Error::Objective {
            iteration,
            message: e.to_string(),
        })?;
        state.record(p, value)?;
    }
    state
        .best()
        .map(TracePoint::thresholds)
        .ok_or(Error::BudgetExhausted(state.budget))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// Overall dice of the voted classwise masks; the IoU threshold has no effect.
    #[default]
    ClasswiseDice,
    /// Overall dice of the per-category union of NMS survivors.
    InstanceDice,
    /// Mask mAP50-95 of the NMS survivors.
    InstanceMap,
}

impl std::str::FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classwise_dice" | "dice" => Ok(ObjectiveKind::ClasswiseDice),
            "instance_dice" => Ok(ObjectiveKind::InstanceDice),
            "instance_map" | "map" => Ok(ObjectiveKind::InstanceMap),
            other => Err(Error::InvalidConfig(format!("unknown objective {other:?}"))),
        }
    }
}

/// Validation score of the ensemble as a function of its thresholds.
pub struct Objective<'a> {
    bundles: &'a [PredictionBundle],
    truth: &'a AnnotationSet,
    kind: ObjectiveKind,
    base: EnsembleConfig,
    grids: Vec<ImageGrid>,
    categories: Vec<CategoryId>,
    truths: BTreeMap<ImageId, Vec<TruthInstance>>,
}

impl<'a> Objective<'a> {
    pub fn new(
        bundles: &'a [PredictionBundle],
        truth: &'a AnnotationSet,
        kind: ObjectiveKind,
        base: EnsembleConfig,
    ) -> Result<Self> {
        let truths = match kind {
            ObjectiveKind::InstanceMap => TruthInstance::from_annotations(truth)?,
            _ => BTreeMap::new(),
        };
        Ok(Objective {
            bundles,
            truth,
            kind,
            base,
            grids: ImageGrid::all(truth),
            categories: truth.categories().iter().map(|c| c.id).collect(),
            truths,
        })
    }

    pub fn evaluate(&self, t: ThresholdPair) -> Result<f64> {
        let config = t.apply(&self.base);
        match self.kind {
            ObjectiveKind::ClasswiseDice => {
                let fused = fuse_classwise(self.bundles, &config, &self.grids)?;
                Ok(evaluate_dice(&fused, self.truth, DiceAggregation::Macro)?.overall)
            }
            ObjectiveKind::InstanceDice => {
                let kept = fuse_instancewise(self.bundles, &config)?;
                let fused = classwise_union(&kept, &self.grids, &self.categories)?;
                Ok(evaluate_dice(&fused, self.truth, DiceAggregation::Macro)?.overall)
            }
            ObjectiveKind::InstanceMap => {
                let kept = fuse_instancewise(self.bundles, &config)?;
                Ok(mean_ap_50_95(&kept, &self.truths, IouKind::Mask)?.map)
            }
        }
    }
}

/// Classwise dice of the default ensemble at `thresholds`.
pub fn evaluate_objective(
    thresholds: ThresholdPair,
    bundles: &[PredictionBundle],
    truth: &AnnotationSet,
) -> Result<f64> {
    Objective::new(bundles, truth, ObjectiveKind::ClasswiseDice, EnsembleConfig::default())?
        .evaluate(thresholds)
}

/// Tunes the thresholds of `base` on the validation set `truth`.
pub fn tune(
    state: &mut TunerState,
    bundles: &[PredictionBundle],
    truth: &AnnotationSet,
    kind: ObjectiveKind,
    base: &EnsembleConfig,
) -> Result<ThresholdPair> {
    let objective = Objective::new(bundles, truth, kind, *base)?;
    tune_with(state, |t| objective.evaluate(t))
}
