//! Command-line front end: `split`, `degrade`, `fuse`, `evaluate` and `tune`.
//!
//! Every command accepts `--config <file.json>` holding a [`PipelineConfig`];
//! flags given on the command line win over the file.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::dataset::{fold_report, load_annotations, stratified_group_kfold, AnnotationSet, FoldPlan, ImageId};
use crate::degrade::{degrade_fold, DegradationConfig, FreshIds, ManifestEntry};
use crate::ensemble::{
    classwise_union, fuse_classwise, fuse_instancewise, read_bundle, read_submission,
    submission_csv, write_classwise, write_instances, EnsembleConfig, ImageGrid, InstancePrediction,
    IouKind, PredictionBundle,
};
use crate::metrics::MetricsReport;
use crate::tuner::{tune, ObjectiveKind, TunerState, DEFAULT_BUDGET};

#[derive(Debug, Parser)]
#[command(name = "layout-ensemble", version, about = "Fold splitting, degradation, mask fusion, evaluation and threshold tuning for document-layout segmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Partition images into stratified, group-disjoint folds.
    Split(SplitArgs),
    /// Write degraded copies of every image, fold by fold.
    Degrade(DegradeArgs),
    /// Fuse prediction bundles into classwise masks, instances and a submission.
    Fuse(FuseArgs),
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Search the confidence and IoU thresholds with Bayesian optimization.
    Tune(TuneArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// COCO-style annotation file.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Number of folds [default: 4].
    #[arg(long)]
    pub k: Option<usize>,
    /// Shuffle seed; required here or in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for folds.json and fold_report.txt.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON pipeline config; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DegradeArgs {
    /// COCO-style annotation file.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Directory holding the page images.
    #[arg(long)]
    pub images: PathBuf,
    /// Fold plan from `split`; without it all images form a single group.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Degradation seed; required here or in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for degraded images, annotations and manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON pipeline config; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnsembleFlags {
    /// Confidence threshold, inclusive [default: 0.25].
    #[arg(long)]
    pub conf: Option<f64>,
    /// NMS IoU threshold [default: 0.7].
    #[arg(long)]
    pub iou: Option<f64>,
    /// Votes needed per pixel [default: half the models, rounded up].
    #[arg(long)]
    pub quorum: Option<usize>,
    /// Overlap used by NMS: box or mask [default: box].
    #[arg(long, value_parser = parse_iou_kind)]
    pub iou_kind: Option<IouKind>,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Per-model prediction bundles.
    #[arg(long, required = true, num_args = 1..)]
    pub bundles: Vec<PathBuf>,
    /// Ground truth whose images define the output grid; defaults to the
    /// images seen in the bundles.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[command(flatten)]
    pub ensemble: EnsembleFlags,
    /// Output directory for classwise.json, instances.json and submission.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON pipeline config; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Ground-truth annotation file.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Instance predictions in bundle format, scored for mAP and confusion.
    #[arg(long, num_args = 1..)]
    pub bundles: Vec<PathBuf>,
    /// Classwise masks for dice; defaults to the per-category union of the
    /// bundle instances.
    #[arg(long)]
    pub submission: Option<PathBuf>,
    /// Directory for metrics.json and confusion.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON pipeline config; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Per-model prediction bundles on the validation images.
    #[arg(long, required = true, num_args = 1..)]
    pub bundles: Vec<PathBuf>,
    /// Validation ground truth.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Tuner seed; required here or in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Objective evaluations, at least 8 [default: 40].
    #[arg(long)]
    pub budget: Option<usize>,
    /// classwise_dice, instance_dice or instance_map [default: classwise_dice].
    #[arg(long, value_parser = parse_objective)]
    pub objective: Option<ObjectiveKind>,
    #[command(flatten)]
    pub ensemble: EnsembleFlags,
    /// Output directory for trace.json and ensemble.json.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON pipeline config; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_iou_kind(s: &str) -> Result<IouKind, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

fn parse_objective(s: &str) -> Result<ObjectiveKind, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

/// Settings shared by all commands; every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub k: Option<usize>,
    pub seed: Option<u64>,
    /// The seed inside this section is ignored in favour of the resolved seed.
    pub degradation: Option<DegradationConfig>,
    pub ensemble: Option<EnsembleConfig>,
    pub budget: Option<usize>,
    pub objective: Option<ObjectiveKind>,
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    fn seed(&self, flag: Option<u64>) -> anyhow::Result<u64> {
        flag.or(self.seed)
            .context("a seed is required: pass --seed or set \"seed\" in the config")
    }

    fn ensemble(&self, flags: &EnsembleFlags) -> anyhow::Result<EnsembleConfig> {
        let mut cfg = self.ensemble.unwrap_or_default();
        if let Some(v) = flags.conf {
            cfg.confidence_threshold = v;
        }
        if let Some(v) = flags.iou {
            cfg.iou_threshold = v;
        }
        if let Some(v) = flags.quorum {
            cfg.vote_quorum = Some(v);
        }
        if let Some(v) = flags.iou_kind {
            cfg.iou_kind = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Exclusive claim on an output directory, released on drop.
struct OutputLock(PathBuf);

impl OutputLock {
    fn acquire(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(".layout-ensemble.lock");
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .with_context(|| format!("{} is locked by another run ({})", dir.display(), path.display()))?;
        Ok(OutputLock(path))
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn require_exists(paths: &[&Path]) -> anyhow::Result<()> {
    for p in paths {
        ensure!(p.exists(), "{} does not exist", p.display());
    }
    Ok(())
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn load_truth(path: &Path) -> anyhow::Result<AnnotationSet> {
    load_annotations(path).with_context(|| format!("loading annotations {}", path.display()))
}

fn load_bundles(paths: &[PathBuf]) -> anyhow::Result<Vec<PredictionBundle>> {
    paths
        .iter()
        .map(|p| read_bundle(p).with_context(|| format!("reading bundle {}", p.display())))
        .collect()
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Split(a) => split(&a),
        Command::Degrade(a) => degrade(&a),
        Command::Fuse(a) => fuse(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Tune(a) => tune_cmd(&a),
    }
}

fn split(a: &SplitArgs) -> anyhow::Result<()> {
    require_exists(&[&a.annotations])?;
    let cfg = PipelineConfig::load(a.config.as_deref())?;
    let seed = cfg.seed(a.seed)?;
    let k = a.k.or(cfg.k).unwrap_or(4);
    let data = load_truth(&a.annotations)?;
    let plan = stratified_group_kfold(&data, k, seed)?;
    let report = fold_report(&plan).to_string();
    let _lock = OutputLock::acquire(&a.out)?;
    write(&a.out.join("folds.json"), plan.to_json())?;
    write(&a.out.join("fold_report.txt"), &report)?;
    print!("{report}");
    Ok(())
}

fn degrade(a: &DegradeArgs) -> anyhow::Result<()> {
    let mut paths: Vec<&Path> = vec![&a.annotations, &a.images];
    paths.extend(a.plan.as_deref());
    require_exists(&paths)?;
    let cfg = PipelineConfig::load(a.config.as_deref())?;
    let mut degradation = cfg.degradation.clone().unwrap_or_default();
    degradation.seed = cfg.seed(a.seed)?;
    let data = load_truth(&a.annotations)?;
    let groups: Vec<(String, AnnotationSet)> = match &a.plan {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let plan = FoldPlan::from_json(&text, &data)?;
            (0..plan.k())
                .map(|f| (format!("fold_{f}"), data.subset(|img| plan.fold_of(img.id) == Some(f))))
                .collect()
        }
        None => vec![("all".to_owned(), data.clone())],
    };

    let _lock = OutputLock::acquire(&a.out)?;
    let ids = FreshIds::after(&data);
    let mut augmented: Option<AnnotationSet> = None;
    let mut manifest: Vec<(String, ManifestEntry)> = Vec::new();
    let mut failures = Vec::new();
    for (name, group) in &groups {
        let dir = a.out.join(name);
        match degrade_fold(group, &a.images, &degradation, &dir, ids) {
            Ok(done) => {
                done.annotations.save(dir.join("annotations.json"))?;
                eprintln!("{name}: {} images degraded", done.manifest.len());
                manifest.extend(done.manifest.into_iter().map(|m| (name.clone(), m)));
                augmented = Some(match augmented {
                    None => done.annotations,
                    Some(acc) => acc.merge(&done.annotations)?,
                });
            }
            Err(e) => {
                eprintln!("{name}: {e}");
                failures.push(name.clone());
            }
        }
    }
    if let Some(all) = &augmented {
        write(&a.out.join("augmented.json"), all.to_json())?;
    }
    let rows: Vec<serde_json::Value> = manifest
        .iter()
        .map(|(group, m)| {
            let mut v = serde_json::to_value(m).expect("manifest entries serialize");
            v["group"] = group.as_str().into();
            v
        })
        .collect();
    write(&a.out.join("manifest.json"), serde_json::to_string_pretty(&rows)?)?;
    if !failures.is_empty() {
        bail!("degradation failed for {}", failures.join(", "));
    }
    Ok(())
}

fn fuse(a: &FuseArgs) -> anyhow::Result<()> {
    let mut paths: Vec<&Path> = a.bundles.iter().map(PathBuf::as_path).collect();
    paths.extend(a.annotations.as_deref());
    require_exists(&paths)?;
    let cfg = PipelineConfig::load(a.config.as_deref())?;
    let ensemble = cfg.ensemble(&a.ensemble)?;
    let bundles = load_bundles(&a.bundles)?;
    let grids = match &a.annotations {
        Some(p) => ImageGrid::all(&load_truth(p)?),
        None => ImageGrid::from_bundles(&bundles)?,
    };
    let classwise = fuse_classwise(&bundles, &ensemble, &grids)?;
    let instances = fuse_instancewise(&bundles, &ensemble)?;
    let _lock = OutputLock::acquire(&a.out)?;
    write(&a.out.join("classwise.json"), write_classwise(&classwise))?;
    write(&a.out.join("instances.json"), write_instances(&instances))?;
    write(&a.out.join("submission.csv"), submission_csv(&classwise))?;
    eprintln!(
        "fused {} bundles over {} images: {} instances kept",
        bundles.len(),
        grids.len(),
        instances.values().map(Vec::len).sum::<usize>()
    );
    Ok(())
}

fn evaluate(a: &EvaluateArgs) -> anyhow::Result<()> {
    let mut paths: Vec<&Path> = vec![&a.annotations];
    paths.extend(a.bundles.iter().map(PathBuf::as_path));
    paths.extend(a.submission.as_deref());
    require_exists(&paths)?;
    PipelineConfig::load(a.config.as_deref())?;
    let truth = load_truth(&a.annotations)?;
    let grids = ImageGrid::all(&truth);

    let mut instances: BTreeMap<ImageId, Vec<InstancePrediction>> = BTreeMap::new();
    for b in load_bundles(&a.bundles)? {
        for p in b.predictions {
            instances.entry(p.image_id()).or_default().push(p);
        }
    }
    let missing: Vec<ImageId> = instances
        .keys()
        .copied()
        .filter(|id| truth.image(*id).is_none())
        .collect();
    if let Some(first) = missing.first() {
        bail!(
            "{} predicted image ids are not in {} ({} images there); first missing: {first}",
            missing.len(),
            a.annotations.display(),
            truth.images().len()
        );
    }
    let classwise = match &a.submission {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            read_submission(&text, &grids).with_context(|| format!("parsing {}", p.display()))?
        }
        None => {
            let cats: Vec<_> = truth.categories().iter().map(|c| c.id).collect();
            classwise_union(&instances, &grids, &cats)?
        }
    };
    let report = MetricsReport::evaluate(&instances, &classwise, &truth)?;
    if let Some(out) = &a.out {
        let _lock = OutputLock::acquire(out)?;
        write(&out.join("metrics.json"), report.to_json()?)?;
        write(&out.join("confusion.csv"), report.confusion_csv())?;
    }
    print!("{report}");
    Ok(())
}

fn tune_cmd(a: &TuneArgs) -> anyhow::Result<()> {
    let mut paths: Vec<&Path> = vec![&a.annotations];
    paths.extend(a.bundles.iter().map(PathBuf::as_path));
    require_exists(&paths)?;
    let cfg = PipelineConfig::load(a.config.as_deref())?;
    let seed = cfg.seed(a.seed)?;
    let budget = a.budget.or(cfg.budget).unwrap_or(DEFAULT_BUDGET);
    let objective = a.objective.or(cfg.objective).unwrap_or_default();
    let base = cfg.ensemble(&a.ensemble)?;
    let truth = load_truth(&a.annotations)?;
    let bundles = load_bundles(&a.bundles)?;

    let _lock = OutputLock::acquire(&a.out)?;
    let mut state = TunerState::new(seed, budget)?;
    let outcome = tune(&mut state, &bundles, &truth, objective, &base);
    write(&a.out.join("trace.json"), state.trace_json()?)?;
    let best = outcome.context("tuning stopped; the partial trace was saved")?;
    let tuned = best.apply(&base);
    write(&a.out.join("ensemble.json"), serde_json::to_string_pretty(&tuned)?)?;
    let score = state.best().map_or(f64::NAN, |b| b.objective);
    println!(
        "best confidence {:.4} iou {:.4} objective {:.6} after {} evaluations",
        best.confidence,
        best.iou,
        score,
        state.trace().len()
    );
    Ok(())
}
