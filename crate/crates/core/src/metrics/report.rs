use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::confusion::{confusion_matrix, ConfusionMatrix};
use super::dice::{evaluate_dice, DiceAggregation};
use super::map::mean_ap_50_95;
use super::TruthInstance;
use crate::dataset::{AnnotationSet, CategoryId, ImageId};
use crate::ensemble::{ClasswiseMaskSet, InstancePrediction, IouKind};
use crate::error::{Error, Result};

pub const CONFUSION_IOU: f64 = 0.5;
pub const CONFUSION_CONFIDENCE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceSection {
    pub overall: f64,
    pub per_category: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSection {
    pub mask: f64,
    #[serde(rename = "box")]
    pub bbox: f64,
    pub per_category_mask: BTreeMap<String, f64>,
    pub per_category_box: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionSection {
    pub labels: Vec<String>,
    /// Column-normalized, row-major: `matrix[predicted][true]`.
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dice: DiceSection,
    pub map50_95: MapSection,
    pub confusion: ConfusionSection,
}

fn named(truth: &AnnotationSet, scores: &BTreeMap<CategoryId, f64>) -> BTreeMap<String, f64> {
    scores
        .iter()
        .map(|(id, v)| {
            let name = truth.category_name(*id).map_or_else(|| id.to_string(), str::to_owned);
            (name, *v)
        })
        .collect()
}

impl MetricsReport {
    /// Dice on the classwise masks, mAP50-95 for masks and boxes on the
    /// instances, and the confusion matrix at IoU 0.5 and confidence 0.25
    /// using mask IoU.
    pub fn evaluate(
        instances: &BTreeMap<ImageId, Vec<InstancePrediction>>,
        classwise: &[ClasswiseMaskSet],
        truth: &AnnotationSet,
    ) -> Result<Self> {
        let truths = TruthInstance::from_annotations(truth)?;
        let dice = evaluate_dice(classwise, truth, DiceAggregation::Macro)?;
        let mask = mean_ap_50_95(instances, &truths, IouKind::Mask)?;
        let bbox = mean_ap_50_95(instances, &truths, IouKind::Box)?;
        let confusion = confusion_matrix(
            instances,
            &truths,
            truth.categories(),
            CONFUSION_IOU,
            CONFUSION_CONFIDENCE,
            IouKind::Mask,
        )?;
        Ok(MetricsReport {
            dice: DiceSection {
                overall: dice.overall,
                per_category: named(truth, &dice.per_category),
            },
            map50_95: MapSection {
                mask: mask.map,
                bbox: bbox.map,
                per_category_mask: named(truth, &mask.per_category),
                per_category_box: named(truth, &bbox.per_category),
            },
            confusion: ConfusionSection::from(&confusion),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("metrics report", e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("metrics report", e))
    }

    /// The normalized confusion matrix as CSV.
    pub fn confusion_csv(&self) -> String {
        let mut out = format!("predicted\\true,{}\n", self.confusion.labels.join(","));
        for (label, row) in self.confusion.labels.iter().zip(&self.confusion.matrix) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            out.push_str(&format!("{label},{}\n", cells.join(",")));
        }
        out
    }
}

impl From<&ConfusionMatrix> for ConfusionSection {
    fn from(m: &ConfusionMatrix) -> Self {
        ConfusionSection {
            labels: m.labels.clone(),
            matrix: m.normalized(),
        }
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<14}{:>10}{:>12}{:>12}", "category", "dice", "AP mask", "AP box")?;
        for (name, d) in &self.dice.per_category {
            let ap = |m: &BTreeMap<String, f64>| {
                m.get(name).map_or_else(|| "-".to_owned(), |v| format!("{v:.4}"))
            };
            writeln!(
                f,
                "{:<14}{:>10.4}{:>12}{:>12}",
                name,
                d,
                ap(&self.map50_95.per_category_mask),
                ap(&self.map50_95.per_category_box)
            )?;
        }
        writeln!(
            f,
            "{:<14}{:>10.4}{:>12.4}{:>12.4}",
            "overall", self.dice.overall, self.map50_95.mask, self.map50_95.bbox
        )?;
        writeln!(f)?;
        writeln!(f, "confusion (rows predicted, columns true)")?;
        write!(f, "{:<14}", "")?;
        for l in &self.confusion.labels {
            write!(f, "{:>12}", l)?;
        }
        writeln!(f)?;
        for (l, row) in self.confusion.labels.iter().zip(&self.confusion.matrix) {
            write!(f, "{:<14}", l)?;
            for v in row {
                write!(f, "{:>12.3}", v)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Elementwise `a - b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDelta {
    pub dice: DiceSection,
    pub map50_95: MapSection,
    pub confusion: ConfusionSection,
}

impl ReportDelta {
    pub fn is_zero(&self) -> bool {
        let zero = |m: &BTreeMap<String, f64>| m.values().all(|v| *v == 0.0);
        self.dice.overall == 0.0
            && zero(&self.dice.per_category)
            && self.map50_95.mask == 0.0
            && self.map50_95.bbox == 0.0
            && zero(&self.map50_95.per_category_mask)
            && zero(&self.map50_95.per_category_box)
            && self.confusion.matrix.iter().flatten().all(|v| *v == 0.0)
    }
}

impl fmt::Display for ReportDelta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<14}{:>10}{:>12}{:>12}", "category", "Δdice", "ΔAP mask", "ΔAP box")?;
        for (name, d) in &self.dice.per_category {
            let ap = |m: &BTreeMap<String, f64>| m.get(name).copied().unwrap_or(0.0);
            writeln!(
                f,
                "{:<14}{:>+10.4}{:>+12.4}{:>+12.4}",
                name,
                d,
                ap(&self.map50_95.per_category_mask),
                ap(&self.map50_95.per_category_box)
            )?;
        }
        writeln!(
            f,
            "{:<14}{:>+10.4}{:>+12.4}{:>+12.4}",
            "overall", self.dice.overall, self.map50_95.mask, self.map50_95.bbox
        )
    }
}

fn diff_maps(
    what: &str,
    a: &BTreeMap<String, f64>,
    b: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, f64>> {
    if !a.keys().eq(b.keys()) {
        return Err(Error::ShapeMismatch(format!(
            "{what}: categories {:?} vs {:?}",
            a.keys().collect::<Vec<_>>(),
            b.keys().collect::<Vec<_>>()
        )));
    }
    Ok(a.iter().map(|(k, v)| (k.clone(), v - b[k])).collect())
}

pub fn compare_reports(a: &MetricsReport, b: &MetricsReport) -> Result<ReportDelta> {
    if a.confusion.labels != b.confusion.labels {
        return Err(Error::ShapeMismatch(format!(
            "confusion labels {:?} vs {:?}",
            a.confusion.labels, b.confusion.labels
        )));
    }
    let matrix = a
        .confusion
        .matrix
        .iter()
        .zip(&b.confusion.matrix)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x - y).collect())
        .collect();
    Ok(ReportDelta {
        dice: DiceSection {
            overall: a.dice.overall - b.dice.overall,
            per_category: diff_maps("dice", &a.dice.per_category, &b.dice.per_category)?,
        },
        map50_95: MapSection {
            mask: a.map50_95.mask - b.map50_95.mask,
            bbox: a.map50_95.bbox - b.map50_95.bbox,
            per_category_mask: diff_maps(
                "mask AP",
                &a.map50_95.per_category_mask,
                &b.map50_95.per_category_mask,
            )?,
            per_category_box: diff_maps(
                "box AP",
                &a.map50_95.per_category_box,
                &b.map50_95.per_category_box,
            )?,
        },
        confusion: ConfusionSection {
            labels: a.confusion.labels.clone(),
            matrix,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(dice: f64, cats: &[&str]) -> MetricsReport {
        let per: BTreeMap<String, f64> = cats.iter().map(|c| (c.to_string(), dice)).collect();
        let mut labels: Vec<String> = cats.iter().map(|c| c.to_string()).collect();
        labels.push("background".into());
        let n = labels.len();
        MetricsReport {
            dice: DiceSection {
                overall: dice,
                per_category: per.clone(),
            },
            map50_95: MapSection {
                mask: 0.5,
                bbox: 0.6,
                per_category_mask: per.clone(),
                per_category_box: per,
            },
            confusion: ConfusionSection {
                labels,
                matrix: vec![vec![0.0; n]; n],
            },
        }
    }

    #[test]
    fn self_comparison_is_zero() {
        let r = report(0.9, &["paragraph", "table"]);
        assert!(compare_reports(&r, &r).unwrap().is_zero());
    }

    #[test]
    fn dice_delta() {
        let d = compare_reports(&report(0.9, &["table"]), &report(0.8, &["table"])).unwrap();
        assert!((d.dice.overall - 0.1).abs() < 1e-12);
    }

    #[test]
    fn mismatched_categories_error() {
        let r = compare_reports(&report(0.9, &["table"]), &report(0.9, &["image"]));
        assert!(matches!(r, Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn json_key_names() {
        let v: serde_json::Value =
            serde_json::from_str(&report(0.9, &["table"]).to_json().unwrap()).unwrap();
        assert_eq!(v["dice"]["overall"], 0.9);
        assert_eq!(v["dice"]["per_category"]["table"], 0.9);
        assert_eq!(v["map50_95"]["mask"], 0.5);
        assert_eq!(v["map50_95"]["box"], 0.6);
        assert_eq!(v["confusion"]["labels"][1], "background");
        assert!(v["confusion"]["matrix"][1].is_array());
    }
}
