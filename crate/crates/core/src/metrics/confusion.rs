use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::matching::{match_instances, MatchMode};
use super::TruthInstance;
use crate::dataset::{Category, CategoryId, ImageId};
use crate::ensemble::{InstancePrediction, IouKind};
use crate::error::{Error, Result};

pub const BACKGROUND: &str = "background";

/// Rows are predicted labels, columns true labels; the last row and column
/// are background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    /// Each column divided by its sum; all-zero columns stay zero.
    pub fn normalized(&self) -> Vec<Vec<f64>> {
        let n = self.labels.len();
        let col_sums: Vec<u64> = (0..n).map(|j| (0..n).map(|i| self.counts[i][j]).sum()).collect();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| match col_sums[j] {
                        0 => 0.0,
                        s => self.counts[i][j] as f64 / s as f64,
                    })
                    .collect()
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("predicted\\true,{}\n", self.labels.join(","));
        for (label, row) in self.labels.iter().zip(self.normalized()) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            writeln!(out, "{label},{}", cells.join(",")).expect("writing to a String");
        }
        out
    }
}

/// Class-agnostic greedy matching of confident predictions. A matched pair
/// counts in (predicted class, true class); unmatched truth lands in the
/// background row, unmatched predictions in the background column.
pub fn confusion_matrix(
    preds: &BTreeMap<ImageId, Vec<InstancePrediction>>,
    truths: &BTreeMap<ImageId, Vec<TruthInstance>>,
    categories: &[Category],
    iou_threshold: f64,
    confidence_threshold: f64,
    kind: IouKind,
) -> Result<ConfusionMatrix> {
    if let Some(id) = preds.keys().find(|id| !truths.contains_key(id)) {
        return Err(Error::UnknownImage(*id));
    }
    let index: BTreeMap<CategoryId, usize> =
        categories.iter().enumerate().map(|(i, c)| (c.id, i)).collect();
    let lookup = |cat: CategoryId| {
        index.get(&cat).copied().ok_or_else(|| {
            Error::InvalidConfig(format!("category {cat} is not in the vocabulary"))
        })
    };
    let bg = categories.len();
    let mut counts = vec![vec![0u64; bg + 1]; bg + 1];
    for (id, image_truths) in truths {
        let mut confident: Vec<&InstancePrediction> = preds
            .get(id)
            .map(|v| v.iter().filter(|p| p.confidence() >= confidence_threshold).collect())
            .unwrap_or_default();
        confident.sort_by(|a, b| b.confidence().total_cmp(&a.confidence()));
        let m = match_instances(&confident, image_truths, iou_threshold, kind, MatchMode::AnyCategory)?;
        for &(pi, ti, _) in &m.pairs {
            counts[lookup(confident[pi].category_id())?][lookup(image_truths[ti].category_id)?] += 1;
        }
        for &ti in &m.unmatched_truths {
            counts[bg][lookup(image_truths[ti].category_id)?] += 1;
        }
        for &pi in &m.unmatched_predictions {
            counts[lookup(confident[pi].category_id())?][bg] += 1;
        }
    }
    let mut labels: Vec<String> = categories.iter().map(|c| c.name.clone()).collect();
    labels.push(BACKGROUND.into());
    Ok(ConfusionMatrix { labels, counts })
}
