use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClasswiseMaskSet, ImageGrid, InstancePrediction, PredictionBundle};
use crate::dataset::{CategoryId, ImageId};
use crate::error::{Error, Result};
use crate::mask::{BinaryMask, RleJson};

pub const ENSEMBLE_MODEL_ID: &str = "ensemble";

/// One entry of a prediction bundle file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub image_id: ImageId,
    pub category_id: CategoryId,
    pub score: f64,
    pub segmentation: RleJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClasswiseRecord {
    pub image_id: ImageId,
    pub masks: BTreeMap<CategoryId, RleJson>,
}

/// Parses a bundle; records without a `model_id` get `default_model`.
pub fn parse_bundle(text: &str, context: &str, default_model: &str) -> Result<PredictionBundle> {
    let values: Vec<serde_json::Value> =
        serde_json::from_str(text).map_err(|e| Error::json(context, e))?;
    let schema = |index: usize, message: String| Error::Schema {
        context: context.to_owned(),
        index,
        message,
    };
    let mut predictions = Vec::with_capacity(values.len());
    for (index, value) in values.into_iter().enumerate() {
        let rec: PredictionRecord =
            serde_json::from_value(value).map_err(|e| schema(index, e.to_string()))?;
        let mask = BinaryMask::try_from(rec.segmentation).map_err(|e| schema(index, e.to_string()))?;
        let model = rec.model_id.as_deref().unwrap_or(default_model);
        let p = InstancePrediction::new(rec.image_id, rec.category_id, rec.score, mask, model)
            .map_err(|e| schema(index, e.to_string()))?;
        predictions.push(p);
    }
    Ok(PredictionBundle {
        model_id: default_model.to_owned(),
        predictions,
    })
}

/// Reads a bundle file; the model id defaults to the file stem.
pub fn read_bundle(path: &Path) -> Result<PredictionBundle> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    parse_bundle(&text, &path.display().to_string(), &stem)
}

fn json_lines<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let rows: Vec<String> = items
        .into_iter()
        .map(|r| serde_json::to_string(&r).expect("records always serialize"))
        .collect();
    if rows.is_empty() {
        return "[]\n".into();
    }
    format!("[\n{}\n]\n", rows.join(",\n"))
}

/// A bundle in its file format, keeping each prediction's model id.
pub fn write_bundle(bundle: &PredictionBundle) -> String {
    json_lines(bundle.predictions.iter().map(|p| PredictionRecord {
        image_id: p.image_id,
        category_id: p.category_id,
        score: p.confidence,
        segmentation: RleJson::from(&p.mask),
        model_id: Some(p.model_id.clone()),
    }))
}

/// Fused instances in bundle format, tagged with the `"ensemble"` model id.
pub fn write_instances(fused: &BTreeMap<ImageId, Vec<InstancePrediction>>) -> String {
    json_lines(fused.values().flatten().map(|p| PredictionRecord {
        image_id: p.image_id,
        category_id: p.category_id,
        score: p.confidence,
        segmentation: RleJson::from(&p.mask),
        model_id: Some(ENSEMBLE_MODEL_ID.into()),
    }))
}

/// `[{"image_id": .., "masks": {category_id: rle}}]`
pub fn write_classwise(sets: &[ClasswiseMaskSet]) -> String {
    json_lines(sets.iter().map(|s| ClasswiseRecord {
        image_id: s.image_id,
        masks: s.masks.iter().map(|(&c, m)| (c, RleJson::from(m))).collect(),
    }))
}

/// Submission CSV: a header, then `image_id,category_id,"c0 c1 ..."` per
/// image and category.
pub fn submission_csv(sets: &[ClasswiseMaskSet]) -> String {
    let mut out = String::from("image_id,category_id,counts\n");
    for set in sets {
        for (cat, mask) in &set.masks {
            let counts: Vec<String> = mask.counts().iter().map(u32::to_string).collect();
            writeln!(out, "{},{},\"{}\"", set.image_id, cat, counts.join(" "))
                .expect("writing to a String");
        }
    }
    out
}

/// Parses a submission, sizing masks from `grids`. The header row is optional.
pub fn read_submission(text: &str, grids: &[ImageGrid]) -> Result<Vec<ClasswiseMaskSet>> {
    let lookup: BTreeMap<ImageId, ImageGrid> = grids.iter().map(|g| (g.id, *g)).collect();
    let mut sets: BTreeMap<ImageId, ClasswiseMaskSet> = BTreeMap::new();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let schema = |index: usize, message: String| Error::Schema {
        context: "submission".into(),
        index,
        message,
    };
    let mut header = 0;
    for (record, row) in reader.records().enumerate() {
        let row = row.map_err(|e| schema(record, e.to_string()))?;
        if record == 0 && row.get(0).map(str::trim) == Some("image_id") {
            header = 1;
            continue;
        }
        // index among data rows
        let index = record - header;
        if row.len() != 3 {
            return Err(schema(index, format!("expected 3 fields, got {}", row.len())));
        }
        let image_id: ImageId = row[0].trim().parse().map_err(|e| schema(index, format!("image_id: {e}")))?;
        let category_id: CategoryId =
            row[1].trim().parse().map_err(|e| schema(index, format!("category_id: {e}")))?;
        let counts = row[2]
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<Vec<u32>, _>>()
            .map_err(|e| schema(index, format!("counts: {e}")))?;
        let grid = lookup.get(&image_id).ok_or(Error::UnknownImage(image_id))?;
        let mask = BinaryMask::from_counts(grid.height, grid.width, counts)
            .map_err(|e| schema(index, e.to_string()))?;
        sets.entry(image_id)
            .or_insert_with(|| ClasswiseMaskSet {
                image_id,
                height: grid.height,
                width: grid.width,
                masks: BTreeMap::new(),
            })
            .masks
            .insert(category_id, mask);
    }
    Ok(sets.into_values().collect())
}
