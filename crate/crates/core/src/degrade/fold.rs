use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, Luma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{apply_pipeline_keyed, DegradationConfig, Effect};
use crate::dataset::{Annotation, AnnotationSet, ImageId, ImageInfo};
use crate::error::{Error, Result};

/// Offsets added to original ids to mint ids for degraded copies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreshIds {
    pub image_offset: u64,
    pub annotation_offset: u64,
}

impl FreshIds {
    /// Offsets just past the largest ids in `data`.
    pub fn after(data: &AnnotationSet) -> Self {
        FreshIds {
            image_offset: data.images().iter().map(|i| i.id).max().unwrap_or(0) + 1,
            annotation_offset: data.annotations().iter().map(|a| a.id).max().unwrap_or(0) + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub output: String,
    pub original: String,
    pub original_image_id: ImageId,
    pub effects: Vec<Effect>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct DegradedFold {
    pub annotations: AnnotationSet,
    pub manifest: Vec<ManifestEntry>,
}

/// BT.601 luma, rounded.
pub fn luma_from_rgb(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b))
        .round()
        .clamp(0.0, 255.0) as u8
}

/// Loads an image as 8-bit grayscale; color inputs go through BT.601 luma.
pub fn read_gray(path: &Path) -> Result<GrayImage> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(match img {
        DynamicImage::ImageLuma8(g) => g,
        other => {
            let rgb = other.to_rgb8();
            GrayImage::from_fn(rgb.width(), rgb.height(), |x, y| {
                let p = rgb.get_pixel(x, y);
                Luma([luma_from_rgb(p[0], p[1], p[2])])
            })
        }
    })
}

fn degraded_name(file_name: &str) -> String {
    let stem = Path::new(file_name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| file_name.to_owned());
    format!("{stem}_degraded.png")
}

fn degrade_one(
    img: &ImageInfo,
    images_dir: &Path,
    config: &DegradationConfig,
    output_dir: &Path,
) -> Result<ManifestEntry> {
    let src: PathBuf = images_dir.join(&img.file_name);
    if !src.exists() {
        return Err(Error::io(
            &src,
            std::io::Error::new(std::io::ErrorKind::NotFound, "image file not found"),
        ));
    }
    let gray = read_gray(&src)?;
    let out = apply_pipeline_keyed(&gray, config, img.id)?;
    let name = degraded_name(&img.file_name);
    let dst = output_dir.join(&name);
    out.image.save(&dst).map_err(|source| Error::Image {
        path: dst.clone(),
        source,
    })?;
    Ok(ManifestEntry {
        output: name,
        original: img.file_name.clone(),
        original_image_id: img.id,
        effects: out.applied,
        seed: config.seed,
    })
}

/// Writes a degraded copy of every image in `data` to `output_dir` and returns
/// the matching annotations: fresh ids, provenance links, identical geometry.
///
/// All images are attempted; if any fail the error reports how many and the first.
pub fn degrade_fold(
    data: &AnnotationSet,
    images_dir: &Path,
    config: &DegradationConfig,
    output_dir: &Path,
    ids: FreshIds,
) -> Result<DegradedFold> {
    config.validate()?;
    std::fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let results: Vec<Result<ManifestEntry>> = data
        .images()
        .par_iter()
        .map(|img| degrade_one(img, images_dir, config, output_dir))
        .collect();

    let mut manifest = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(entry) => manifest.push(entry),
            Err(e) => failures.push(e.to_string()),
        }
    }
    if let Some(first) = failures.first() {
        return Err(Error::DegradeFailures {
            count: failures.len(),
            first: first.clone(),
        });
    }

    let images = data
        .images()
        .iter()
        .zip(&manifest)
        .map(|(img, entry)| ImageInfo {
            id: img.id + ids.image_offset,
            file_name: entry.output.clone(),
            height: img.height,
            width: img.width,
            provenance: Some(img.id),
        })
        .collect();
    let annotations = data
        .annotations()
        .iter()
        .map(|a| Annotation {
            id: a.id + ids.annotation_offset,
            image_id: a.image_id + ids.image_offset,
            category_id: a.category_id,
            segmentation: a.segmentation.clone(),
            provenance: Some(a.image_id),
        })
        .collect();
    Ok(DegradedFold {
        annotations: AnnotationSet::new(images, data.categories().to_vec(), annotations)?,
        manifest,
    })
}
