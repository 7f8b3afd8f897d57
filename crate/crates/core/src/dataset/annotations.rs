use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{rasterize_polygons, BinaryMask, Polygon, RleJson};

pub type ImageId = u64;
pub type CategoryId = u64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub id: ImageId,
    pub file_name: String,
    pub height: usize,
    pub width: usize,
    /// Original image id when this image is a degraded copy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<ImageId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: CategoryId,
    pub name: String,
}

/// COCO segmentation: a list of flat polygons or an uncompressed RLE object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Segmentation {
    Polygons(Vec<Vec<f64>>),
    Rle(RleJson),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: u64,
    pub image_id: ImageId,
    pub category_id: CategoryId,
    pub segmentation: Segmentation,
    /// Original image id for annotations copied onto degraded images.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<ImageId>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct RawAnnotationSet {
    images: Vec<ImageInfo>,
    categories: Vec<Category>,
    annotations: Vec<Annotation>,
}

/// A validated COCO-style corpus: ids are unique and every reference resolves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAnnotationSet", into = "RawAnnotationSet")]
pub struct AnnotationSet {
    images: Vec<ImageInfo>,
    categories: Vec<Category>,
    annotations: Vec<Annotation>,
    image_index: HashMap<ImageId, usize>,
}

impl TryFrom<RawAnnotationSet> for AnnotationSet {
    type Error = Error;

    fn try_from(raw: RawAnnotationSet) -> Result<Self> {
        AnnotationSet::new(raw.images, raw.categories, raw.annotations)
    }
}

impl From<AnnotationSet> for RawAnnotationSet {
    fn from(set: AnnotationSet) -> Self {
        RawAnnotationSet {
            images: set.images,
            categories: set.categories,
            annotations: set.annotations,
        }
    }
}

impl AnnotationSet {
    pub fn new(
        images: Vec<ImageInfo>,
        categories: Vec<Category>,
        annotations: Vec<Annotation>,
    ) -> Result<Self> {
        let mut image_index = HashMap::with_capacity(images.len());
        for (i, img) in images.iter().enumerate() {
            if image_index.insert(img.id, i).is_some() {
                return Err(Error::DuplicateId {
                    kind: "image",
                    id: img.id,
                });
            }
            if img.height == 0 || img.width == 0 {
                return Err(Error::InvalidDimensions {
                    height: img.height,
                    width: img.width,
                });
            }
        }
        let mut category_ids = HashSet::new();
        for cat in &categories {
            if !category_ids.insert(cat.id) {
                return Err(Error::DuplicateId {
                    kind: "category",
                    id: cat.id,
                });
            }
        }
        let mut annotation_ids = HashSet::with_capacity(annotations.len());
        for ann in &annotations {
            if !annotation_ids.insert(ann.id) {
                return Err(Error::DuplicateId {
                    kind: "annotation",
                    id: ann.id,
                });
            }
            let Some(&idx) = image_index.get(&ann.image_id) else {
                return Err(Error::DanglingImage {
                    annotation_id: ann.id,
                    image_id: ann.image_id,
                });
            };
            if !category_ids.contains(&ann.category_id) {
                return Err(Error::DanglingCategory {
                    annotation_id: ann.id,
                    category_id: ann.category_id,
                });
            }
            let img = &images[idx];
            match &ann.segmentation {
                Segmentation::Rle(rle) => {
                    if rle.size != [img.height, img.width] {
                        return Err(Error::DimensionMismatch {
                            left: (img.height, img.width),
                            right: (rle.size[0], rle.size[1]),
                        });
                    }
                    BinaryMask::try_from(rle.clone())?;
                }
                Segmentation::Polygons(rings) => {
                    for ring in rings {
                        Polygon::from_flat(ring)?;
                    }
                }
            }
        }
        Ok(AnnotationSet {
            images,
            categories,
            annotations,
            image_index,
        })
    }

    /// The four layout classes in their conventional order.
    pub fn layout_categories() -> Vec<Category> {
        ["paragraph", "text_box", "image", "table"]
            .iter()
            .enumerate()
            .map(|(i, name)| Category {
                id: i as u64 + 1,
                name: (*name).to_owned(),
            })
            .collect()
    }

    pub fn images(&self) -> &[ImageInfo] {
        &self.images
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn image(&self, id: ImageId) -> Option<&ImageInfo> {
        self.image_index.get(&id).map(|&i| &self.images[i])
    }

    pub fn category_name(&self, id: CategoryId) -> Option<&str> {
        self.categories
            .iter()
            .find(|c| c.id == id)
            .map(|c| c.name.as_str())
    }

    /// Position of a category in the vocabulary.
    pub fn category_index(&self, id: CategoryId) -> Option<usize> {
        self.categories.iter().position(|c| c.id == id)
    }

    /// Annotations grouped by image id.
    pub fn annotations_by_image(&self) -> BTreeMap<ImageId, Vec<&Annotation>> {
        let mut out: BTreeMap<ImageId, Vec<&Annotation>> = BTreeMap::new();
        for ann in &self.annotations {
            out.entry(ann.image_id).or_default().push(ann);
        }
        out
    }

    /// Rasterized mask of one annotation on its image grid.
    pub fn annotation_mask(&self, ann: &Annotation) -> Result<BinaryMask> {
        let img = self.image(ann.image_id).ok_or(Error::UnknownImage(ann.image_id))?;
        segmentation_mask(&ann.segmentation, img.height, img.width)
    }

    /// Union mask per category for one image; every vocabulary category is present.
    pub fn category_masks(&self, image_id: ImageId) -> Result<BTreeMap<CategoryId, BinaryMask>> {
        let img = self.image(image_id).ok_or(Error::UnknownImage(image_id))?;
        let mut per_cat: BTreeMap<CategoryId, Vec<BinaryMask>> =
            self.categories.iter().map(|c| (c.id, Vec::new())).collect();
        for ann in self.annotations.iter().filter(|a| a.image_id == image_id) {
            let m = segmentation_mask(&ann.segmentation, img.height, img.width)?;
            per_cat.entry(ann.category_id).or_default().push(m);
        }
        per_cat
            .into_iter()
            .map(|(cat, masks)| {
                BinaryMask::union_all(img.height, img.width, masks.iter()).map(|m| (cat, m))
            })
            .collect()
    }

    /// Images (and their annotations) accepted by `keep`.
    pub fn subset(&self, mut keep: impl FnMut(&ImageInfo) -> bool) -> AnnotationSet {
        let images: Vec<ImageInfo> = self.images.iter().filter(|i| keep(i)).cloned().collect();
        let ids: HashSet<ImageId> = images.iter().map(|i| i.id).collect();
        let annotations = self
            .annotations
            .iter()
            .filter(|a| ids.contains(&a.image_id))
            .cloned()
            .collect();
        AnnotationSet::new(images, self.categories.clone(), annotations)
            .expect("subset of a valid set is valid")
    }

    /// Concatenates two corpora over the same vocabulary.
    pub fn merge(&self, other: &AnnotationSet) -> Result<AnnotationSet> {
        if self.categories != other.categories {
            return Err(Error::InvalidConfig(
                "cannot merge corpora with different category vocabularies".into(),
            ));
        }
        let images = self.images.iter().chain(&other.images).cloned().collect();
        let annotations = self
            .annotations
            .iter()
            .chain(&other.annotations)
            .cloned()
            .collect();
        AnnotationSet::new(images, self.categories.clone(), annotations)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("annotation sets always serialize")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn segmentation_mask(seg: &Segmentation, height: usize, width: usize) -> Result<BinaryMask> {
    match seg {
        Segmentation::Rle(rle) => {
            let m = BinaryMask::try_from(rle.clone())?;
            if m.dims() != (height, width) {
                return Err(Error::DimensionMismatch {
                    left: (height, width),
                    right: m.dims(),
                });
            }
            Ok(m)
        }
        Segmentation::Polygons(rings) => {
            let polys = rings
                .iter()
                .map(|r| Polygon::from_flat(r))
                .collect::<Result<Vec<_>>>()?;
            rasterize_polygons(&polys, height, width)
        }
    }
}

/// Reads and validates a COCO-style annotation file.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<AnnotationSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: RawAnnotationSet =
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
    AnnotationSet::try_from(raw)
}
