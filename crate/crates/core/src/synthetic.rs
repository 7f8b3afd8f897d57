//! Seeded synthetic layout corpora: page images, ground truth and noisy
//! per-model prediction bundles.

use std::path::Path;

use image::{GrayImage, Luma};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Annotation, AnnotationSet, CategoryId, ImageInfo, Segmentation};
use crate::ensemble::{write_bundle, InstancePrediction, PredictionBundle};
use crate::error::{Error, Result};
use crate::mask::BinaryMask;

pub const PARAGRAPH: CategoryId = 1;
pub const TEXT_BOX: CategoryId = 2;
pub const IMAGE: CategoryId = 3;
pub const TABLE: CategoryId = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOptions {
    pub seed: u64,
    pub images: usize,
    pub models: usize,
    pub height: usize,
    pub width: usize,
    /// Chance that a model misses a true element.
    pub miss_rate: f64,
    /// Chance that a model adds a spurious element of its own.
    pub spurious_rate: f64,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        SyntheticOptions {
            seed: 0,
            images: 20,
            models: 5,
            height: 64,
            width: 48,
            miss_rate: 0.2,
            spurious_rate: 0.3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub annotations: AnnotationSet,
    /// Page images in the order of `annotations.images()`.
    pub pages: Vec<GrayImage>,
    pub bundles: Vec<PredictionBundle>,
}

/// Axis-aligned element: rows `top..bottom`, columns `left..right`.
#[derive(Debug, Clone, Copy)]
struct Block {
    category: CategoryId,
    top: usize,
    left: usize,
    bottom: usize,
    right: usize,
}

impl Block {
    fn polygon(&self) -> Vec<f64> {
        let (t, l, b, r) = (self.top as f64, self.left as f64, self.bottom as f64, self.right as f64);
        vec![l, t, r, t, r, b, l, b]
    }

    fn mask(&self, height: usize, width: usize) -> Result<BinaryMask> {
        BinaryMask::rectangle(height, width, (self.top, self.left), (self.bottom, self.right))
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn layout(rng: &mut impl Rng, height: usize, width: usize) -> Vec<Block> {
    let mut blocks = Vec::new();
    let mut y = 2;
    while y + 6 < height {
        let h = rng.gen_range(4..=10).min(height - 2 - y);
        let roll: f64 = rng.gen();
        let (left, right) = (rng.gen_range(2..5), width - rng.gen_range(2..5));
        if roll < 0.3 {
            // two text boxes side by side
            let mid = width / 2;
            blocks.push(Block { category: TEXT_BOX, top: y, left, bottom: y + h, right: mid - 1 });
            blocks.push(Block { category: TEXT_BOX, top: y, left: mid + 1, bottom: y + h, right });
        } else {
            let category = match roll {
                r if r < 0.75 => PARAGRAPH,
                r if r < 0.9 => IMAGE,
                _ => TABLE,
            };
            blocks.push(Block { category, top: y, left, bottom: y + h, right });
        }
        y += h + rng.gen_range(2..=4);
    }
    blocks
}

fn render(blocks: &[Block], height: usize, width: usize) -> GrayImage {
    let mut img = GrayImage::from_pixel(width as u32, height as u32, Luma([235]));
    let mut put = |r: usize, c: usize, v: u8| img.put_pixel(c as u32, r as u32, Luma([v]));
    for b in blocks {
        for r in b.top..b.bottom {
            for c in b.left..b.right {
                let border = r == b.top || r + 1 == b.bottom || c == b.left || c + 1 == b.right;
                let v = match b.category {
                    PARAGRAPH if (r - b.top) % 2 == 0 && c + 2 < b.right => 40,
                    TEXT_BOX if border => 90,
                    TEXT_BOX if (r - b.top) % 2 == 1 && c > b.left + 1 && c + 2 < b.right => 50,
                    IMAGE => (120 + 60 * (c - b.left) / (b.right - b.left)) as u8,
                    TABLE if border || (r - b.top) % 3 == 0 || (c - b.left) % 5 == 0 => 30,
                    _ => continue,
                };
                put(r, c, v);
            }
        }
    }
    img
}

fn jitter(rng: &mut impl Rng, b: &Block, height: usize, width: usize) -> Block {
    let mut d = || rng.gen_range(-1i64..=1);
    let clamp = |v: usize, delta: i64, hi: usize| (v as i64 + delta).clamp(0, hi as i64) as usize;
    let top = clamp(b.top, d(), height - 1);
    let left = clamp(b.left, d(), width - 1);
    let bottom = clamp(b.bottom, d(), height).max(top + 1);
    let right = clamp(b.right, d(), width).max(left + 1);
    Block { top, left, bottom, right, ..*b }
}

fn random_block(rng: &mut impl Rng, height: usize, width: usize) -> Block {
    let top = rng.gen_range(0..height - 4);
    let left = rng.gen_range(0..width - 4);
    Block {
        category: rng.gen_range(PARAGRAPH..=TABLE),
        top,
        left,
        bottom: rng.gen_range(top + 2..=(top + 12).min(height)),
        right: rng.gen_range(left + 2..=(left + 16).min(width)),
    }
}

/// Generates pages with stacked paragraphs, text boxes, images and tables,
/// plus one bundle per model.
///
/// Models err independently: each misses true elements, shifts their edges by
/// up to one pixel, sometimes confuses their class and adds spurious
/// elements of moderate confidence. All models also share one faint
/// low-confidence false detection per page, which only the confidence
/// threshold removes.
pub fn synthetic_corpus(opts: &SyntheticOptions) -> Result<SyntheticCorpus> {
    if opts.height < 16 || opts.width < 16 {
        return Err(Error::InvalidDimensions { height: opts.height, width: opts.width });
    }
    let (h, w) = (opts.height, opts.width);
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    let mut pages = Vec::new();
    let mut per_model: Vec<Vec<InstancePrediction>> = vec![Vec::new(); opts.models];
    for i in 0..opts.images {
        let image_id = i as u64 + 1;
        let mut rng = stream_rng(opts.seed, image_id << 8);
        let blocks = layout(&mut rng, h, w);
        let stain = random_block(&mut rng, h, w);
        images.push(ImageInfo {
            id: image_id,
            file_name: format!("page_{image_id:03}.png"),
            height: h,
            width: w,
            provenance: None,
        });
        for b in &blocks {
            annotations.push(Annotation {
                id: annotations.len() as u64 + 1,
                image_id,
                category_id: b.category,
                segmentation: Segmentation::Polygons(vec![b.polygon()]),
                provenance: None,
            });
        }
        pages.push(render(&blocks, h, w));

        for (m, preds) in per_model.iter_mut().enumerate() {
            let model_id = format!("model_{m}");
            let mut rng = stream_rng(opts.seed, (image_id << 8) | (m as u64 + 1));
            let mut push = |b: Block, confidence: f64| -> Result<()> {
                preds.push(InstancePrediction::new(image_id, b.category, confidence, b.mask(h, w)?, model_id.as_str())?);
                Ok(())
            };
            for b in &blocks {
                if rng.gen_bool(opts.miss_rate) {
                    continue;
                }
                let mut p = jitter(&mut rng, b, h, w);
                if rng.gen_bool(0.05) {
                    p.category = rng.gen_range(PARAGRAPH..=TABLE);
                }
                push(p, rng.gen_range(0.35..0.95))?;
            }
            if rng.gen_bool(opts.spurious_rate) {
                push(random_block(&mut rng, h, w), rng.gen_range(0.3..0.6))?;
            }
            if rng.gen_bool(0.8) {
                push(stain, rng.gen_range(0.05..0.2))?;
            }
        }
    }
    let annotations = AnnotationSet::new(images, AnnotationSet::layout_categories(), annotations)?;
    let bundles = per_model
        .into_iter()
        .enumerate()
        .map(|(m, predictions)| PredictionBundle {
            model_id: format!("model_{m}"),
            predictions,
        })
        .collect();
    Ok(SyntheticCorpus { annotations, pages, bundles })
}

impl SyntheticCorpus {
    /// Writes `annotations.json`, `images/*.png` and `bundles/<model>.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let images_dir = dir.join("images");
        let bundles_dir = dir.join("bundles");
        for d in [&images_dir, &bundles_dir] {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        self.annotations.save(dir.join("annotations.json"))?;
        for (info, page) in self.annotations.images().iter().zip(&self.pages) {
            let path = images_dir.join(&info.file_name);
            page.save(&path).map_err(|source| Error::Image { path: path.clone(), source })?;
        }
        for b in &self.bundles {
            let path = bundles_dir.join(format!("{}.json", b.model_id));
            std::fs::write(&path, write_bundle(b)).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Annotation-only corpus whose per-image category counts follow the
/// marginals of the BaDLAD training set: about ten paragraphs and ten text
/// boxes per page, an image on roughly one page in three, a table on one
/// page in fifteen.
pub fn layout_count_corpus(images: usize, seed: u64) -> Result<AnnotationSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let square = vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
    let mut infos = Vec::with_capacity(images);
    let mut annotations = Vec::new();
    for i in 0..images {
        let image_id = i as u64 + 1;
        infos.push(ImageInfo {
            id: image_id,
            file_name: format!("{image_id}.png"),
            height: 8,
            width: 8,
            provenance: None,
        });
        let counts = [
            (PARAGRAPH, rng.gen_range(0..=20)),
            (TEXT_BOX, rng.gen_range(0..=20)),
            (IMAGE, if rng.gen_bool(0.35) { rng.gen_range(1..=2) } else { 0 }),
            (TABLE, usize::from(rng.gen_bool(1.0 / 15.0))),
        ];
        for (category_id, n) in counts {
            for _ in 0..n {
                annotations.push(Annotation {
                    id: annotations.len() as u64 + 1,
                    image_id,
                    category_id,
                    segmentation: Segmentation::Polygons(vec![square.clone()]),
                    provenance: None,
                });
            }
        }
    }
    AnnotationSet::new(infos, AnnotationSet::layout_categories(), annotations)
}
