//! Run-length-encoded binary masks and the pixel geometry built on them.
//!
//! Masks use the COCO convention: counts are taken in column-major order and
//! alternate zero-runs and one-runs, starting with a (possibly empty) zero-run.
//! Pixels are addressed as `(row, col)`.

mod geometry;
mod polygon;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use geometry::{box_iou, mask_dice, mask_iou, mask_to_bbox, BoundingBox};
pub use polygon::{rasterize_polygon, rasterize_polygons, Polygon};

/// Dense boolean grid stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bitmap {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl Bitmap {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidDimensions { height, width });
        }
        Ok(Bitmap {
            height,
            width,
            bits: vec![false; height * width],
        })
    }

    /// Builds a bitmap from row-major bits.
    pub fn from_rows(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 || bits.len() != height * width {
            return Err(Error::InvalidDimensions { height, width });
        }
        Ok(Bitmap {
            height,
            width,
            bits,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    /// Row-major bits.
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Binary mask stored as column-major run lengths.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    counts: Vec<u32>,
}

impl BinaryMask {
    /// Validates `counts` against the grid size and canonicalizes them:
    /// interior zero-length runs are merged into their neighbours so that
    /// equal masks always carry equal counts.
    pub fn from_counts(height: usize, width: usize, counts: Vec<u32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidDimensions { height, width });
        }
        let sum: u64 = counts.iter().map(|&c| u64::from(c)).sum();
        let expected = (height * width) as u64;
        if sum != expected {
            return Err(Error::RleSizeMismatch {
                sum,
                expected,
                height,
                width,
            });
        }
        Ok(BinaryMask {
            height,
            width,
            counts: canonical_counts(&counts),
        })
    }

    pub fn empty(height: usize, width: usize) -> Result<Self> {
        Self::from_counts(height, width, vec![(height * width) as u32])
    }

    /// Mask of the rows `top..bottom` and columns `left..right`.
    pub fn rectangle(
        height: usize,
        width: usize,
        (top, left): (usize, usize),
        (bottom, right): (usize, usize),
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidDimensions { height, width });
        }
        if top > bottom || left > right || bottom > height || right > width {
            return Err(Error::InvalidBox {
                x_min: left as u32,
                y_min: top as u32,
                x_max: right as u32,
                y_max: bottom as u32,
            });
        }
        let runs: Vec<(usize, usize)> = (left..right)
            .map(|c| (c * height + top, c * height + bottom))
            .collect();
        Ok(Self::from_runs(height, width, &runs))
    }

    /// Builds a mask from half-open column-major pixel intervals, which must
    /// be sorted and non-overlapping.
    pub(crate) fn from_runs(height: usize, width: usize, runs: &[(usize, usize)]) -> Self {
        let total = height * width;
        let mut counts = Vec::with_capacity(runs.len() * 2 + 1);
        let mut pos = 0usize;
        for &(start, end) in runs {
            if start == end {
                continue;
            }
            debug_assert!(start >= pos && end <= total);
            if start == pos && !counts.is_empty() {
                let last = counts.len() - 1;
                counts[last] += (end - start) as u32;
            } else {
                counts.push((start - pos) as u32);
                counts.push((end - start) as u32);
            }
            pos = end;
        }
        if pos < total || counts.is_empty() {
            counts.push((total - pos) as u32);
        }
        BinaryMask {
            height,
            width,
            counts,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Number of set pixels.
    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).map(|&c| u64::from(c)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    /// Half-open column-major intervals of set pixels.
    pub fn runs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mut pos = 0usize;
        self.counts.iter().enumerate().filter_map(move |(i, &c)| {
            let start = pos;
            pos += c as usize;
            (i % 2 == 1 && c > 0).then_some((start, pos))
        })
    }

    /// Pixels set in both masks.
    pub fn intersection_area(&self, other: &BinaryMask) -> Result<u64> {
        self.check_dims(other)?;
        let mut a = self.runs().peekable();
        let mut b = other.runs().peekable();
        let mut total = 0u64;
        while let (Some(&(a0, a1)), Some(&(b0, b1))) = (a.peek(), b.peek()) {
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if hi > lo {
                total += (hi - lo) as u64;
            }
            if a1 <= b1 {
                a.next();
            } else {
                b.next();
            }
        }
        Ok(total)
    }

    /// Union of several masks sharing one grid.
    pub fn union_all<'a>(
        height: usize,
        width: usize,
        masks: impl IntoIterator<Item = &'a BinaryMask>,
    ) -> Result<BinaryMask> {
        let mut dense = vec![false; height * width];
        for mask in masks {
            if mask.dims() != (height, width) {
                return Err(Error::DimensionMismatch {
                    left: (height, width),
                    right: mask.dims(),
                });
            }
            for (start, end) in mask.runs() {
                dense[start..end].iter_mut().for_each(|b| *b = true);
            }
        }
        Ok(encode_column_major(height, width, &dense))
    }

    pub(crate) fn check_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }
}

fn canonical_counts(counts: &[u32]) -> Vec<u32> {
    // `out` always alternates starting with zeros; a run of the same value as
    // the last pushed run extends it.
    let mut out: Vec<u32> = vec![0];
    for (i, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let is_one = i % 2 == 1;
        let last_is_one = out.len().is_multiple_of(2);
        if is_one == last_is_one || (!is_one && out.len() == 1) {
            *out.last_mut().unwrap() += c;
        } else {
            out.push(c);
        }
    }
    out
}

/// Column-major run-length encoding of a bitmap.
pub fn encode_rle(bitmap: &Bitmap) -> BinaryMask {
    let (h, w) = (bitmap.height, bitmap.width);
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for col in 0..w {
        for row in 0..h {
            let bit = bitmap.bits[row * w + col];
            if bit != current {
                counts.push(run);
                run = 0;
                current = bit;
            }
            run += 1;
        }
    }
    counts.push(run);
    BinaryMask {
        height: h,
        width: w,
        counts,
    }
}

/// Inverse of [`encode_rle`].
pub fn decode_rle(mask: &BinaryMask) -> Result<Bitmap> {
    let (h, w) = mask.dims();
    let sum: u64 = mask.counts.iter().map(|&c| u64::from(c)).sum();
    if sum != (h * w) as u64 {
        return Err(Error::RleSizeMismatch {
            sum,
            expected: (h * w) as u64,
            height: h,
            width: w,
        });
    }
    let mut bitmap = Bitmap::new(h, w)?;
    for (start, end) in mask.runs() {
        for idx in start..end {
            let (col, row) = (idx / h, idx % h);
            bitmap.bits[row * w + col] = true;
        }
    }
    Ok(bitmap)
}

pub(crate) fn encode_column_major(height: usize, width: usize, dense: &[bool]) -> BinaryMask {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for &bit in dense {
        if bit != current {
            counts.push(run);
            run = 0;
            current = bit;
        }
        run += 1;
    }
    counts.push(run);
    BinaryMask {
        height,
        width,
        counts,
    }
}

/// Wire form `{"size": [height, width], "counts": [...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleJson {
    pub size: [usize; 2],
    pub counts: Vec<u32>,
}

impl From<&BinaryMask> for RleJson {
    fn from(mask: &BinaryMask) -> Self {
        RleJson {
            size: [mask.height, mask.width],
            counts: mask.counts.clone(),
        }
    }
}

impl TryFrom<RleJson> for BinaryMask {
    type Error = Error;

    fn try_from(json: RleJson) -> Result<Self> {
        BinaryMask::from_counts(json.size[0], json.size[1], json.counts)
    }
}

impl Serialize for BinaryMask {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RleJson::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BinaryMask {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let json = RleJson::deserialize(deserializer)?;
        BinaryMask::try_from(json).map_err(serde::de::Error::custom)
    }
}
