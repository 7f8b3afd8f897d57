use serde::{Deserialize, Serialize};

use super::BinaryMask;
use crate::error::{Error, Result};

/// Axis-aligned box in pixel coordinates, half-open on the max edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoundingBox {
    x_min: u32,
    y_min: u32,
    x_max: u32,
    y_max: u32,
}

impl BoundingBox {
    pub fn new(x_min: u32, y_min: u32, x_max: u32, y_max: u32) -> Result<Self> {
        if x_min >= x_max || y_min >= y_max {
            return Err(Error::InvalidBox {
                x_min,
                y_min,
                x_max,
                y_max,
            });
        }
        Ok(BoundingBox {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn x_min(&self) -> u32 {
        self.x_min
    }

    pub fn y_min(&self) -> u32 {
        self.y_min
    }

    pub fn x_max(&self) -> u32 {
        self.x_max
    }

    pub fn y_max(&self) -> u32 {
        self.y_max
    }

    pub fn area(&self) -> u64 {
        u64::from(self.x_max - self.x_min) * u64::from(self.y_max - self.y_min)
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> u64 {
        let w = self.x_max.min(other.x_max).saturating_sub(self.x_min.max(other.x_min));
        let h = self.y_max.min(other.y_max).saturating_sub(self.y_min.max(other.y_min));
        u64::from(w) * u64::from(h)
    }
}

/// Rectangle intersection over union.
pub fn box_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Pixel intersection over union. Two empty masks score 0.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let inter = a.intersection_area(b)?;
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return Ok(0.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Pixel dice coefficient. Two empty masks score 1.
pub fn mask_dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let inter = a.intersection_area(b)?;
    let total = a.area() + b.area();
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

/// Tightest box around the set pixels.
pub fn mask_to_bbox(mask: &BinaryMask) -> Result<BoundingBox> {
    let h = mask.height();
    let (mut x0, mut x1) = (usize::MAX, 0usize);
    let (mut y0, mut y1) = (usize::MAX, 0usize);
    for (start, end) in mask.runs() {
        let last = end - 1;
        let (c0, r0) = (start / h, start % h);
        let (c1, r1) = (last / h, last % h);
        x0 = x0.min(c0);
        x1 = x1.max(c1 + 1);
        if c0 == c1 {
            y0 = y0.min(r0);
            y1 = y1.max(r1 + 1);
        } else {
            // a run crossing a column boundary touches both row 0 and row h-1
            y0 = 0;
            y1 = h;
        }
    }
    if x0 == usize::MAX {
        return Err(Error::EmptyMask);
    }
    BoundingBox::new(x0 as u32, y0 as u32, x1 as u32, y1 as u32)
}
