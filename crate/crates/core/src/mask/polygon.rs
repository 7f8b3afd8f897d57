use super::{encode_column_major, BinaryMask};
use crate::error::{Error, Result};

/// Closed ring of `(x, y)` vertices in pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<(f64, f64)>,
}

impl Polygon {
    pub fn new(vertices: Vec<(f64, f64)>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DegeneratePolygon(vertices.len()));
        }
        Ok(Polygon { vertices })
    }

    /// Parses the COCO flat form `[x0, y0, x1, y1, ...]`.
    pub fn from_flat(coords: &[f64]) -> Result<Self> {
        if !coords.len().is_multiple_of(2) {
            return Err(Error::DegeneratePolygon(coords.len() / 2));
        }
        Self::new(coords.chunks_exact(2).map(|p| (p[0], p[1])).collect())
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.vertices.iter().flat_map(|&(x, y)| [x, y]).collect()
    }

    /// Sorted x-coordinates where the horizontal line at `y` crosses the ring.
    ///
    /// Each edge is evaluated lower-endpoint first so the result does not depend
    /// on ring orientation or starting vertex.
    fn crossings(&self, y: f64, out: &mut Vec<f64>) {
        out.clear();
        let n = self.vertices.len();
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let (lo, hi) = if p.1 < q.1 { (p, q) } else { (q, p) };
            if lo.1 <= y && y < hi.1 {
                out.push(lo.0 + (hi.0 - lo.0) * (y - lo.1) / (hi.1 - lo.1));
            }
        }
        out.sort_by(f64::total_cmp);
    }

    fn fill(&self, height: usize, width: usize, dense: &mut [bool]) {
        let mut xs = Vec::new();
        for row in 0..height {
            self.crossings(row as f64 + 0.5, &mut xs);
            for pair in xs.chunks_exact(2) {
                let (xa, xb) = (pair[0], pair[1]);
                let mut col = (xa - 0.5).ceil().max(0.0) as usize;
                while col > 0 && col as f64 - 0.5 >= xa {
                    col -= 1;
                }
                while col < width && (col as f64 + 0.5) < xa {
                    col += 1;
                }
                while col < width && (col as f64 + 0.5) < xb {
                    dense[col * height + row] = true;
                    col += 1;
                }
            }
        }
    }
}

/// Even-odd fill sampled at pixel centres; anything outside the grid is clipped.
pub fn rasterize_polygon(poly: &Polygon, height: usize, width: usize) -> Result<BinaryMask> {
    rasterize_polygons(std::slice::from_ref(poly), height, width)
}

/// Union of several polygon fills.
pub fn rasterize_polygons(polys: &[Polygon], height: usize, width: usize) -> Result<BinaryMask> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidDimensions { height, width });
    }
    let mut dense = vec![false; height * width];
    for poly in polys {
        poly.fill(height, width, &mut dense);
    }
    Ok(encode_column_major(height, width, &dense))
}
