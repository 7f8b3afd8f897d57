use image::{GrayImage, Luma};
use rand::Rng;

/// Normalized 1-D Gaussian weights for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut weights: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    weights
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Separable Gaussian blur with clamp-to-edge borders.
pub fn blur(img: &GrayImage, sigma: f64) -> GrayImage {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as i64;
    let src = img.as_raw();
    let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;

    let mut horiz = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            horiz[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, wt)| wt * f64::from(src[y * w + clamp(x as i64 + k as i64 - r, w)]))
                .sum();
        }
    }
    let mut out = GrayImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let v: f64 = kernel
                .iter()
                .enumerate()
                .map(|(k, wt)| wt * horiz[clamp(y as i64 + k as i64 - r, h) * w + x])
                .sum();
            out.put_pixel(x as u32, y as u32, Luma([to_u8(v)]));
        }
    }
    out
}

/// Blends the page with its horizontal mirror, simulating ink from the verso.
pub fn bleed_through(img: &GrayImage, alpha: f64) -> GrayImage {
    let w = img.width();
    GrayImage::from_fn(w, img.height(), |x, y| {
        let front = f64::from(img.get_pixel(x, y)[0]);
        let back = f64::from(img.get_pixel(w - 1 - x, y)[0]);
        Luma([to_u8((1.0 - alpha) * front + alpha * back)])
    })
}

fn impulse(img: &GrayImage, fraction: f64, value: u8, rng: &mut impl Rng) -> GrayImage {
    let mut out = img.clone();
    for px in out.pixels_mut() {
        if rng.gen::<f64>() < fraction {
            px[0] = value;
        }
    }
    out
}

/// Sets each pixel to white with probability `fraction`.
pub fn salt(img: &GrayImage, fraction: f64, rng: &mut impl Rng) -> GrayImage {
    impulse(img, fraction, 255, rng)
}

/// Sets each pixel to black with probability `fraction`.
pub fn pepper(img: &GrayImage, fraction: f64, rng: &mut impl Rng) -> GrayImage {
    impulse(img, fraction, 0, rng)
}

/// Running min/max over a `(2r+1)`-wide window truncated at the borders,
/// first along rows, then along columns.
fn rank_filter(img: &GrayImage, radius: usize, pick: fn(u8, u8) -> u8) -> GrayImage {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let src = img.as_raw();
    let mut rows = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius).min(w - 1);
            rows[y * w + x] = src[y * w + lo..=y * w + hi]
                .iter()
                .copied()
                .reduce(pick)
                .expect("window is never empty");
        }
    }
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        let lo = y.saturating_sub(radius);
        let hi = (y + radius).min(h - 1);
        for x in 0..w {
            out[y * w + x] = (lo..=hi).map(|yy| rows[yy * w + x]).reduce(pick).unwrap();
        }
    }
    GrayImage::from_raw(w as u32, h as u32, out).expect("buffer sized to image")
}

/// Grayscale erosion with a square structuring element of side `2r+1`.
pub fn erode(img: &GrayImage, radius: usize) -> GrayImage {
    rank_filter(img, radius, std::cmp::min)
}

/// Grayscale dilation with a square structuring element of side `2r+1`.
pub fn dilate(img: &GrayImage, radius: usize) -> GrayImage {
    rank_filter(img, radius, std::cmp::max)
}

pub fn morphological_open(img: &GrayImage, radius: usize) -> GrayImage {
    dilate(&erode(img, radius), radius)
}

pub fn morphological_close(img: &GrayImage, radius: usize) -> GrayImage {
    erode(&dilate(img, radius), radius)
}
