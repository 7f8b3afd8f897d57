//! Photometric and morphological degradation of document page images.
//!
//! Every effect works on 8-bit grayscale. Randomness is drawn from ChaCha
//! streams keyed by `(seed, image key, effect index)`, so a corpus can be
//! generated in any order, or in parallel, and still come out bit-identical.

mod filters;
mod fold;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use filters::{
    bleed_through, blur, dilate, erode, gaussian_kernel, morphological_close, morphological_open,
    pepper, salt,
};
pub use fold::{degrade_fold, luma_from_rgb, read_gray, DegradedFold, FreshIds, ManifestEntry};
pub use image::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Effect {
    Blur { sigma: f64 },
    BleedThrough { alpha: f64 },
    Salt { fraction: f64 },
    Pepper { fraction: f64 },
    Open { radius: usize },
    Close { radius: usize },
}

impl Effect {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Effect::Blur { sigma } => sigma > 0.0 && sigma.is_finite(),
            Effect::BleedThrough { alpha } => (0.0..=1.0).contains(&alpha),
            Effect::Salt { fraction } | Effect::Pepper { fraction } => {
                (0.0..=1.0).contains(&fraction)
            }
            Effect::Open { radius } | Effect::Close { radius } => radius >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid effect parameters {self:?}")))
        }
    }

    pub fn apply(&self, img: &GrayImage, rng: &mut ChaCha8Rng) -> GrayImage {
        match *self {
            Effect::Blur { sigma } => blur(img, sigma),
            Effect::BleedThrough { alpha } => bleed_through(img, alpha),
            Effect::Salt { fraction } => salt(img, fraction, rng),
            Effect::Pepper { fraction } => pepper(img, fraction, rng),
            Effect::Open { radius } => morphological_open(img, radius),
            Effect::Close { radius } => morphological_close(img, radius),
        }
    }
}

fn default_probability() -> f64 {
    1.0
}

/// Ordered effect list plus the seed that keys every random draw.
///
/// Each effect fires on a given image with `apply_probability`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationConfig {
    #[serde(default)]
    pub seed: u64,
    pub effects: Vec<Effect>,
    #[serde(default = "default_probability")]
    pub apply_probability: f64,
}

impl Default for DegradationConfig {
    /// Mild settings that keep text legible; each effect fires half the time.
    fn default() -> Self {
        DegradationConfig {
            seed: 0,
            effects: vec![
                Effect::Blur { sigma: 1.5 },
                Effect::BleedThrough { alpha: 0.25 },
                Effect::Salt { fraction: 0.02 },
                Effect::Pepper { fraction: 0.02 },
                Effect::Open { radius: 1 },
                Effect::Close { radius: 1 },
            ],
            apply_probability: 0.5,
        }
    }
}

impl DegradationConfig {
    /// Every listed effect always applies.
    pub fn always(seed: u64, effects: Vec<Effect>) -> Self {
        DegradationConfig {
            seed,
            effects,
            apply_probability: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.apply_probability) {
            return Err(Error::InvalidConfig(format!(
                "apply_probability {} outside [0, 1]",
                self.apply_probability
            )));
        }
        self.effects.iter().try_for_each(Effect::validate)
    }
}

const NOISE_STREAM: u64 = 0;
const GATE_STREAM: u64 = 1;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for one `(seed, image, effect, purpose)` tuple.
pub fn effect_rng(seed: u64, image_key: u64, effect_index: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stream = splitmix64(splitmix64(image_key) ^ ((effect_index as u64) << 1 | purpose));
    rng.set_stream(stream);
    rng
}

/// Result of running a pipeline on one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Degraded {
    pub image: GrayImage,
    pub applied: Vec<Effect>,
}

/// Runs `config` on an image keyed by `image_key`.
pub fn apply_pipeline_keyed(
    img: &GrayImage,
    config: &DegradationConfig,
    image_key: u64,
) -> Result<Degraded> {
    config.validate()?;
    let mut current = img.clone();
    let mut applied = Vec::new();
    for (i, effect) in config.effects.iter().enumerate() {
        if config.apply_probability < 1.0 {
            let mut gate = effect_rng(config.seed, image_key, i, GATE_STREAM);
            if gate.gen::<f64>() >= config.apply_probability {
                continue;
            }
        }
        let mut rng = effect_rng(config.seed, image_key, i, NOISE_STREAM);
        current = effect.apply(&current, &mut rng);
        applied.push(*effect);
    }
    Ok(Degraded {
        image: current,
        applied,
    })
}

/// Runs `config` on a single image (image key 0).
pub fn apply_pipeline(img: &GrayImage, config: &DegradationConfig) -> Result<GrayImage> {
    apply_pipeline_keyed(img, config, 0).map(|d| d.image)
}
