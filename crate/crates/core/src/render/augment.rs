use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{edge_map, mask_of_shaded, Image};
use crate::error::{invalid, Result};

/// Probabilities and ranges for per-sample condition augmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub p_flip: f64,
    pub p_jitter: f64,
    /// Brightness offset drawn from `[-brightness, brightness]`.
    pub brightness: f64,
    /// Contrast factor drawn from `[1 - contrast, 1 + contrast]`.
    pub contrast: f64,
    pub p_crop: f64,
    /// Smallest crop side as a fraction of the image side.
    pub min_crop_scale: f64,
    pub p_mask: f64,
    pub p_edge: f64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            p_flip: 0.5,
            p_jitter: 0.5,
            brightness: 0.1,
            contrast: 0.2,
            p_crop: 0.3,
            min_crop_scale: 0.85,
            p_mask: 0.15,
            p_edge: 0.15,
        }
    }
}

impl AugmentSpec {
    pub fn none() -> Self {
        Self {
            p_flip: 0.0,
            p_jitter: 0.0,
            brightness: 0.0,
            contrast: 0.0,
            p_crop: 0.0,
            min_crop_scale: 1.0,
            p_mask: 0.0,
            p_edge: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [self.p_flip, self.p_jitter, self.p_crop, self.p_mask, self.p_edge];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid("augmentation probabilities must lie in [0, 1]"));
        }
        if self.p_mask + self.p_edge > 1.0 {
            return Err(invalid("p_mask + p_edge must not exceed 1"));
        }
        if !(self.min_crop_scale > 0.0 && self.min_crop_scale <= 1.0) {
            return Err(invalid("min_crop_scale must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Draws the concrete operations for one sample. `allow_flip` is false for
    /// generators whose mirror image is a different object.
    pub fn plan(&self, seed: u64, allow_flip: bool) -> Vec<AugmentOp> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ops = Vec::new();
        if allow_flip && rng.gen_bool(self.p_flip) {
            ops.push(AugmentOp::Flip);
        }
        if rng.gen_bool(self.p_crop) {
            let scale = rng.gen_range(self.min_crop_scale..=1.0);
            ops.push(AugmentOp::Crop { scale, fx: rng.gen(), fy: rng.gen() });
        }
        let u: f64 = rng.gen();
        if u < self.p_mask {
            ops.push(AugmentOp::ReplaceWithMask);
        } else if u < self.p_mask + self.p_edge {
            ops.push(AugmentOp::ReplaceWithEdges);
        } else if rng.gen_bool(self.p_jitter) {
            ops.push(AugmentOp::Brightness(rng.gen_range(-self.brightness..=self.brightness)));
            ops.push(AugmentOp::Contrast(rng.gen_range(1.0 - self.contrast..=1.0 + self.contrast)));
        }
        ops
    }
}

/// One concrete image operation; a list of these is the augmentation record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AugmentOp {
    Flip,
    /// Square window of side `scale * size` at fractional offset `(fx, fy)`
    /// of the free range, resized back with nearest-neighbour sampling.
    Crop { scale: f64, fx: f64, fy: f64 },
    Brightness(f64),
    /// Scales around mid-gray.
    Contrast(f64),
    ReplaceWithMask,
    ReplaceWithEdges,
}

pub fn apply_ops(img: &Image, ops: &[AugmentOp]) -> Image {
    let mut out = img.clone();
    for op in ops {
        out = match *op {
            AugmentOp::Flip => flip(&out),
            AugmentOp::Crop { scale, fx, fy } => crop(&out, scale, fx, fy),
            AugmentOp::Brightness(d) => map(&out, |v| v + d),
            AugmentOp::Contrast(c) => map(&out, |v| (v - 0.5) * c + 0.5),
            AugmentOp::ReplaceWithMask => mask_of_shaded(&out),
            AugmentOp::ReplaceWithEdges => edge_map(&out),
        };
    }
    out
}

/// Deterministic given `seed`; output has the input's size, values in `[0, 1]`.
pub fn augment(img: &Image, spec: &AugmentSpec, seed: u64) -> Image {
    apply_ops(img, &spec.plan(seed, true))
}

fn map(img: &Image, f: impl Fn(f64) -> f64) -> Image {
    let data = img.data.iter().map(|&v| f(v).clamp(0.0, 1.0)).collect();
    Image { width: img.width, height: img.height, data }
}

fn flip(img: &Image) -> Image {
    let mut out = img.clone();
    for y in 0..img.height {
        for x in 0..img.width {
            out.set(x, y, img.get(img.width - 1 - x, y));
        }
    }
    out
}

fn crop(img: &Image, scale: f64, fx: f64, fy: f64) -> Image {
    let side_w = ((scale * img.width as f64).round() as usize).clamp(1, img.width);
    let side_h = ((scale * img.height as f64).round() as usize).clamp(1, img.height);
    let x0 = (fx.clamp(0.0, 1.0) * (img.width - side_w) as f64).floor() as usize;
    let y0 = (fy.clamp(0.0, 1.0) * (img.height - side_h) as f64).floor() as usize;
    let mut out = img.clone();
    for y in 0..img.height {
        let sy = y0 + ((y as f64 + 0.5) * side_h as f64 / img.height as f64) as usize;
        for x in 0..img.width {
            let sx = x0 + ((x as f64 + 0.5) * side_w as f64 / img.width as f64) as usize;
            out.set(x, y, img.get(sx.min(img.width - 1), sy.min(img.height - 1)));
        }
    }
    out
}
