use rayon::prelude::*;

use super::checkpoint::Checkpoint;
use crate::canon::{decanonicalize, CanonVector};
use crate::denoiser::{embed_image, CondInput, ConditionedDenoiser};
use crate::diffusion::{sample, SamplerMode};
use crate::error::{invalid, Result};
use crate::generators::{generate, schema, ParamVector};
use crate::render::{default_camera, rasterize, Camera, Image, RenderMode};

#[derive(Debug, Clone, PartialEq)]
pub struct InvertOptions {
    pub k_samples: usize,
    pub seed: u64,
    pub sampler_steps: usize,
    pub mode: SamplerMode,
    /// View used to re-render candidates for scoring.
    pub camera: Camera,
}

impl Default for InvertOptions {
    fn default() -> Self {
        Self { k_samples: 1, seed: 0, sampler_steps: 50, mode: SamplerMode::Deterministic, camera: default_camera() }
    }
}

/// One inverted parameter set, ranked by `score` (lower is better).
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub params: ParamVector,
    pub x: CanonVector,
    /// Mean squared distance between the condition tokens of the input and
    /// of the candidate's re-render.
    pub score: f64,
}

/// Samples `k_samples` parameter sets for `image` with the deterministic sampler.
pub fn invert(image: &Image, checkpoint: &Checkpoint, k_samples: usize, seed: u64) -> Result<Vec<Candidate>> {
    invert_with(image, checkpoint, &InvertOptions { k_samples, seed, ..InvertOptions::default() })
}

pub fn invert_with(image: &Image, checkpoint: &Checkpoint, opts: &InvertOptions) -> Result<Vec<Candidate>> {
    let size = checkpoint
        .config()
        .image_size()
        .ok_or_else(|| invalid("checkpoint conditions on external tokens, not images"))?;
    if image.width != size || image.height != size {
        return Err(invalid(format!(
            "checkpoint expects a {size}x{size} image, got {}x{}",
            image.width, image.height
        )));
    }
    if opts.k_samples == 0 {
        return Err(invalid("k_samples must be at least 1"));
    }
    let schema = schema(&checkpoint.generator_id)?;
    let schedule = checkpoint.schedule()?;
    let weights = &checkpoint.weights;
    let model = ConditionedDenoiser::new(weights, &CondInput::Image(image.clone()))?;
    let target = embed_image(weights, image)?.tokens;
    let camera = opts.camera.clone().with_size(size);
    let mut out = (0..opts.k_samples)
        .into_par_iter()
        .map(|i| {
            let x = sample(&model, &schedule, opts.sampler_steps, opts.mode, opts.seed.wrapping_add(i as u64));
            let x = CanonVector { generator_id: schema.generator_id.clone(), x };
            let params = decanonicalize(&schema, &x)?;
            let render = rasterize(&generate(&schema, &params)?, &camera, RenderMode::Shaded)?;
            let tokens = embed_image(weights, &render)?.tokens;
            let score = target.data.iter().zip(&tokens.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                / target.data.len() as f64;
            Ok(Candidate { params, x, score })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.score.total_cmp(&b.score));
    Ok(out)
}
