//! Metropolis-Hastings search over canonical parameters, scored by the feature
//! distance between a condition image and renders of candidates.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::canon::{canonicalize, decanonicalize, piece_center, CanonVector};
use crate::condition::mask_features;
use crate::denoiser::{embed_image, Weights};
use crate::error::{invalid, Error, Result};
use crate::generators::{generate, schema, GeneratorSchema, ParamKind, ParamVector};
use crate::render::{default_camera, rasterize, Camera, Image, RenderMode};

/// Maps an image to a fixed-width descriptor.
#[derive(Debug, Clone, Copy)]
pub enum Features<'a> {
    /// Mask of the render, average-pooled by `factor`; needs no model.
    Mask { factor: usize },
    /// Patch-embedder tokens of a trained model, mean-pooled.
    Embedder(&'a Weights),
}

impl Default for Features<'_> {
    fn default() -> Self {
        Features::Mask { factor: 4 }
    }
}

impl Features<'_> {
    pub fn extract(&self, img: &Image) -> Result<Vec<f64>> {
        match self {
            Features::Mask { factor } => mask_features(img, *factor),
            Features::Embedder(w) => Ok(embed_image(w, img)?.mean_pool()),
        }
    }
}

pub fn feature_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len().max(1) as f64
}

/// Shaded render of `params` from `camera` at `size` pixels.
pub fn render_params(schema: &GeneratorSchema, params: &ParamVector, camera: &Camera, size: usize) -> Result<Image> {
    rasterize(&generate(schema, params)?, &camera.clone().with_size(size), RenderMode::Shaded)
}

/// Mean squared feature distance between `cond_img` and the render of
/// `candidate` from the default camera.
pub fn score(cond_img: &Image, candidate: &ParamVector, features: &Features<'_>) -> Result<f64> {
    let schema = schema(&candidate.generator_id)?;
    let render = render_params(&schema, candidate, &default_camera(), cond_img.width)?;
    Ok(feature_distance(&features.extract(cond_img)?, &features.extract(&render)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcOptions {
    pub iters: usize,
    pub step_sigma: f64,
    pub temperature: f64,
    /// Chance that a proposal redraws each discrete entry.
    pub p_discrete: f64,
    pub seed: u64,
    /// Names of the parameters the chain may move (all when `None`); the
    /// rest stay at `anchor`.
    pub free: Option<Vec<String>>,
    pub anchor: Option<ParamVector>,
}

impl Default for McmcOptions {
    fn default() -> Self {
        Self { iters: 1000, step_sigma: 0.05, temperature: 0.01, p_discrete: 0.1, seed: 0, free: None, anchor: None }
    }
}

impl McmcOptions {
    fn validate(&self) -> Result<()> {
        if self.iters == 0 {
            return Err(invalid("iters must be at least 1"));
        }
        if !(self.step_sigma > 0.0) || !(self.temperature > 0.0) {
            return Err(invalid("step_sigma and temperature must be positive"));
        }
        if !(0.0..=1.0).contains(&self.p_discrete) {
            return Err(invalid("p_discrete must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Chain position after one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    /// Score of the chain state after the accept/reject decision.
    pub score: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub x: CanonVector,
    pub score: f64,
    pub iteration: usize,
}

#[derive(Debug, Clone)]
pub struct McmcResult {
    pub best: ParamVector,
    pub best_state: ChainState,
    pub trace: Vec<TraceRow>,
    /// Generator evaluations: the initial state plus one per proposal.
    pub forward_count: usize,
}

impl McmcResult {
    /// Running minimum of the trace scores.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut m = f64::INFINITY;
        self.trace.iter().map(|r| {
            m = m.min(r.score);
            m
        })
        .collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.trace.iter().filter(|r| r.accepted).count() as f64 / self.trace.len() as f64
    }

    pub fn write_trace<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.trace {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Runs the chain against `cond_img`, rendering candidates from the default camera.
pub fn mh_run(cond_img: &Image, generator_id: &str, opts: &McmcOptions, features: &Features<'_>) -> Result<McmcResult> {
    let schema = schema(generator_id)?;
    let target = features.extract(cond_img)?;
    let camera = default_camera();
    mh_run_with(&schema, opts, |p| {
        let render = render_params(&schema, p, &camera, cond_img.width)?;
        Ok(feature_distance(&target, &features.extract(&render)?))
    })
}

/// The sampler with an arbitrary non-negative score to minimize.
pub fn mh_run_with(
    schema: &GeneratorSchema,
    opts: &McmcOptions,
    mut score_fn: impl FnMut(&ParamVector) -> Result<f64>,
) -> Result<McmcResult> {
    opts.validate()?;
    let free = free_mask(schema, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let anchor = match &opts.anchor {
        Some(p) => {
            schema.validate(p)?;
            canonicalize(schema, p)?.x
        }
        None => vec![0.0; schema.len()],
    };
    let mut x: Vec<f64> = schema
        .params
        .iter()
        .zip(&anchor)
        .zip(&free)
        .map(|((spec, &a), &f)| if f { random_entry(&spec.kind, &mut rng) } else { a })
        .collect();
    let decode = |x: &[f64]| decanonicalize(schema, &CanonVector { generator_id: schema.generator_id.clone(), x: x.to_vec() });
    let mut current = score_fn(&decode(&x)?)?;
    let mut best = (x.clone(), current, 0);
    let step = Normal::new(0.0, opts.step_sigma).map_err(|e| invalid(e.to_string()))?;
    let mut trace = Vec::with_capacity(opts.iters);
    for iter in 1..=opts.iters {
        let mut y = x.clone();
        for (i, spec) in schema.params.iter().enumerate() {
            if !free[i] {
                continue;
            }
            match &spec.kind {
                ParamKind::Continuous { .. } => y[i] = reflect(y[i] + step.sample(&mut rng)),
                ParamKind::Discrete { .. } => {
                    if rng.gen_bool(opts.p_discrete) {
                        y[i] = random_entry(&spec.kind, &mut rng);
                    }
                }
            }
        }
        let proposed = score_fn(&decode(&y)?)?;
        let u: f64 = rng.gen();
        let accepted = u.ln() < (current - proposed) / opts.temperature;
        if accepted {
            x = y;
            current = proposed;
            if current < best.1 {
                best = (x.clone(), current, iter);
            }
        }
        trace.push(TraceRow { iter, score: current, accepted });
    }
    let best_x = CanonVector { generator_id: schema.generator_id.clone(), x: best.0 };
    Ok(McmcResult {
        best: decode(&best_x.x)?,
        best_state: ChainState { x: best_x, score: best.1, iteration: best.2 },
        trace,
        forward_count: opts.iters + 1,
    })
}

fn free_mask(schema: &GeneratorSchema, opts: &McmcOptions) -> Result<Vec<bool>> {
    match &opts.free {
        None => Ok(vec![true; schema.len()]),
        Some(names) => {
            if opts.anchor.is_none() {
                return Err(invalid("restricting the free parameters needs an anchor for the rest"));
            }
            let mut mask = vec![false; schema.len()];
            for n in names {
                mask[schema.index_of(n).ok_or_else(|| Error::InvalidParam(n.clone()))?] = true;
            }
            Ok(mask)
        }
    }
}

/// Uniform draw: a value in [-1, 1] or a uniformly chosen piece center.
fn random_entry<R: Rng>(kind: &ParamKind, rng: &mut R) -> f64 {
    match kind {
        ParamKind::Continuous { .. } => rng.gen_range(-1.0..=1.0),
        ParamKind::Discrete { choices } => piece_center(rng.gen_range(0..choices.len()), choices.len()),
    }
}

/// Folds a value back into [-1, 1]; keeps the random-walk proposal symmetric.
fn reflect(mut v: f64) -> f64 {
    loop {
        if v > 1.0 {
            v = 2.0 - v;
        } else if v < -1.0 {
            v = -2.0 - v;
        } else {
            return v;
        }
    }
}
