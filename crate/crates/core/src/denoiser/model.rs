use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::weights::{BlockIds, Layout, LinearIds, Weights};
use super::CondMode;
use crate::autograd::{Mat, Tape, Var};
use crate::canon::CanonVector;
use crate::condition::{patchify, sincos_2d, ConditionTokens, TokenSource};
use crate::diffusion::{noise, DiffusionSchedule, NoisePredictor};
use crate::error::{invalid, Result};
use crate::render::Image;

/// Raw condition for one item: an image for patch mode, tokens for external mode.
#[derive(Debug, Clone, PartialEq)]
pub enum CondInput {
    Image(Image),
    Tokens(Mat),
}

/// Sinusoidal embedding of an integer timestep, `1 x width`.
pub fn timestep_embedding(t: usize, width: usize) -> Mat {
    let half = width / 2;
    let mut out = Mat::zeros(1, width);
    for k in 0..half {
        let freq = (-(10_000f64.ln()) * k as f64 / half as f64).exp();
        let a = t as f64 * freq;
        out.data[k] = a.cos();
        out.data[half + k] = a.sin();
    }
    out
}

/// One forward pass recorded on a tape; weights enter as borrowed leaves.
pub struct Graph<'w, 't> {
    pub tape: &'t mut Tape<'w>,
    weights: &'w Weights,
    layout: &'t Layout,
}

impl<'w, 't> Graph<'w, 't> {
    pub fn new(tape: &'t mut Tape<'w>, weights: &'w Weights, layout: &'t Layout) -> Self {
        Self { tape, weights, layout }
    }

    fn p(&mut self, id: usize) -> Var {
        self.tape.param(id, &self.weights.tensors[id])
    }

    fn linear(&mut self, x: Var, ids: LinearIds) -> Var {
        let (w, b) = (self.p(ids.w), self.p(ids.b));
        let y = self.tape.matmul(x, w);
        self.tape.add_row(y, b)
    }

    fn modulate(&mut self, x: Var, shift: Var, scale: Var) -> Var {
        let n = self.tape.layer_norm(x);
        let s1 = self.tape.add_const(scale, 1.0);
        let y = self.tape.mul_row(n, s1);
        self.tape.add_row(y, shift)
    }

    fn attention(&mut self, q: Var, k: Var, v: Var) -> Var {
        let cfg = &self.weights.config;
        let dh = cfg.head_dim();
        let inv = 1.0 / (dh as f64).sqrt();
        let heads: Vec<Var> = (0..cfg.n_heads)
            .map(|h| {
                let qh = self.tape.slice_cols(q, h * dh, dh);
                let kh = self.tape.slice_cols(k, h * dh, dh);
                let vh = self.tape.slice_cols(v, h * dh, dh);
                let s = self.tape.matmul_bt(qh, kh);
                let s = self.tape.scale(s, inv);
                let p = self.tape.softmax_rows(s);
                self.tape.matmul(p, vh)
            })
            .collect();
        if heads.len() == 1 {
            heads[0]
        } else {
            self.tape.concat_cols(&heads)
        }
    }

    /// Condition tokens in the denoiser width, `M x D`.
    pub fn condition(&mut self, cond: &CondInput) -> Result<Var> {
        let cfg = self.weights.config;
        let tokens = match (&cfg.cond, cond) {
            (CondMode::Patch { patch, image_size }, CondInput::Image(img)) => {
                if img.width != *image_size || img.height != *image_size {
                    return Err(invalid(format!(
                        "expected a {image_size}x{image_size} image, got {}x{}",
                        img.width, img.height
                    )));
                }
                let tiles = self.tape.constant(patchify(img, *patch)?);
                let ids = self.layout.patch.expect("patch layout in patch mode");
                let emb = self.linear(tiles, ids);
                let pos = self.tape.constant(sincos_2d(image_size / patch, cfg.cond_width));
                self.tape.add(emb, pos)
            }
            (CondMode::External { tokens }, CondInput::Tokens(m)) => {
                if m.rows != *tokens || m.cols != cfg.cond_width {
                    return Err(invalid(format!(
                        "expected {tokens}x{} condition tokens, got {}x{}",
                        cfg.cond_width, m.rows, m.cols
                    )));
                }
                self.tape.constant(m.clone())
            }
            _ => return Err(invalid("condition input does not match the model's condition mode")),
        };
        let h = self.linear(tokens, self.layout.proj_in);
        let h = self.tape.gelu(h);
        Ok(self.linear(h, self.layout.proj_out))
    }

    /// Per-block cross-attention keys and values; independent of `x_t` and `t`.
    pub fn context(&mut self, cond: Var) -> Vec<(Var, Var)> {
        let d = self.weights.config.d_model;
        let blocks = self.layout.blocks.clone();
        blocks
            .iter()
            .map(|b| {
                let kv = self.linear(cond, b.cross_kv);
                (self.tape.slice_cols(kv, 0, d), self.tape.slice_cols(kv, d, d))
            })
            .collect()
    }

    /// Predicted noise as an `N x 1` column.
    pub fn denoise(&mut self, x_t: &[f64], t: usize, ctx: &[(Var, Var)]) -> Var {
        let cfg = self.weights.config;
        let d = cfg.d_model;
        let x = self.tape.constant(Mat::column(x_t.to_vec()));
        let scale = self.p(self.layout.x_scale);
        let pos = self.p(self.layout.x_pos);
        let h0 = self.tape.mul_col(scale, x);
        let mut h = self.tape.add(h0, pos);

        let freq = self.tape.constant(timestep_embedding(t, d));
        let te = self.linear(freq, self.layout.t_in);
        let te = self.tape.silu(te);
        let temb = self.linear(te, self.layout.t_out);
        let act = self.tape.silu(temb);
        let shared = self.linear(act, self.layout.adaln);

        let blocks: Vec<BlockIds> = self.layout.blocks.clone();
        for (b, &(k, v)) in blocks.iter().zip(ctx) {
            let table = self.p(b.table);
            let m = self.tape.add(table, shared);
            let chunk = |g: &mut Self, i: usize| g.tape.slice_cols(m, i * d, d);

            let (sh, sc, gate) = (chunk(self, 0), chunk(self, 1), chunk(self, 2));
            let a = self.modulate(h, sh, sc);
            let qkv = self.linear(a, b.self_qkv);
            let q = self.tape.slice_cols(qkv, 0, d);
            let kk = self.tape.slice_cols(qkv, d, d);
            let vv = self.tape.slice_cols(qkv, 2 * d, d);
            let o = self.attention(q, kk, vv);
            let o = self.linear(o, b.self_out);
            let o = self.tape.mul_row(o, gate);
            h = self.tape.add(h, o);

            let (sh, sc, gate) = (chunk(self, 3), chunk(self, 4), chunk(self, 5));
            let a = self.modulate(h, sh, sc);
            let q = self.linear(a, b.cross_q);
            let o = self.attention(q, k, v);
            let o = self.linear(o, b.cross_out);
            let o = self.tape.mul_row(o, gate);
            h = self.tape.add(h, o);

            let (sh, sc, gate) = (chunk(self, 6), chunk(self, 7), chunk(self, 8));
            let a = self.modulate(h, sh, sc);
            let f = self.linear(a, b.mlp_in);
            let f = self.tape.gelu(f);
            let f = self.linear(f, b.mlp_out);
            let f = self.tape.mul_row(f, gate);
            h = self.tape.add(h, f);
        }

        let ft = self.p(self.layout.final_table);
        let shift = self.tape.slice_cols(ft, 0, d);
        let shift = self.tape.add(shift, temb);
        let scale = self.tape.slice_cols(ft, d, d);
        let scale = self.tape.add(scale, temb);
        let a = self.modulate(h, shift, scale);
        self.linear(a, self.layout.head)
    }
}

/// Single forward pass `eps_theta(x_t, t, c)`.
pub fn forward(weights: &Weights, x_t: &[f64], t: usize, cond: &CondInput) -> Result<Vec<f64>> {
    check_x(weights, x_t)?;
    let layout = weights.layout();
    let mut tape = Tape::new(weights.tensors.len());
    let mut g = Graph::new(&mut tape, weights, &layout);
    let c = g.condition(cond)?;
    let ctx = g.context(c);
    let out = g.denoise(x_t, t, &ctx);
    Ok(tape.value(out).data.clone())
}

fn check_x(weights: &Weights, x: &[f64]) -> Result<()> {
    if x.len() != weights.config.n_param_tokens {
        return Err(invalid(format!(
            "expected {} parameter tokens, got {}",
            weights.config.n_param_tokens,
            x.len()
        )));
    }
    Ok(())
}

/// Embeds an image with the trained patch embedder (before projection).
pub fn embed_image(weights: &Weights, img: &Image) -> Result<ConditionTokens> {
    match weights.config.cond {
        CondMode::Patch { patch, .. } => {
            let ids = weights.layout().patch.expect("patch layout in patch mode");
            crate::condition::patch_tokens(img, patch, weights.linear(ids))
        }
        CondMode::External { .. } => Err(invalid("model has no patch embedder (external condition mode)")),
    }
}

/// Denoiser with its condition encoded once; cross-attention keys and
/// values are reused across sampler steps.
pub struct ConditionedDenoiser<'w> {
    weights: &'w Weights,
    layout: Layout,
    kv: Vec<(Mat, Mat)>,
}

impl<'w> ConditionedDenoiser<'w> {
    pub fn new(weights: &'w Weights, cond: &CondInput) -> Result<Self> {
        let layout = weights.layout();
        let mut tape = Tape::new(weights.tensors.len());
        let mut g = Graph::new(&mut tape, weights, &layout);
        let c = g.condition(cond)?;
        let ctx = g.context(c);
        let kv = ctx.iter().map(|&(k, v)| (tape.value(k).clone(), tape.value(v).clone())).collect();
        Ok(Self { weights, layout, kv })
    }

    /// Same denoiser with the condition tokens of `other`.
    pub fn with_context_of(&self, other: &ConditionedDenoiser<'_>) -> ConditionedDenoiser<'w> {
        ConditionedDenoiser { weights: self.weights, layout: self.layout.clone(), kv: other.kv.clone() }
    }
}

impl NoisePredictor for ConditionedDenoiser<'_> {
    fn dim(&self) -> usize {
        self.weights.config.n_param_tokens
    }

    fn predict(&self, x_t: &[f64], t: usize) -> Vec<f64> {
        let mut tape = Tape::new(self.weights.tensors.len());
        let ctx: Vec<(Var, Var)> =
            self.kv.iter().map(|(k, v)| (tape.constant(k.clone()), tape.constant(v.clone()))).collect();
        let mut g = Graph::new(&mut tape, self.weights, &self.layout);
        let out = g.denoise(x_t, t, &ctx);
        tape.value(out).data.clone()
    }
}

/// A training pair.
#[derive(Debug, Clone)]
pub struct TrainItem {
    pub x0: CanonVector,
    pub cond: CondInput,
}

/// Gradients in weight-table order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Mat>,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }
}

/// Timestep and noise for item `index` of a batch drawn with `seed`.
pub fn draw_noise(seed: u64, index: usize, n: usize, steps: usize) -> (usize, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let t = rng.gen_range(1..=steps);
    let eps = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    (t, eps)
}

fn item_loss_and_grad(weights: &Weights, layout: &Layout, item: &TrainItem, schedule: &DiffusionSchedule, seed: u64, index: usize) -> Result<(f64, Vec<Option<Mat>>)> {
    check_x(weights, &item.x0.x)?;
    let (t, eps) = draw_noise(seed, index, item.x0.len(), schedule.steps());
    let x_t = noise(&item.x0.x, t, &eps, schedule)?;
    let mut tape = Tape::new(weights.tensors.len());
    let mut g = Graph::new(&mut tape, weights, layout);
    let c = g.condition(&item.cond)?;
    let ctx = g.context(c);
    let pred = g.denoise(&x_t, t, &ctx);
    let loss = tape.mse(pred, Mat::column(eps));
    Ok((tape.value(loss).data[0], tape.backward(loss)))
}

/// Batch-mean noise regression loss and its exact gradient.
///
/// Items are processed in parallel; partial gradients are reduced in item
/// order so results are bit-identical regardless of thread count.
pub fn loss_and_grad(
    batch: &[TrainItem],
    weights: &Weights,
    schedule: &DiffusionSchedule,
    seed: u64,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    let layout = weights.layout();
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    let mut grads = weights.zeros_like();
    let chunk = (2 * rayon::current_num_threads()).max(1);
    for (c, items) in batch.chunks(chunk).enumerate() {
        let parts: Vec<Result<(f64, Vec<Option<Mat>>)>> = items
            .par_iter()
            .enumerate()
            .map(|(i, item)| item_loss_and_grad(weights, &layout, item, schedule, seed, c * chunk + i))
            .collect();
        for part in parts {
            let (loss, g) = part?;
            total += loss;
            for (acc, gi) in grads.iter_mut().zip(g) {
                if let Some(gi) = gi {
                    acc.add_assign(&gi);
                }
            }
        }
    }
    for g in &mut grads {
        g.scale_assign(scale);
    }
    Ok((total * scale, Gradients { tensors: grads }))
}

/// Checks that tokens fed to an external-mode model have the right shape.
pub fn external_input(tokens: &ConditionTokens) -> CondInput {
    debug_assert_eq!(tokens.source, TokenSource::External);
    CondInput::Tokens(tokens.tokens.clone())
}
