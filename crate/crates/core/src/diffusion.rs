//! DDPM machinery: linear noise schedule, forward corruption, the noise
//! regression objective, and ancestral / deterministic reverse samplers.
//!
//! Timesteps are 1-based: `t = 1` is the least noisy step, `t = T` the most.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Sampler output is clamped to this magnitude before decoding.
pub const SAMPLE_CLAMP: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self { steps: 1000, beta_min: 1e-4, beta_max: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    pub params: ScheduleParams,
    beta: Vec<f64>,
    alpha_bar: Vec<f64>,
    sigma: Vec<f64>,
}

pub fn build_schedule(steps: usize, beta_min: f64, beta_max: f64) -> Result<DiffusionSchedule> {
    if steps < 2 || !(0.0 < beta_min && beta_min < beta_max && beta_max < 1.0) {
        return Err(invalid(format!(
            "schedule needs T >= 2 and 0 < beta_min < beta_max < 1 (got T={steps}, [{beta_min}, {beta_max}])"
        )));
    }
    let beta: Vec<f64> = (0..steps)
        .map(|i| beta_min + (beta_max - beta_min) * i as f64 / (steps - 1) as f64)
        .collect();
    let mut alpha_bar = Vec::with_capacity(steps);
    let mut acc = 1.0;
    for b in &beta {
        acc *= 1.0 - b;
        alpha_bar.push(acc);
    }
    let sigma = beta.iter().map(|b| b.sqrt()).collect();
    Ok(DiffusionSchedule { params: ScheduleParams { steps, beta_min, beta_max }, beta, alpha_bar, sigma })
}

impl DiffusionSchedule {
    pub fn from_params(p: ScheduleParams) -> Result<Self> {
        build_schedule(p.steps, p.beta_min, p.beta_max)
    }

    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t - 1]
    }

    /// `alpha_bar(0) = 1` by convention.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bar[t - 1]
        }
    }

    pub fn sigma(&self, t: usize) -> f64 {
        self.sigma[t - 1]
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(invalid(format!("timestep {t} outside [1, {}]", self.steps())));
        }
        Ok(())
    }
}

/// `x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps`.
pub fn noise(x0: &[f64], t: usize, eps: &[f64], schedule: &DiffusionSchedule) -> Result<Vec<f64>> {
    if x0.len() != eps.len() {
        return Err(invalid(format!("x0 has {} entries, eps {}", x0.len(), eps.len())));
    }
    schedule.check_t(t)?;
    let ab = schedule.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect())
}

pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(invalid(format!("mse over {} vs {} entries", pred.len(), target.len())));
    }
    Ok(pred.iter().zip(target).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / pred.len() as f64)
}

/// One ancestral step `x_t -> x_{t-1}`; `z` is ignored at `t = 1`.
pub fn ddpm_step(x_t: &[f64], t: usize, eps_pred: &[f64], schedule: &DiffusionSchedule, z: &[f64]) -> Result<Vec<f64>> {
    schedule.check_t(t)?;
    if x_t.len() != eps_pred.len() || x_t.len() != z.len() {
        return Err(invalid("ddpm_step vectors must share a length"));
    }
    let beta = schedule.beta(t);
    let inv_sqrt_alpha = 1.0 / (1.0 - beta).sqrt();
    let coef = beta / (1.0 - schedule.alpha_bar(t)).sqrt();
    let sigma = if t == 1 { 0.0 } else { schedule.sigma(t) };
    Ok(x_t
        .iter()
        .zip(eps_pred)
        .zip(z)
        .map(|((x, e), zz)| inv_sqrt_alpha * (x - coef * e) + sigma * zz)
        .collect())
}

/// Non-stochastic jump from `t` to `t_prev < t` (`t_prev = 0` yields the
/// predicted clean sample).
pub fn ddim_step(x_t: &[f64], t: usize, t_prev: usize, eps_pred: &[f64], schedule: &DiffusionSchedule) -> Vec<f64> {
    let (ab, ab_prev) = (schedule.alpha_bar(t), schedule.alpha_bar(t_prev));
    let (sa, sb) = (ab.sqrt(), (1.0 - ab).sqrt());
    let (pa, pb) = (ab_prev.sqrt(), (1.0 - ab_prev).sqrt());
    x_t.iter()
        .zip(eps_pred)
        .map(|(x, e)| {
            let x0 = (x - sb * e) / sa;
            pa * x0 + pb * e
        })
        .collect()
}

/// Anything that predicts the noise in `x_t`, with its condition already bound.
pub trait NoisePredictor {
    fn dim(&self) -> usize;
    fn predict(&self, x_t: &[f64], t: usize) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMode {
    Ancestral,
    Deterministic,
}

/// `steps` timesteps from `T` down to 1, evenly strided.
pub fn strided_timesteps(total: usize, steps: usize) -> Vec<usize> {
    let steps = steps.clamp(1, total);
    if steps == 1 {
        return vec![total];
    }
    (0..steps)
        .rev()
        .map(|k| 1 + ((k * (total - 1)) as f64 / (steps - 1) as f64).round() as usize)
        .collect()
}

/// Draws one canonical vector starting from standard normal noise.
///
/// Ancestral mode uses the respaced posterior over the strided timesteps,
/// which is exactly [`ddpm_step`] at every `t` when `steps == T`.
pub fn sample(
    model: &impl NoisePredictor,
    schedule: &DiffusionSchedule,
    steps: usize,
    mode: SamplerMode,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.dim();
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(rng)).collect() };
    let mut x = draw(&mut rng);
    let ts = strided_timesteps(schedule.steps(), steps);
    for (i, &t) in ts.iter().enumerate() {
        let t_prev = ts.get(i + 1).copied().unwrap_or(0);
        let eps = model.predict(&x, t);
        x = match mode {
            SamplerMode::Deterministic => ddim_step(&x, t, t_prev, &eps, schedule),
            SamplerMode::Ancestral => {
                let z = draw(&mut rng);
                respaced_step(&x, t, t_prev, &eps, schedule, &z)
            }
        };
    }
    x.iter().map(|v| v.clamp(-SAMPLE_CLAMP, SAMPLE_CLAMP)).collect()
}

fn respaced_step(x: &[f64], t: usize, t_prev: usize, eps: &[f64], s: &DiffusionSchedule, z: &[f64]) -> Vec<f64> {
    let (ab, ab_prev) = (s.alpha_bar(t), s.alpha_bar(t_prev));
    let alpha = ab / ab_prev;
    let beta = 1.0 - alpha;
    let coef = beta / (1.0 - ab).sqrt();
    let sigma = if t_prev == 0 { 0.0 } else { beta.sqrt() };
    x.iter()
        .zip(eps)
        .zip(z)
        .map(|((xv, e), zz)| (xv - coef * e) / alpha.sqrt() + sigma * zz)
        .collect()
}
