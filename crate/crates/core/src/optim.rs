//! Adaptive-moment optimizer with linear learning-rate warmup and optional
//! cosine decay.

use serde::{Deserialize, Serialize};

use crate::autograd::Mat;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Steps over which the learning rate ramps linearly up to `lr`.
    pub warmup: u64,
    /// When non-zero, the rate follows a half cosine from `lr` after warmup
    /// down to zero at this step; zero keeps it constant.
    pub decay_until: u64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8, warmup: 100, decay_until: 0 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("bad optimizer settings {self:?}")))
        }
    }

    /// Learning rate used for the update that takes the state from `step` to `step + 1`.
    pub fn lr_at(&self, step: u64) -> f64 {
        let ramp = if self.warmup == 0 { 1.0 } else { ((step + 1) as f64 / self.warmup as f64).min(1.0) };
        let decay = if self.decay_until > self.warmup {
            let span = (self.decay_until - self.warmup) as f64;
            let done = (step.saturating_sub(self.warmup) as f64 / span).min(1.0);
            0.5 * (1.0 + (std::f64::consts::PI * done).cos())
        } else {
            1.0
        };
        self.lr * ramp * decay
    }
}

/// First and second moment estimates, one pair per weight tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Mat>,
    pub v: Vec<Mat>,
}

impl AdamState {
    pub fn new(shapes: &[Mat]) -> Self {
        let zeros = || shapes.iter().map(|t| Mat::zeros(t.rows, t.cols)).collect();
        Self { step: 0, m: zeros(), v: zeros() }
    }

    /// Applies one bias-corrected update in place and returns the learning rate used.
    pub fn update(&mut self, cfg: &AdamConfig, params: &mut [Mat], grads: &[Mat]) -> Result<f64> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(invalid("optimizer state does not match the parameter list"));
        }
        let lr = cfg.lr_at(self.step);
        self.step += 1;
        let c1 = 1.0 - cfg.beta1.powf(self.step as f64);
        let c2 = 1.0 - cfg.beta2.powf(self.step as f64);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            if p.data.len() != g.data.len() {
                return Err(invalid("gradient shape does not match its parameter"));
            }
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * gi;
                v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * gi * gi;
                let mh = m.data[i] / c1;
                let vh = v.data[i] / c2;
                p.data[i] -= lr * mh / (vh.sqrt() + cfg.eps);
            }
        }
        Ok(lr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_is_linear_then_flat() {
        let c = AdamConfig { lr: 1e-3, warmup: 10, ..Default::default() };
        assert!((c.lr_at(0) - 1e-4).abs() < 1e-18);
        assert!((c.lr_at(4) - 5e-4).abs() < 1e-18);
        assert_eq!(c.lr_at(9), 1e-3);
        assert_eq!(c.lr_at(500), 1e-3);
        assert_eq!(AdamConfig { warmup: 0, ..c }.lr_at(0), 1e-3);

        let d = AdamConfig { decay_until: 110, ..c };
        assert_eq!(d.lr_at(9), 1e-3);
        assert_eq!(d.lr_at(10), 1e-3);
        assert!((d.lr_at(60) - 5e-4).abs() < 1e-15);
        assert!((d.lr_at(35) - 1e-3 * (0.5 + 0.5 * (std::f64::consts::PI / 4.0).cos())).abs() < 1e-15);
        assert_eq!(d.lr_at(110), 0.0);
        assert_eq!(d.lr_at(5000), 0.0);
    }

    #[test]
    fn first_step_moves_each_weight_by_lr() {
        // with bias correction the first update is lr * g/|g| (up to eps)
        let c = AdamConfig { lr: 0.01, warmup: 0, ..Default::default() };
        let mut p = vec![Mat::from_vec(1, 3, vec![1.0, 2.0, 3.0])];
        let g = vec![Mat::from_vec(1, 3, vec![0.5, -2.0, 1e-3])];
        let mut s = AdamState::new(&p);
        s.update(&c, &mut p, &g).unwrap();
        for (after, want) in p[0].data.iter().zip([0.99, 2.01, 2.99]) {
            assert!((after - want).abs() < 1e-6, "{after} {want}");
        }
    }

    #[test]
    fn minimizes_a_quadratic() {
        let c = AdamConfig { lr: 0.05, warmup: 5, ..Default::default() };
        let mut p = vec![Mat::from_vec(1, 2, vec![3.0, -4.0])];
        let mut s = AdamState::new(&p);
        for _ in 0..2000 {
            let g = vec![Mat::from_vec(1, 2, p[0].data.iter().map(|x| 2.0 * x).collect())];
            s.update(&c, &mut p, &g).unwrap();
        }
        assert!(p[0].data.iter().all(|x| x.abs() < 1e-2), "{:?}", p[0].data);
        assert_eq!(s.step, 2000);
    }

    #[test]
    fn rejects_mismatched_lists() {
        let mut p = vec![Mat::zeros(1, 2)];
        let mut s = AdamState::new(&p);
        assert!(s.update(&AdamConfig::default(), &mut p, &[]).is_err());
        assert!(AdamConfig { beta1: 1.0, ..Default::default() }.validate().is_err());
    }
}
