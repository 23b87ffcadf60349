//! Lightweight diffusion transformer predicting the noise on a canonical
//! parameter vector, one token per generator parameter.
//!
//! Each block runs self-attention over the parameter tokens, cross-attention
//! into the projected condition tokens, then an MLP, all pre-norm with
//! residuals. The timestep enters through a single shared adaptive
//! layer-norm modulation (shift / scale / gate for each sub-layer) plus a
//! learned per-block offset.

mod config;
mod model;
mod weights;

pub use config::{CondMode, DenoiserConfig};
pub use model::{
    draw_noise, embed_image, external_input, forward, loss_and_grad, timestep_embedding, CondInput,
    ConditionedDenoiser, Gradients, Graph, TrainItem,
};
pub use weights::{count_params, init_weights, Layout, Weights};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::Mat;
    use crate::canon::CanonVector;
    use crate::diffusion::build_schedule;
    use crate::render::Image;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn tiny(cond: CondMode, cond_width: usize) -> DenoiserConfig {
        DenoiserConfig { n_layers: 2, n_heads: 2, d_model: 16, n_param_tokens: 4, cond_width, proj_hidden: 8, cond }
    }

    fn jitter(w: &mut Weights, seed: u64, amount: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in &mut w.tensors {
            for v in &mut t.data {
                *v += rng.gen_range(-amount..amount);
            }
        }
    }

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        Mat::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    fn batch(cfg: &DenoiserConfig, n: usize, seed: u64) -> Vec<TrainItem> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let x = (0..cfg.n_param_tokens).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let cond = match cfg.cond {
                    CondMode::External { tokens } => CondInput::Tokens(rand_mat(&mut rng, tokens, cfg.cond_width)),
                    CondMode::Patch { image_size, .. } => {
                        let data = (0..image_size * image_size).map(|_| rng.gen_range(0.0..1.0)).collect();
                        CondInput::Image(Image::from_data(image_size, image_size, data).unwrap())
                    }
                };
                TrainItem { x0: CanonVector { generator_id: "t".into(), x }, cond }
            })
            .collect()
    }

    /// Largest per-tensor relative error between backprop and central differences.
    fn gradient_error(cfg: DenoiserConfig) -> (f64, String) {
        let mut w = init_weights(&cfg, 1).unwrap();
        jitter(&mut w, 2, 0.3);
        let items = batch(&cfg, 3, 3);
        let s = build_schedule(100, 1e-4, 0.02).unwrap();
        let (_, g) = loss_and_grad(&items, &w, &s, 9).unwrap();
        let h = 1e-5;
        let mut worst = (0.0, String::new());
        for ti in 0..w.tensors.len() {
            let (mut num, mut den_a, mut den_b) = (0.0, 0.0, 0.0);
            for k in 0..w.tensors[ti].len() {
                let orig = w.tensors[ti].data[k];
                w.tensors[ti].data[k] = orig + h;
                let lp = loss_and_grad(&items, &w, &s, 9).unwrap().0;
                w.tensors[ti].data[k] = orig - h;
                let lm = loss_and_grad(&items, &w, &s, 9).unwrap().0;
                w.tensors[ti].data[k] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let an = g.tensors[ti].data[k];
                num += (fd - an) * (fd - an);
                den_a += an * an;
                den_b += fd * fd;
            }
            let rel = num.sqrt() / den_a.sqrt().max(den_b.sqrt()).max(1e-12);
            assert!(den_a > 0.0, "tensor {} received no gradient", w.names[ti]);
            if rel > worst.0 {
                worst = (rel, w.names[ti].clone());
            }
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences_external() {
        let (err, name) = gradient_error(tiny(CondMode::External { tokens: 4 }, 8));
        assert!(err <= 1e-4, "worst tensor {name}: {err}");
    }

    #[test]
    fn gradients_reach_patch_embedder() {
        let (err, name) = gradient_error(tiny(CondMode::Patch { patch: 8, image_size: 16 }, 8));
        assert!(err <= 1e-4, "worst tensor {name}: {err}");
    }

    #[test]
    fn zero_head_predicts_zero() {
        let cfg = DenoiserConfig::desk(13);
        let w = init_weights(&cfg, 0).unwrap();
        let items = batch(&cfg, 2, 1);
        for item in &items {
            let out = forward(&w, &item.x0.x, 500, &item.cond).unwrap();
            assert_eq!(out, vec![0.0; 13]);
        }
        assert_eq!(init_weights(&cfg, 0).unwrap(), w);
        assert_ne!(init_weights(&cfg, 1).unwrap(), w);
    }

    #[test]
    fn initial_loss_is_noise_variance() {
        let cfg = tiny(CondMode::External { tokens: 4 }, 8);
        let w = init_weights(&cfg, 0).unwrap();
        let items = batch(&cfg, 64, 5);
        let s = build_schedule(1000, 1e-4, 0.02).unwrap();
        let (loss, g) = loss_and_grad(&items, &w, &s, 1).unwrap();
        assert!((loss - 1.0).abs() < 0.1, "{loss}");
        let (loss2, g2) = loss_and_grad(&items, &w, &s, 1).unwrap();
        assert_eq!(loss.to_bits(), loss2.to_bits());
        assert_eq!(g, g2);
        assert!(loss_and_grad(&[], &w, &s, 1).is_err());
    }

    #[test]
    fn output_length_matches_schema_sizes() {
        for n in [6, 8, 13] {
            let cfg = DenoiserConfig { n_param_tokens: n, ..tiny(CondMode::External { tokens: 3 }, 8) };
            let mut w = init_weights(&cfg, 0).unwrap();
            jitter(&mut w, 1, 0.1);
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let cond = CondInput::Tokens(rand_mat(&mut rng, 3, 8));
            assert_eq!(forward(&w, &vec![0.1; n], 3, &cond).unwrap().len(), n);
            assert!(forward(&w, &vec![0.1; n + 1], 3, &cond).is_err());
        }
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let cfg = tiny(CondMode::Patch { patch: 8, image_size: 16 }, 8);
        let w = init_weights(&cfg, 0).unwrap();
        let wrong = CondInput::Image(Image::filled(32, 32, 0.5));
        assert!(forward(&w, &[0.0; 4], 1, &wrong).is_err());
        assert!(forward(&w, &[0.0; 4], 1, &CondInput::Tokens(Mat::zeros(4, 8))).is_err());
    }

    #[test]
    fn condition_positions_break_permutation_symmetry() {
        // patch mode adds fixed positional codes; swapping two patches must change the output
        let cfg = tiny(CondMode::Patch { patch: 8, image_size: 16 }, 8);
        let mut w = init_weights(&cfg, 0).unwrap();
        jitter(&mut w, 4, 0.3);
        let mut img = Image::filled(16, 16, 0.2);
        for y in 0..8 {
            for x in 0..8 {
                img.set(x, y, 0.9);
            }
        }
        let mut swapped = Image::filled(16, 16, 0.2);
        for y in 8..16 {
            for x in 8..16 {
                swapped.set(x, y, 0.9);
            }
        }
        let x = [0.1, -0.3, 0.5, 0.0];
        let a = forward(&w, &x, 10, &CondInput::Image(img)).unwrap();
        let b = forward(&w, &x, 10, &CondInput::Image(swapped)).unwrap();
        assert!(a.iter().zip(&b).any(|(p, q)| (p - q).abs() > 1e-9));

        // external mode has no positional code: permuting tokens leaves the output unchanged
        let cfg = tiny(CondMode::External { tokens: 4 }, 8);
        let mut w = init_weights(&cfg, 0).unwrap();
        jitter(&mut w, 5, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = rand_mat(&mut rng, 4, 8);
        let mut perm = Mat::zeros(4, 8);
        for (dst, src) in [(0, 2), (1, 0), (2, 3), (3, 1)] {
            perm.data[dst * 8..dst * 8 + 8].copy_from_slice(m.row(src));
        }
        let a = forward(&w, &x, 10, &CondInput::Tokens(m)).unwrap();
        let b = forward(&w, &x, 10, &CondInput::Tokens(perm)).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-12));
    }

    #[test]
    fn conditioned_denoiser_matches_forward() {
        let cfg = tiny(CondMode::External { tokens: 4 }, 8);
        let mut w = init_weights(&cfg, 0).unwrap();
        jitter(&mut w, 8, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cond = CondInput::Tokens(rand_mat(&mut rng, 4, 8));
        let cd = ConditionedDenoiser::new(&w, &cond).unwrap();
        let x = [0.2, 0.1, -0.4, 0.9];
        use crate::diffusion::NoisePredictor;
        assert_eq!(cd.predict(&x, 17), forward(&w, &x, 17, &cond).unwrap());
    }

    #[test]
    fn parameter_counts() {
        // zero layers: condition projector, embeddings, timestep MLP, shared modulation, final table, head
        let cfg = DenoiserConfig { n_layers: 0, ..tiny(CondMode::External { tokens: 4 }, 8) };
        let d = 16;
        let expected = (8 * 8 + 8) + (8 * d + d) // projector
            + 2 * 4 * d // x scale + pos
            + 2 * (d * d + d) // timestep MLP
            + (d * 9 * d + 9 * d) // shared modulation
            + 2 * d // final table
            + d + 1; // head
        assert_eq!(count_params(&cfg).unwrap(), expected);
        assert!(init_weights(&cfg, 0).is_err());

        let mut prev = 0;
        for l in 1..5 {
            let c = DenoiserConfig { n_layers: l, ..cfg };
            let n = count_params(&c).unwrap();
            assert!(n > prev);
            assert_eq!(init_weights(&c, 0).unwrap().param_count(), n);
            prev = n;
        }

        let full = count_params(&DenoiserConfig::full_scale(48)).unwrap() as f64;
        assert!((full - 7.6e6).abs() <= 0.15 * 7.6e6, "{full}");
    }
}
