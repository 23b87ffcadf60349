// Forward noising and exact reverse steps on a toy vector: with the true
// noise, one DDPM step from t=1 or one DDIM jump from any t recovers x0.
//
// `cargo run --example noise_schedule`

use procinv::diffusion::{ddim_step, ddpm_step, noise, DiffusionSchedule, ScheduleParams};

/// Returns the largest reconstruction error across the probed timesteps.
fn run_example() -> procinv::Result<f64> {
    let s = DiffusionSchedule::from_params(ScheduleParams::default())?;
    let x0 = [0.5, -0.25, 0.9];
    let eps = [0.3, -1.2, 0.7];
    let mut worst: f64 = 0.0;
    for t in [1, 10, 100, 500, 1000] {
        let xt = noise(&x0, t, &eps, &s)?;
        let back = ddim_step(&xt, t, 0, &eps, &s);
        let err = back.iter().zip(&x0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("t={t:>4}  alpha_bar {:.5}  x_t {:+.3?}  jump-to-x0 error {err:.1e}", s.alpha_bar(t), xt);
        worst = worst.max(err);
    }
    let x1 = noise(&x0, 1, &eps, &s)?;
    let step = ddpm_step(&x1, 1, &eps, &s, &[0.0; 3])?;
    let err = step.iter().zip(&x0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("ddpm step at t=1 error {err:.1e}");
    Ok(worst.max(err))
}

#[allow(dead_code)]
fn main() -> procinv::Result<()> {
    run_example()?;
    Ok(())
}
