// Train a small image-conditioned denoiser on vases, save the checkpoint,
// and invert a training image into ranked parameter candidates.
//
// `cargo run --release --example train_and_invert [out_dir] [steps]`

use std::path::{Path, PathBuf};

use procinv::denoiser::CondMode;
use procinv::pipeline::{build_dataset, invert, train, Checkpoint, TrainConfig};

/// Returns the logged losses and the candidate scores for one image.
fn run_example(out_dir: &Path, steps: u64) -> procinv::Result<(Vec<f64>, Vec<f64>)> {
    let d = build_dataset("vase", 24, 5, 32)?;
    let cfg = TrainConfig {
        batch_size: 8,
        lr: 1e-3,
        warmup: 10,
        steps,
        n_layers: 2,
        n_heads: 2,
        d_model: 32,
        cond_width: 32,
        proj_hidden: 32,
        cond: CondMode::Patch { patch: 8, image_size: 32 },
        ..TrainConfig::default()
    };
    let run = train(&cfg, &d, Some(out_dir))?;
    let losses: Vec<f64> = run.log.iter().map(|r| r.loss).collect();
    println!("loss {:.4} -> {:.4} over {steps} steps", losses[0], losses[losses.len() - 1]);

    // reload from disk, as a separate process would
    let ck = Checkpoint::load(out_dir.join("checkpoint.dipc"))?;
    let schema = procinv::generators::schema("vase")?;
    let candidates = invert(&d.items[0].image, &ck, 4, 0)?;
    for (i, c) in candidates.iter().enumerate() {
        println!("#{} score {:.5} error {:.3}  {}", i + 1, c.score, c.x.l2(&d.items[0].x), schema.params_to_json(&c.params));
    }
    Ok((losses, candidates.iter().map(|c| c.score).collect()))
}

#[allow(dead_code)]
fn main() -> procinv::Result<()> {
    let mut args = std::env::args().skip(1);
    let out: PathBuf = args.next().unwrap_or_else(|| "train_out".into()).into();
    let steps = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    std::fs::create_dir_all(&out)?;
    run_example(&out, steps)?;
    Ok(())
}
