// Recover a table's proportions from its silhouette with Metropolis-Hastings,
// keeping the parameters that are hard to see pinned at known values.
//
// `cargo run --release --example mcmc_search [iters]`

use procinv::generators::{generate, schema};
use procinv::mcmc::{mh_run, render_params, Features, McmcOptions};
use procinv::render::{default_camera, rasterize, silhouette_iou, RenderMode};

/// Returns the silhouette IoU of the best state and the chain's forward count.
fn run_example(iters: usize) -> procinv::Result<(f64, usize)> {
    let s = schema("table")?;
    let truth = s.sample_params(21);
    let cam = default_camera();
    let target = render_params(&s, &truth, &cam, 64)?;
    let opts = McmcOptions {
        iters,
        seed: 1,
        free: Some(vec!["top_width".into(), "top_depth".into(), "height".into()]),
        anchor: Some(truth.clone()),
        ..McmcOptions::default()
    };
    let r = mh_run(&target, "table", &opts, &Features::default())?;
    let mask = |p| rasterize(&generate(&s, p)?, &cam.clone().with_size(64), RenderMode::Mask);
    let iou = silhouette_iou(&mask(&truth)?, &mask(&r.best)?);
    let curve = r.best_so_far();
    for i in [0, iters / 10, iters / 2, iters - 1] {
        println!("iter {:>5}: best score {:.5}", i + 1, curve[i]);
    }
    println!("acceptance {:.2}, {} renders, silhouette IoU {iou:.3}", r.acceptance_rate(), r.forward_count);
    println!("truth {}\nfound {}", s.params_to_json(&truth), s.params_to_json(&r.best));
    Ok((iou, r.forward_count))
}

#[allow(dead_code)]
fn main() -> procinv::Result<()> {
    let iters = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    run_example(iters)?;
    Ok(())
}
