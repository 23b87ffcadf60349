// Render a vase as shaded image, silhouette mask and edge map from a few
// cameras, writing PGM files.
//
// `cargo run --example render_views [out_dir]`

use std::path::{Path, PathBuf};

use procinv::generators::{generate, schema};
use procinv::render::{camera_grid, default_camera, edge_map, rasterize, silhouette_iou, RenderMode};

/// Returns the silhouette IoU between the default view and each grid view.
fn run_example(out_dir: &Path) -> procinv::Result<Vec<f64>> {
    let s = schema("vase")?;
    let mesh = generate(&s, &s.default_params())?;
    let front = default_camera().with_size(96);
    let shaded = rasterize(&mesh, &front, RenderMode::Shaded)?;
    let mask = rasterize(&mesh, &front, RenderMode::Mask)?;
    shaded.write_pgm(std::fs::File::create(out_dir.join("vase_shaded.pgm"))?)?;
    mask.write_pgm(std::fs::File::create(out_dir.join("vase_mask.pgm"))?)?;
    edge_map(&shaded).write_pgm(std::fs::File::create(out_dir.join("vase_edges.pgm"))?)?;

    let mut ious = Vec::new();
    for (i, cam) in camera_grid().into_iter().enumerate().step_by(4) {
        let view = rasterize(&mesh, &cam.clone().with_size(96), RenderMode::Mask)?;
        let iou = silhouette_iou(&mask, &view);
        println!("view {i:>2} az {:>6.1} el {:>5.1}: IoU with front {iou:.3}", cam.azimuth_deg, cam.elevation_deg);
        ious.push(iou);
    }
    Ok(ious)
}

#[allow(dead_code)]
fn main() -> procinv::Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| ".".into()).into();
    std::fs::create_dir_all(&out)?;
    run_example(&out)?;
    Ok(())
}
