// Render a small dataset, save it as DIPD, reload it and inspect the split.
//
// `cargo run --example dataset_files [out_dir]`

use std::path::{Path, PathBuf};

use procinv::pipeline::{Dataset, DatasetSpec};

/// Returns `(train, val)` split sizes of the reloaded dataset.
fn run_example(out_dir: &Path) -> procinv::Result<(usize, usize)> {
    // pin the leg style so every table in this set has four legs
    let spec = DatasetSpec::new("table", 40, 3, 32).pin("leg_style", 0.0);
    let d = procinv::pipeline::build_dataset_with(&spec)?;
    let path = out_dir.join("tables.dipd");
    d.save(&path)?;
    let back = Dataset::load(&path)?;
    assert_eq!(back.content_hash(), d.content_hash());

    let (train, val) = back.split();
    let bytes = std::fs::metadata(&path)?.len();
    println!("{} items of {}x{} ({bytes} bytes), hash {:016x}", back.items.len(), back.image_size, back.image_size, back.content_hash());
    println!("split: {} train, {} val {:?}", train.len(), val.len(), val);
    let cam = back.items[0].camera;
    println!("item 0 camera: azimuth {:.1} elevation {:.1} distance {:.2}", cam[0], cam[1], cam[2]);
    Ok((train.len(), val.len()))
}

#[allow(dead_code)]
fn main() -> procinv::Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| ".".into()).into();
    std::fs::create_dir_all(&out)?;
    run_example(&out)?;
    Ok(())
}
