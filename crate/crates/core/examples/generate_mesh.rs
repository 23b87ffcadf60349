// Build each generator's default shape plus a random variant and export OBJ.
//
// `cargo run --example generate_mesh [out_dir]`

use std::path::{Path, PathBuf};

use procinv::generators::{generate, list_generators, schema};

/// Writes `<gen>.obj` and `<gen>_random.obj` per generator; returns
/// `(generator, default triangle count)` pairs.
fn run_example(out_dir: &Path) -> procinv::Result<Vec<(String, usize)>> {
    let mut counts = Vec::new();
    for id in list_generators() {
        let s = schema(&id)?;
        let default = generate(&s, &s.default_params())?;
        default.write_obj(std::fs::File::create(out_dir.join(format!("{id}.obj")))?)?;
        let random = generate(&s, &s.sample_params(7))?;
        random.write_obj(std::fs::File::create(out_dir.join(format!("{id}_random.obj")))?)?;
        println!(
            "{id:<6} {:>2} params  default {:>4} triangles  random {:>4} triangles",
            s.len(),
            default.triangle_count(),
            random.triangle_count()
        );
        counts.push((id, default.triangle_count()));
    }
    Ok(counts)
}

#[allow(dead_code)]
fn main() -> procinv::Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| ".".into()).into();
    std::fs::create_dir_all(&out)?;
    run_example(&out)?;
    Ok(())
}
