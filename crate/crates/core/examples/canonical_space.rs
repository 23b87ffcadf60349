// Map parameters into the shared [-1, 1] space the diffusion model works in,
// and back, including how discrete choices land on piece centers.
//
// `cargo run --example canonical_space`

use procinv::canon::{canonicalize, decanonicalize, piece_center};
use procinv::generators::schema;

/// Returns the largest round-trip error over a batch of random chairs.
fn run_example() -> procinv::Result<f64> {
    let s = schema("chair")?;
    let p = s.default_params();
    let x = canonicalize(&s, &p)?;
    for (spec, (v, c)) in s.params.iter().zip(p.values.iter().zip(&x.x)) {
        println!("{:<16} {v:>8.3} -> {c:+.3}", spec.name);
    }
    println!("n_slats pieces: {:?}", (0..4).map(|k| piece_center(k, 4)).collect::<Vec<_>>());

    // a noisy canonical vector still decodes to the nearest valid choice
    let mut noisy = x.clone();
    let slats = s.index_of("n_slats").expect("chair has n_slats");
    noisy.x[slats] += 0.2;
    let back = decanonicalize(&s, &noisy)?;
    println!("n_slats after +0.2 nudge: {}", back.values[slats]);

    let mut worst: f64 = 0.0;
    for seed in 0..200 {
        let p = s.sample_params(seed);
        let q = decanonicalize(&s, &canonicalize(&s, &p)?)?;
        for (a, b) in p.values.iter().zip(&q.values) {
            worst = worst.max((a - b).abs());
        }
    }
    println!("max round-trip error over 200 chairs: {worst:.2e}");
    Ok(worst)
}

#[allow(dead_code)]
fn main() -> procinv::Result<()> {
    run_example()?;
    Ok(())
}
