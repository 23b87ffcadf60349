// Compare shapes with Chamfer distance, EMD and F-Score, then score an
// oracle predictor and a perturbed one against the random baseline.
//
// `cargo run --release --example shape_metrics`

use procinv::eval::{chamfer, emd, evaluate_with, fscore, sample_surface, EvalOptions};
use procinv::generators::{generate, schema, ParamVector};
use procinv::render::{default_camera, rasterize, RenderMode};

/// Returns aggregate F-Scores for (oracle, perturbed, random baseline).
fn run_example() -> procinv::Result<(f64, f64, f64)> {
    let s = schema("chair")?;
    let a = sample_surface(&generate(&s, &s.sample_params(1))?, 1024, 0)?;
    let b = sample_surface(&generate(&s, &s.sample_params(2))?, 1024, 0)?;
    let a2 = sample_surface(&generate(&s, &s.sample_params(1))?, 1024, 9)?;
    println!("same chair, new samples:  CD {:.4}  F {:.3}", chamfer(&a, &a2), fscore(&a, &a2, 0.05)?);
    println!("different chairs:         CD {:.4}  F {:.3}", chamfer(&a, &b), fscore(&a, &b, 0.05)?);
    println!("EMD on 256 points:        same {:.4}  different {:.4}", emd(&a.prefix(256), &a2.prefix(256))?, emd(&a.prefix(256), &b.prefix(256))?);

    let items: Vec<(procinv::render::Image, ParamVector)> = (0..6)
        .map(|i| {
            let p = s.sample_params(100 + i);
            Ok((rasterize(&generate(&s, &p)?, &default_camera(), RenderMode::Shaded)?, p))
        })
        .collect::<procinv::Result<_>>()?;
    let opts = EvalOptions { points: 1024, emd_points: 128, ..EvalOptions::default() };
    let oracle = evaluate_with("chair", &items, &opts, |i, _| Ok(items[i].1.clone()))?;
    let nudged = evaluate_with("chair", &items, &opts, |i, _| {
        let mut p = items[i].1.clone();
        let w = s.index_of("seat_width").expect("chair has seat_width");
        p.values[w] = (p.values[w] + 0.1).min(0.8);
        Ok(p)
    })?;
    for (name, r) in [("oracle", &oracle), ("nudged", &nudged)] {
        println!(
            "{name:<7} CD {:.4} EMD {:.4} F {:.3}   random: CD {:.4} EMD {:.4} F {:.3}",
            r.aggregate.cd, r.aggregate.emd, r.aggregate.fscore, r.baseline.cd, r.baseline.emd, r.baseline.fscore
        );
    }
    Ok((oracle.aggregate.fscore, nudged.aggregate.fscore, oracle.baseline.fscore))
}

#[allow(dead_code)]
fn main() -> procinv::Result<()> {
    run_example()?;
    Ok(())
}
