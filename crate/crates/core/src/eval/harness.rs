use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{chamfer, emd, fscore, sample_surface_raw, Normalization};
use crate::error::Result;
use crate::generators::{generate, schema, GeneratorSchema, ParamVector, TriangleMesh};
use crate::pipeline::{invert_with, Checkpoint, InvertOptions};
use crate::render::Image;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    /// Surface samples per mesh for CD and F-Score.
    pub points: usize,
    /// Leading samples used for EMD.
    pub emd_points: usize,
    pub tau: f64,
    pub k_samples: usize,
    pub sampler_steps: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { points: 2048, emd_points: 512, tau: 0.05, k_samples: 1, sampler_steps: 50, seed: 0 }
    }
}

/// One row of metrics, named as in the usual results table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    #[serde(rename = "CD")]
    pub cd: f64,
    #[serde(rename = "EMD")]
    pub emd: f64,
    #[serde(rename = "F-Score")]
    pub fscore: f64,
}

impl Scores {
    fn mean(rows: impl Iterator<Item = Scores>) -> Scores {
        let (mut s, mut n) = (Scores { cd: 0.0, emd: 0.0, fscore: 0.0 }, 0.0);
        for r in rows {
            s.cd += r.cd;
            s.emd += r.emd;
            s.fscore += r.fscore;
            n += 1.0;
        }
        Scores { cd: s.cd / n, emd: s.emd / n, fscore: s.fscore / n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemMetrics {
    pub index: usize,
    pub predicted: serde_json::Value,
    pub prediction: Scores,
    /// The same metrics for a random parameter draw.
    pub baseline: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedItem {
    pub index: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub generator_id: String,
    pub count: usize,
    pub aggregate: Scores,
    pub baseline: Scores,
    pub items: Vec<ItemMetrics>,
    pub skipped: Vec<SkippedItem>,
    pub config: EvalOptions,
}

/// Inverts every test image with the checkpoint and scores the result.
pub fn evaluate(checkpoint: &Checkpoint, test_items: &[(Image, ParamVector)], opts: &EvalOptions) -> Result<MetricsReport> {
    let inv = InvertOptions {
        k_samples: opts.k_samples,
        seed: opts.seed,
        sampler_steps: opts.sampler_steps,
        ..InvertOptions::default()
    };
    evaluate_with(&checkpoint.generator_id, test_items, opts, |_, img| {
        Ok(invert_with(img, checkpoint, &inv)?.swap_remove(0).params)
    })
}

/// Scores the predictions of `predict(index, image)` against ground truth.
/// Items whose prediction or scoring fails are skipped and listed in the report.
pub fn evaluate_with(
    generator_id: &str,
    test_items: &[(Image, ParamVector)],
    opts: &EvalOptions,
    predict: impl Fn(usize, &Image) -> Result<ParamVector> + Sync,
) -> Result<MetricsReport> {
    let schema = schema(generator_id)?;
    let results: Vec<Result<ItemMetrics>> = test_items
        .par_iter()
        .enumerate()
        .map(|(index, (img, truth))| {
            let gt = generate(&schema, truth)?;
            let pred = predict(index, img)?;
            let seed = opts.seed.wrapping_add(index as u64);
            let random = schema.sample_params(seed ^ 0x5eed_ba5e);
            Ok(ItemMetrics {
                index,
                predicted: schema.params_to_json(&pred),
                prediction: compare(&schema, &gt, &pred, seed, opts)?,
                baseline: compare(&schema, &gt, &random, seed, opts)?,
            })
        })
        .collect();
    let mut items = Vec::new();
    let mut skipped = Vec::new();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(m) => items.push(m),
            Err(e) => skipped.push(SkippedItem { index, error: e.to_string() }),
        }
    }
    Ok(MetricsReport {
        generator_id: generator_id.into(),
        count: items.len(),
        aggregate: Scores::mean(items.iter().map(|m| m.prediction)),
        baseline: Scores::mean(items.iter().map(|m| m.baseline)),
        items,
        skipped,
        config: opts.clone(),
    })
}

/// Metrics between the ground-truth mesh and the mesh of `params`, both
/// sampled with the same seed and normalized by the ground truth's box.
fn compare(schema: &GeneratorSchema, gt: &TriangleMesh, params: &ParamVector, seed: u64, opts: &EvalOptions) -> Result<Scores> {
    let norm = Normalization::of_mesh(gt)?;
    let a = sample_surface_raw(gt, opts.points, seed)?.transformed(&norm);
    let b = sample_surface_raw(&generate(schema, params)?, opts.points, seed)?.transformed(&norm);
    Ok(Scores {
        cd: chamfer(&a, &b),
        emd: emd(&a.prefix(opts.emd_points), &b.prefix(opts.emd_points))?,
        fscore: fscore(&a, &b, opts.tau)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::{default_camera, rasterize, RenderMode};

    fn items(n: usize) -> Vec<(Image, ParamVector)> {
        let s = schema("vase").unwrap();
        (0..n)
            .map(|i| {
                let p = s.sample_params(i as u64);
                let img = rasterize(&generate(&s, &p).unwrap(), &default_camera().with_size(32), RenderMode::Shaded).unwrap();
                (img, p)
            })
            .collect()
    }

    #[test]
    fn ground_truth_predictions_score_perfectly() {
        let items = items(4);
        let opts = EvalOptions { points: 256, emd_points: 64, ..Default::default() };
        let r = evaluate_with("vase", &items, &opts, |i, _| Ok(items[i].1.clone())).unwrap();
        assert_eq!(r.count, 4);
        for m in &r.items {
            assert_eq!(m.prediction, Scores { cd: 0.0, emd: 0.0, fscore: 1.0 });
            assert!(m.baseline.cd > 0.0);
        }
        assert_eq!(r.aggregate, Scores { cd: 0.0, emd: 0.0, fscore: 1.0 });
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["aggregate"]["F-Score"].is_number() && json["baseline"]["CD"].is_number());
    }

    #[test]
    fn failures_are_skipped_and_counted() {
        let items = items(3);
        let opts = EvalOptions { points: 128, emd_points: 32, ..Default::default() };
        let r = evaluate_with("vase", &items, &opts, |i, _| {
            if i == 1 {
                Err(crate::Error::InvalidInput("boom".into()))
            } else {
                Ok(items[i].1.clone())
            }
        })
        .unwrap();
        assert_eq!(r.count, 2);
        assert_eq!(r.skipped, vec![SkippedItem { index: 1, error: "invalid input: boom".into() }]);
        assert_eq!(r.items.iter().map(|m| m.index).collect::<Vec<_>>(), vec![0, 2]);
    }
}
