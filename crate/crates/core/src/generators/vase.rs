use std::f64::consts::TAU;

use super::{GeneratorSchema, ParamSpec, ParamVector, TriangleMesh};

pub(super) const SEGMENTS: usize = 32;
pub(super) const RINGS: usize = 24;
const MIN_RADIUS: f64 = 0.01;

pub(super) fn schema() -> GeneratorSchema {
    GeneratorSchema::new(
        "vase",
        vec![
            ParamSpec::continuous("base_radius", 0.03, 0.2),
            ParamSpec::continuous("waist_radius", 0.03, 0.2),
            ParamSpec::continuous("belly_radius", 0.03, 0.2),
            ParamSpec::continuous("neck_radius", 0.03, 0.2),
            ParamSpec::continuous("lip_radius", 0.03, 0.2),
            ParamSpec::continuous("height", 0.15, 0.5),
            ParamSpec::continuous("belly_pos", 0.25, 0.6),
            ParamSpec::continuous("neck_pos", 0.7, 0.9),
        ],
    )
    .expect("vase schema is well formed")
}

/// Profile knots `(y, r)`, strictly increasing in `y`.
fn knots(s: &GeneratorSchema, p: &ParamVector) -> [(f64, f64); 5] {
    let h = p.get(s, "height");
    let belly = p.get(s, "belly_pos");
    let neck = p.get(s, "neck_pos").max(belly + 0.05);
    [
        (0.0, p.get(s, "base_radius")),
        (0.5 * belly * h, p.get(s, "waist_radius")),
        (belly * h, p.get(s, "belly_radius")),
        (neck * h, p.get(s, "neck_radius")),
        (h, p.get(s, "lip_radius")),
    ]
}

/// Radius as a function of height: cubic Hermite segments with Catmull-Rom
/// (finite-difference) tangents on the non-uniform knots, floored at 1 cm.
fn radius_at(k: &[(f64, f64); 5], y: f64) -> f64 {
    let n = k.len();
    let seg = (0..n - 1).find(|&i| y <= k[i + 1].0).unwrap_or(n - 2);
    let tangent = |i: usize| {
        let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
        (k[b].1 - k[a].1) / (k[b].0 - k[a].0)
    };
    let (y0, r0) = k[seg];
    let (y1, r1) = k[seg + 1];
    let dy = y1 - y0;
    let t = ((y - y0) / dy).clamp(0.0, 1.0);
    let (t2, t3) = (t * t, t * t * t);
    let r = (2.0 * t3 - 3.0 * t2 + 1.0) * r0
        + (t3 - 2.0 * t2 + t) * dy * tangent(seg)
        + (-2.0 * t3 + 3.0 * t2) * r1
        + (t3 - t2) * dy * tangent(seg + 1);
    r.max(MIN_RADIUS)
}

/// Ring radii from bottom (`y = 0`) to top (`y = height`).
pub(super) fn ring_radii(s: &GeneratorSchema, p: &ParamVector) -> Vec<(f64, f64)> {
    let k = knots(s, p);
    let h = p.get(s, "height");
    (0..RINGS)
        .map(|j| {
            let y = if j == RINGS - 1 { h } else { h * j as f64 / (RINGS - 1) as f64 };
            (y, radius_at(&k, y))
        })
        .collect()
}

pub(super) fn build(s: &GeneratorSchema, p: &ParamVector) -> TriangleMesh {
    let rings = ring_radii(s, p);
    let mut mesh = TriangleMesh::new();
    for &(y, r) in &rings {
        for i in 0..SEGMENTS {
            let (sin, cos) = (TAU * i as f64 / SEGMENTS as f64).sin_cos();
            mesh.vertices.push([r * cos, y, r * sin]);
        }
    }
    let idx = |ring: usize, seg: usize| (ring * SEGMENTS + seg % SEGMENTS) as u32;
    for j in 0..RINGS - 1 {
        for i in 0..SEGMENTS {
            let (a, b, c, d) = (idx(j, i), idx(j, i + 1), idx(j + 1, i + 1), idx(j + 1, i));
            mesh.triangles.push([a, c, b]);
            mesh.triangles.push([a, d, c]);
        }
    }
    let center = mesh.vertices.len() as u32;
    mesh.vertices.push([0.0, 0.0, 0.0]);
    for i in 0..SEGMENTS {
        mesh.triangles.push([center, idx(0, i), idx(0, i + 1)]);
    }
    mesh
}
