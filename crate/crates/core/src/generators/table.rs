use super::{GeneratorSchema, ParamSpec, ParamVector, TriangleMesh};

pub(super) fn schema() -> GeneratorSchema {
    GeneratorSchema::new(
        "table",
        vec![
            ParamSpec::continuous("top_width", 0.6, 1.6),
            ParamSpec::continuous("top_depth", 0.5, 1.2),
            ParamSpec::continuous("top_thickness", 0.02, 0.08),
            ParamSpec::continuous("height", 0.4, 0.9),
            ParamSpec::continuous("leg_thickness", 0.04, 0.12),
            ParamSpec::discrete("leg_style", &["four-legs", "pedestal"]),
        ],
    )
    .expect("table schema is well formed")
}

/// Top slab first, then either four corner legs or a column on a base slab.
pub(super) fn build(s: &GeneratorSchema, p: &ParamVector) -> TriangleMesh {
    let w = p.get(s, "top_width");
    let d = p.get(s, "top_depth");
    let tt = p.get(s, "top_thickness");
    let h = p.get(s, "height");
    let lt = p.get(s, "leg_thickness");
    let (hw, hd) = (0.5 * w, 0.5 * d);
    let under = h - tt;

    let mut mesh = TriangleMesh::cuboid([-hw, under, -hd], [hw, h, hd]);
    match p.choice(s, "leg_style") {
        0 => {
            for sx in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    let (x0, x1) = span(sx, hw, lt);
                    let (z0, z1) = span(sz, hd, lt);
                    mesh.append(&TriangleMesh::cuboid([x0, 0.0, z0], [x1, under, z1]));
                }
            }
        }
        _ => {
            let (bw, bd) = (0.3 * w, 0.3 * d);
            mesh.append(&TriangleMesh::cuboid([-bw, 0.0, -bd], [bw, tt, bd]));
            let c = 0.5 * lt;
            mesh.append(&TriangleMesh::cuboid([-c, tt, -c], [c, under, c]));
        }
    }
    mesh
}

/// Interval of width `t` flush with the outer edge `sign * half`.
fn span(sign: f64, half: f64, t: f64) -> (f64, f64) {
    if sign < 0.0 {
        (-half, -half + t)
    } else {
        (half - t, half)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::generate;

    #[test]
    fn bbox_matches_dimensions() {
        let s = schema();
        for seed in 0..50 {
            let p = s.sample_params(seed);
            let (lo, hi) = generate(&s, &p).unwrap().bounding_box().unwrap();
            assert!((hi[0] - lo[0] - p.get(&s, "top_width")).abs() < 1e-9);
            assert!((hi[2] - lo[2] - p.get(&s, "top_depth")).abs() < 1e-9);
            assert!((hi[1] - p.get(&s, "height")).abs() < 1e-9);
            assert!(lo[1].abs() < 1e-12);
        }
    }

    #[test]
    fn leg_style_changes_count_not_top() {
        let s = schema();
        let mut p = s.sample_params(4);
        p.values[5] = 0.0;
        let four = generate(&s, &p).unwrap();
        p.values[5] = 1.0;
        let ped = generate(&s, &p).unwrap();
        assert_eq!(four.triangle_count(), 60);
        assert_eq!(ped.triangle_count(), 36);
        assert_eq!(four.vertices[..8], ped.vertices[..8]);
    }
}
