use super::{GeneratorSchema, ParamSpec, ParamVector, TriangleMesh};

pub(super) fn schema() -> GeneratorSchema {
    GeneratorSchema::new(
        "chair",
        vec![
            ParamSpec::continuous("seat_width", 0.35, 0.8),
            ParamSpec::continuous("seat_depth", 0.35, 0.8),
            ParamSpec::continuous("seat_height", 0.3, 0.6),
            ParamSpec::continuous("seat_thickness", 0.02, 0.08),
            ParamSpec::continuous("leg_thickness", 0.02, 0.08),
            ParamSpec::continuous("leg_splay", 0.0, 0.15),
            ParamSpec::continuous("back_height", 0.2, 0.6),
            ParamSpec::continuous("back_tilt_deg", 0.0, 20.0),
            ParamSpec::continuous("arm_height", 0.15, 0.3),
            ParamSpec::discrete("leg_style", &["straight", "splayed"]),
            ParamSpec::discrete("back_style", &["solid", "slats"]),
            ParamSpec::discrete("n_slats", &["2", "3", "4", "5"]),
            ParamSpec::discrete("has_arms", &["no", "yes"]),
        ],
    )
    .expect("chair schema is well formed")
}

struct Dims {
    hw: f64,
    hd: f64,
    seat_top: f64,
    st: f64,
    lt: f64,
    splay: f64,
    back_h: f64,
    tilt: f64,
    arm_h: f64,
    seat_h: f64,
}

pub(super) fn build(s: &GeneratorSchema, p: &ParamVector) -> TriangleMesh {
    let splayed = p.choice(s, "leg_style") == 1;
    let seat_h = p.get(s, "seat_height");
    let st = p.get(s, "seat_thickness");
    let d = Dims {
        hw: 0.5 * p.get(s, "seat_width"),
        hd: 0.5 * p.get(s, "seat_depth"),
        seat_top: seat_h + 0.5 * st,
        st,
        lt: p.get(s, "leg_thickness"),
        splay: if splayed { p.get(s, "leg_splay") } else { 0.0 },
        back_h: p.get(s, "back_height"),
        tilt: p.get(s, "back_tilt_deg").to_radians(),
        arm_h: p.get(s, "arm_height"),
        seat_h,
    };

    let mut mesh = TriangleMesh::cuboid([-d.hw, seat_h - 0.5 * st, -d.hd], [d.hw, d.seat_top, d.hd]);
    legs(&d, &mut mesh);
    match p.choice(s, "back_style") {
        0 => mesh.append(&back_piece(&d, -d.hw, d.hw, 0.0, d.back_h)),
        _ => {
            let n = p.choice(s, "n_slats") + 2;
            mesh.append(&back_piece(&d, -d.hw, -d.hw + d.lt, 0.0, d.back_h));
            mesh.append(&back_piece(&d, d.hw - d.lt, d.hw, 0.0, d.back_h));
            let pitch = d.back_h / (n as f64 + 1.0);
            let half = 0.25 * pitch;
            for k in 1..=n {
                let c = pitch * k as f64;
                mesh.append(&back_piece(&d, -d.hw + d.lt, d.hw - d.lt, c - half, c + half));
            }
        }
    }
    if p.choice(s, "has_arms") == 1 {
        arms(&d, &mut mesh);
    }
    mesh
}

/// Legs run from the floor to the seat underside, flush with the seat edges.
/// Splayed legs keep their top face and shift the bottom face outward.
fn legs(d: &Dims, mesh: &mut TriangleMesh) {
    let under = d.seat_h - 0.5 * d.st;
    for sx in [-1.0, 1.0] {
        for sz in [-1.0, 1.0] {
            let x0 = if sx < 0.0 { -d.hw } else { d.hw - d.lt };
            let z0 = if sz < 0.0 { -d.hd } else { d.hd - d.lt };
            let splay = d.splay;
            mesh.append(&TriangleMesh::deformed_cuboid(
                [x0, 0.0, z0],
                [x0 + d.lt, under, z0 + d.lt],
                |v| {
                    let k = splay * (1.0 - v[1] / under);
                    [v[0] + sx * k, v[1], v[2] + sz * k]
                },
            ));
        }
    }
}

/// Panel spanning `x0..x1` and local heights `h0..h1`, seat thickness deep,
/// tilted backwards about the seat's rear top edge.
fn back_piece(d: &Dims, x0: f64, x1: f64, h0: f64, h1: f64) -> TriangleMesh {
    let (sin, cos) = d.tilt.sin_cos();
    let (y0, z0) = (d.seat_top, -d.hd);
    // local frame: v[1] = height above the edge, v[2] = depth forward of it
    TriangleMesh::deformed_cuboid([x0, h0, 0.0], [x1, h1, d.st], |v| {
        [v[0], y0 + v[1] * cos + v[2] * sin, z0 - v[1] * sin + v[2] * cos]
    })
}

fn arms(d: &Dims, mesh: &mut TriangleMesh) {
    let top = d.seat_h + d.arm_h;
    for sx in [-1.0, 1.0] {
        let x0 = if sx < 0.0 { -d.hw } else { d.hw - d.lt };
        mesh.append(&TriangleMesh::cuboid([x0, top - d.lt, -d.hd], [x0 + d.lt, top, d.hd]));
        mesh.append(&TriangleMesh::cuboid(
            [x0, d.seat_top, d.hd - d.lt],
            [x0 + d.lt, top - d.lt, d.hd],
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::generate;

    fn expected_bbox(s: &GeneratorSchema, p: &ParamVector) -> ([f64; 3], [f64; 3]) {
        let splay = if p.choice(s, "leg_style") == 1 { p.get(s, "leg_splay") } else { 0.0 };
        let (w, dp) = (p.get(s, "seat_width"), p.get(s, "seat_depth"));
        let (sh, st) = (p.get(s, "seat_height"), p.get(s, "seat_thickness"));
        let (bh, tilt) = (p.get(s, "back_height"), p.get(s, "back_tilt_deg").to_radians());
        let mut ymax = sh + 0.5 * st + bh * tilt.cos() + st * tilt.sin();
        if p.choice(s, "has_arms") == 1 {
            ymax = ymax.max(sh + p.get(s, "arm_height"));
        }
        let zmin = (-0.5 * dp - splay).min(-0.5 * dp - bh * tilt.sin());
        (
            [-0.5 * w - splay, 0.0, zmin],
            [0.5 * w + splay, ymax, 0.5 * dp + splay],
        )
    }

    #[test]
    fn default_is_six_cuboids() {
        let s = schema();
        let m = generate(&s, &s.default_params()).unwrap();
        assert_eq!(m.triangle_count(), 72);
    }

    #[test]
    fn bbox_closed_form() {
        let s = schema();
        for seed in 0..200 {
            let p = s.sample_params(seed);
            let m = generate(&s, &p).unwrap();
            m.validate().unwrap();
            let (lo, hi) = m.bounding_box().unwrap();
            let (elo, ehi) = expected_bbox(&s, &p);
            for k in 0..3 {
                assert!((lo[k] - elo[k]).abs() < 1e-9, "seed {seed} axis {k} lo");
                assert!((hi[k] - ehi[k]).abs() < 1e-9, "seed {seed} axis {k} hi");
            }
        }
    }

    #[test]
    fn topology_depends_on_discrete_only() {
        let s = schema();
        for seed in 0..30 {
            let a = s.sample_params(seed);
            let mut b = s.sample_params(seed + 1000);
            for (i, spec) in s.params.iter().enumerate() {
                if spec.is_discrete() {
                    b.values[i] = a.values[i];
                }
            }
            let (ma, mb) = (generate(&s, &a).unwrap(), generate(&s, &b).unwrap());
            assert_eq!(ma.triangles, mb.triangles);
            assert_eq!(ma.vertices.len(), mb.vertices.len());
        }
    }

    #[test]
    fn arms_add_triangles() {
        let s = schema();
        let mut p = s.default_params();
        let before = generate(&s, &p).unwrap().triangle_count();
        p.values[12] = 1.0;
        assert!(generate(&s, &p).unwrap().triangle_count() > before);
    }
}
