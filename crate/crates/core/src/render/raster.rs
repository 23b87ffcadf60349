use serde::{Deserialize, Serialize};

use super::{Camera, Image};
use crate::error::{invalid, Result};
use crate::generators::{cross, dot, norm, scale, sub, add, TriangleMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderMode {
    /// Flat Lambertian shading under a headlight on a white background.
    Shaded,
    /// Coverage: 1 on the object, 0 elsewhere.
    Mask,
}

pub const BACKGROUND: f64 = 1.0;
const AMBIENT: f64 = 0.1;
const DIFFUSE: f64 = 0.8;

struct View {
    eye: Vec3,
    right: Vec3,
    up: Vec3,
    forward: Vec3,
    focal: f64,
    half: f64,
    near: f64,
}

impl View {
    fn new(mesh: &TriangleMesh, camera: &Camera) -> Self {
        let (lo, hi) = mesh.bounding_box().expect("non-empty mesh");
        let center = scale(add(lo, hi), 0.5);
        let radius = (0.5 * norm(sub(hi, lo))).max(1e-9);
        let dist = camera.distance_factor * radius;
        let eye = add(center, scale(camera.eye_direction(), dist));
        let forward = scale(sub(center, eye), 1.0 / dist);
        let r = cross(forward, [0.0, 1.0, 0.0]);
        let right = scale(r, 1.0 / norm(r));
        let up = cross(right, forward);
        let half = 0.5 * camera.image_size as f64;
        let focal = half / (0.5 * camera.fov_deg.to_radians()).tan();
        Self { eye, right, up, forward, focal, half, near: 1e-3 * dist }
    }

    /// Screen position and view depth.
    fn project(&self, p: Vec3) -> (f64, f64, f64) {
        let d = sub(p, self.eye);
        let z = dot(d, self.forward);
        let x = self.half + self.focal * dot(d, self.right) / z;
        let y = self.half - self.focal * dot(d, self.up) / z;
        (x, y, z)
    }
}

/// Depth-buffered rasterization sampled at pixel centers. Triangles with a
/// vertex closer than the near plane are skipped.
pub fn rasterize(mesh: &TriangleMesh, camera: &Camera, mode: RenderMode) -> Result<Image> {
    if mesh.is_empty() || mesh.vertices.is_empty() {
        return Err(invalid("cannot render an empty mesh"));
    }
    camera.validate()?;
    let size = camera.image_size;
    let view = View::new(mesh, camera);
    let projected: Vec<_> = mesh.vertices.iter().map(|&v| view.project(v)).collect();
    // closest surface: largest 1/z
    let mut inv_depth = vec![0.0f64; size * size];
    let mut shade = vec![BACKGROUND; size * size];

    for (t, tri) in mesh.triangles.iter().enumerate() {
        let [a, b, c] = tri.map(|i| projected[i as usize]);
        if a.2 < view.near || b.2 < view.near || c.2 < view.near {
            continue;
        }
        let area = edge(a, b, c.0, c.1);
        if area == 0.0 {
            continue;
        }
        let intensity = {
            let [p0, p1, p2] = mesh.corners(t);
            let n = cross(sub(p1, p0), sub(p2, p0));
            AMBIENT + DIFFUSE * (dot(n, view.forward).abs() / norm(n))
        };
        let xmin = a.0.min(b.0).min(c.0).floor().max(0.0) as usize;
        let ymin = a.1.min(b.1).min(c.1).floor().max(0.0) as usize;
        let xmax = (a.0.max(b.0).max(c.0).ceil() as isize).clamp(0, size as isize) as usize;
        let ymax = (a.1.max(b.1).max(c.1).ceil() as isize).clamp(0, size as isize) as usize;
        let (ia, ib, ic) = (1.0 / a.2, 1.0 / b.2, 1.0 / c.2);
        for py in ymin..ymax {
            let sy = py as f64 + 0.5;
            for px in xmin..xmax {
                let sx = px as f64 + 0.5;
                let w0 = edge(b, c, sx, sy) / area;
                let w1 = edge(c, a, sx, sy) / area;
                let w2 = edge(a, b, sx, sy) / area;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let inv_z = w0 * ia + w1 * ib + w2 * ic;
                let k = py * size + px;
                if inv_z > inv_depth[k] {
                    inv_depth[k] = inv_z;
                    shade[k] = intensity;
                }
            }
        }
    }

    let data = match mode {
        RenderMode::Shaded => shade,
        RenderMode::Mask => inv_depth.iter().map(|&d| if d > 0.0 { 1.0 } else { 0.0 }).collect(),
    };
    Image::from_data(size, size, data)
}

/// Mask of a shaded render: every pixel that is not background.
pub fn mask_of_shaded(img: &Image) -> Image {
    let data = img.data.iter().map(|&v| if v < BACKGROUND { 1.0 } else { 0.0 }).collect();
    Image { width: img.width, height: img.height, data }
}

pub fn silhouette_iou(a: &Image, b: &Image) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.data.iter().zip(&b.data) {
        let (fx, fy) = (x > 0.5, y > 0.5);
        inter += (fx && fy) as usize;
        union += (fx || fy) as usize;
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[inline]
fn edge(a: (f64, f64, f64), b: (f64, f64, f64), x: f64, y: f64) -> f64 {
    (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{generate, schema};

    fn cube() -> TriangleMesh {
        TriangleMesh::cuboid([-0.5; 3], [0.5; 3])
    }

    #[test]
    fn face_on_cube_matches_pinhole_area() {
        for (size, factor) in [(256, 1.8), (256, 2.0), (128, 2.0)] {
            let cam = Camera { elevation_deg: 0.0, ..Camera::new(0.0, 0.0, factor) }.with_size(size);
            let img = rasterize(&cube(), &cam, RenderMode::Mask).unwrap();
            let area: f64 = img.data.iter().sum();
            // front face at distance D - 0.5, D = factor * sqrt(3)/2
            let d = factor * 3f64.sqrt() / 2.0;
            let focal = 0.5 * size as f64 / (0.5 * cam.fov_deg.to_radians()).tan();
            let side = 2.0 * focal * 0.5 / (d - 0.5);
            let rel = (area - side * side).abs() / (side * side);
            assert!(rel < 0.02, "size {size} factor {factor}: {area} vs {}", side * side);
        }
    }

    #[test]
    fn mask_is_binary_and_matches_shaded() {
        let s = schema("chair").unwrap();
        for seed in 0..10 {
            let m = generate(&s, &s.sample_params(seed)).unwrap();
            let cam = Camera::new(30.0, 30.0, 1.8);
            let mask = rasterize(&m, &cam, RenderMode::Mask).unwrap();
            let shaded = rasterize(&m, &cam, RenderMode::Shaded).unwrap();
            assert!(mask.data.iter().all(|&v| v == 0.0 || v == 1.0));
            assert_eq!(mask_of_shaded(&shaded), mask);
            assert!(shaded.data.iter().all(|&v| v > 0.0 && v <= 1.0));
        }
    }

    #[test]
    fn deterministic_and_monotone_in_distance() {
        let s = schema("table").unwrap();
        let m = generate(&s, &s.sample_params(1)).unwrap();
        let near = rasterize(&m, &Camera::new(30.0, 30.0, 1.8), RenderMode::Mask).unwrap();
        let again = rasterize(&m, &Camera::new(30.0, 30.0, 1.8), RenderMode::Mask).unwrap();
        assert_eq!(near, again);
        let far = rasterize(&m, &Camera::new(30.0, 30.0, 2.0), RenderMode::Mask).unwrap();
        let area = |i: &Image| i.data.iter().sum::<f64>();
        assert!(area(&far) <= area(&near));
    }

    #[test]
    fn empty_mesh_is_rejected() {
        assert!(rasterize(&TriangleMesh::new(), &Camera::new(0.0, 30.0, 1.8), RenderMode::Mask).is_err());
    }

    #[test]
    fn iou_bounds() {
        let a = Image::from_data(2, 1, vec![1.0, 0.0]).unwrap();
        let b = Image::from_data(2, 1, vec![1.0, 1.0]).unwrap();
        assert_eq!(silhouette_iou(&a, &a), 1.0);
        assert_eq!(silhouette_iou(&a, &b), 0.5);
    }
}
