use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::generators::TriangleMesh;

/// Points in 3D; the carrier for every geometry metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("a point cloud needs at least one point"));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("point coordinates must be finite"));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The first `n` points (clouds from [`sample_surface`] are in random order).
    pub fn prefix(&self, n: usize) -> PointCloud {
        PointCloud { points: self.points[..n.min(self.len())].to_vec() }
    }

    pub fn transformed(&self, t: &Normalization) -> PointCloud {
        PointCloud { points: self.points.iter().map(|p| t.apply(*p)).collect() }
    }
}

/// Maps a bounding box to unit maximum extent around the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub center: [f64; 3],
    pub scale: f64,
}

impl Normalization {
    pub fn identity() -> Self {
        Self { center: [0.0; 3], scale: 1.0 }
    }

    /// Centers the mesh's bounding box and scales its largest side to 1.
    pub fn of_mesh(mesh: &TriangleMesh) -> Result<Self> {
        let (lo, hi) = mesh.bounding_box().ok_or_else(|| invalid("empty mesh"))?;
        let extent = (0..3).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
        if extent <= 0.0 {
            return Err(invalid("mesh has zero extent"));
        }
        Ok(Self { center: [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])], scale: 1.0 / extent })
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|i| (p[i] - self.center[i]) * self.scale)
    }
}

/// `n` area-weighted surface samples in world coordinates, in random order.
///
/// Triangles are chosen by systematic sampling of the area CDF (one uniform
/// offset, `n` evenly spaced positions), so each triangle receives its area
/// share of points to within one; positions inside a triangle are uniform.
pub fn sample_surface_raw(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if mesh.is_empty() || n == 0 {
        return Err(invalid("surface sampling needs a non-empty mesh and n >= 1"));
    }
    mesh.validate()?;
    let mut cdf = Vec::with_capacity(mesh.triangle_count());
    let mut total = 0.0;
    for t in 0..mesh.triangle_count() {
        total += mesh.triangle_area(t);
        cdf.push(total);
    }
    if total <= 0.0 {
        return Err(invalid("mesh has zero surface area"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset: f64 = rng.gen();
    let mut points = Vec::with_capacity(n);
    let mut tri = 0;
    for i in 0..n {
        let target = (i as f64 + offset) / n as f64 * total;
        while tri + 1 < cdf.len() && cdf[tri] <= target {
            tri += 1;
        }
        let [a, b, c] = mesh.corners(tri);
        let (mut u, mut v): (f64, f64) = (rng.gen(), rng.gen());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        points.push([0, 1, 2].map(|k| a[k] + u * (b[k] - a[k]) + v * (c[k] - a[k])));
    }
    points.shuffle(&mut rng);
    PointCloud::new(points)
}

/// Surface samples normalized by the mesh's own bounding box.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    Ok(sample_surface_raw(mesh, n, seed)?.transformed(&Normalization::of_mesh(mesh)?))
}
