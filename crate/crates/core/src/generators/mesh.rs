use std::io::Write;

use crate::error::{invalid, Result};

pub type Vec3 = [f64; 3];

/// Indexed triangle list, meters, y-up.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn append(&mut self, other: &TriangleMesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }

    /// Axis-aligned box spanning `min..max`, 8 vertices and 12 triangles.
    pub fn cuboid(min: Vec3, max: Vec3) -> Self {
        let corners = [
            [min[0], min[1], min[2]],
            [max[0], min[1], min[2]],
            [max[0], max[1], min[2]],
            [min[0], max[1], min[2]],
            [min[0], min[1], max[2]],
            [max[0], min[1], max[2]],
            [max[0], max[1], max[2]],
            [min[0], max[1], max[2]],
        ];
        Self::hexahedron(corners)
    }

    /// Cuboid whose corners are passed through `map`; used for sheared legs
    /// and tilted panels. `map` must keep the faces planar.
    pub fn deformed_cuboid(min: Vec3, max: Vec3, map: impl Fn(Vec3) -> Vec3) -> Self {
        let mut m = Self::cuboid(min, max);
        for v in &mut m.vertices {
            *v = map(*v);
        }
        m
    }

    /// Hexahedron from 8 corners: the `z-` face (x0y0, x1y0, x1y1, x0y1)
    /// followed by the `z+` face in the same order.
    pub fn hexahedron(c: [Vec3; 8]) -> Self {
        const FACES: [[u32; 4]; 6] = [
            [0, 3, 2, 1], // -z
            [4, 5, 6, 7], // +z
            [0, 4, 7, 3], // -x
            [1, 2, 6, 5], // +x
            [0, 1, 5, 4], // -y
            [3, 7, 6, 2], // +y
        ];
        let mut triangles = Vec::with_capacity(12);
        for f in FACES {
            triangles.push([f[0], f[1], f[2]]);
            triangles.push([f[0], f[2], f[3]]);
        }
        Self { vertices: c.to_vec(), triangles }
    }

    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        let mut lo = first;
        let mut hi = first;
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        Some((lo, hi))
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        let [i, j, k] = self.triangles[t];
        [self.vertices[i as usize], self.vertices[j as usize], self.vertices[k as usize]]
    }

    /// Checks index range, finiteness and non-degeneracy.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len() as u32;
        if self.vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(invalid("mesh has non-finite vertex"));
        }
        for (i, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&k| k >= n) {
                return Err(invalid(format!("triangle {i} has out-of-range index")));
            }
            if self.triangle_area(i) <= 1e-12 {
                return Err(invalid(format!("triangle {i} is degenerate")));
            }
        }
        Ok(())
    }

    /// Wavefront OBJ with 1-based face indices.
    pub fn write_obj<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", v[0], v[1], v[2])?;
        }
        for t in &self.triangles {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    }

    /// Little-endian vertex and index bytes, used for content hashing.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.vertices.len() * 24 + self.triangles.len() * 12);
        for v in &self.vertices {
            for c in v {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        for t in &self.triangles {
            for i in t {
                out.extend_from_slice(&i.to_le_bytes());
            }
        }
        out
    }
}

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cuboid_is_closed_and_valid() {
        let m = TriangleMesh::cuboid([0.0; 3], [1.0, 2.0, 3.0]);
        assert_eq!(m.triangle_count(), 12);
        m.validate().unwrap();
        let area: f64 = (0..12).map(|t| m.triangle_area(t)).sum();
        assert!((area - 2.0 * (2.0 + 3.0 + 6.0)).abs() < 1e-12);
        // every edge is shared by exactly two triangles
        let mut edges = std::collections::HashMap::new();
        for t in &m.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        assert!(edges.values().all(|&c| c == 2));
    }

    #[test]
    fn obj_is_one_based() {
        let m = TriangleMesh::cuboid([0.0; 3], [1.0; 3]);
        let mut buf = Vec::new();
        m.write_obj(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().filter(|l| l.starts_with("v ")).count(), 8);
        assert!(s.lines().filter(|l| l.starts_with("f ")).all(|l| !l.contains(" 0")));
    }
}
