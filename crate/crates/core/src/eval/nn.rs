use super::PointCloud;

pub(crate) fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Uniform bucket grid over a point set for exact nearest-neighbour queries.
pub struct Grid<'a> {
    points: &'a [[f64; 3]],
    lo: [f64; 3],
    cell: f64,
    dims: [usize; 3],
    /// Bucket `i` holds `order[starts[i]..starts[i + 1]]`.
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl<'a> Grid<'a> {
    pub fn new(cloud: &'a PointCloud) -> Self {
        let points = &cloud.points[..];
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for i in 0..3 {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        let extent = (0..3).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
        // about two points per cell along the longest axis' cube
        let per_side = ((points.len() as f64 / 2.0).cbrt().ceil() as usize).max(1);
        let cell = if extent > 0.0 { extent / per_side as f64 } else { 1.0 };
        let dims = [0, 1, 2].map(|i| (((hi[i] - lo[i]) / cell) as usize + 1).min(per_side + 1));
        let mut g = Grid { points, lo, cell, dims, starts: Vec::new(), order: Vec::new() };
        let total = dims[0] * dims[1] * dims[2];
        let keys: Vec<usize> = points.iter().map(|p| g.flat(g.coord(p))).collect();
        let mut counts = vec![0usize; total + 1];
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for i in 0..total {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut order = vec![0; points.len()];
        for (idx, &k) in keys.iter().enumerate() {
            order[fill[k]] = idx;
            fill[k] += 1;
        }
        g.starts = counts;
        g.order = order;
        g
    }

    fn coord(&self, p: &[f64; 3]) -> [usize; 3] {
        [0, 1, 2].map(|i| {
            let c = ((p[i] - self.lo[i]) / self.cell).floor();
            (c.max(0.0) as usize).min(self.dims[i] - 1)
        })
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    /// Distance from `q` to its nearest point, identical to a linear scan.
    pub fn nearest(&self, q: &[f64; 3]) -> f64 {
        let base = self.coord(q);
        let mut best = f64::INFINITY;
        let max_ring = *self.dims.iter().max().expect("three dims");
        for r in 0..=max_ring {
            let lo = base.map(|c| c.saturating_sub(r));
            let hi = [0, 1, 2].map(|i| (base[i] + r).min(self.dims[i] - 1));
            for z in lo[2]..=hi[2] {
                for y in lo[1]..=hi[1] {
                    for x in lo[0]..=hi[0] {
                        let ring = x.abs_diff(base[0]).max(y.abs_diff(base[1])).max(z.abs_diff(base[2]));
                        if ring != r {
                            continue;
                        }
                        let k = self.flat([x, y, z]);
                        for &i in &self.order[self.starts[k]..self.starts[k + 1]] {
                            best = best.min(dist(q, &self.points[i]));
                        }
                    }
                }
            }
            // anything unvisited lies outside the ring-r box; sides at the grid edge have nothing beyond
            let mut bound = f64::INFINITY;
            for i in 0..3 {
                if lo[i] > 0 {
                    bound = bound.min(q[i] - (self.lo[i] + lo[i] as f64 * self.cell));
                }
                if hi[i] + 1 < self.dims[i] {
                    bound = bound.min(self.lo[i] + (hi[i] + 1) as f64 * self.cell - q[i]);
                }
            }
            // shave a hair off the bound so bucket rounding can never hide a closer point
            if best <= bound - 1e-9 * self.cell {
                break;
            }
        }
        best
    }
}

/// For each point of `a`, the distance to its nearest point in `b`.
pub fn nearest_distances(a: &PointCloud, b: &PointCloud) -> Vec<f64> {
    let grid = Grid::new(b);
    a.points.iter().map(|p| grid.nearest(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scan(a: &PointCloud, b: &PointCloud) -> Vec<f64> {
        a.points.iter().map(|p| b.points.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min)).collect()
    }

    #[test]
    fn agrees_with_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for case in 0..200 {
            let na = rng.gen_range(1..300);
            let nb = rng.gen_range(1..300);
            let spread: f64 = if case % 5 == 0 { 1e-3 } else { rng.gen_range(0.1..10.0) };
            let flat = case % 7 == 0;
            let mut pts = |n: usize, off: f64| {
                (0..n)
                    .map(|_| {
                        let z = if flat { 0.0 } else { rng.gen_range(-spread..spread) };
                        [rng.gen_range(-spread..spread) + off, rng.gen_range(-spread..spread), z]
                    })
                    .collect::<Vec<_>>()
            };
            let a = PointCloud::new(pts(na, if case % 3 == 0 { 3.0 * spread } else { 0.0 })).unwrap();
            let b = PointCloud::new(pts(nb, 0.0)).unwrap();
            assert_eq!(nearest_distances(&a, &b), scan(&a, &b), "case {case}");
        }
    }

    #[test]
    fn duplicate_and_single_points() {
        let b = PointCloud::new(vec![[1.0, 1.0, 1.0]; 5]).unwrap();
        let a = PointCloud::new(vec![[1.0, 1.0, 1.0], [4.0, 5.0, 1.0]]).unwrap();
        assert_eq!(nearest_distances(&a, &b), vec![0.0, 5.0]);
    }
}
