use super::assignment::solve_assignment;
use super::nn::{dist, nearest_distances};
use super::PointCloud;
use crate::error::{invalid, Result};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Bidirectional mean of (non-squared) nearest-neighbour distances, halved.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> f64 {
    0.5 * (mean(&nearest_distances(a, b)) + mean(&nearest_distances(b, a)))
}

/// Mean distance under the optimal one-to-one matching; clouds must have equal size.
pub fn emd(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    let n = a.len();
    if b.len() != n {
        return Err(invalid(format!("earth mover's distance needs equal sizes, got {n} and {}", b.len())));
    }
    let cost: Vec<f64> = a.points.iter().flat_map(|p| b.points.iter().map(move |q| dist(p, q))).collect();
    let col = solve_assignment(&cost, n);
    Ok((0..n).map(|i| cost[i * n + col[i]]).sum::<f64>() / n as f64)
}

/// Harmonic mean of precision (share of `a` within `tau` of `b`) and recall
/// (share of `b` within `tau` of `a`); 0 when both are 0.
pub fn fscore(a: &PointCloud, b: &PointCloud, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(invalid("tau must be positive"));
    }
    let share = |d: Vec<f64>| d.iter().filter(|&&x| x <= tau).count() as f64 / d.len() as f64;
    let p = share(nearest_distances(a, b));
    let r = share(nearest_distances(b, a));
    Ok(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(p: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(p.to_vec()).unwrap()
    }

    fn random(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
        cloud(&(0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect::<Vec<_>>())
    }

    #[test]
    fn hand_cases() {
        let o = cloud(&[[0.0; 3]]);
        let x = cloud(&[[1.0, 0.0, 0.0]]);
        assert_eq!(chamfer(&o, &x), 1.0);
        assert_eq!(chamfer(&o, &o), 0.0);
        let a = cloud(&[[0.0; 3], [1.0, 0.0, 0.0]]);
        let b = cloud(&[[1.0, 0.0, 0.0], [0.0; 3]]);
        assert_eq!(emd(&a, &b).unwrap(), 0.0);
        assert!(emd(&a, &o).is_err());

        // precision 1, recall 1/3
        let a = cloud(&[[0.0; 3]]);
        let b = cloud(&[[0.0; 3], [5.0, 0.0, 0.0], [9.0, 0.0, 0.0]]);
        assert_eq!(fscore(&a, &b, 0.1).unwrap(), 0.5);
        assert_eq!(fscore(&o, &x, 0.5).unwrap(), 0.0);
        assert_eq!(fscore(&b, &b, 1e-6).unwrap(), 1.0);
        assert!(fscore(&a, &b, 0.0).is_err());
    }

    #[test]
    fn symmetry_and_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let (a, b) = (random(&mut rng, 40), random(&mut rng, 40));
            assert_eq!(chamfer(&a, &b), chamfer(&b, &a));
            assert!((emd(&a, &b).unwrap() - emd(&b, &a).unwrap()).abs() < 1e-12);
            let s = 3.5;
            let scale = |c: &PointCloud| cloud(&c.points.iter().map(|p| p.map(|v| v * s)).collect::<Vec<_>>());
            let (sa, sb) = (scale(&a), scale(&b));
            assert!((chamfer(&sa, &sb) - s * chamfer(&a, &b)).abs() < 1e-12);
            assert!((emd(&sa, &sb).unwrap() - s * emd(&a, &b).unwrap()).abs() < 1e-12);
            assert_eq!(fscore(&sa, &sb, 0.1 * s).unwrap(), fscore(&a, &b, 0.1).unwrap());
        }
    }
}
