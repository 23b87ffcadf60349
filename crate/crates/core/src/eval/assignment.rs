/// Minimum-cost perfect matching on a square cost matrix (row-major, `n x n`)
/// by the shortest-augmenting-path Hungarian method, `O(n^3)`.
///
/// Returns `col[i]`, the column assigned to row `i`.
pub fn solve_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    if n == 0 {
        return Vec::new();
    }
    // 1-based internally; column 0 is a virtual start
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = inf;
            let mut j1 = 0;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col = vec![0; n];
    for j in 1..=n {
        col[row_of[j] - 1] = j - 1;
    }
    col
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn optimal_on_small_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=7 {
            let perms = permutations(n);
            for _ in 0..20 {
                let cost: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..10.0)).collect();
                let col = solve_assignment(&cost, n);
                let mut seen = col.clone();
                seen.sort_unstable();
                assert_eq!(seen, (0..n).collect::<Vec<_>>());
                let total = |p: &[usize]| (0..n).map(|i| cost[i * n + p[i]]).sum::<f64>();
                let best = perms.iter().map(|p| total(p)).fold(f64::INFINITY, f64::min);
                assert!((total(&col) - best).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn handles_ties_and_negative_costs() {
        assert_eq!(solve_assignment(&[1.0; 9], 3).len(), 3);
        assert_eq!(solve_assignment(&[-5.0, 0.0, 0.0, -5.0], 2), vec![0, 1]);
        assert_eq!(solve_assignment(&[0.0, -5.0, -5.0, 0.0], 2), vec![1, 0]);
        assert!(solve_assignment(&[], 0).is_empty());
    }
}
