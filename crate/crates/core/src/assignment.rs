//! Dense linear assignment (Hungarian method with potentials), O(n^3).

use nalgebra::DMatrix;

/// Permutation maximizing `sum_i reward[(i, perm[i])]`.
///
/// Scans columns in increasing index order and only moves on strict
/// improvement, so equal-score ties resolve the same way on every run.
pub fn max_weight_assignment(reward: &DMatrix<f64>) -> Vec<usize> {
    let n = reward.nrows();
    assert_eq!(n, reward.ncols(), "assignment needs a square matrix");
    if n == 0 {
        return Vec::new();
    }
    let cost = |i: usize, j: usize| -reward[(i, j)];

    // 1-based rows/cols, index 0 is the virtual start
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
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

    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[row_of[j] - 1] = j - 1;
    }
    perm
}
