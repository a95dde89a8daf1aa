//! Exact empirical 2-Wasserstein distance between equal-size point sets:
//! the optimal assignment under squared Euclidean cost, solved by the
//! shortest-augmenting-path (Hungarian) algorithm with dual potentials.
//! Costs are computed on the fly, so memory stays O(m). Capped at 4096
//! points; beyond that the cubic worst case stops being a desk-scale tool.

use crate::model::Ensemble;
use crate::{Error, Result};

pub const SIZE_CAP: usize = 4096;

/// Minimum-cost perfect assignment for an implicit square cost matrix.
/// Returns `assign[j] = row matched to column j` and the total cost.
pub fn min_cost_assignment<C: Fn(usize, usize) -> f64>(
    n: usize,
    cost: C,
) -> (Vec<usize>, f64) {
    // Dual potentials u (rows), v (columns) with a virtual column 0;
    // p[j] holds the row assigned to column j (1-based), way[j] the column
    // from which the shortest path reached j.
    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
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
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // Augment along the found path.
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    let mut total = 0.0;
    for j in 1..=n {
        assign[j - 1] = p[j] - 1;
        total += cost(p[j] - 1, j - 1);
    }
    (assign, total)
}

/// Exact W2 between the uniform empirical measures of two equal-size sets:
/// square root of the mean optimal squared-distance matching.
pub fn w2_empirical(a: &Ensemble, b: &Ensemble) -> Result<f64> {
    Ok(w2_empirical_sq(a, b)?.sqrt())
}

/// Squared variant, `(1/m) min_sigma sum_i ||a_i - b_sigma(i)||^2`.
pub fn w2_empirical_sq(a: &Ensemble, b: &Ensemble) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    if a.len() != b.len() {
        return Err(Error::SizeMismatch { a: a.len(), b: b.len() });
    }
    let m = a.len();
    if m > SIZE_CAP {
        return Err(Error::SizeCap { got: m, cap: SIZE_CAP });
    }
    let d = a.dim();
    let cost = |i: usize, j: usize| -> f64 {
        let (x, y) = (a.particle(i), b.particle(j));
        let mut s = 0.0;
        for c in 0..d {
            let t = x[c] - y[c];
            s += t * t;
        }
        s
    };
    let (_, total) = min_cost_assignment(m, cost);
    Ok(total / m as f64)
}
