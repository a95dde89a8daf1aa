//! k-nearest-neighbor Kullback-Leibler estimator between sample sets
//! (Wang-Kulkarni-Verdu construction):
//!
//! `KL(p || q) ~= (d/m) sum_i ln( nu_k(i) / rho_k(i) ) + ln( m_q / (m_p - 1) )`
//!
//! where `rho_k(i)` is the distance from the i-th p-sample to its k-th
//! nearest neighbor among the other p-samples and `nu_k(i)` the k-th
//! nearest among the q-samples. Consistent as sample sizes grow. Duplicate
//! points give zero neighbor distances; those are floored at 1e-12 and
//! counted so callers can surface the warning.

use rayon::prelude::*;

use crate::model::Ensemble;
use crate::{Error, Result};

pub const DEFAULT_K: usize = 5;
const JITTER: f64 = 1e-12;

/// Estimate plus the number of degenerate neighborhoods that were floored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnKl {
    pub estimate: f64,
    pub degenerate: usize,
}

fn kth_smallest_distance(point: &[f64], others: impl Iterator<Item = *const f64>, dim: usize, k: usize) -> f64 {
    // Max-heap of the k smallest squared distances, kept tiny (k ~ 5).
    let mut heap: Vec<f64> = Vec::with_capacity(k);
    for other in others {
        let o = unsafe { std::slice::from_raw_parts(other, dim) };
        let mut d2 = 0.0;
        for c in 0..dim {
            let t = point[c] - o[c];
            d2 += t * t;
        }
        if heap.len() < k {
            heap.push(d2);
            if heap.len() == k {
                heap.sort_by(|a, b| b.partial_cmp(a).unwrap());
            }
        } else if d2 < heap[0] {
            heap[0] = d2;
            let mut i = 0;
            while i + 1 < k && heap[i] < heap[i + 1] {
                heap.swap(i, i + 1);
                i += 1;
            }
        }
    }
    heap[0].sqrt()
}

/// k-NN divergence estimate `KL(p || q)` from two sample ensembles of equal
/// dimension. Both sets need at least `k + 1` points.
pub fn kl_knn(p: &Ensemble, q: &Ensemble, k: usize) -> Result<KnnKl> {
    if k == 0 {
        return Err(Error::InvalidParam("neighbor count k must be >= 1".into()));
    }
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: q.dim() });
    }
    let (m_p, m_q) = (p.len(), q.len());
    if m_p < k + 1 {
        return Err(Error::InsufficientSamples { need: k + 1, got: m_p });
    }
    if m_q < k + 1 {
        return Err(Error::InsufficientSamples { need: k + 1, got: m_q });
    }
    let dim = p.dim();
    let terms: Vec<(f64, usize)> = (0..m_p)
        .into_par_iter()
        .map(|i| {
            let x = p.particle(i);
            let rho = kth_smallest_distance(
                x,
                (0..m_p).filter(|j| *j != i).map(|j| p.particle(j).as_ptr()),
                dim,
                k,
            );
            let nu = kth_smallest_distance(x, (0..m_q).map(|j| q.particle(j).as_ptr()), dim, k);
            let mut degenerate = 0;
            let rho = if rho > 0.0 {
                rho
            } else {
                degenerate += 1;
                JITTER
            };
            let nu = if nu > 0.0 {
                nu
            } else {
                degenerate += 1;
                JITTER
            };
            ((nu / rho).ln(), degenerate)
        })
        .collect();
    let sum: f64 = terms.iter().map(|(t, _)| t).sum();
    let degenerate: usize = terms.iter().map(|(_, d)| d).sum();
    let estimate =
        (dim as f64 / m_p as f64) * sum + (m_q as f64 / (m_p as f64 - 1.0)).ln();
    Ok(KnnKl { estimate, degenerate })
}
