//! Context construction, SNR-adaptive exponential weighting, and k-means
//! context quantization.
//!
//! The context of a symbol is its `2k` noisy neighbors (median-filled at the
//! sequence ends), weighted so positions nearer the center count more, with
//! the decay rate growing with the estimated scalar-channel SNR. Clustering
//! the weighted contexts groups symbols whose neighborhoods look alike.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::math;
use crate::rng::Stream;

/// All `N` contexts, row-major `N x 2k`: `c_j = [q_{j-k}..q_{j-1},
/// q_{j+1}..q_{j+k}]` with out-of-range positions replaced by the median of
/// `q`.
pub fn build_contexts(q: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(CoreError::InvalidParameter("context half-width must be >= 1"));
    }
    let n = q.len();
    if n <= 2 * k {
        return Err(CoreError::InputTooShort { len: n, min: 2 * k + 1 });
    }
    let med = math::median(q);
    let dim = 2 * k;
    let mut out = vec![0.0; n * dim];
    for j in 0..n {
        let row = &mut out[j * dim..(j + 1) * dim];
        for i in 0..k {
            let idx = j as isize - k as isize + i as isize;
            row[i] = if idx < 0 { med } else { q[idx as usize] };
        }
        for i in 0..k {
            let idx = j + 1 + i;
            row[k + i] = if idx >= n { med } else { q[idx] };
        }
    }
    Ok(out)
}

/// Exponential decay rate, linear in the estimated channel SNR (in dB up to
/// the `b1` scaling) and clamped at zero.
pub fn decay_rate(q: &[f64], sigma_v_sq: f64, b1: f64, b2: f64) -> f64 {
    let power = math::mean_square(q);
    let snr = if sigma_v_sq > 0.0 {
        ((power - sigma_v_sq) / sigma_v_sq).max(1e-6)
    } else {
        1e6
    };
    (b1 * math::log10(snr) + b2).max(0.0)
}

/// Two-sided exponential weights of length `2k`: positions adjacent to the
/// center get weight 1, decaying by `e^{-beta}` per step outward.
pub fn context_weights(k: usize, beta: f64) -> Vec<f64> {
    let mut w = vec![0.0; 2 * k];
    for i in 0..k {
        w[i] = math::exp(-beta * (k - 1 - i) as f64);
        w[2 * k - 1 - i] = w[i];
    }
    w
}

/// Pointwise product of every context row with the weight vector.
pub fn weight_contexts(contexts: &mut [f64], weights: &[f64]) {
    let dim = weights.len();
    for row in contexts.chunks_mut(dim) {
        for (v, &w) in row.iter_mut().zip(weights) {
            *v *= w;
        }
    }
}

/// Result of context quantization: one label per symbol plus the surviving
/// centroids.
#[derive(Debug, Clone)]
pub struct ContextPartition {
    pub labels: Vec<usize>,
    pub centroids: Vec<f64>,
    pub cluster_count: usize,
    pub dim: usize,
}

impl ContextPartition {
    pub fn members(&self, label: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == label).then_some(i))
            .collect()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.cluster_count];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

#[inline]
fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

const KMEANS_MAX_ITERS: usize = 100;
const KMEANS_REL_TOL: f64 = 1e-4;

/// Seeded k-means over `points` (row-major, `dim` columns): farthest-point
/// initialization, Lloyd iterations to a relative inertia tolerance, empty
/// clusters dropped as they occur (so the final count may be below
/// `l_init`).
pub fn cluster_contexts(
    points: &[f64],
    dim: usize,
    l_init: usize,
    stream: &Stream,
) -> Result<ContextPartition> {
    if dim == 0 || points.len() % dim != 0 {
        return Err(CoreError::InvalidParameter("points not a multiple of dim"));
    }
    let n = points.len() / dim;
    if l_init == 0 || l_init > n {
        return Err(CoreError::InvalidParameter("need 1 <= l_init <= n"));
    }
    let row = |i: usize| &points[i * dim..(i + 1) * dim];

    // Farthest-point seeding; duplicates end the seeding early.
    let mut rng = stream.rng();
    let mut centroids: Vec<f64> = Vec::with_capacity(l_init * dim);
    let first = rng.index(n);
    centroids.extend_from_slice(row(first));
    let mut nearest_sq = vec![0.0f64; n];
    for i in 0..n {
        nearest_sq[i] = dist_sq(row(i), &centroids[0..dim]);
    }
    while centroids.len() / dim < l_init {
        let mut best = 0;
        let mut best_d = -1.0;
        for (i, &d) in nearest_sq.iter().enumerate() {
            if d > best_d {
                best_d = d;
                best = i;
            }
        }
        if best_d <= 0.0 {
            break;
        }
        let start = centroids.len();
        centroids.extend_from_slice(row(best));
        for i in 0..n {
            let d = dist_sq(row(i), &centroids[start..start + dim]);
            if d < nearest_sq[i] {
                nearest_sq[i] = d;
            }
        }
    }

    let mut l = centroids.len() / dim;
    let mut labels = vec![0usize; n];
    let mut prev_inertia = f64::INFINITY;
    for _ in 0..KMEANS_MAX_ITERS {
        // Assignment.
        let mut inertia = 0.0;
        for i in 0..n {
            let p = row(i);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..l {
                let d = dist_sq(p, &centroids[c * dim..(c + 1) * dim]);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            labels[i] = best;
            inertia += best_d;
        }
        // Update; empty clusters are dropped and labels remapped.
        let mut counts = vec![0usize; l];
        let mut sums = vec![0.0f64; l * dim];
        for i in 0..n {
            let c = labels[i];
            counts[c] += 1;
            for (s, &v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(row(i)) {
                *s += v;
            }
        }
        let mut remap = vec![usize::MAX; l];
        let mut new_centroids = Vec::with_capacity(l * dim);
        let mut kept = 0;
        for c in 0..l {
            if counts[c] == 0 {
                continue;
            }
            remap[c] = kept;
            let inv = 1.0 / counts[c] as f64;
            for &s in &sums[c * dim..(c + 1) * dim] {
                new_centroids.push(s * inv);
            }
            kept += 1;
        }
        for label in labels.iter_mut() {
            *label = remap[*label];
        }
        centroids = new_centroids;
        l = kept;
        if l == 1 {
            break;
        }
        if prev_inertia.is_finite()
            && (prev_inertia - inertia).abs() <= KMEANS_REL_TOL * prev_inertia.max(1e-30)
        {
            break;
        }
        prev_inertia = inertia;
    }
    // Final consistent assignment against the returned centroids.
    for i in 0..n {
        let p = row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..l {
            let d = dist_sq(p, &centroids[c * dim..(c + 1) * dim]);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        labels[i] = best;
    }
    Ok(ContextPartition {
        labels,
        centroids,
        cluster_count: l,
        dim,
    })
}
