//! Lloyd's algorithm with k-means++ seeding and best-of-n restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ClusterMethod, ClusterModel};
use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansOptions {
    pub n_init: usize,
    pub max_iter: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            n_init: 10,
            max_iter: 300,
        }
    }
}

/// Outcome of one seeded Lloyd run.
#[derive(Debug, Clone)]
pub(crate) struct LloydRun<T> {
    pub centroids: Vec<Vec<T>>,
    pub labels: Vec<usize>,
    pub inertia: T,
    pub iterations: usize,
    /// Inertia after each assignment step.
    #[cfg_attr(not(test), allow(dead_code))]
    pub inertia_trace: Vec<T>,
}

/// Generator for restart `restart` of a run seeded with `seed`.
pub(crate) fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Index of the nearest centroid; ties go to the lowest index.
#[inline]
pub(crate) fn nearest<T: Scalar>(x: &[T], centroids: &[Vec<T>]) -> (usize, T) {
    let mut best = 0;
    let mut best_d = squared_distance(x, &centroids[0]);
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = squared_distance(x, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    (best, best_d)
}

fn assign<T: Scalar>(data: &Matrix<T>, centroids: &[Vec<T>], labels: &mut [usize]) -> T {
    let mut total = T::zero();
    for (i, label) in labels.iter_mut().enumerate() {
        let (j, d) = nearest(data.row(i), centroids);
        *label = j;
        total += d;
    }
    total
}

/// k-means++: first centre uniform, later ones drawn with probability
/// proportional to squared distance from the nearest chosen centre.
fn plus_plus_init<T: Scalar>(data: &Matrix<T>, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
    let n = data.nrows();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(data.row(rng.random_range(0..n)).to_vec());
    let mut d2: Vec<f64> = data
        .rows_iter()
        .map(|r| squared_distance(r, &centroids[0]).as_f64())
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            // Guard against the rounding tail landing on a zero-weight point.
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = data.row(pick).to_vec();
        for (i, r) in data.rows_iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(r, &c).as_f64());
        }
        centroids.push(c);
    }
    centroids
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty<T: Scalar>(data: &Matrix<T>, centroids: &mut [Vec<T>], labels: &mut [usize]) {
    let k = centroids.len();
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        // Only points from clusters with >1 member may move, else we would
        // just create another empty cluster.
        let mut far = None;
        let mut far_d = T::neg_infinity();
        for (i, &l) in labels.iter().enumerate() {
            if counts[l] < 2 {
                continue;
            }
            let d = squared_distance(data.row(i), &centroids[l]);
            if d > far_d {
                far = Some(i);
                far_d = d;
            }
        }
        let Some(p) = far else { return };
        labels[p] = empty;
        centroids[empty] = data.row(p).to_vec();
    }
}

fn has_empty(labels: &[usize], k: usize) -> bool {
    let mut seen = vec![false; k];
    for &l in labels {
        seen[l] = true;
    }
    seen.contains(&false)
}

fn update_centroids<T: Scalar>(data: &Matrix<T>, labels: &[usize], centroids: &mut [Vec<T>]) {
    let d = data.ncols();
    let mut sums = vec![vec![T::zero(); d]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, &x) in sums[l].iter_mut().zip(data.row(i)) {
            *s += x;
        }
    }
    for ((c, s), &n) in centroids.iter_mut().zip(sums).zip(&counts) {
        if n > 0 {
            let nf = T::from_usize_lossy(n);
            for (ci, si) in c.iter_mut().zip(s) {
                *ci = si / nf;
            }
        }
    }
}

pub(crate) fn lloyd<T: Scalar>(data: &Matrix<T>, mut centroids: Vec<Vec<T>>, max_iter: usize) -> LloydRun<T> {
    let n = data.nrows();
    let mut labels = vec![0usize; n];
    let mut trace = vec![assign(data, &centroids, &mut labels)];
    let mut next = vec![0usize; n];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        repair_empty(data, &mut centroids, &mut labels);
        let before = centroids.clone();
        update_centroids(data, &labels, &mut centroids);
        trace.push(assign(data, &centroids, &mut next));
        if next == labels {
            break;
        }
        // Coincident centroids: ties would empty the repaired clusters again.
        if centroids == before && has_empty(&next, centroids.len()) {
            break;
        }
        std::mem::swap(&mut labels, &mut next);
    }
    // The final assignment is relative to the final centroids.
    let inertia = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| squared_distance(data.row(i), &centroids[l]))
        .sum();
    LloydRun {
        centroids,
        labels,
        inertia,
        iterations,
        inertia_trace: trace,
    }
}

pub(crate) fn validate<T: Scalar>(data: &Matrix<T>, k: usize) -> Result<()> {
    let n = data.nrows();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds the {n} points")));
    }
    if !data.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Best run (lowest inertia, earliest on ties) over `options.n_init`
/// restarts.
pub(crate) fn best_run<T: Scalar>(data: &Matrix<T>, k: usize, seed: u64, options: &KMeansOptions) -> LloydRun<T> {
    let mut best: Option<LloydRun<T>> = None;
    for restart in 0..options.n_init.max(1) {
        let mut rng = restart_rng(seed, restart);
        let init = plus_plus_init(data, k, &mut rng);
        let run = lloyd(data, init, options.max_iter);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    best.expect("at least one restart")
}

/// K-means clustering of the rows of `data`.
pub fn kmeans<T: Scalar>(data: &Matrix<T>, k: usize, seed: u64, options: &KMeansOptions) -> Result<ClusterModel<T>> {
    validate(data, k)?;
    let run = best_run(data, k, seed, options);
    Ok(ClusterModel::finish(
        data,
        ClusterMethod::KMeans,
        k,
        seed,
        run.centroids,
        run.labels,
        run.inertia,
        run.iterations,
    ))
}
