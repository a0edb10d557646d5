use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};
use crate::scalar::Scalar;

/// Per-point silhouette `(b - a) / max(a, b)`.
///
/// `a` is the mean distance to the other members of the point's cluster and
/// `b` the smallest mean distance to another cluster. Points in singleton
/// clusters score 0. Labels need not be contiguous.
pub fn silhouette_samples<T: Scalar>(data: &Matrix<T>, labels: &[usize]) -> Result<Vec<T>> {
    let n = data.nrows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "silhouette needs at least 3 points, got {n}"
        )));
    }
    // Dense cluster indices in label order.
    let index: BTreeMap<usize, usize> = labels
        .iter()
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l, i))
        .collect();
    let k = index.len();
    if k < 2 {
        return Err(Error::SingleCluster);
    }
    let dense: Vec<usize> = labels.iter().map(|l| index[l]).collect();
    let mut sizes = vec![0usize; k];
    for &c in &dense {
        sizes[c] += 1;
    }

    let mut out = Vec::with_capacity(n);
    let mut sums = vec![T::zero(); k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = T::zero());
        let xi = data.row(i);
        for j in 0..n {
            if i != j {
                sums[dense[j]] += squared_distance(xi, data.row(j)).sqrt();
            }
        }
        let own = dense[i];
        if sizes[own] == 1 {
            out.push(T::zero());
            continue;
        }
        let a = sums[own] / T::from_usize_lossy(sizes[own] - 1);
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / T::from_usize_lossy(sizes[c]))
            .fold(T::infinity(), T::min);
        let denom = a.max(b);
        out.push(if denom > T::zero() { (b - a) / denom } else { T::zero() });
    }
    Ok(out)
}

/// Mean silhouette coefficient over all points, in [-1, 1].
pub fn silhouette<T: Scalar>(data: &Matrix<T>, labels: &[usize]) -> Result<T> {
    let s = silhouette_samples(data, labels)?;
    Ok(s.iter().copied().sum::<T>() / T::from_usize_lossy(s.len()))
}
