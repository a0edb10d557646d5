//! Normalized spectral clustering: Gaussian affinity, symmetric normalized
//! Laplacian, row-normalized eigen-embedding, then k-means.

use super::kmeans::{best_run, validate, KMeansOptions};
use super::{ClusterMethod, ClusterModel};
use crate::error::{Error, Result};
use crate::linalg::{squared_distance, tridiagonal_ql_eigen, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpectralOptions {
    /// Kernel width; the median positive pairwise distance when `None`.
    pub sigma: Option<f64>,
    pub kmeans: KMeansOptions,
}

/// Symmetric affinity `W_ij = exp(-|x_i - x_j|^2 / (2 sigma^2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affinity<T> {
    pub matrix: Matrix<T>,
    pub sigma: T,
}

/// Median of the positive pairwise distances (upper median), or `None` when
/// all points coincide.
pub fn median_pairwise_distance<T: Scalar>(data: &Matrix<T>) -> Option<T> {
    let n = data.nrows();
    let mut d: Vec<T> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = squared_distance(data.row(i), data.row(j)).sqrt();
            if v > T::zero() {
                d.push(v);
            }
        }
    }
    if d.is_empty() {
        return None;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite distances"));
    Some(*m)
}

pub fn affinity<T: Scalar>(data: &Matrix<T>, sigma: Option<T>) -> Result<Affinity<T>> {
    let sigma = match sigma {
        Some(s) if s > T::zero() && s.is_finite() => s,
        Some(s) => return Err(Error::InvalidArgument(format!("sigma must be positive, got {s}"))),
        None => median_pairwise_distance(data)
            .ok_or_else(|| Error::DegenerateInput("all points are identical; affinity width undefined".into()))?,
    };
    let n = data.nrows();
    let scale = T::lit(2.0) * sigma * sigma;
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        w[(i, i)] = T::one();
        for j in (i + 1)..n {
            let v = (-squared_distance(data.row(i), data.row(j)) / scale).exp();
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    Ok(Affinity { matrix: w, sigma })
}

/// `L = I - D^{-1/2} W D^{-1/2}`.
pub fn normalized_laplacian<T: Scalar>(w: &Matrix<T>) -> Matrix<T> {
    let n = w.nrows();
    let inv_sqrt: Vec<T> = (0..n)
        .map(|i| {
            let deg: T = w.row(i).iter().copied().sum();
            if deg > T::zero() {
                T::one() / deg.sqrt()
            } else {
                T::zero()
            }
        })
        .collect();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = -w[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
            l[(i, j)] = if i == j { T::one() + v } else { v };
        }
    }
    l
}

/// Rows of the `k` eigenvectors with smallest eigenvalues, scaled to unit
/// length (zero rows stay zero).
pub fn spectral_embedding<T: Scalar>(laplacian: &Matrix<T>, k: usize) -> Result<Matrix<T>> {
    let eig = tridiagonal_ql_eigen(laplacian)?;
    let n = laplacian.nrows();
    let mut emb = eig.vectors.select_columns(&(0..k).collect::<Vec<_>>());
    for i in 0..n {
        let row = emb.row_mut(i);
        let norm = row.iter().map(|&v| v * v).sum::<T>().sqrt();
        if norm > T::zero() {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    Ok(emb)
}

/// Spectral clustering of the rows of `data`.
///
/// The reported inertia is the within-cluster sum of squares in the input
/// space, so it is comparable with [`super::kmeans`]. No centroids are kept.
pub fn spectral_cluster<T: Scalar>(
    data: &Matrix<T>,
    k: usize,
    seed: u64,
    options: &SpectralOptions,
) -> Result<ClusterModel<T>> {
    validate(data, k)?;
    let aff = affinity(data, options.sigma.map(T::lit))?;
    let lap = normalized_laplacian(&aff.matrix);
    let emb = spectral_embedding(&lap, k)?;
    let run = best_run(&emb, k, seed, &options.kmeans);
    let inertia = super::within_cluster_ss(data, &run.labels, k);
    Ok(ClusterModel::finish(
        data,
        ClusterMethod::Spectral,
        k,
        seed,
        Vec::new(),
        run.labels,
        inertia,
        run.iterations,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affinity_shape() {
        let data = Matrix::from_rows(&[[0.0, 0.0], [3.0, 4.0], [6.0, 8.0]]).unwrap();
        let a = affinity(&data, None).unwrap();
        // distances 5, 5, 10 -> upper median 5
        assert_eq!(a.sigma, 5.0);
        for i in 0..3 {
            assert_eq!(a.matrix[(i, i)], 1.0);
            for j in 0..3 {
                assert_eq!(a.matrix[(i, j)], a.matrix[(j, i)]);
                assert!((0.0..=1.0).contains(&a.matrix[(i, j)]));
            }
        }
        assert!((a.matrix[(0, 1)] - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn identical_points_are_degenerate() {
        let data = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(
            spectral_cluster(&data, 2, 0, &SpectralOptions::default()),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn two_points_two_clusters() {
        let data = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let m = spectral_cluster(&data, 2, 0, &SpectralOptions::default()).unwrap();
        assert_ne!(m.labels[0], m.labels[1]);
        assert!(m.silhouette.is_none());
    }

    #[test]
    fn laplacian_has_zero_eigenvalue() {
        let data = Matrix::<f64>::from_rows(&[[0.0], [0.5], [2.0], [2.2]]).unwrap();
        let a = affinity(&data, None).unwrap();
        let eig = tridiagonal_ql_eigen(&normalized_laplacian(&a.matrix)).unwrap();
        assert!(eig.values[0].abs() < 1e-12);
        assert!(eig.values.iter().all(|&v| v > -1e-12 && v < 2.0 + 1e-12));
    }
}
