//! Principal component analysis of a feature table.
//!
//! The sample covariance (1/(N-1)) is diagonalized with cyclic Jacobi. Each
//! component is sign-fixed so its largest-magnitude loading is positive,
//! which makes fits bitwise reproducible.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::linalg::{dot, jacobi_eigen, Matrix};
use crate::scalar::Scalar;

/// Off-diagonal tolerance for the covariance eigensolve, relative to its norm.
pub const JACOBI_TOLERANCE: f64 = 1e-12;

/// Eigenvalues below this fraction of the largest count as zero rank.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel<T> {
    pub mean: Vec<T>,
    /// Retained components, one unit-length row each, by decreasing variance.
    pub components: Vec<Vec<T>>,
    pub eigenvalues: Vec<T>,
    /// Share of total variance per retained component.
    pub explained_variance_ratio: Vec<T>,
    /// Sum of all covariance eigenvalues (the trace).
    pub total_variance: T,
}

#[derive(Serialize)]
struct PcaModelJson {
    mean: Vec<f64>,
    components: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
    explained_variance_ratio: Vec<f64>,
}

impl<T: Scalar> PcaModel<T> {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    /// Running sum of the explained-variance ratios.
    pub fn cumulative_ratio(&self) -> Vec<T> {
        self.explained_variance_ratio
            .iter()
            .scan(T::zero(), |acc, &r| {
                *acc += r;
                Some(*acc)
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let conv = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
        let json = PcaModelJson {
            mean: conv(&self.mean),
            components: self.components.iter().map(|c| conv(c)).collect(),
            eigenvalues: conv(&self.eigenvalues),
            explained_variance_ratio: conv(&self.explained_variance_ratio),
        };
        Ok(serde_json::to_string_pretty(&json)?)
    }

    /// Scores `(x - mean) . component` for every row.
    pub fn project(&self, data: &Matrix<T>) -> Result<Matrix<T>> {
        if data.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: data.ncols(),
            });
        }
        let k = self.n_components();
        let mut out = Matrix::zeros(data.nrows(), k);
        let mut centered = vec![T::zero(); self.n_features()];
        for i in 0..data.nrows() {
            for (c, (&x, &m)) in centered.iter_mut().zip(data.row(i).iter().zip(&self.mean)) {
                *c = x - m;
            }
            for (j, comp) in self.components.iter().enumerate() {
                out[(i, j)] = dot(&centered, comp);
            }
        }
        Ok(out)
    }

    /// Maps scores back to feature space: `mean + scores * components`.
    pub fn inverse_transform(&self, scores: &Matrix<T>) -> Result<Matrix<T>> {
        if scores.ncols() != self.n_components() {
            return Err(Error::DimensionMismatch {
                expected: self.n_components(),
                found: scores.ncols(),
            });
        }
        let d = self.n_features();
        let mut out = Matrix::zeros(scores.nrows(), d);
        for i in 0..scores.nrows() {
            let row = out.row_mut(i);
            row.copy_from_slice(&self.mean);
            for (j, comp) in self.components.iter().enumerate() {
                let s = scores[(i, j)];
                for (r, &c) in row.iter_mut().zip(comp) {
                    *r += s * c;
                }
            }
        }
        Ok(out)
    }
}

/// Sample covariance matrix with 1/(N-1) normalization, plus column means.
pub fn covariance<T: Scalar>(data: &Matrix<T>) -> Result<(Matrix<T>, Vec<T>)> {
    let (n, d) = (data.nrows(), data.ncols());
    if n < 2 {
        return Err(Error::InvalidArgument(format!("PCA needs at least 2 rows, got {n}")));
    }
    let nf = T::from_usize_lossy(n);
    let mean: Vec<T> = (0..d).map(|j| data.rows_iter().map(|r| r[j]).sum::<T>() / nf).collect();
    let mut cov = Matrix::zeros(d, d);
    for row in data.rows_iter() {
        for a in 0..d {
            let da = row[a] - mean[a];
            for b in a..d {
                cov[(a, b)] += da * (row[b] - mean[b]);
            }
        }
    }
    let denom = T::from_usize_lossy(n - 1);
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok((cov, mean))
}

/// Fits a PCA model keeping up to `n_components` components.
///
/// Rank-deficient input keeps at most `rank` components; ratios are always
/// relative to the full variance.
pub fn fit_pca<T: Scalar>(matrix: &FeatureMatrix<T>, n_components: usize) -> Result<PcaModel<T>> {
    let d = matrix.ncols();
    if n_components == 0 || n_components > d {
        return Err(Error::InvalidArgument(format!(
            "n_components must be in [1, {d}], got {n_components}"
        )));
    }
    if !matrix.data.is_finite() {
        return Err(Error::NonFinite);
    }
    let (cov, mean) = covariance(&matrix.data)?;
    let tol = T::lit(JACOBI_TOLERANCE).max(T::epsilon() * T::lit(16.0));
    let mut eig = jacobi_eigen(&cov, tol)?;
    eig.sort_descending();

    let values: Vec<T> = eig.values.iter().map(|&v| v.max(T::zero())).collect();
    let total: T = values.iter().copied().sum();
    let top = values[0];
    if !(top > T::zero()) {
        return Err(Error::DegenerateInput("all rows are identical".into()));
    }
    let rank = values.iter().take_while(|&&v| v > top * T::lit(RANK_TOLERANCE)).count();
    let keep = n_components.min(rank);

    let components = (0..keep)
        .map(|j| {
            let mut v = eig.vector(j);
            let lead = v
                .iter()
                .enumerate()
                .fold(
                    (0, T::zero()),
                    |(bi, bv), (i, &x)| {
                        if x.abs() > bv {
                            (i, x.abs())
                        } else {
                            (bi, bv)
                        }
                    },
                )
                .0;
            if v[lead] < T::zero() {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    Ok(PcaModel {
        mean,
        components,
        eigenvalues: values[..keep].to_vec(),
        explained_variance_ratio: values[..keep].iter().map(|&v| v / total).collect(),
        total_variance: total,
    })
}

/// Score table with columns `C1..Ck`.
pub fn transform<T: Scalar>(model: &PcaModel<T>, matrix: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>> {
    let scores = model.project(&matrix.data)?;
    let names = (1..=model.n_components()).map(|i| format!("C{i}")).collect();
    matrix.with_data(names, scores)
}

/// Equal-weight sum of exactly three component scores per row.
pub fn combine_components<T: Scalar>(scores: &Matrix<T>) -> Result<Vec<T>> {
    if scores.ncols() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: scores.ncols(),
        });
    }
    Ok(scores.rows_iter().map(|r| r[0] + r[1] + r[2]).collect())
}

/// Reduced feature table: the PCA scores of `matrix` itself.
pub fn pca_filter<T: Scalar>(matrix: &FeatureMatrix<T>, n_components: usize) -> Result<FeatureMatrix<T>> {
    let model = fit_pca(matrix, n_components)?;
    transform(&model, matrix)
}
