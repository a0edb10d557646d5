//! K-means, spectral clustering and silhouette validation.

mod kmeans;
mod silhouette;
mod spectral;

pub use kmeans::{kmeans, KMeansOptions};
pub use silhouette::{silhouette, silhouette_samples};
pub use spectral::{
    affinity, median_pairwise_distance, normalized_laplacian, spectral_cluster, spectral_embedding, Affinity,
    SpectralOptions,
};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{enhance, standardize, FeatureMatrix};
use crate::linalg::{squared_distance, Matrix};
use crate::pca::pca_filter;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterMethod {
    KMeans,
    Spectral,
}

impl fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClusterMethod::KMeans => "kmeans",
            ClusterMethod::Spectral => "spectral",
        })
    }
}

impl std::str::FromStr for ClusterMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeans" | "k-means" => Ok(ClusterMethod::KMeans),
            "spectral" => Ok(ClusterMethod::Spectral),
            other => Err(Error::InvalidArgument(format!("unknown cluster method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel<T> {
    pub method: ClusterMethod,
    pub k: usize,
    pub seed: u64,
    /// K-means centroids in input space; empty for spectral clustering.
    pub centroids: Vec<Vec<T>>,
    pub labels: Vec<usize>,
    pub inertia: T,
    /// Mean silhouette on the clustered input; `None` for fewer than 3 points.
    pub silhouette: Option<T>,
    pub iterations: usize,
}

impl<T: Scalar> ClusterModel<T> {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn finish(
        data: &Matrix<T>,
        method: ClusterMethod,
        k: usize,
        seed: u64,
        centroids: Vec<Vec<T>>,
        labels: Vec<usize>,
        inertia: T,
        iterations: usize,
    ) -> Self {
        let silhouette = silhouette(data, &labels).ok();
        ClusterModel {
            method,
            k,
            seed,
            centroids,
            labels,
            inertia,
            silhouette,
            iterations,
        }
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

pub(crate) fn within_cluster_ss<T: Scalar>(data: &Matrix<T>, labels: &[usize], k: usize) -> T {
    let d = data.ncols();
    let mut means = vec![vec![T::zero(); d]; k];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (m, &x) in means[l].iter_mut().zip(data.row(i)) {
            *m += x;
        }
    }
    for (m, &c) in means.iter_mut().zip(&counts) {
        if c > 0 {
            m.iter_mut().for_each(|v| *v /= T::from_usize_lossy(c));
        }
    }
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| squared_distance(data.row(i), &means[l]))
        .sum()
}

/// Runs `method` on `data`.
pub fn cluster<T: Scalar>(
    data: &Matrix<T>,
    method: ClusterMethod,
    k: usize,
    seed: u64,
    kmeans_options: &KMeansOptions,
    sigma: Option<f64>,
) -> Result<ClusterModel<T>> {
    match method {
        ClusterMethod::KMeans => kmeans(data, k, seed, kmeans_options),
        ClusterMethod::Spectral => spectral_cluster(
            data,
            k,
            seed,
            &SpectralOptions {
                sigma,
                kmeans: *kmeans_options,
            },
        ),
    }
}

/// Which transform of the raw feature table a clustering consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InputKind {
    /// Standardized raw features.
    #[serde(rename = "X")]
    Raw,
    /// First three principal components of the standardized features.
    #[serde(rename = "PCA(X,3)")]
    Pca3,
    /// Standardized enhanced features.
    #[serde(rename = "X_enh")]
    Enhanced,
}

impl InputKind {
    pub fn label(&self) -> &'static str {
        match self {
            InputKind::Raw => "X",
            InputKind::Pca3 => "PCA(X,3)",
            InputKind::Enhanced => "X_enh",
        }
    }

    /// File-name friendly tag.
    pub fn slug(&self) -> &'static str {
        match self {
            InputKind::Raw => "x",
            InputKind::Pca3 => "pca3",
            InputKind::Enhanced => "xenh",
        }
    }
}

impl std::str::FromStr for InputKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "X" | "x" | "raw" => Ok(InputKind::Raw),
            "PCA(X,3)" | "pca3" | "pca" => Ok(InputKind::Pca3),
            "X_enh" | "xenh" | "enhanced" => Ok(InputKind::Enhanced),
            other => Err(Error::InvalidArgument(format!("unknown clustering input `{other}`"))),
        }
    }
}

/// Builds the clustering input of the given kind from raw features.
pub fn build_input<T: Scalar>(raw: &FeatureMatrix<T>, kind: InputKind) -> Result<FeatureMatrix<T>> {
    match kind {
        InputKind::Raw => Ok(standardize(raw)?.matrix),
        InputKind::Enhanced => Ok(standardize(&enhance(raw)?)?.matrix),
        InputKind::Pca3 => pca_filter(&standardize(raw)?.matrix, 3),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClusterConfig {
    pub input: InputKind,
    pub method: ClusterMethod,
    pub k: usize,
}

impl ClusterConfig {
    /// The comparison grid: k-means on each input plus spectral on X, for
    /// each k in `ks`.
    pub fn default_grid(ks: &[usize]) -> Vec<ClusterConfig> {
        let columns = [
            (InputKind::Raw, ClusterMethod::KMeans),
            (InputKind::Pca3, ClusterMethod::KMeans),
            (InputKind::Enhanced, ClusterMethod::KMeans),
            (InputKind::Raw, ClusterMethod::Spectral),
        ];
        ks.iter()
            .flat_map(|&k| {
                columns
                    .iter()
                    .map(move |&(input, method)| ClusterConfig { input, method, k })
            })
            .collect()
    }

    pub fn column_label(&self) -> String {
        match self.method {
            ClusterMethod::Spectral => "Spectral Cls.".to_string(),
            ClusterMethod::KMeans => self.input.label().to_string(),
        }
    }

    pub fn slug(&self) -> String {
        format!("{}_{}_k{}", self.input.slug(), self.method, self.k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreEntry {
    pub input: InputKind,
    pub method: ClusterMethod,
    pub column: String,
    pub k: usize,
    pub silhouette: f64,
}

/// One clustering per config over the same raw feature table, with its
/// silhouette on the clustering input.
pub fn compare_clusterings<T: Scalar>(
    raw: &FeatureMatrix<T>,
    configs: &[ClusterConfig],
    seed: u64,
    kmeans_options: &KMeansOptions,
    sigma: Option<f64>,
) -> Result<Vec<(ClusterConfig, ClusterModel<T>, ScoreEntry)>> {
    let mut inputs: Vec<(InputKind, FeatureMatrix<T>)> = Vec::new();
    let mut out = Vec::with_capacity(configs.len());
    for cfg in configs {
        if !inputs.iter().any(|(k, _)| *k == cfg.input) {
            inputs.push((cfg.input, build_input(raw, cfg.input)?));
        }
        let input = &inputs.iter().find(|(k, _)| *k == cfg.input).expect("built above").1;
        let model = cluster(&input.data, cfg.method, cfg.k, seed, kmeans_options, sigma)?;
        let score = match model.silhouette {
            Some(s) => s.as_f64(),
            None => silhouette(&input.data, &model.labels)?.as_f64(),
        };
        out.push((
            *cfg,
            model,
            ScoreEntry {
                input: cfg.input,
                method: cfg.method,
                column: cfg.column_label(),
                k: cfg.k,
                silhouette: score,
            },
        ));
    }
    Ok(out)
}

/// Text rendering of a score table: one row per k, one column per
/// (input, method) pair in first-seen order.
pub fn format_score_table(entries: &[ScoreEntry]) -> String {
    let mut columns: Vec<String> = Vec::new();
    let mut ks: Vec<usize> = Vec::new();
    for e in entries {
        if !columns.contains(&e.column) {
            columns.push(e.column.clone());
        }
        if !ks.contains(&e.k) {
            ks.push(e.k);
        }
    }
    let mut s = format!("{:<9}", "Clusters");
    for c in &columns {
        s.push_str(&format!("{c:>15}"));
    }
    s.push('\n');
    for k in ks {
        s.push_str(&format!("{k:<9}"));
        for c in &columns {
            match entries.iter().find(|e| e.k == k && &e.column == c) {
                Some(e) => s.push_str(&format!("{:>15.4}", e.silhouette)),
                None => s.push_str(&format!("{:>15}", "-")),
            }
        }
        s.push('\n');
    }
    s
}

/// Labels as CSV `id,x_cm,y_cm,label`.
pub fn labels_csv<T: Scalar>(matrix: &FeatureMatrix<T>, labels: &[usize]) -> Result<String> {
    if labels.len() != matrix.nrows() {
        return Err(Error::DimensionMismatch {
            expected: matrix.nrows(),
            found: labels.len(),
        });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "x_cm", "y_cm", "label"])?;
    for (i, l) in labels.iter().enumerate() {
        w.write_record([
            matrix.ids[i].clone(),
            format!("{:?}", matrix.positions[i].x_cm),
            format!("{:?}", matrix.positions[i].y_cm),
            l.to_string(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io("flushing labels", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("UTF-8 input yields UTF-8 CSV"))
}
