//! Table of per-recording spectral features.
//!
//! Each recording yields six values: time-domain energy `E`, spectral power
//! `P` (amplitude sum) and four amplitude-weighted spectral moments. The
//! third and fourth moments are normalized by `P * M2^3` and `P * M2^4`
//! unless [`MomentNormalization::Conventional`] is selected, in which case
//! the usual `M2^(3/2)` and `M2^2` are used.

use std::io::Read;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::signal_io::{Dataset, Position, Recording};
use crate::spectral::{one_sided_spectrum, Spectrum, SpectrumOptions};

pub const FEATURE_NAMES: [&str; 6] = ["E", "P", "M1", "M2", "M3", "M4"];

/// Power below which a spectrum is treated as empty.
pub const FLAT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentNormalization {
    #[default]
    AsPrinted,
    Conventional,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector<T> {
    pub energy: T,
    pub power: T,
    pub m1: T,
    pub m2: T,
    pub m3: T,
    pub m4: T,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn to_array(&self) -> [T; 6] {
        [self.energy, self.power, self.m1, self.m2, self.m3, self.m4]
    }

    pub fn from_array(a: [T; 6]) -> Self {
        FeatureVector {
            energy: a[0],
            power: a[1],
            m1: a[2],
            m2: a[3],
            m3: a[4],
            m4: a[5],
        }
    }
}

pub fn energy<T: Scalar>(samples: &[T]) -> T {
    samples.iter().map(|&x| x * x).sum()
}

pub fn power<T: Scalar>(spectrum: &Spectrum<T>) -> T {
    spectrum.amps().iter().copied().sum()
}

/// Amplitude-weighted moments `(m1, m2, m3, m4)` of a spectrum.
///
/// A line spectrum (`m2 <= eps * m1^2`) reports `m3 = m4 = 0`.
pub fn spectral_moments<T: Scalar>(spectrum: &Spectrum<T>, normalization: MomentNormalization) -> Result<(T, T, T, T)> {
    let eps = T::lit(FLAT_EPSILON);
    let p = power(spectrum);
    if !(p > eps) {
        return Err(Error::FlatSpectrum { id: None });
    }
    let pairs = || spectrum.freqs_hz().iter().zip(spectrum.amps());
    let m1 = pairs().map(|(&f, &a)| a * f).sum::<T>() / p;
    let central = |order: i32| pairs().map(|(&f, &a)| a * (f - m1).powi(order)).sum::<T>() / p;
    let m2 = central(2);
    if m2 <= eps * m1 * m1 {
        return Ok((m1, m2.max(T::zero()), T::zero(), T::zero()));
    }
    let (d3, d4) = match normalization {
        MomentNormalization::AsPrinted => (m2.powi(3), m2.powi(4)),
        MomentNormalization::Conventional => (m2 * m2.sqrt(), m2 * m2),
    };
    Ok((m1, m2, central(3) / d3, central(4) / d4))
}

/// Features of one recording from its samples and spectrum.
pub fn extract<T: Scalar>(
    recording: &Recording<T>,
    spectrum: &Spectrum<T>,
    normalization: MomentNormalization,
) -> Result<FeatureVector<T>> {
    let (m1, m2, m3, m4) = spectral_moments(spectrum, normalization).map_err(|e| match e {
        Error::FlatSpectrum { .. } => Error::FlatSpectrum {
            id: Some(recording.id.clone()),
        },
        other => other.in_recording(&recording.id),
    })?;
    Ok(FeatureVector {
        energy: energy(&recording.samples),
        power: power(spectrum),
        m1,
        m2,
        m3,
        m4,
    })
}

/// Window of `len` samples centred on the largest-magnitude sample, clipped
/// to the recording bounds.
pub fn trim_around_peak<T: Scalar>(samples: &[T], len: usize) -> Vec<T> {
    if len == 0 || len >= samples.len() {
        return samples.to_vec();
    }
    let peak = samples
        .iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |(bi, bv), (i, &v)| {
            if v.abs() > bv {
                (i, v.abs())
            } else {
                (bi, bv)
            }
        })
        .0;
    let start = peak.saturating_sub(len / 2).min(samples.len() - len);
    samples[start..start + len].to_vec()
}

/// Named columns of per-point values, row-aligned with dataset ids and
/// positions. Holds the raw features, their enhanced or standardized forms,
/// and PCA scores.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    pub ids: Vec<String>,
    pub positions: Vec<Position>,
    pub columns: Vec<String>,
    pub data: Matrix<T>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(ids: Vec<String>, positions: Vec<Position>, columns: Vec<String>, data: Matrix<T>) -> Result<Self> {
        if ids.len() != data.nrows() || positions.len() != data.nrows() {
            return Err(Error::DimensionMismatch {
                expected: data.nrows(),
                found: ids.len().min(positions.len()),
            });
        }
        if columns.len() != data.ncols() {
            return Err(Error::DimensionMismatch {
                expected: data.ncols(),
                found: columns.len(),
            });
        }
        Ok(FeatureMatrix {
            ids,
            positions,
            columns,
            data,
        })
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    /// Same ids and positions, new values.
    pub fn with_data(&self, columns: Vec<String>, data: Matrix<T>) -> Result<Self> {
        Self::new(self.ids.clone(), self.positions.clone(), columns, data)
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<T>> {
        self.columns.iter().position(|c| c == name).map(|j| self.data.column(j))
    }

    fn require_feature_columns(&self) -> Result<()> {
        if self.columns.iter().map(String::as_str).ne(FEATURE_NAMES) {
            return Err(Error::InvalidArgument(format!(
                "expected feature columns {FEATURE_NAMES:?}, found {:?}",
                self.columns
            )));
        }
        Ok(())
    }

    /// CSV `id,x_cm,y_cm,<columns...>` with round-trip float formatting.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["id".to_string(), "x_cm".into(), "y_cm".into()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.nrows() {
            let mut rec = vec![
                self.ids[i].clone(),
                format!("{:?}", self.positions[i].x_cm),
                format!("{:?}", self.positions[i].y_cm),
            ];
            rec.extend(self.data.row(i).iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::io("flushing feature table", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("UTF-8 input yields UTF-8 CSV"))
    }

    /// Parses the output of [`FeatureMatrix::to_csv`].
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 3 || &header[0] != "id" || &header[1] != "x_cm" || &header[2] != "y_cm" {
            return Err(Error::Manifest {
                line: 1,
                reason: "feature table header must start with `id,x_cm,y_cm`".into(),
            });
        }
        let columns: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
        let mut ids = Vec::new();
        let mut positions = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| Error::Manifest {
                    line,
                    reason: format!("not a number: `{s}`"),
                })
            };
            ids.push(rec[0].to_string());
            positions.push(Position::new(num(&rec[1])?, num(&rec[2])?));
            for field in rec.iter().skip(3) {
                values.push(T::lit(num(field)?));
            }
        }
        let data = Matrix::from_vec(ids.len(), columns.len(), values)?;
        Self::new(ids, positions, columns, data)
    }
}

/// Spectra of every recording, in dataset order.
pub fn compute_spectra<T: Scalar>(dataset: &Dataset<T>, options: &SpectrumOptions) -> Result<Vec<Spectrum<T>>> {
    dataset
        .recordings()
        .par_iter()
        .map(|r| one_sided_spectrum(r, options).map_err(|e| e.in_recording(&r.id)))
        .collect()
}

/// Stacks one feature row per recording, preserving dataset order.
pub fn build_feature_matrix<T: Scalar>(
    dataset: &Dataset<T>,
    spectra: &[Spectrum<T>],
    normalization: MomentNormalization,
) -> Result<FeatureMatrix<T>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if spectra.len() != dataset.len() {
        return Err(Error::DimensionMismatch {
            expected: dataset.len(),
            found: spectra.len(),
        });
    }
    let rows = dataset
        .recordings()
        .par_iter()
        .zip(spectra.par_iter())
        .map(|(r, s)| extract(r, s, normalization).map(|f| f.to_array()))
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::new(
        dataset.ids(),
        dataset.positions(),
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        Matrix::from_rows(&rows)?,
    )
}

/// Per-row `[E, P^3, M1^2, M2^2, M3, M4]`, applied to raw features.
pub fn enhance<T: Scalar>(matrix: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>> {
    matrix.require_feature_columns()?;
    let mut data = matrix.data.clone();
    for i in 0..data.nrows() {
        let row = data.row_mut(i);
        row[1] = row[1].powi(3);
        row[2] = row[2].powi(2);
        row[3] = row[3].powi(2);
    }
    matrix.with_data(matrix.columns.clone(), data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Standardized<T> {
    pub matrix: FeatureMatrix<T>,
    pub means: Vec<T>,
    /// Population standard deviations; 0 marks a constant column.
    pub stds: Vec<T>,
}

/// Column-wise z-score with population standard deviation. Constant columns
/// become zeros.
pub fn standardize<T: Scalar>(matrix: &FeatureMatrix<T>) -> Result<Standardized<T>> {
    let n = matrix.nrows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "standardization needs at least 2 rows, got {n}"
        )));
    }
    let nf = T::from_usize_lossy(n);
    let mut data = matrix.data.clone();
    let mut means = Vec::with_capacity(matrix.ncols());
    let mut stds = Vec::with_capacity(matrix.ncols());
    for j in 0..matrix.ncols() {
        let col = matrix.data.column(j);
        let mean = col.iter().copied().sum::<T>() / nf;
        let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nf;
        let peak = col.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let mut std = var.sqrt();
        // Spread at rounding level of the values is treated as constant.
        if !(std > T::epsilon() * peak) {
            std = T::zero();
        }
        for i in 0..n {
            data[(i, j)] = if std > T::zero() {
                (col[i] - mean) / std
            } else {
                T::zero()
            };
        }
        means.push(mean);
        stds.push(std);
    }
    Ok(Standardized {
        matrix: matrix.with_data(matrix.columns.clone(), data)?,
        means,
        stds,
    })
}
