//! Impact-sounding analytics for concrete inspection.
//!
//! Position-tagged tap recordings are turned into spectral features, grouped
//! by unsupervised clustering (k-means, spectral clustering, PCA filtering)
//! and rasterized into 2-D defect maps of the slab.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! below fix the scalar for the common cases.
//!
//! ```
//! use impact_sounding::{synth, features, spectral::SpectrumOptions};
//!
//! let mut spec = synth::SlabSpec::survey_geometry();
//! spec.length_cm = 10.0;
//! spec.defects.clear();
//! let slab = synth::generate::<f64>(&spec).unwrap();
//! let spectra = features::compute_spectra(&slab.dataset, &SpectrumOptions::default()).unwrap();
//! let table = features::build_feature_matrix(&slab.dataset, &spectra, Default::default()).unwrap();
//! assert_eq!(table.ncols(), 6);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod error;
pub mod features;
pub mod linalg;
pub mod mapping;
pub mod pca;
pub mod pipeline;
pub mod scalar;
pub mod signal_io;
pub mod spectral;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
pub use linalg::Matrix;
pub use scalar::Scalar;

pub type Recording = signal_io::Recording<f64>;
pub type Dataset = signal_io::Dataset<f64>;
pub type Spectrum = spectral::Spectrum<f64>;
pub type FeatureVector = features::FeatureVector<f64>;
pub type FeatureMatrix = features::FeatureMatrix<f64>;
pub type PcaModel = pca::PcaModel<f64>;
pub type ClusterModel = clustering::ClusterModel<f64>;
pub type GridMap = mapping::GridMap<f64>;
pub type SyntheticSlab = synth::SyntheticSlab<f64>;

pub type Recording32 = signal_io::Recording<f32>;
pub type Dataset32 = signal_io::Dataset<f32>;
pub type Spectrum32 = spectral::Spectrum<f32>;
pub type FeatureVector32 = features::FeatureVector<f32>;
pub type FeatureMatrix32 = features::FeatureMatrix<f32>;
pub type PcaModel32 = pca::PcaModel<f32>;
pub type ClusterModel32 = clustering::ClusterModel<f32>;
pub type GridMap32 = mapping::GridMap<f32>;
pub type SyntheticSlab32 = synth::SyntheticSlab<f32>;
