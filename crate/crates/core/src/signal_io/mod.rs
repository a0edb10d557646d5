//! Recordings, position-tagged datasets and their on-disk formats.

mod manifest;
mod wav;

pub use manifest::{load_manifest, load_manifest_file, write_manifest, ManifestOptions, ManifestRow};
pub use wav::{parse_wav, to_pcm16, write_wav, PcmAudio};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Fraction of the grid spacing a position may deviate from its lattice node.
pub const LATTICE_TOLERANCE: f64 = 0.25;

/// Spacing used when a dataset has too few points to infer one.
pub const DEFAULT_SPACING_CM: f64 = 2.0;

/// Slab-frame coordinates in centimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x_cm: f64,
    pub y_cm: f64,
}

impl Position {
    pub fn new(x_cm: f64, y_cm: f64) -> Self {
        Position { x_cm, y_cm }
    }
}

/// One impact: time-domain samples plus where it was taken.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording<T> {
    pub id: String,
    pub samples: Vec<T>,
    pub sample_rate_hz: f64,
    pub position: Position,
}

impl<T: Scalar> Recording<T> {
    pub fn new(id: impl Into<String>, samples: Vec<T>, sample_rate_hz: f64, position: Position) -> Result<Self> {
        let id = id.into();
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "recording `{id}`: sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if samples.iter().any(|s| !s.is_finite() || s.abs() > T::one()) {
            return Err(Error::InvalidArgument(format!(
                "recording `{id}`: samples must lie in [-1, 1]"
            )));
        }
        Ok(Recording {
            id,
            samples,
            sample_rate_hz,
            position,
        })
    }

    /// Decodes a WAV file into a recording at `position`.
    pub fn from_wav(id: impl Into<String>, bytes: &[u8], position: Position) -> Result<Self> {
        let audio = parse_wav::<T>(bytes)?;
        Self::new(id, audio.samples, audio.sample_rate_hz, position)
    }
}

/// Ordered recordings on a regular lattice `origin + spacing * (i, j)`.
///
/// Immutable once built; every constructor validates the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    recordings: Vec<Recording<T>>,
    spacing_cm: f64,
    origin: Position,
}

impl<T: Scalar> Dataset<T> {
    /// Validates and wraps `recordings`.
    ///
    /// With `spacing_cm = None` the spacing is inferred as the smallest
    /// positive coordinate difference along either axis, falling back to
    /// `default_spacing_cm` when no such difference exists.
    pub fn new(recordings: Vec<Recording<T>>, spacing_cm: Option<f64>, default_spacing_cm: f64) -> Result<Self> {
        if recordings.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut seen = HashSet::with_capacity(recordings.len());
        for r in &recordings {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        let rate = recordings[0].sample_rate_hz;
        if let Some(r) = recordings.iter().find(|r| r.sample_rate_hz != rate) {
            return Err(Error::MixedSampleRates {
                id: r.id.clone(),
                expected: rate,
                found: r.sample_rate_hz,
            });
        }
        if let Some(r) = recordings
            .iter()
            .find(|r| !(r.position.x_cm.is_finite() && r.position.y_cm.is_finite()))
        {
            return Err(Error::InvalidArgument(format!(
                "recording `{}` has a non-finite position",
                r.id
            )));
        }

        let spacing = match spacing_cm {
            Some(s) => s,
            None => infer_spacing(recordings.iter().map(|r| r.position)).unwrap_or(default_spacing_cm),
        };
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid spacing must be positive, got {spacing}"
            )));
        }

        let origin = Position::new(
            recordings.iter().map(|r| r.position.x_cm).fold(f64::INFINITY, f64::min),
            recordings.iter().map(|r| r.position.y_cm).fold(f64::INFINITY, f64::min),
        );
        let ds = Dataset {
            recordings,
            spacing_cm: spacing,
            origin,
        };
        for r in &ds.recordings {
            if ds.lattice_index(r.position).is_none() {
                return Err(Error::OffLattice {
                    id: r.id.clone(),
                    x_cm: r.position.x_cm,
                    y_cm: r.position.y_cm,
                    spacing_cm: spacing,
                });
            }
        }
        Ok(ds)
    }

    pub fn recordings(&self) -> &[Recording<T>] {
        &self.recordings
    }

    pub fn len(&self) -> usize {
        self.recordings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recordings.is_empty()
    }

    pub fn spacing_cm(&self) -> f64 {
        self.spacing_cm
    }

    pub fn origin(&self) -> Position {
        self.origin
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.recordings[0].sample_rate_hz
    }

    pub fn ids(&self) -> Vec<String> {
        self.recordings.iter().map(|r| r.id.clone()).collect()
    }

    pub fn positions(&self) -> Vec<Position> {
        self.recordings.iter().map(|r| r.position).collect()
    }

    /// Lattice node `(i, j)` of a position, or `None` when it is further than
    /// the tolerance from every node.
    pub fn lattice_index(&self, p: Position) -> Option<(usize, usize)> {
        lattice_index(p, self.origin, self.spacing_cm)
    }

    /// Grid dimensions `(nx, ny)` spanning all recordings.
    pub fn grid_dims(&self) -> (usize, usize) {
        let extent = |f: fn(&Position) -> f64| {
            let (lo, hi) = self
                .recordings
                .iter()
                .map(|r| f(&r.position))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            hi - lo
        };
        let nx = (extent(|p| p.x_cm) / self.spacing_cm).round() as usize + 1;
        let ny = (extent(|p| p.y_cm) / self.spacing_cm).round() as usize + 1;
        (nx, ny)
    }
}

/// Free-function form of [`Dataset::grid_dims`].
pub fn grid_dims<T: Scalar>(dataset: &Dataset<T>) -> (usize, usize) {
    dataset.grid_dims()
}

pub(crate) fn lattice_index(p: Position, origin: Position, spacing: f64) -> Option<(usize, usize)> {
    let fx = (p.x_cm - origin.x_cm) / spacing;
    let fy = (p.y_cm - origin.y_cm) / spacing;
    let (ix, iy) = (fx.round(), fy.round());
    let tol = LATTICE_TOLERANCE;
    if ix < 0.0 || iy < 0.0 || (fx - ix).abs() > tol || (fy - iy).abs() > tol {
        return None;
    }
    Some((ix as usize, iy as usize))
}

/// Smallest positive gap between distinct sorted coordinates on either axis.
fn infer_spacing(positions: impl Iterator<Item = Position> + Clone) -> Option<f64> {
    fn min_gap(mut v: Vec<f64>) -> Option<f64> {
        v.sort_by(f64::total_cmp);
        v.windows(2)
            .map(|w| w[1] - w[0])
            .filter(|&d| d > 1e-9)
            .min_by(f64::total_cmp)
    }
    let gx = min_gap(positions.clone().map(|p| p.x_cm).collect());
    let gy = min_gap(positions.map(|p| p.y_cm).collect());
    match (gx, gy) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, x: f64, y: f64) -> Recording<f64> {
        Recording::new(id, vec![0.1, -0.1], 44100.0, Position::new(x, y)).unwrap()
    }

    fn lattice(nx: usize, ny: usize, spacing: f64) -> Vec<Recording<f64>> {
        let mut v = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                v.push(rec(&format!("p{i}_{j}"), i as f64 * spacing, j as f64 * spacing));
            }
        }
        v
    }

    #[test]
    fn recording_invariants() {
        assert!(matches!(
            Recording::<f64>::new("a", vec![], 1.0, Position::new(0.0, 0.0)),
            Err(Error::EmptySamples)
        ));
        assert!(Recording::<f64>::new("a", vec![1.5], 1.0, Position::new(0.0, 0.0)).is_err());
        assert!(Recording::<f64>::new("a", vec![0.5], 0.0, Position::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn survey_geometry_dims() {
        let ds = Dataset::new(lattice(82, 11, 2.0), None, DEFAULT_SPACING_CM).unwrap();
        assert_eq!(ds.len(), 902);
        assert_eq!(ds.spacing_cm(), 2.0);
        assert_eq!(grid_dims(&ds), (82, 11));
    }

    #[test]
    fn single_point_uses_default_spacing() {
        let ds = Dataset::new(vec![rec("only", 0.0, 0.0)], None, 3.5).unwrap();
        assert_eq!(ds.spacing_cm(), 3.5);
        assert_eq!(ds.grid_dims(), (1, 1));
    }

    #[test]
    fn missing_cell_keeps_full_dims() {
        let mut pts = lattice(3, 3, 2.0);
        pts.remove(4);
        let ds = Dataset::new(pts, None, DEFAULT_SPACING_CM).unwrap();
        assert_eq!(ds.len(), 8);
        assert_eq!(ds.grid_dims(), (3, 3));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let pts = vec![rec("a", 0.0, 0.0), rec("a", 2.0, 0.0)];
        assert!(matches!(Dataset::new(pts, None, 2.0), Err(Error::DuplicateId(id)) if id == "a"));
    }

    #[test]
    fn mixed_rates_rejected() {
        let mut b = rec("b", 2.0, 0.0);
        b.sample_rate_hz = 48000.0;
        assert!(matches!(
            Dataset::new(vec![rec("a", 0.0, 0.0), b], None, 2.0),
            Err(Error::MixedSampleRates { .. })
        ));
    }

    #[test]
    fn lattice_tolerance() {
        // 0.4 cm jitter is within 0.25 * 2 cm.
        let ok = vec![rec("a", 0.0, 0.0), rec("b", 2.4, 0.0), rec("c", 4.0, 0.0)];
        assert!(Dataset::new(ok, Some(2.0), 2.0).is_ok());
        let bad = vec![rec("a", 0.0, 0.0), rec("b", 3.0, 0.0), rec("c", 4.0, 0.0)];
        assert!(matches!(
            Dataset::new(bad, Some(2.0), 2.0),
            Err(Error::OffLattice { id, .. }) if id == "b"
        ));
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(matches!(
            Dataset::<f64>::new(vec![], None, 2.0),
            Err(Error::EmptyDataset)
        ));
    }
}
